/*******************************************************************************
* Copyright 2026 The SDR Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*******************************************************************************/
#pragma once

#include <string>
#include <vector>

#include "sdr/clustering.hpp"
#include "sdr/tensor.hpp"

namespace sdr {

/// In-memory dataset with stable row order. Sample ids are the row indices.
struct Dataset {
    Tensor2D samples;
    std::vector<int> labels; // empty when the source had no label column

    bool has_labels() const { return !labels.empty(); }
    std::size_t count() const { return samples.rows(); }
};

/// csv: one header row (`x0,...,x{d-1}` plus optional trailing `label`),
/// then one sample per line. Malformed rows, width mismatches and
/// non-finite values raise ParseError naming the line.
Dataset ingest_csv(const std::string& path);
/// Values rendered with round-trip precision (up to 17 significant digits).
void export_csv(const std::string& path, const Dataset& data);

/// raw binary: u64 n, u64 d (little-endian), then n*d little-endian f64.
Dataset ingest_raw(const std::string& path);
void export_raw(const std::string& path, const Tensor2D& samples);

/// One `sample_id<TAB>cluster_index` line per sample, id order.
void save_split(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split(const std::string& path);

} // namespace sdr
