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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdr/tensor.hpp"

namespace sdr {

/// Container file for parameters, features and statistics.
///
/// Layout (all integers little-endian):
///   magic "SDR1" | u32 version | u64 metadata byte count | metadata text
///   | u64 tensor count | per tensor: u64 name length, name bytes,
///   u64 rows, u64 cols, rows*cols f64 payload | u64 FNV-1a checksum of
///   every preceding byte.
///
/// Metadata is UTF-8 `key=value` lines rendered in sorted key order; tensor
/// order is preserved verbatim, so save(load(f)) reproduces f byte for byte.
/// A checksum or magic mismatch refuses to load.
struct Checkpoint {
    std::map<std::string, std::string> metadata;
    std::vector<std::pair<std::string, Tensor2D>> tensors;

    static constexpr std::uint32_t kVersion = 1;

    std::vector<std::uint8_t> serialize() const;
    static Checkpoint deserialize(std::span<const std::uint8_t> bytes);

    /// Atomic write: temp file in the same directory, then rename.
    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    const Tensor2D& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
    const std::string& meta(const std::string& key) const;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

/// Atomic text-file write used by every artifact producer.
void write_file_atomic(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

} // namespace sdr
