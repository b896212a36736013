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
#include "sdr/dataset.hpp"

#include <bit>

#include "sdr/checkpoint.hpp"
#include "sdr/text.hpp"

namespace sdr {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    const std::string content = read_file(path);
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= content.size(); ++i) {
        if (i == content.size() || content[i] == '\n') {
            if (i > start || i < content.size()) lines.emplace_back(content.substr(start, i - start));
            start = i + 1;
        }
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

[[noreturn]] void bad_line(const std::string& path, std::size_t line_no, const std::string& why) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + why);
}

} // namespace

Dataset ingest_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw ParseError(path + ": empty file, expected a header row");

    const auto header = split(trim(lines[0]), ',');
    if (header.empty()) bad_line(path, 1, "empty header");
    const bool labeled = std::string(trim(header.back())) == "label";
    const std::size_t d = labeled ? header.size() - 1 : header.size();
    if (d == 0) bad_line(path, 1, "header declares no feature columns");

    const std::size_t n = lines.size() - 1;
    Dataset data;
    data.samples = Tensor2D(n, d);
    if (labeled) data.labels.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t line_no = i + 2;
        const auto fields = split(trim(lines[i + 1]), ',');
        if (fields.size() != header.size())
            bad_line(path, line_no,
                     "expected " + std::to_string(header.size()) + " fields, found " +
                         std::to_string(fields.size()));
        for (std::size_t j = 0; j < d; ++j) {
            const auto v = parse_double(trim(fields[j]));
            if (!v)
                bad_line(path, line_no,
                         "field " + std::to_string(j) + " is not a finite number: '" +
                             fields[j] + "'");
            data.samples(i, j) = *v;
        }
        if (labeled) {
            const auto l = parse_u64(trim(fields.back()));
            if (!l) bad_line(path, line_no, "label is not a nonnegative integer");
            data.labels[i] = static_cast<int>(*l);
        }
    }
    return data;
}

void export_csv(const std::string& path, const Dataset& data) {
    std::string out;
    const std::size_t d = data.samples.cols();
    for (std::size_t j = 0; j < d; ++j) {
        if (j) out += ",";
        out += "x" + format_u64(j);
    }
    if (data.has_labels()) out += ",label";
    out += "\n";
    for (std::size_t i = 0; i < data.samples.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            if (j) out += ",";
            out += format_roundtrip(data.samples(i, j));
        }
        if (data.has_labels()) out += "," + format_u64(static_cast<unsigned>(data.labels[i]));
        out += "\n";
    }
    write_file_atomic(path, out);
}

Dataset ingest_raw(const std::string& path) {
    const std::string content = read_file(path);
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(content.data());
    if (content.size() < 16) throw ParseError(path + ": raw file shorter than its header");
    auto u64_at = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[off + i]) << (8 * i);
        return v;
    };
    const std::uint64_t n = u64_at(0), d = u64_at(8);
    if (content.size() != 16 + n * d * 8)
        throw ParseError(path + ": raw payload size does not match header counts");
    Dataset data;
    data.samples = Tensor2D(n, d);
    for (std::size_t i = 0; i < n * d; ++i) {
        const double v = std::bit_cast<double>(u64_at(16 + i * 8));
        if (!std::isfinite(v))
            throw ParseError(path + ": non-finite value at element " + std::to_string(i));
        data.samples.data()[i] = v;
    }
    return data;
}

void export_raw(const std::string& path, const Tensor2D& samples) {
    std::string out;
    auto put_u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
    };
    put_u64(samples.rows());
    put_u64(samples.cols());
    for (double v : samples.data()) put_u64(std::bit_cast<std::uint64_t>(v));
    write_file_atomic(path, out);
}

void save_split(const std::string& path, const DatasetSplit& split) {
    std::vector<std::size_t> labels(split.total, 0);
    for (std::size_t j = 0; j < split.subsets.size(); ++j)
        for (std::size_t idx : split.subsets[j]) labels.at(idx) = j;
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        out += format_u64(i) + "\t" + format_u64(labels[i]) + "\n";
    write_file_atomic(path, out);
}

DatasetSplit load_split(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<std::size_t> labels(lines.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto fields = split(trim(lines[i]), '\t');
        if (fields.size() != 2)
            throw ParseError(path + ":" + std::to_string(i + 1) +
                             ": expected 'id<TAB>cluster'");
        const auto id = parse_u64(fields[0]);
        const auto cluster = parse_u64(fields[1]);
        if (!id || !cluster)
            throw ParseError(path + ":" + std::to_string(i + 1) + ": non-numeric field");
        if (*id != i)
            throw ParseError(path + ":" + std::to_string(i + 1) +
                             ": ids must be the contiguous row order");
        labels[i] = *cluster;
        k = std::max<std::size_t>(k, *cluster + 1);
    }
    if (labels.empty()) throw ParseError(path + ": empty split file");
    return split_dataset(labels, k);
}

} // namespace sdr
