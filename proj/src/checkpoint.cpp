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
#include "sdr/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>

#include "sdr/common.hpp"

namespace sdr {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'R', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw IoError("checkpoint: truncated stream");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);

    std::string meta;
    for (const auto& [k, v] : metadata) meta += k + "=" + v + "\n";
    put_u64(out, meta.size());
    out.insert(out.end(), meta.begin(), meta.end());

    put_u64(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        put_u64(out, name.size());
        out.insert(out.end(), name.begin(), name.end());
        put_u64(out, t.rows());
        put_u64(out, t.cols());
        for (double v : t.data()) put_f64(out, v);
    }
    put_u64(out, fnv1a64(out));
    return out;
}

Checkpoint Checkpoint::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 + 4 + 8) throw IoError("checkpoint: file too small");
    // the trailing checksum covers everything before it
    const std::uint64_t stored = [&] {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
        return v;
    }();
    if (fnv1a64(bytes.subspan(0, bytes.size() - 8)) != stored)
        throw IoError("checkpoint: checksum mismatch, refusing to load");

    Reader r(bytes.subspan(0, bytes.size() - 8));
    if (r.str(4) != std::string(kMagic, 4)) throw IoError("checkpoint: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw IoError("checkpoint: unsupported format version " + std::to_string(version));

    Checkpoint ck;
    const std::uint64_t meta_len = r.u64();
    const std::string meta = r.str(meta_len);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= meta.size(); ++i) {
        if (i == meta.size() || meta[i] == '\n') {
            if (i > start) {
                const std::string line = meta.substr(start, i - start);
                const auto eq = line.find('=');
                if (eq == std::string::npos)
                    throw IoError("checkpoint: malformed metadata line '" + line + "'");
                ck.metadata[line.substr(0, eq)] = line.substr(eq + 1);
            }
            start = i + 1;
        }
    }

    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t name_len = r.u64();
        std::string name = r.str(name_len);
        const std::uint64_t rows = r.u64();
        const std::uint64_t cols = r.u64();
        Tensor2D t(rows, cols);
        for (std::size_t j = 0; j < t.size(); ++j) t.data()[j] = r.f64();
        ck.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

void Checkpoint::save(const std::string& path) const {
    const auto bytes = serialize();
    write_file_atomic(path,
                      std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                       bytes.size()));
}

Checkpoint Checkpoint::load(const std::string& path) {
    const std::string content = read_file(path);
    return deserialize(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(content.data()), content.size()));
}

const Tensor2D& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw IoError("checkpoint: missing tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return true;
    return false;
}

const std::string& Checkpoint::meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) throw IoError("checkpoint: missing metadata key '" + key + "'");
    return it->second;
}

void write_file_atomic(const std::string& path, std::string_view content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

} // namespace sdr
