// Copyright 2026 The uavloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// GLFT tensor file: a minimal little-endian float32 container shared with
// the Python feature exporter. Layout (docs/tensor_format.md):
//
//   offset  size      field
//   0       4         magic "GLFT"
//   4       2         format version (u16, = 1)
//   6       1         dtype code (u8, 0 = float32 LE)
//   7       1         rank (u8, <= 6)
//   8       4*rank    dims (u32 each)
//   ...     4         metadata length in bytes (u32)
//   ...     n         UTF-8 JSON metadata (empty when length is 0)
//   ...     4*prod    payload, row-major

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavloc/core/error.hpp"

namespace uavloc::store {

inline constexpr std::array<char, 4> kTensorMagic{'G', 'L', 'F', 'T'};
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 0;
inline constexpr std::size_t kMaxRank = 6;

struct TensorRecord {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
    nlohmann::json metadata;  // null when absent

    [[nodiscard]] std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xff));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::size_t header_size(std::size_t rank, std::size_t metadata_bytes) {
    return 4 + 2 + 1 + 1 + 4 * rank + 4 + metadata_bytes;
}

inline std::vector<std::uint8_t> encode_tensor(std::span<const float> data, std::span<const std::uint32_t> dims,
                                               const nlohmann::json& metadata = nullptr) {
    if (dims.size() > kMaxRank) throw DimensionError("encode_tensor: rank exceeds 6");
    std::size_t count = 1;
    for (auto d : dims) count *= d;
    if (count != data.size()) {
        throw DimensionError("encode_tensor: dims describe " + std::to_string(count) + " elements, got " +
                             std::to_string(data.size()));
    }
    const std::string meta = metadata.is_null() ? std::string() : metadata.dump();
    std::vector<std::uint8_t> out;
    out.reserve(header_size(dims.size(), meta.size()) + 4 * data.size());
    out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
    detail::put_u16(out, kTensorVersion);
    out.push_back(kDtypeFloat32);
    out.push_back(static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims) detail::put_u32(out, d);
    detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
    for (float v : data) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        detail::put_u32(out, bits);
    }
    return out;
}

inline TensorRecord decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>") {
    auto need = [&](std::size_t offset, std::size_t n, const char* what) {
        if (bytes.size() < offset + n) {
            throw FormatError(origin + ": truncated " + what + " (need bytes [" + std::to_string(offset) + ", " +
                              std::to_string(offset + n) + "), file has " + std::to_string(bytes.size()) + ")");
        }
    };
    need(0, 8, "header");
    if (std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0) throw FormatError(origin + ": bad magic (not a GLFT file)");
    const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (version != kTensorVersion) {
        throw UnsupportedVersionError(origin + ": unsupported GLFT version " + std::to_string(version));
    }
    if (bytes[6] != kDtypeFloat32) throw FormatError(origin + ": unsupported dtype code " + std::to_string(bytes[6]));
    const std::size_t rank = bytes[7];
    if (rank > kMaxRank) throw FormatError(origin + ": rank " + std::to_string(rank) + " exceeds 6");
    std::size_t offset = 8;
    need(offset, 4 * rank + 4, "dims");
    TensorRecord rec;
    for (std::size_t r = 0; r < rank; ++r, offset += 4) rec.dims.push_back(detail::get_u32(bytes.data() + offset));
    const std::uint32_t meta_len = detail::get_u32(bytes.data() + offset);
    offset += 4;
    need(offset, meta_len, "metadata");
    if (meta_len > 0) {
        const std::string meta(reinterpret_cast<const char*>(bytes.data() + offset), meta_len);
        try {
            rec.metadata = nlohmann::json::parse(meta);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(origin + ": metadata is not valid JSON: " + e.what());
        }
    }
    offset += meta_len;
    const std::size_t count = rec.element_count();
    need(offset, 4 * count, "payload");
    if (bytes.size() != offset + 4 * count) {
        throw FormatError(origin + ": " + std::to_string(bytes.size() - offset - 4 * count) +
                          " trailing bytes after payload ending at offset " + std::to_string(offset + 4 * count));
    }
    rec.data.resize(count);
    for (std::size_t n = 0; n < count; ++n, offset += 4) {
        const std::uint32_t bits = detail::get_u32(bytes.data() + offset);
        std::memcpy(&rec.data[n], &bits, sizeof bits);
    }
    return rec;
}

inline void write_tensor(const std::string& path, std::span<const float> data, std::span<const std::uint32_t> dims,
                         const nlohmann::json& metadata = nullptr) {
    const auto bytes = encode_tensor(data, dims, metadata);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

inline void write_tensor(const std::string& path, const TensorRecord& rec) {
    write_tensor(path, rec.data, rec.dims, rec.metadata);
}

inline TensorRecord read_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes, path);
}

}  // namespace uavloc::store
