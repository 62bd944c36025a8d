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

#include <string>
#include <vector>

#include "uavloc/core/error.hpp"
#include "uavloc/store/tensor_file.hpp"
#include "uavloc/tensor/feature_map.hpp"

namespace uavloc::store {

/// Dense feature maps are stored as rank-3 (h, w, c) records with the cell
/// stride and source image size in the metadata.
inline void write_feature_map(const std::string& path, const DenseFeatureMap& f, nlohmann::json extra = nullptr) {
    std::vector<float> data(f.data().begin(), f.data().end());
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(f.height()), static_cast<std::uint32_t>(f.width()),
                                   static_cast<std::uint32_t>(f.channels())};
    nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
    meta["kind"] = "dense_features";
    meta["stride"] = f.stride();
    meta["source_width"] = f.source_width();
    meta["source_height"] = f.source_height();
    write_tensor(path, data, dims, meta);
}

inline DenseFeatureMap feature_map_from_record(const TensorRecord& rec, const std::string& origin) {
    if (rec.dims.size() != 3) throw FormatError(origin + ": dense features must have rank 3 (h, w, c)");
    const int h = static_cast<int>(rec.dims[0]), w = static_cast<int>(rec.dims[1]), c = static_cast<int>(rec.dims[2]);
    const auto& m = rec.metadata;
    if (!m.is_object() || !m.contains("stride") || !m.contains("source_width") || !m.contains("source_height")) {
        throw FormatError(origin + ": dense features lack stride/source metadata");
    }
    try {
        return DenseFeatureMap(h, w, c, std::vector<double>(rec.data.begin(), rec.data.end()),
                               m.at("stride").get<double>(), m.at("source_width").get<int>(),
                               m.at("source_height").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(origin + ": " + e.what());
    } catch (const ContractViolation& e) {
        throw FormatError(origin + ": " + e.what());
    } catch (const DimensionError& e) {
        throw FormatError(origin + ": " + e.what());
    }
}

inline DenseFeatureMap read_feature_map(const std::string& path) { return feature_map_from_record(read_tensor(path), path); }

/// Global descriptor: rank-1 record, or rank-2 with a single row.
inline std::vector<double> read_descriptor(const std::string& path) {
    const auto rec = read_tensor(path);
    if (!(rec.dims.size() == 1 || (rec.dims.size() == 2 && rec.dims[0] == 1))) {
        throw FormatError(path + ": a global descriptor must be a vector");
    }
    return {rec.data.begin(), rec.data.end()};
}

}  // namespace uavloc::store
