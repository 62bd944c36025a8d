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

#include <filesystem>
#include <string>
#include <vector>

#include "uavloc/core/error.hpp"
#include "uavloc/store/tensor_file.hpp"
#include "uavloc/tensor/conv4d.hpp"

namespace uavloc::sascm {

/// File holding kernel bank `layer` inside a model directory.
inline std::filesystem::path bank_path(const std::filesystem::path& dir, int layer) {
    return dir / ("consensus_layer" + std::to_string(layer) + ".glft");
}

/// One tensor record per bank: weights as (out, in, 3, 3, 3, 3), biases
/// and the layer name in the metadata.
inline void save_model(const Conv4DModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (int n = 0; n < 3; ++n) {
        const auto& bank = model.layers[n];
        const std::vector<float> w(bank.weights.begin(), bank.weights.end());
        const std::uint32_t dims[6] = {static_cast<std::uint32_t>(bank.out_channels),
                                       static_cast<std::uint32_t>(bank.in_channels), 3, 3, 3, 3};
        store::write_tensor(bank_path(dir, n).string(), w, dims,
                            {{"layer", "consensus." + std::to_string(n)}, {"bias", bank.biases}});
    }
}

inline Conv4DModel load_model(const std::filesystem::path& dir) {
    Conv4DModel model;
    for (int n = 0; n < 3; ++n) {
        const auto path = bank_path(dir, n).string();
        const auto rec = store::read_tensor(path);
        auto& bank = model.layers[n];
        const std::vector<std::uint32_t> want{static_cast<std::uint32_t>(bank.out_channels),
                                              static_cast<std::uint32_t>(bank.in_channels), 3, 3, 3, 3};
        if (rec.dims != want) throw FormatError(path + ": kernel bank has the wrong shape");
        bank.weights.assign(rec.data.begin(), rec.data.end());
        try {
            const auto bias = rec.metadata.at("bias").get<std::vector<double>>();
            if (bias.size() != bank.biases.size()) throw FormatError(path + ": wrong bias count");
            bank.biases = bias;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ": " + e.what());
        }
    }
    return model;
}

}  // namespace uavloc::sascm
