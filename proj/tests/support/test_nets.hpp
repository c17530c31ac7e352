// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dlv/network.hpp"

namespace dlv::testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(DLV_FIXTURE_DIR) / name; }

/// Dense/relu stack with N(0, 1/fan_in) weights and small biases; no relu after the last layer.
inline Network random_relu_net(std::mt19937_64& rng, const std::vector<std::size_t>& widths,
                               InputBounds bounds = {0.0, 1.0}) {
    std::vector<LayerSpec> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        std::normal_distribution<double> w(0.0, 1.0 / std::sqrt(static_cast<double>(widths[i])));
        std::normal_distribution<double> b(0.0, 0.1);
        std::vector<double> weights(widths[i] * widths[i + 1]), bias(widths[i + 1]);
        for (auto& v : weights) {
            v = w(rng);
        }
        for (auto& v : bias) {
            v = b(rng);
        }
        layers.push_back(LayerSpec::dense(widths[i], widths[i + 1], std::move(weights), std::move(bias)));
        if (i + 2 < widths.size()) {
            layers.push_back(LayerSpec::relu());
        }
    }
    return Network({widths.front()}, widths.back(), std::move(layers), bounds);
}

inline Tensor random_input(std::mt19937_64& rng, const Network& net) {
    std::uniform_real_distribution<double> u(net.input_bounds().lo, net.input_bounds().hi);
    std::vector<double> v(net.width(0));
    for (auto& x : v) {
        x = u(rng);
    }
    return Tensor(net.input_shape(), std::move(v));
}

} // namespace dlv::testing
