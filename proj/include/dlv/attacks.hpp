// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dlv/network.hpp"

namespace dlv {

struct AttackResult {
    Tensor perturbed;
    bool success = false;
    std::size_t original_class = 0;
    std::size_t new_class = 0;
    double l1 = 0.0;
    double l2 = 0.0;
    std::size_t steps = 0;
    std::size_t pixels_changed = 0;
    // parameter echo
    double epsilon = 0.0;
    double theta = 0.0;
    std::optional<std::size_t> target;
};

/// One step, x + epsilon * sign(grad J(x, classify(x))), clipped to the input bounds.
AttackResult fgsm(const Network& net, const Tensor& x, double epsilon);

struct JsmaStep {
    Tensor image_before;
    std::size_t p = 0;
    std::size_t q = 0;
    double alpha = 0.0;
    double beta = 0.0;
};

/// Pairwise saliency attack on the logits Jacobian. Each step raises the pair
/// maximising alpha * |beta| (alpha > 0, beta < 0) by theta; ties go to the
/// lexicographically smallest (p, q). At most ceil(fraction * n) distinct
/// pixels are touched. The target defaults to the runner-up class.
AttackResult jsma(const Network& net, const Tensor& x, double theta, double fraction,
                  std::optional<std::size_t> target = std::nullopt, std::vector<JsmaStep>* trace = nullptr);

/// Pixels the pair search may use: below the upper bound and, once the budget
/// is spent, already modified.
std::vector<bool> jsma_domain(const Tensor& image, double hi, const std::vector<bool>& modified, std::size_t budget);

} // namespace dlv
