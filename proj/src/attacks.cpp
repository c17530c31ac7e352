// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "dlv/errors.hpp"
#include "dlv/evalkit.hpp"

namespace dlv {

namespace {

void finish(const Network& net, const Tensor& x, AttackResult& r) {
    r.new_class = classify(net, r.perturbed);
    r.success = r.new_class != r.original_class;
    r.l1 = l_distance(r.perturbed, x, 1);
    r.l2 = l_distance(r.perturbed, x, 2);
    r.pixels_changed = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (r.perturbed[i] != x[i]) {
            ++r.pixels_changed;
        }
    }
}

std::size_t runner_up(const Tensor& logits, std::size_t top) {
    std::size_t best = top == 0 ? 1 : 0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        if (c != top && logits[c] > logits[best]) {
            best = c;
        }
    }
    return best;
}

} // namespace

AttackResult fgsm(const Network& net, const Tensor& x, double epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw Error("fgsm: epsilon must be a non-negative number");
    }
    AttackResult r;
    r.epsilon = epsilon;
    r.original_class = classify(net, x);
    auto grad = gradient_input(net, x, r.original_class);
    const auto& b = net.input_bounds();
    r.perturbed = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double sign = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
        r.perturbed[i] = std::clamp(x[i] + epsilon * sign, b.lo, b.hi);
    }
    r.steps = 1;
    finish(net, x, r);
    return r;
}

std::vector<bool> jsma_domain(const Tensor& image, double hi, const std::vector<bool>& modified, std::size_t budget) {
    auto used = static_cast<std::size_t>(std::count(modified.begin(), modified.end(), true));
    std::vector<bool> domain(image.size(), false);
    for (std::size_t i = 0; i < image.size(); ++i) {
        domain[i] = image[i] < hi && (modified[i] || used < budget);
    }
    return domain;
}

AttackResult jsma(const Network& net, const Tensor& x, double theta, double fraction, std::optional<std::size_t> target,
                  std::vector<JsmaStep>* trace) {
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw Error("jsma: theta must lie in (0, 1]");
    }
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw Error("jsma: pixel fraction must lie in [0, 1]");
    }
    AttackResult r;
    r.theta = theta;
    r.epsilon = fraction;
    auto acts = forward(net, x);
    const auto& logits = acts[net.logits_layer()];
    r.original_class = argmax(logits.values());
    std::size_t t = target ? *target : runner_up(logits, r.original_class);
    if (t >= net.class_count() || t == r.original_class) {
        throw Error("jsma: invalid target class " + std::to_string(t));
    }
    r.target = t;

    const auto& b = net.input_bounds();
    const std::size_t n = x.size();
    const auto budget = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
    const double step = theta * (b.hi - b.lo);
    const std::size_t max_steps = budget * (static_cast<std::size_t>(std::ceil(1.0 / theta)) + 1);

    Tensor cur = x;
    std::vector<bool> modified(n, false);
    std::size_t used = 0;
    while (r.steps < max_steps && classify(net, cur) == r.original_class) {
        auto domain = jsma_domain(cur, b.hi, modified, budget);
        auto jac = jacobian_output_input(net, cur);
        bool found = false;
        std::size_t bp = 0, bq = 0;
        double best = 0.0, ba = 0.0, bb = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            if (!domain[p]) {
                continue;
            }
            for (std::size_t q = p + 1; q < n; ++q) {
                if (!domain[q]) {
                    continue;
                }
                std::size_t fresh = (modified[p] ? 0 : 1) + (modified[q] ? 0 : 1);
                if (used + fresh > budget) {
                    continue;
                }
                double alpha = jac(t, p) + jac(t, q);
                double beta = 0.0;
                for (std::size_t c = 0; c < jac.rows; ++c) {
                    if (c != t) {
                        beta += jac(c, p) + jac(c, q);
                    }
                }
                if (alpha > 0.0 && beta < 0.0 && (!found || alpha * -beta > best)) {
                    found = true;
                    best = alpha * -beta;
                    bp = p;
                    bq = q;
                    ba = alpha;
                    bb = beta;
                }
            }
        }
        if (!found) {
            break;
        }
        if (trace) {
            trace->push_back({cur, bp, bq, ba, bb});
        }
        for (auto i : {bp, bq}) {
            cur[i] = std::min(b.hi, cur[i] + step);
            if (!modified[i]) {
                modified[i] = true;
                ++used;
            }
        }
        ++r.steps;
    }
    r.perturbed = std::move(cur);
    finish(net, x, r);
    return r;
}

} // namespace dlv
