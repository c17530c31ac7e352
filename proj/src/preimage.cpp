// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/preimage.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "dlv/errors.hpp"

namespace dlv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroTolerance = 1e-9;

double scaled(double tol, double v) { return tol * std::max(1.0, std::abs(v)); }

struct Window {
    std::vector<std::size_t> cells;
    std::size_t argmax = 0;
    double frozen = -kInf; // max over the non-argmax cells
};

Window pool_window(const Network& net, std::size_t k, std::size_t q, const Tensor& input) {
    const auto& in = net.shape(k - 1);
    std::size_t m = net.layer(k).window, h = in[1], w = in[2];
    std::size_t oh = h / m, ow = w / m;
    std::size_t ch = q / (oh * ow), r = (q / ow) % oh, col = q % ow;
    Window win;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            win.cells.push_back((ch * h + r * m + a) * w + col * m + b);
        }
    }
    win.argmax = win.cells.front();
    for (auto c : win.cells) {
        if (input[c] > input[win.argmax]) {
            win.argmax = c;
        }
    }
    for (auto c : win.cells) {
        if (c != win.argmax) {
            win.frozen = std::max(win.frozen, input[c]);
        }
    }
    return win;
}

PreimageResult affine_step(const PreimageChain& chain, std::size_t k, const PreimageTarget& target) {
    const auto& map = chain.affine(k);
    const auto& y0 = chain.base(k - 1);
    Bounds bounds = chain.bounds(k - 1);
    std::size_t cols = map.matrix.cols;

    std::vector<std::size_t> eq_rows, le_rows;
    for (std::size_t r = 0; r < target.kinds.size(); ++r) {
        if (target.kinds[r] == ConstraintKind::Equal) {
            eq_rows.push_back(r);
        } else if (target.kinds[r] == ConstraintKind::AtMost) {
            le_rows.push_back(r);
        }
    }
    std::vector<char> in_support(cols, 0);
    for (auto rows : {&eq_rows, &le_rows}) {
        for (auto r : *rows) {
            for (std::size_t c = 0; c < cols; ++c) {
                if (map.matrix(r, c) != 0.0) {
                    in_support[c] = 1;
                }
            }
        }
    }
    std::vector<std::size_t> support;
    for (std::size_t c = 0; c < cols; ++c) {
        if (in_support[c]) {
            support.push_back(c);
        }
    }

    auto row_value = [&](std::size_t r, const std::vector<double>& y) {
        double v = map.offset[r];
        for (auto c : support) {
            v += map.matrix(r, c) * y[c];
        }
        return v;
    };

    std::vector<double> y(y0.values().begin(), y0.values().end());
    std::vector<char> active_le(le_rows.size(), 0);
    for (std::size_t outer = 0; outer <= le_rows.size(); ++outer) {
        std::vector<std::size_t> rows = eq_rows;
        for (std::size_t i = 0; i < le_rows.size(); ++i) {
            if (active_le[i]) {
                rows.push_back(le_rows[i]);
            }
        }
        std::copy(y0.values().begin(), y0.values().end(), y.begin());
        std::vector<char> fixed(cols, 0);
        for (std::size_t inner = 0; inner <= support.size() && !rows.empty(); ++inner) {
            std::vector<std::size_t> free;
            for (auto c : support) {
                if (!fixed[c]) {
                    free.push_back(c);
                }
            }
            if (free.empty()) {
                break;
            }
            Eigen::MatrixXd m(rows.size(), free.size());
            Eigen::VectorXd rhs(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                std::size_t r = rows[i];
                double acc = target.values[r] - map.offset[r];
                for (auto c : support) {
                    acc -= map.matrix(r, c) * y[c];
                }
                rhs(static_cast<Eigen::Index>(i)) = acc;
                for (std::size_t j = 0; j < free.size(); ++j) {
                    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = map.matrix(r, free[j]);
                }
            }
            Eigen::VectorXd delta = m.completeOrthogonalDecomposition().solve(rhs);
            bool violated = false;
            for (std::size_t j = 0; j < free.size(); ++j) {
                std::size_t c = free[j];
                y[c] += delta(static_cast<Eigen::Index>(j));
            }
            for (auto c : free) {
                if (y[c] < bounds.lo[c]) {
                    y[c] = bounds.lo[c];
                    fixed[c] = 1;
                    violated = true;
                } else if (y[c] > bounds.hi[c]) {
                    y[c] = bounds.hi[c];
                    fixed[c] = 1;
                    violated = true;
                }
            }
            if (!violated) {
                break;
            }
            // restart the free variables from the base so the change stays minimal
            for (auto c : free) {
                if (!fixed[c]) {
                    y[c] = y0[c];
                }
            }
        }
        bool added = false;
        for (std::size_t i = 0; i < le_rows.size(); ++i) {
            std::size_t r = le_rows[i];
            if (!active_le[i] && row_value(r, y) > target.values[r] + scaled(kPreimageTolerance, target.values[r])) {
                active_le[i] = 1;
                added = true;
            }
        }
        if (!added) {
            break;
        }
    }

    for (auto r : eq_rows) {
        if (std::abs(row_value(r, y) - target.values[r]) > scaled(kPreimageTolerance, target.values[r])) {
            return PreimageResult::none("layer " + std::to_string(k) + ": linear system has no solution in the box");
        }
    }
    for (auto r : le_rows) {
        if (row_value(r, y) > target.values[r] + scaled(kPreimageTolerance, target.values[r])) {
            return PreimageResult::none("layer " + std::to_string(k) + ": upper bound unreachable in the box");
        }
    }
    PreimageTarget out;
    out.layer = k - 1;
    out.values = Tensor(y0.shape(), std::move(y));
    out.kinds.assign(cols, ConstraintKind::Free);
    for (auto c : support) {
        out.kinds[c] = ConstraintKind::Equal;
    }
    return {std::move(out), {}};
}

PreimageResult relu_step(const PreimageChain& chain, std::size_t k, const PreimageTarget& target) {
    const auto& base = chain.base(k - 1);
    Bounds bounds = chain.bounds(k - 1);
    PreimageTarget out{k - 1, base, target.kinds};
    for (std::size_t p = 0; p < base.size(); ++p) {
        double t = target.values[p];
        switch (target.kinds[p]) {
        case ConstraintKind::Free:
            break;
        case ConstraintKind::Equal:
            if (t > kZeroTolerance) {
                if (t < bounds.lo[p] - kZeroTolerance || t > bounds.hi[p] + kZeroTolerance) {
                    return PreimageResult::none("layer " + std::to_string(k) + ": relu preimage leaves the region");
                }
                out.values[p] = t;
            } else if (t >= -kZeroTolerance) {
                // canonical representative of relu^-1(0); anything <= 0 is accepted below
                out.values[p] = 0.0;
                out.kinds[p] = ConstraintKind::AtMost;
            } else {
                return PreimageResult::none("layer " + std::to_string(k) + ": negative relu output");
            }
            break;
        case ConstraintKind::AtMost:
            if (t < -kZeroTolerance) {
                return PreimageResult::none("layer " + std::to_string(k) + ": negative relu bound");
            }
            out.values[p] = std::max(t, 0.0);
            break;
        }
    }
    return {std::move(out), {}};
}

PreimageResult maxpool_step(const PreimageChain& chain, std::size_t k, const PreimageTarget& target) {
    const auto& net = chain.network();
    const auto& base = chain.base(k - 1);
    Bounds bounds = chain.bounds(k - 1);
    PreimageTarget out{k - 1, base, std::vector<ConstraintKind>(base.size(), ConstraintKind::Free)};
    for (std::size_t q = 0; q < target.values.size(); ++q) {
        if (target.kinds[q] == ConstraintKind::Free) {
            continue;
        }
        auto win = pool_window(net, k, q, base);
        double t = target.values[q];
        if (target.kinds[q] == ConstraintKind::AtMost) {
            for (auto c : win.cells) {
                out.values[c] = t;
                out.kinds[c] = ConstraintKind::AtMost;
            }
            continue;
        }
        if (t < win.frozen - scaled(kZeroTolerance, win.frozen)) {
            return PreimageResult::none("layer " + std::to_string(k) + ": pooled value below a frozen neighbour");
        }
        if (t < bounds.lo[win.argmax] - kZeroTolerance || t > bounds.hi[win.argmax] + kZeroTolerance) {
            return PreimageResult::none("layer " + std::to_string(k) + ": window maximum leaves the region");
        }
        for (auto c : win.cells) {
            out.values[c] = t;
            out.kinds[c] = ConstraintKind::AtMost;
        }
        out.kinds[win.argmax] = ConstraintKind::Equal;
    }
    return {std::move(out), {}};
}

PreimageResult zeropad_step(const PreimageChain& chain, std::size_t k, const PreimageTarget& target) {
    const auto& net = chain.network();
    const auto& base = chain.base(k - 1);
    const auto& in = net.shape(k - 1);
    std::size_t c = in[0], h = in[1], w = in[2], p = net.layer(k).pad;
    std::size_t ph = h + 2 * p, pw = w + 2 * p;
    PreimageTarget out{k - 1, base, std::vector<ConstraintKind>(base.size(), ConstraintKind::Free)};
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t r = 0; r < ph; ++r) {
            for (std::size_t col = 0; col < pw; ++col) {
                std::size_t idx = (ch * ph + r) * pw + col;
                auto kind = target.kinds[idx];
                double t = target.values[idx];
                bool interior = r >= p && r < p + h && col >= p && col < p + w;
                if (!interior) {
                    if ((kind == ConstraintKind::Equal && std::abs(t) > kZeroTolerance) ||
                        (kind == ConstraintKind::AtMost && t < -kZeroTolerance)) {
                        return PreimageResult::none("layer " + std::to_string(k) + ": padding must stay zero");
                    }
                    continue;
                }
                std::size_t src = (ch * h + r - p) * w + col - p;
                out.kinds[src] = kind;
                if (kind != ConstraintKind::Free) {
                    out.values[src] = t;
                }
            }
        }
    }
    return {std::move(out), {}};
}

} // namespace

PreimageTarget PreimageTarget::on_dims(std::size_t layer, Tensor values, const std::vector<std::size_t>& dims) {
    PreimageTarget t{layer, std::move(values), {}};
    t.kinds.assign(t.values.size(), ConstraintKind::Free);
    for (auto p : dims) {
        t.kinds.at(p) = ConstraintKind::Equal;
    }
    return t;
}

PreimageTarget PreimageTarget::exact(std::size_t layer, Tensor values) {
    PreimageTarget t{layer, std::move(values), {}};
    t.kinds.assign(t.values.size(), ConstraintKind::Equal);
    return t;
}

PreimageChain::PreimageChain(const Network& net, std::vector<Tensor> base_activations)
    : net_(&net), base_(std::move(base_activations)) {
    if (base_.size() != net.layer_count() + 1) {
        throw Error("preimage chain needs one base activation per layer");
    }
}

PreimageChain::PreimageChain(const Network& net, const Tensor& input) : PreimageChain(net, forward(net, input)) {}

void PreimageChain::set_constraint(std::size_t k, HyperRectangle box) { constraints_[k] = std::move(box); }

void PreimageChain::clear_constraint(std::size_t k) { constraints_.erase(k); }

const HyperRectangle* PreimageChain::constraint(std::size_t k) const {
    auto it = constraints_.find(k);
    return it == constraints_.end() ? nullptr : &it->second;
}

Bounds PreimageChain::domain(std::size_t k) const {
    std::size_t n = net_->width(k);
    Bounds b{std::vector<double>(n, -kInf), std::vector<double>(n, kInf)};
    if (k == 0) {
        std::fill(b.lo.begin(), b.lo.end(), net_->input_bounds().lo);
        std::fill(b.hi.begin(), b.hi.end(), net_->input_bounds().hi);
        return b;
    }
    const auto& spec = net_->layer(k);
    switch (spec.kind) {
    case LayerKind::Relu:
        std::fill(b.lo.begin(), b.lo.end(), 0.0);
        break;
    case LayerKind::MaxPool:
        for (std::size_t q = 0; q < n; ++q) {
            b.lo[q] = pool_window(*net_, k, q, base_[k - 1]).frozen;
        }
        break;
    case LayerKind::Flatten:
    case LayerKind::Dropout:
        return domain(k - 1);
    case LayerKind::ZeroPad2d: {
        auto below = domain(k - 1);
        const auto& in = net_->shape(k - 1);
        std::size_t c = in[0], h = in[1], w = in[2], p = spec.pad;
        std::size_t ph = h + 2 * p, pw = w + 2 * p;
        std::fill(b.lo.begin(), b.lo.end(), 0.0);
        std::fill(b.hi.begin(), b.hi.end(), 0.0);
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t col = 0; col < w; ++col) {
                    std::size_t dst = (ch * ph + r + p) * pw + col + p, src = (ch * h + r) * w + col;
                    b.lo[dst] = below.lo[src];
                    b.hi[dst] = below.hi[src];
                }
            }
        }
        break;
    }
    default:
        break;
    }
    return b;
}

Bounds PreimageChain::bounds(std::size_t k) const {
    Bounds b = domain(k);
    if (const auto* box = constraint(k)) {
        for (std::size_t i = 0; i < box->dims.size(); ++i) {
            std::size_t p = box->dims[i];
            b.lo[p] = std::max(b.lo[p], box->bounds[i].lo);
            b.hi[p] = std::min(b.hi[p], box->bounds[i].hi);
        }
    }
    return b;
}

const AffineMap& PreimageChain::affine(std::size_t k) const {
    auto it = affine_cache_.find(k);
    if (it == affine_cache_.end()) {
        auto map = affine_map(*net_, k);
        if (!map) {
            throw UnsupportedLayer("layer " + std::to_string(k) + " is not affine");
        }
        it = affine_cache_.emplace(k, std::move(*map)).first;
    }
    return it->second;
}

PreimageResult preimage_step(const PreimageChain& chain, std::size_t k, const PreimageTarget& target) {
    const auto& net = chain.network();
    if (k == 0 || k > net.layer_count()) {
        throw Error("preimage_step: layer " + std::to_string(k) + " out of range");
    }
    if (target.layer != k || target.values.shape() != net.shape(k) || target.kinds.size() != target.values.size()) {
        throw ShapeError(k, "preimage target does not match the layer");
    }
    switch (net.layer(k).kind) {
    case LayerKind::Dense:
    case LayerKind::Conv2d:
        return affine_step(chain, k, target);
    case LayerKind::Relu:
        return relu_step(chain, k, target);
    case LayerKind::MaxPool:
        return maxpool_step(chain, k, target);
    case LayerKind::ZeroPad2d:
        return zeropad_step(chain, k, target);
    case LayerKind::Flatten:
    case LayerKind::Dropout:
        return {PreimageTarget{k - 1, target.values.reshaped(net.shape(k - 1)), target.kinds}, {}};
    case LayerKind::Softmax:
        return PreimageResult::none("layer " + std::to_string(k) + ": softmax is not inverted");
    }
    return PreimageResult::none("unknown layer kind");
}

PreimageResult preimage_maxpool_combined(const PreimageChain& chain, std::size_t j, const PreimageTarget& target) {
    const auto& net = chain.network();
    if (j < 2 || j > net.layer_count() || net.layer(j - 1).kind != LayerKind::MaxPool) {
        throw Error("preimage_maxpool_combined: layer " + std::to_string(j - 1) + " is not a maxpool layer");
    }
    // bounds(j - 1) already carries the frozen-neighbour lower bounds, so the
    // solve at layer j only produces pooled values the window can realize
    auto upper = preimage_step(chain, j, target);
    if (!upper) {
        return upper;
    }
    return preimage_step(chain, j - 1, *upper.point);
}

bool reproduces(const Tensor& activation, const PreimageTarget& target, double rel_tol) {
    for (std::size_t p = 0; p < target.values.size(); ++p) {
        double t = target.values[p];
        if (target.kinds[p] == ConstraintKind::Equal && std::abs(activation[p] - t) > scaled(rel_tol, t)) {
            return false;
        }
        if (target.kinds[p] == ConstraintKind::AtMost && activation[p] > t + scaled(rel_tol, t)) {
            return false;
        }
    }
    return true;
}

PreimageResult realize_input(const PreimageChain& chain, const PreimageTarget& target) {
    const auto& net = chain.network();
    PreimageTarget cur = target;
    std::size_t j = target.layer;
    while (j > 0) {
        PreimageResult r;
        if (j >= 2 && net.layer(j - 1).kind == LayerKind::MaxPool && net.layer(j).kind != LayerKind::MaxPool) {
            r = preimage_maxpool_combined(chain, j, cur);
            j -= 2;
        } else {
            r = preimage_step(chain, j, cur);
            j -= 1;
        }
        if (!r) {
            return r;
        }
        cur = std::move(*r.point);
    }
    const auto& b = net.input_bounds();
    Tensor input = cur.values;
    for (std::size_t p = 0; p < input.size(); ++p) {
        if (cur.kinds[p] == ConstraintKind::AtMost) {
            input[p] = std::min(chain.base(0)[p], cur.values[p]);
        }
        input[p] = std::clamp(input[p], b.lo, b.hi);
    }
    auto acts = forward(net, input);
    if (!reproduces(acts[target.layer], target)) {
        return PreimageResult::none("forward replay does not reproduce the target");
    }
    for (std::size_t k = 0; k < target.layer; ++k) {
        if (const auto* box = chain.constraint(k); box && !box->contains(acts[k], 1e-7)) {
            return PreimageResult::none("reconstruction leaves the region at layer " + std::to_string(k));
        }
    }
    return {PreimageTarget::exact(0, std::move(input)), {}};
}

std::optional<Tensor> map_back_to_input(const PreimageChain& chain, const Activation& witness,
                                        std::size_t original_class) {
    const auto& net = chain.network();
    Tensor input;
    if (witness.layer == 0) {
        input = witness.tensor;
        const auto& b = net.input_bounds();
        for (auto& v : input.values()) {
            v = std::clamp(v, b.lo, b.hi);
        }
    } else {
        PreimageTarget target;
        if (const auto* box = chain.constraint(witness.layer)) {
            target = PreimageTarget::on_dims(witness.layer, witness.tensor, box->dims);
        } else {
            target = PreimageTarget::exact(witness.layer, witness.tensor);
        }
        auto r = realize_input(chain, target);
        if (!r) {
            return std::nullopt;
        }
        input = std::move(r.point->values);
    }
    if (classify(net, input) == original_class) {
        return std::nullopt;
    }
    return input;
}

} // namespace dlv
