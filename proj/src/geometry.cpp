// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dlv/errors.hpp"

namespace dlv {

bool HyperRectangle::contains(const Tensor& point, double tol) const {
    for (std::size_t i = 0; i < dims.size(); ++i) {
        double v = point[dims[i]];
        if (v < bounds[i].lo - tol || v > bounds[i].hi + tol) {
            return false;
        }
    }
    return true;
}

double HyperRectangle::distance(const Tensor& point) const {
    double sq = 0.0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        double v = point[dims[i]];
        double out = std::max({bounds[i].lo - v, v - bounds[i].hi, 0.0});
        sq += out * out;
    }
    return std::sqrt(sq);
}

HyperRectangle rec(const Activation& a, const Activation& b) {
    if (a.layer != b.layer) {
        throw Error("rec: activations belong to layers " + std::to_string(a.layer) + " and " +
                    std::to_string(b.layer));
    }
    if (a.tensor.shape() != b.tensor.shape()) {
        throw ShapeError(a.layer, "rec: activation shapes differ");
    }
    HyperRectangle box;
    for (std::size_t p = 0; p < a.tensor.size(); ++p) {
        box.dims.push_back(p);
        box.bounds.push_back({std::min(a.tensor[p], b.tensor[p]), std::max(a.tensor[p], b.tensor[p])});
    }
    return box;
}

Region::Region(std::size_t layer_, Tensor base_, std::vector<std::size_t> dims_, std::vector<double> spans_,
               std::vector<std::size_t> counts_)
    : layer(layer_), base(std::move(base_)), dims(std::move(dims_)), spans(std::move(spans_)),
      counts(std::move(counts_)) {
    if (dims.empty()) {
        throw Error("region needs at least one dimension");
    }
    if (spans.size() != dims.size() || counts.size() != dims.size()) {
        throw Error("region spans/counts must match its dimension list");
    }
    auto sorted = dims;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error("region dimensions must be distinct");
    }
    if (sorted.back() >= base.size()) {
        throw ShapeError(layer, "region dimension " + std::to_string(sorted.back()) + " outside layer width " +
                                    std::to_string(base.size()));
    }
    for (double s : spans) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw Error("region spans must be positive and finite");
        }
    }
}

Region Region::uniform(std::size_t layer, Tensor base, std::vector<std::size_t> dims, double span, std::size_t count) {
    std::size_t n = dims.size();
    return Region(layer, std::move(base), std::move(dims), std::vector<double>(n, span),
                  std::vector<std::size_t>(n, count));
}

HyperRectangle Region::box() const {
    HyperRectangle b;
    b.dims = dims;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        b.bounds.push_back({lower(i), upper(i)});
    }
    return b;
}

bool Region::contains(const Tensor& point, double tol) const { return box().contains(point, tol); }

std::size_t Region::lattice_size() const {
    std::size_t total = 1;
    for (auto m : counts) {
        std::size_t side = 2 * m + 1;
        if (total > std::numeric_limits<std::size_t>::max() / side) {
            return std::numeric_limits<std::size_t>::max();
        }
        total *= side;
    }
    return total;
}

Tensor Region::lattice_point(const std::vector<std::int32_t>& coords) const {
    Tensor point = base;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        point[dims[i]] = base[dims[i]] + static_cast<double>(coords[i]) * spans[i];
    }
    return point;
}

Activation apply_manipulation(const Manipulation& m, const Activation& a) {
    Activation out = a;
    for (std::size_t i = 0; i < m.dims.size(); ++i) {
        out.tensor[m.dims[i]] += static_cast<double>(m.direction[i]) * m.spans[i];
    }
    return out;
}

std::size_t direction_count(std::size_t dims) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < dims; ++i) {
        if (total > std::numeric_limits<std::size_t>::max() / 3) {
            return std::numeric_limits<std::size_t>::max();
        }
        total *= 3;
    }
    return total - 1;
}

Direction direction_from_index(std::size_t index, std::size_t dims) {
    std::size_t center = direction_count(dims) / 2;
    std::size_t code = index >= center ? index + 1 : index;
    Direction d(dims);
    for (std::size_t i = dims; i-- > 0;) {
        d[i] = static_cast<std::int8_t>(static_cast<int>(code % 3) - 1);
        code /= 3;
    }
    return d;
}

std::size_t direction_index(const Direction& d) {
    std::size_t code = 0;
    for (auto v : d) {
        code = code * 3 + static_cast<std::size_t>(v + 1);
    }
    std::size_t center = direction_count(d.size()) / 2;
    if (code == center) {
        throw Error("the all-zero direction is not a manipulation");
    }
    return code > center ? code - 1 : code;
}

std::vector<Manipulation> generate_manipulation_set(const Region& region, std::size_t cap) {
    if (region.size() > cap) {
        throw CombinatorialBlowUp(region.size(), cap);
    }
    std::size_t n = direction_count(region.size());
    std::vector<Manipulation> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({region.layer, region.dims, direction_from_index(i, region.size()), region.spans});
    }
    return out;
}

bool is_valid_manipulation_set(const std::vector<Manipulation>& manipulations, const Activation& a) {
    if (manipulations.empty()) {
        return false;
    }
    std::vector<std::int8_t> down(a.tensor.size(), 0), up(a.tensor.size(), 0);
    for (const auto& m : manipulations) {
        if (m.layer != a.layer) {
            return false;
        }
        for (std::size_t i = 0; i < m.dims.size(); ++i) {
            if (m.direction[i] < 0) {
                down[m.dims[i]] = 1;
            } else if (m.direction[i] > 0) {
                up[m.dims[i]] = 1;
            }
        }
    }
    bool any = false;
    for (std::size_t p = 0; p < a.tensor.size(); ++p) {
        if (down[p] || up[p]) {
            any = true;
            if (!(down[p] && up[p])) {
                return false;
            }
        }
    }
    return any;
}

bool is_minimal_at_granularity(const Manipulation& m, double quantum) {
    if (!(quantum > 0.0)) {
        throw Error("quantum must be positive");
    }
    return std::all_of(m.spans.begin(), m.spans.end(),
                       [quantum](double s) { return s <= quantum * (1.0 + 1e-12); });
}

Ladder build_ladder(const Region& region, const Manipulation& m, std::size_t max_steps) {
    Ladder ladder;
    ladder.activations.push_back({region.layer, region.base});
    for (std::size_t i = 0; i < max_steps; ++i) {
        auto next = apply_manipulation(m, ladder.activations.back());
        ladder.steps.push_back(m);
        ladder.activations.push_back(next);
        if (!region.contains(next.tensor)) {
            break;
        }
    }
    return ladder;
}

} // namespace dlv
