// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dlv/tensor.hpp"

namespace dlv {

/// Absolute tolerance used for region membership and interval comparisons.
inline constexpr double kRegionTolerance = 1e-9;

/// alpha_{x,k}: an activation tagged with its layer index.
struct Activation {
    std::size_t layer = 0;
    Tensor tensor;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Axis-aligned box over a set of flattened dimension ids.
struct HyperRectangle {
    std::vector<std::size_t> dims;
    std::vector<Interval> bounds;

    bool contains(const Tensor& point, double tol = kRegionTolerance) const;
    /// L2 distance from `point` (restricted to `dims`) to the box.
    double distance(const Tensor& point) const;
    friend bool operator==(const HyperRectangle&, const HyperRectangle&) = default;
};

HyperRectangle rec(const Activation& a, const Activation& b);

/// eta_k(alpha_{x,k}): the product of [base(p) - s_p*m_p, base(p) + s_p*m_p] over
/// the selected dims; all other dims are unconstrained.
struct Region {
    std::size_t layer = 0;
    Tensor base;
    std::vector<std::size_t> dims;
    std::vector<double> spans;
    /// m_p. Zero gives a degenerate (single-point) extent along p.
    std::vector<std::size_t> counts;

    Region() = default;
    Region(std::size_t layer, Tensor base, std::vector<std::size_t> dims, std::vector<double> spans,
           std::vector<std::size_t> counts);
    /// Uniform s and m across dims, as in the tool's input parameters.
    static Region uniform(std::size_t layer, Tensor base, std::vector<std::size_t> dims, double span,
                          std::size_t count);

    std::size_t size() const { return dims.size(); }
    double lower(std::size_t i) const { return base[dims[i]] - spans[i] * static_cast<double>(counts[i]); }
    double upper(std::size_t i) const { return base[dims[i]] + spans[i] * static_cast<double>(counts[i]); }
    HyperRectangle box() const;
    bool contains(const Tensor& point, double tol = kRegionTolerance) const;

    /// Number of lattice points base + sum c_p s_p e_p with |c_p| <= m_p; saturates at SIZE_MAX.
    std::size_t lattice_size() const;
    /// Activation at integer lattice coordinates (one per region dim).
    Tensor lattice_point(const std::vector<std::int32_t>& coords) const;

    friend bool operator==(const Region&, const Region&) = default;
};

/// d: one entry in {-1, 0, +1} per region dim.
using Direction = std::vector<std::int8_t>;

/// delta_k^d over the dims of the region it was generated for.
struct Manipulation {
    std::size_t layer = 0;
    std::vector<std::size_t> dims;
    Direction direction;
    std::vector<double> spans;

    friend bool operator==(const Manipulation&, const Manipulation&) = default;
};

Activation apply_manipulation(const Manipulation& m, const Activation& a);

/// Number of non-zero directions over `dims` dimensions, 3^dims - 1.
std::size_t direction_count(std::size_t dims);
/// Lexicographic enumeration order: first dim most significant, -1 < 0 < +1,
/// all-zero skipped. Index 0 is (-1, ..., -1).
Direction direction_from_index(std::size_t index, std::size_t dims);
std::size_t direction_index(const Direction& d);

inline constexpr std::size_t kDefaultDimensionCap = 20;

/// All 3^|dims| - 1 manipulations of the region, in lexicographic direction order.
std::vector<Manipulation> generate_manipulation_set(const Region& region, std::size_t cap = kDefaultDimensionCap);

/// Validity checked per dimension: every dim moved by some manipulation is moved
/// strictly down by one and strictly up by another.
bool is_valid_manipulation_set(const std::vector<Manipulation>& manipulations, const Activation& a);

bool is_minimal_at_granularity(const Manipulation& m, double quantum);

struct Ladder {
    std::vector<Activation> activations;
    std::vector<Manipulation> steps;
};

/// Applies `m` repeatedly from the region base until the result leaves the
/// region; the escaping activation is kept as the last element.
Ladder build_ladder(const Region& region, const Manipulation& m, std::size_t max_steps = 1 << 16);

} // namespace dlv
