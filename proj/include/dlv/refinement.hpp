// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlv/geometry.hpp"
#include "dlv/network.hpp"
#include "dlv/verifier.hpp"

namespace dlv {

struct DimensionSelection {
    std::size_t layer = 0;
    /// Sorted by descending saliency.
    std::vector<std::size_t> dims;
    /// Mean activation of the layer.
    double average = 0.0;
    /// |alpha(p) - average| for each chosen dim.
    std::vector<double> saliency;
};

DimensionSelection select_dims_start(const Tensor& activation, std::size_t layer, std::size_t count);

/// For every previous dim p', the most salient not yet chosen dim p of layer k
/// with p' in Vars(p). Throws when p' feeds no dim of layer k.
DimensionSelection select_dims_next(const Network& net, std::size_t k, const Tensor& activation,
                                    const DimensionSelection& prev);

/// Sound interval bounds of phi_k over a box of activation k-1.
std::vector<Interval> interval_image(const Network& net, std::size_t k, const std::vector<Interval>& box);

/// The box of `region` over the full activation: region dims span their
/// extent, every other dim is fixed at the base value.
std::vector<Interval> region_intervals(const Region& region);

struct CoverageCheck {
    bool covered = false;
    double worst_residual = 0.0;
    std::vector<double> worst_sample;
    std::size_t samples = 0;
    /// Per region dim: some sample fell outside it.
    std::vector<bool> violated;
};

inline constexpr std::size_t kCornerCap = 1 << 16;

/// Samples points of prev_region (all corners plus `samples` uniform points),
/// maps them through phi_k and measures the L2 distance to region's box.
CoverageCheck check_region_covers(const Network& net, const Region& prev_region, const Region& region,
                                  std::size_t samples, std::uint64_t seed);

/// Spans seeded from the interval image of prev_region with m_p = 1; m_p is
/// doubled on violated dims until the coverage check passes.
Region grow_region(const Network& net, std::size_t k, const Region& prev_region, const DimensionSelection& selection,
                   const SearchConfig& config);

struct RefinementCertificate {
    std::size_t layer = 0;
    std::size_t horizon = 0;
    std::size_t samples = 0;
    std::size_t obligations = 0;
    double max_residual = 0.0;
    double epsilon = 0.0;
    std::string norm = "L2";
    std::uint64_t seed = 0;
    std::size_t halvings = 0;
    /// Worst residual on a fresh-seed re-sample at the same horizon.
    double stability_residual = 0.0;
};

struct ResidualCheck {
    double max_residual = 0.0;
    std::size_t samples = 0;
    std::size_t obligations = 0;
};

/// Worst distance between phi_k(delta(y)) and the closest point reachable from
/// phi_k(y) with at most `horizon` steps of `region`'s spans, over sampled y
/// of prev_region and the manipulations in prev_delta.
ResidualCheck refinement_residual(const Network& net, const Region& prev_region,
                                  const std::vector<Manipulation>& prev_delta, const Region& region,
                                  std::size_t horizon, std::size_t samples, std::uint64_t seed,
                                  std::size_t direction_cap);

struct Refinement {
    /// Same box as the input region; spans possibly halved.
    Region region;
    RefinementCertificate certificate;
};

Refinement refine_manipulations(const Network& net, const Region& prev_region,
                                const std::vector<Manipulation>& prev_delta, const Region& region, double epsilon,
                                const SearchConfig& config);

struct LayerReport {
    std::size_t layer = 0;
    Region region;
    std::size_t manipulation_count = 0;
    std::optional<RefinementCertificate> certificate;
    VerificationOutcome outcome;
};

/// Layer-by-layer verification from config.start_layer; stops at the first
/// layer that is not Safe or after the last layer.
std::vector<LayerReport> run_algorithm1(const Network& net, const Tensor& input, const SearchConfig& config);

enum class SmtFormula { RegionCoverage, Refinement };

struct SmtOptions {
    double epsilon = 0.1;
    std::size_t horizon = 1;
    std::uint64_t seed = 0;
};

/// SMT-LIB 2 text of the region-coverage or manipulation-refinement
/// condition between layers k-1 and k.
std::string export_constraints(const Network& net, std::size_t k, const Region& prev_region, const Region& region,
                               const std::vector<Manipulation>& prev_delta, SmtFormula which,
                               const SmtOptions& options);

} // namespace dlv
