// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlv/geometry.hpp"
#include "dlv/network.hpp"
#include "dlv/preimage.hpp"

namespace dlv {

enum class Verdict { Safe, Adversarial, Inconclusive };
std::string_view to_string(Verdict v);

enum class SearchMode { SinglePath, MultiPath };
std::string_view to_string(SearchMode m);

struct SearchConfig {
    std::size_t start_layer = 0;
    std::size_t dims = 2;
    double span = 1.0;
    std::size_t span_count = 1;
    double epsilon = 0.1;
    std::size_t feature_dims = 2;
    SearchMode mode = SearchMode::SinglePath;
    std::uint64_t seed = 0;

    std::size_t mcts_iterations = 2000;
    double mcts_exploration = std::sqrt(2.0);
    std::size_t mcts_rollout_depth = 24;

    std::size_t dimension_cap = kDefaultDimensionCap;
    /// Lattice points a single search may evaluate before giving up.
    std::size_t max_explored = 1'000'000;
    std::size_t coverage_samples = 1000;
    std::size_t growth_cap = 20;
    std::size_t horizon_cap = 64;
    std::size_t halving_cap = 16;
    /// Layer k-1 directions checked per refinement; larger sets are subsampled.
    std::size_t direction_cap = 512;
    double quantum = 1.0 / 255.0;
};

/// Parameter set for the two-dimensional curve network.
SearchConfig preset_2d();
/// Scaled-down image-classifier parameter set.
SearchConfig preset_mnist_mini();

struct PointEvaluation {
    bool realizable = false;
    std::size_t cls = 0;
    /// Original-class score minus the best other score.
    double margin = 0.0;
    std::optional<Tensor> input;
};

/// Classifies points of one layer. Input points are clamped to the input
/// bounds; hidden points are routed to the input through the preimage chain
/// (Equal on `dims`); points at or past the logits layer use argmax directly.
class PointEvaluator {
  public:
    PointEvaluator(const PreimageChain& chain, std::size_t layer, std::vector<std::size_t> dims);

    PointEvaluation evaluate(const Tensor& point) const;
    std::size_t layer() const { return layer_; }
    std::size_t original_class() const { return original_; }
    const Tensor& original_input() const { return chain_->base(0); }
    const PreimageChain& chain() const { return *chain_; }

  private:
    const PreimageChain* chain_;
    std::size_t layer_;
    std::vector<std::size_t> dims_;
    std::size_t original_;
};

struct VerificationOutcome {
    Verdict verdict = Verdict::Inconclusive;
    std::size_t layer = 0;
    std::size_t explored = 0;
    /// Lattice points without a reconstructable input; they are skipped.
    std::size_t unrealizable = 0;
    std::size_t original_class = 0;
    std::optional<std::size_t> new_class;
    std::optional<Tensor> witness;
    std::vector<std::int32_t> witness_coords;
    std::optional<Tensor> witness_input;
    std::optional<double> l1;
    std::optional<double> l2;
    std::string note;
};

/// Lattice breadth-first search over the ladders of `region` under `delta`,
/// clamped to the region box, visiting every point at most once.
VerificationOutcome verify_0_variation(const PointEvaluator& evaluator, const Region& region,
                                       const std::vector<Manipulation>& delta, const SearchConfig& config);

struct BruteForceResult {
    Verdict verdict = Verdict::Safe;
    std::size_t points = 0;
    std::optional<Tensor> witness;
};

inline constexpr std::size_t kBruteForceLimit = 1'000'000;

/// Every point lo + i*quantum of the region box (plus the upper edge) is classified.
BruteForceResult brute_force_oracle(const PointEvaluator& evaluator, const Region& region, double quantum);

struct Feature {
    /// Positions into the parent region's dim list.
    std::vector<std::size_t> positions;
    /// Layer dimension ids.
    std::vector<std::size_t> dims;
};

struct FeaturePartition {
    std::vector<Feature> features;
};

/// |alpha(p) - avg| over the region dims, avg taken over the whole layer.
std::vector<double> region_saliency(const Region& region);

FeaturePartition partition_features(const Region& region, std::size_t dims_per_feature,
                                    const std::vector<double>& saliency);

/// Restriction of `region` to one feature around `base`.
Region feature_region(const Region& region, const Feature& feature, const Tensor& base);

/// Union of the per-feature manipulation sets.
std::vector<Manipulation> feature_manipulations(const Region& region, const FeaturePartition& partition,
                                                std::size_t cap = kDefaultDimensionCap);

VerificationOutcome single_path_search(const PointEvaluator& evaluator, const Region& region,
                                       const FeaturePartition& partition, const SearchConfig& config);

struct MctsAction {
    std::size_t feature = 0;
    std::size_t direction = 0;
    friend bool operator==(const MctsAction&, const MctsAction&) = default;
};

/// Actions that walk from the region base to `coords`, feature by feature.
std::vector<MctsAction> path_to(const Region& region, const FeaturePartition& partition,
                                const std::vector<std::int32_t>& coords);

VerificationOutcome mcts_search(const PointEvaluator& evaluator, const Region& region,
                                const FeaturePartition& partition, const SearchConfig& config,
                                const std::vector<MctsAction>& seed_path = {});

} // namespace dlv
