// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlv/geometry.hpp"
#include "dlv/network.hpp"

namespace dlv {

enum class ConstraintKind : std::uint8_t {
    Free,  // any value
    Equal, // value must be reproduced
    AtMost // value is an upper bound
};

/// A partially specified activation at `layer`.
struct PreimageTarget {
    std::size_t layer = 0;
    Tensor values;
    std::vector<ConstraintKind> kinds;

    /// Equal on `dims`, Free elsewhere.
    static PreimageTarget on_dims(std::size_t layer, Tensor values, const std::vector<std::size_t>& dims);
    /// Equal everywhere.
    static PreimageTarget exact(std::size_t layer, Tensor values);
};

struct PreimageResult {
    std::optional<PreimageTarget> point;
    std::string reason;

    explicit operator bool() const { return point.has_value(); }
    static PreimageResult none(std::string why) { return {std::nullopt, std::move(why)}; }
};

struct Bounds {
    std::vector<double> lo;
    std::vector<double> hi;
};

/// Base activations of the original input plus the region constraints eta_j
/// that every reconstructed intermediate point must respect. The network must
/// outlive the chain.
class PreimageChain {
  public:
    PreimageChain(const Network& net, std::vector<Tensor> base_activations);
    PreimageChain(const Network& net, const Tensor& input);

    const Network& network() const { return *net_; }
    const Tensor& base(std::size_t k) const { return base_.at(k); }
    const std::vector<Tensor>& base_activations() const { return base_; }

    void set_constraint(std::size_t k, HyperRectangle box);
    void clear_constraint(std::size_t k);
    const HyperRectangle* constraint(std::size_t k) const;

    /// Feasible values for activation k: region box, input bounds at k = 0,
    /// relu outputs >= 0, maxpool outputs >= their frozen neighbours, padding == 0.
    Bounds bounds(std::size_t k) const;
    const AffineMap& affine(std::size_t k) const;

  private:
    Bounds domain(std::size_t k) const;

    const Network* net_;
    std::vector<Tensor> base_;
    std::map<std::size_t, HyperRectangle> constraints_;
    mutable std::map<std::size_t, AffineMap> affine_cache_;
};

inline constexpr double kPreimageTolerance = 1e-7;

/// psi_k: one point of activation k-1 mapped by phi_k onto `target`.
PreimageResult preimage_step(const PreimageChain& chain, std::size_t k, const PreimageTarget& target);

/// Joint inversion of phi_j and a maxpool phi_{j-1}: the pooled values solved at
/// layer j-1 are kept above the frozen window neighbours, then only the window
/// maxima of the base activation at j-2 are replaced.
PreimageResult preimage_maxpool_combined(const PreimageChain& chain, std::size_t j, const PreimageTarget& target);

/// Chains steps from target.layer down to the input and replays the result
/// forward; no class check.
PreimageResult realize_input(const PreimageChain& chain, const PreimageTarget& target);

/// Forward replay check: Equal dims within relative 1e-6, AtMost dims not exceeded.
bool reproduces(const Tensor& activation, const PreimageTarget& target, double rel_tol = 1e-6);

/// Input-layer image for a hidden witness, clamped to the input bounds and
/// returned only if it still classifies differently from `original_class`.
/// Dims constrained at the witness layer are those of its region constraint,
/// or all dims when none is set.
std::optional<Tensor> map_back_to_input(const PreimageChain& chain, const Activation& witness,
                                        std::size_t original_class);

} // namespace dlv
