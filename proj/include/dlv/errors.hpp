// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dlv {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised by nn-core when a tensor does not fit the layer it is fed to.
class ShapeError : public Error {
  public:
    ShapeError(std::size_t layer, const std::string& what)
        : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
    std::size_t layer() const { return layer_; }

  private:
    std::size_t layer_;
};

class NumericError : public Error {
  public:
    NumericError(std::size_t layer, const std::string& what)
        : Error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
    std::size_t layer() const { return layer_; }

  private:
    std::size_t layer_;
};

class CombinatorialBlowUp : public Error {
  public:
    CombinatorialBlowUp(std::size_t dims, std::size_t cap)
        : Error("combinatorial blow-up: " + std::to_string(dims) + " dimensions exceed the cap of " +
                std::to_string(cap) + "; partition the region into features"),
          dims_(dims) {}
    std::size_t dims() const { return dims_; }

  private:
    std::size_t dims_;
};

class GridTooLarge : public Error {
  public:
    using Error::Error;
};

class CoverageFailure : public Error {
  public:
    CoverageFailure(std::size_t layer, double residual, std::vector<double> sample)
        : Error("layer " + std::to_string(layer) + ": region growth cap reached, worst residual " +
                std::to_string(residual)),
          layer_(layer), residual_(residual), sample_(std::move(sample)) {}
    std::size_t layer() const { return layer_; }
    double residual() const { return residual_; }
    const std::vector<double>& worst_sample() const { return sample_; }

  private:
    std::size_t layer_;
    double residual_;
    std::vector<double> sample_;
};

class RefinementFailure : public Error {
  public:
    RefinementFailure(std::size_t layer, double residual)
        : Error("layer " + std::to_string(layer) + ": manipulation refinement cap exhausted, worst residual " +
                std::to_string(residual)),
          layer_(layer), residual_(residual) {}
    std::size_t layer() const { return layer_; }
    double residual() const { return residual_; }

  private:
    std::size_t layer_;
    double residual_;
};

class UnsupportedLayer : public Error {
  public:
    using Error::Error;
};

class FormatError : public Error {
  public:
    FormatError(const std::string& what, std::optional<std::size_t> byte = std::nullopt)
        : Error(byte ? what + " (byte " + std::to_string(*byte) + ")" : what), byte_(byte) {}
    std::optional<std::size_t> byte_offset() const { return byte_; }

  private:
    std::optional<std::size_t> byte_;
};

/// Wraps a failure from one phase of the layer-by-layer driver.
class PhaseError : public Error {
  public:
    PhaseError(std::size_t layer, std::string phase, const std::string& what)
        : Error("layer " + std::to_string(layer) + " [" + phase + "]: " + what), layer_(layer),
          phase_(std::move(phase)) {}
    std::size_t layer() const { return layer_; }
    const std::string& phase() const { return phase_; }

  private:
    std::size_t layer_;
    std::string phase_;
};

} // namespace dlv
