// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlv/tensor.hpp"

namespace dlv {

enum class LayerKind { Dense, Conv2d, Relu, MaxPool, Flatten, Softmax, Dropout, ZeroPad2d };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> layer_kind_from_string(std::string_view name);

/// Parameters of one activation function phi_k. Only the fields relevant to
/// `kind` are meaningful.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;

    // dense: weights are out x in, row-major.
    std::size_t in = 0;
    std::size_t out = 0;
    // conv2d: weights are out_channels x in_channels x kernel_h x kernel_w.
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    std::size_t window = 0; // maxpool
    std::size_t pad = 0;    // zeropad2d
    double rate = 0.0;      // dropout, informational only

    static LayerSpec dense(std::size_t in, std::size_t out, std::vector<double> weights, std::vector<double> bias);
    static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                            std::size_t kernel_w, std::vector<double> weights, std::vector<double> bias);
    static LayerSpec relu();
    static LayerSpec maxpool(std::size_t window);
    static LayerSpec flatten();
    static LayerSpec softmax();
    static LayerSpec dropout(double rate);
    static LayerSpec zeropad2d(std::size_t pad);

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct InputBounds {
    double lo = 0.0;
    double hi = 1.0;
    friend bool operator==(const InputBounds&, const InputBounds&) = default;
};

/// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

/// y = matrix * x + offset over flattened activations.
struct AffineMap {
    Matrix matrix;
    std::vector<double> offset;
};

/// Feed-forward network (L, T, Phi). Activation k (1..n) is produced by
/// layer(k); activation 0 is the input. Immutable after construction.
class Network {
  public:
    Network(Shape input_shape, std::size_t class_count, std::vector<LayerSpec> layers, InputBounds bounds = {});

    std::size_t layer_count() const { return layers_.size(); }
    /// Spec of the function producing activation k, 1 <= k <= n.
    const LayerSpec& layer(std::size_t k) const { return layers_.at(k - 1); }
    const std::vector<LayerSpec>& layers() const { return layers_; }
    const Shape& input_shape() const { return shapes_.front(); }
    /// Shape of activation k, 0 <= k <= n.
    const Shape& shape(std::size_t k) const { return shapes_.at(k); }
    std::size_t width(std::size_t k) const { return shape_size(shapes_.at(k)); }
    std::size_t class_count() const { return class_count_; }
    const InputBounds& input_bounds() const { return bounds_; }
    /// Index of the activation holding pre-softmax logits.
    std::size_t logits_layer() const;

    friend bool operator==(const Network&, const Network&) = default;

  private:
    std::vector<Shape> shapes_;
    std::size_t class_count_;
    std::vector<LayerSpec> layers_;
    InputBounds bounds_;
};

/// phi_k applied to activation k-1.
Tensor apply_layer(const Network& net, std::size_t k, const Tensor& input);

/// Activations alpha_0 .. alpha_n.
std::vector<Tensor> forward(const Network& net, const Tensor& input);

/// Propagates an activation of layer k to the output layer.
Tensor forward_from(const Network& net, std::size_t k, const Tensor& activation);

/// Argmax with ties broken towards the lowest index.
std::size_t argmax(std::span<const double> values);

std::size_t classify(const Network& net, const Tensor& input);

/// Gradient of the softmax cross-entropy against `label` with respect to the input.
Tensor gradient_input(const Network& net, const Tensor& input, std::size_t label);

/// Rows are d(logit c)/dx over the flattened input.
Matrix jacobian_output_input(const Network& net, const Tensor& input);

/// Vector-Jacobian product through phi_k: given dL/d(out), returns dL/d(in).
Tensor backward_layer(const Network& net, std::size_t k, const Tensor& input, const Tensor& output,
                      const Tensor& grad_output);

/// Vars(p): the dimensions of activation k-1 that feed dimension p of activation k.
std::vector<std::size_t> connected_inputs(const Network& net, std::size_t k, std::size_t p);

/// Materialized linear map for dense and conv2d layers; nullopt otherwise.
std::optional<AffineMap> affine_map(const Network& net, std::size_t k);

bool is_piecewise_linear(LayerKind kind);

} // namespace dlv
