// Copyright (c) DLV contributors.
// SPDX-License-Identifier: Apache-2.0
#include "dlv/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dlv/errors.hpp"

namespace dlv {

namespace {

constexpr double kWeightEpsilon = 1e-12;

struct Chw {
    std::size_t c, h, w;
};

Chw chw_of(const Shape& s, std::size_t layer) {
    if (s.size() != 3) {
        throw ShapeError(layer, "expected a (channels, height, width) activation");
    }
    return {s[0], s[1], s[2]};
}

void require_finite(const Tensor& t, std::size_t layer, const char* what) {
    if (!t.all_finite()) {
        throw NumericError(layer, std::string("non-finite ") + what);
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) {
        v /= sum;
    }
    return out;
}

Shape output_shape(const LayerSpec& spec, const Shape& in, std::size_t layer) {
    switch (spec.kind) {
    case LayerKind::Dense:
        if (shape_size(in) != spec.in) {
            throw ShapeError(layer, "dense layer expects " + std::to_string(spec.in) + " inputs, got " +
                                        std::to_string(shape_size(in)));
        }
        if (spec.in == 0 || spec.out == 0 || spec.weights.size() != spec.in * spec.out ||
            spec.bias.size() != spec.out) {
            throw ShapeError(layer, "dense weight/bias sizes inconsistent with in/out");
        }
        return {spec.out};
    case LayerKind::Conv2d: {
        auto [c, h, w] = chw_of(in, layer);
        if (c != spec.in_channels) {
            throw ShapeError(layer, "conv2d channel mismatch");
        }
        if (spec.kernel_h == 0 || spec.kernel_w == 0 || spec.kernel_h > h || spec.kernel_w > w) {
            throw ShapeError(layer, "conv2d kernel does not fit the input");
        }
        if (spec.weights.size() != spec.out_channels * spec.in_channels * spec.kernel_h * spec.kernel_w ||
            spec.bias.size() != spec.out_channels || spec.out_channels == 0) {
            throw ShapeError(layer, "conv2d weight/bias sizes inconsistent");
        }
        return {spec.out_channels, h - spec.kernel_h + 1, w - spec.kernel_w + 1};
    }
    case LayerKind::MaxPool: {
        auto [c, h, w] = chw_of(in, layer);
        if (spec.window == 0 || h % spec.window != 0 || w % spec.window != 0) {
            throw ShapeError(layer, "maxpool window must be >= 1 and divide the spatial extents");
        }
        return {c, h / spec.window, w / spec.window};
    }
    case LayerKind::ZeroPad2d: {
        auto [c, h, w] = chw_of(in, layer);
        return {c, h + 2 * spec.pad, w + 2 * spec.pad};
    }
    case LayerKind::Flatten:
        return {shape_size(in)};
    case LayerKind::Softmax:
        if (in.size() != 1) {
            throw ShapeError(layer, "softmax expects a flat activation");
        }
        return in;
    case LayerKind::Relu:
    case LayerKind::Dropout:
        return in;
    }
    return in;
}

} // namespace

std::string_view to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::ZeroPad2d: return "zeropad2d";
    }
    return "unknown";
}

std::optional<LayerKind> layer_kind_from_string(std::string_view name) {
    for (auto k : {LayerKind::Dense, LayerKind::Conv2d, LayerKind::Relu, LayerKind::MaxPool, LayerKind::Flatten,
                   LayerKind::Softmax, LayerKind::Dropout, LayerKind::ZeroPad2d}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    return std::nullopt;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, std::vector<double> weights, std::vector<double> bias) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in = in;
    s.out = out;
    s.weights = std::move(weights);
    s.bias = std::move(bias);
    return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                            std::size_t kernel_w, std::vector<double> weights, std::vector<double> bias) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.in_channels = in_channels;
    s.out_channels = out_channels;
    s.kernel_h = kernel_h;
    s.kernel_w = kernel_w;
    s.weights = std::move(weights);
    s.bias = std::move(bias);
    return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool(std::size_t window) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool;
    s.window = window;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
}

LayerSpec LayerSpec::softmax() {
    LayerSpec s;
    s.kind = LayerKind::Softmax;
    return s;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
}

LayerSpec LayerSpec::zeropad2d(std::size_t pad) {
    LayerSpec s;
    s.kind = LayerKind::ZeroPad2d;
    s.pad = pad;
    return s;
}

Network::Network(Shape input_shape, std::size_t class_count, std::vector<LayerSpec> layers, InputBounds bounds)
    : class_count_(class_count), layers_(std::move(layers)), bounds_(bounds) {
    if (input_shape.empty() || shape_size(input_shape) == 0) {
        throw ShapeError(0, "input shape must have positive extents");
    }
    if (layers_.empty()) {
        throw ShapeError(0, "network has no layers");
    }
    if (!(bounds_.lo < bounds_.hi)) {
        throw ShapeError(0, "input bounds must satisfy lo < hi");
    }
    shapes_.push_back(std::move(input_shape));
    for (std::size_t k = 1; k <= layers_.size(); ++k) {
        const auto& spec = layers_[k - 1];
        for (double v : spec.weights) {
            if (!std::isfinite(v)) {
                throw NumericError(k, "non-finite weight");
            }
        }
        for (double v : spec.bias) {
            if (!std::isfinite(v)) {
                throw NumericError(k, "non-finite bias");
            }
        }
        shapes_.push_back(output_shape(spec, shapes_.back(), k));
    }
    if (shape_size(shapes_.back()) != class_count_) {
        throw ShapeError(layers_.size(), "output width " + std::to_string(shape_size(shapes_.back())) +
                                             " does not equal class count " + std::to_string(class_count_));
    }
}

std::size_t Network::logits_layer() const {
    std::size_t n = layers_.size();
    return layers_.back().kind == LayerKind::Softmax ? n - 1 : n;
}

Tensor apply_layer(const Network& net, std::size_t k, const Tensor& input) {
    const auto& spec = net.layer(k);
    if (input.shape() != net.shape(k - 1)) {
        throw ShapeError(k, "input shape does not match the layer's declared input");
    }
    Tensor out(net.shape(k));
    auto x = input.values();
    auto y = out.values();
    switch (spec.kind) {
    case LayerKind::Dense:
        for (std::size_t o = 0; o < spec.out; ++o) {
            double acc = spec.bias[o];
            const double* row = spec.weights.data() + o * spec.in;
            for (std::size_t i = 0; i < spec.in; ++i) {
                acc += row[i] * x[i];
            }
            y[o] = acc;
        }
        break;
    case LayerKind::Conv2d: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        const auto& os = net.shape(k);
        std::size_t oh = os[1], ow = os[2];
        for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
            for (std::size_t r = 0; r < oh; ++r) {
                for (std::size_t col = 0; col < ow; ++col) {
                    double acc = spec.bias[oc];
                    for (std::size_t ic = 0; ic < c; ++ic) {
                        for (std::size_t a = 0; a < spec.kernel_h; ++a) {
                            for (std::size_t b = 0; b < spec.kernel_w; ++b) {
                                acc += spec.weights[((oc * c + ic) * spec.kernel_h + a) * spec.kernel_w + b] *
                                       x[(ic * h + r + a) * w + col + b];
                            }
                        }
                    }
                    y[(oc * oh + r) * ow + col] = acc;
                }
            }
        }
        break;
    }
    case LayerKind::Relu:
        for (std::size_t i = 0; i < x.size(); ++i) {
            y[i] = x[i] > 0.0 ? x[i] : 0.0;
        }
        break;
    case LayerKind::MaxPool: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        std::size_t m = spec.window, oh = h / m, ow = w / m;
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t r = 0; r < oh; ++r) {
                for (std::size_t col = 0; col < ow; ++col) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (std::size_t a = 0; a < m; ++a) {
                        for (std::size_t b = 0; b < m; ++b) {
                            best = std::max(best, x[(ch * h + r * m + a) * w + col * m + b]);
                        }
                    }
                    y[(ch * oh + r) * ow + col] = best;
                }
            }
        }
        break;
    }
    case LayerKind::ZeroPad2d: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        std::size_t p = spec.pad, ph = h + 2 * p, pw = w + 2 * p;
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t col = 0; col < w; ++col) {
                    y[(ch * ph + r + p) * pw + col + p] = x[(ch * h + r) * w + col];
                }
            }
        }
        break;
    }
    case LayerKind::Softmax: {
        auto s = softmax(x);
        std::copy(s.begin(), s.end(), y.begin());
        break;
    }
    case LayerKind::Flatten:
    case LayerKind::Dropout:
        std::copy(x.begin(), x.end(), y.begin());
        break;
    }
    require_finite(out, k, "activation");
    return out;
}

std::vector<Tensor> forward(const Network& net, const Tensor& input) {
    if (input.shape() != net.input_shape()) {
        throw ShapeError(0, "input shape does not match the network input shape");
    }
    require_finite(input, 0, "input");
    std::vector<Tensor> acts;
    acts.reserve(net.layer_count() + 1);
    acts.push_back(input);
    for (std::size_t k = 1; k <= net.layer_count(); ++k) {
        acts.push_back(apply_layer(net, k, acts.back()));
    }
    return acts;
}

Tensor forward_from(const Network& net, std::size_t k, const Tensor& activation) {
    Tensor cur = activation;
    for (std::size_t j = k + 1; j <= net.layer_count(); ++j) {
        cur = apply_layer(net, j, cur);
    }
    return cur;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

std::size_t classify(const Network& net, const Tensor& input) {
    auto acts = forward(net, input);
    return argmax(acts[net.logits_layer()].values());
}

Tensor backward_layer(const Network& net, std::size_t k, const Tensor& input, const Tensor& output,
                      const Tensor& grad_output) {
    const auto& spec = net.layer(k);
    Tensor grad(net.shape(k - 1));
    auto gi = grad.values();
    auto go = grad_output.values();
    auto x = input.values();
    switch (spec.kind) {
    case LayerKind::Dense:
        for (std::size_t o = 0; o < spec.out; ++o) {
            if (go[o] == 0.0) {
                continue;
            }
            const double* row = spec.weights.data() + o * spec.in;
            for (std::size_t i = 0; i < spec.in; ++i) {
                gi[i] += row[i] * go[o];
            }
        }
        break;
    case LayerKind::Conv2d: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        const auto& os = net.shape(k);
        std::size_t oh = os[1], ow = os[2];
        for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
            for (std::size_t r = 0; r < oh; ++r) {
                for (std::size_t col = 0; col < ow; ++col) {
                    double g = go[(oc * oh + r) * ow + col];
                    for (std::size_t ic = 0; ic < c; ++ic) {
                        for (std::size_t a = 0; a < spec.kernel_h; ++a) {
                            for (std::size_t b = 0; b < spec.kernel_w; ++b) {
                                gi[(ic * h + r + a) * w + col + b] +=
                                    spec.weights[((oc * c + ic) * spec.kernel_h + a) * spec.kernel_w + b] * g;
                            }
                        }
                    }
                }
            }
        }
        break;
    }
    case LayerKind::Relu:
        for (std::size_t i = 0; i < gi.size(); ++i) {
            gi[i] = x[i] > 0.0 ? go[i] : 0.0;
        }
        break;
    case LayerKind::MaxPool: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        std::size_t m = spec.window, oh = h / m, ow = w / m;
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t r = 0; r < oh; ++r) {
                for (std::size_t col = 0; col < ow; ++col) {
                    // first maximal element receives the gradient
                    std::size_t best = (ch * h + r * m) * w + col * m;
                    for (std::size_t a = 0; a < m; ++a) {
                        for (std::size_t b = 0; b < m; ++b) {
                            std::size_t idx = (ch * h + r * m + a) * w + col * m + b;
                            if (x[idx] > x[best]) {
                                best = idx;
                            }
                        }
                    }
                    gi[best] += go[(ch * oh + r) * ow + col];
                }
            }
        }
        break;
    }
    case LayerKind::ZeroPad2d: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        std::size_t p = spec.pad, ph = h + 2 * p, pw = w + 2 * p;
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t col = 0; col < w; ++col) {
                    gi[(ch * h + r) * w + col] = go[(ch * ph + r + p) * pw + col + p];
                }
            }
        }
        break;
    }
    case LayerKind::Softmax: {
        auto s = output.values();
        double dot = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            dot += s[i] * go[i];
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            gi[i] = s[i] * (go[i] - dot);
        }
        break;
    }
    case LayerKind::Flatten:
    case LayerKind::Dropout:
        std::copy(go.begin(), go.end(), gi.begin());
        break;
    }
    require_finite(grad, k, "gradient");
    return grad;
}

namespace {

Tensor backprop_to_input(const Network& net, const std::vector<Tensor>& acts, std::size_t from, Tensor grad) {
    for (std::size_t k = from; k >= 1; --k) {
        grad = backward_layer(net, k, acts[k - 1], acts[k], grad);
    }
    return grad;
}

} // namespace

Tensor gradient_input(const Network& net, const Tensor& input, std::size_t label) {
    if (label >= net.class_count()) {
        throw Error("label " + std::to_string(label) + " out of range");
    }
    auto acts = forward(net, input);
    std::size_t lk = net.logits_layer();
    auto probs = softmax(acts[lk].values());
    Tensor grad(net.shape(lk));
    for (std::size_t i = 0; i < probs.size(); ++i) {
        grad[i] = probs[i] - (i == label ? 1.0 : 0.0);
    }
    return backprop_to_input(net, acts, lk, std::move(grad));
}

Matrix jacobian_output_input(const Network& net, const Tensor& input) {
    auto acts = forward(net, input);
    std::size_t lk = net.logits_layer();
    std::size_t classes = net.width(lk);
    Matrix jac(classes, input.size());
    for (std::size_t c = 0; c < classes; ++c) {
        Tensor seed(net.shape(lk));
        seed[c] = 1.0;
        auto row = backprop_to_input(net, acts, lk, std::move(seed));
        std::copy(row.values().begin(), row.values().end(), jac.data.begin() + c * jac.cols);
    }
    return jac;
}

std::vector<std::size_t> connected_inputs(const Network& net, std::size_t k, std::size_t p) {
    const auto& spec = net.layer(k);
    std::vector<std::size_t> vars;
    switch (spec.kind) {
    case LayerKind::Dense:
        for (std::size_t i = 0; i < spec.in; ++i) {
            if (std::abs(spec.weights[p * spec.in + i]) > kWeightEpsilon) {
                vars.push_back(i);
            }
        }
        break;
    case LayerKind::Conv2d: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        const auto& os = net.shape(k);
        std::size_t oh = os[1], ow = os[2];
        std::size_t oc = p / (oh * ow), r = (p / ow) % oh, col = p % ow;
        for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t a = 0; a < spec.kernel_h; ++a) {
                for (std::size_t b = 0; b < spec.kernel_w; ++b) {
                    if (std::abs(spec.weights[((oc * c + ic) * spec.kernel_h + a) * spec.kernel_w + b]) >
                        kWeightEpsilon) {
                        vars.push_back((ic * h + r + a) * w + col + b);
                    }
                }
            }
        }
        std::sort(vars.begin(), vars.end());
        break;
    }
    case LayerKind::MaxPool: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        std::size_t m = spec.window, oh = h / m, ow = w / m;
        std::size_t ch = p / (oh * ow), r = (p / ow) % oh, col = p % ow;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b < m; ++b) {
                vars.push_back((ch * h + r * m + a) * w + col * m + b);
            }
        }
        std::sort(vars.begin(), vars.end());
        break;
    }
    case LayerKind::ZeroPad2d: {
        auto [c, h, w] = chw_of(net.shape(k - 1), k);
        std::size_t pd = spec.pad, ph = h + 2 * pd, pw = w + 2 * pd;
        std::size_t ch = p / (ph * pw), r = (p / pw) % ph, col = p % pw;
        if (r >= pd && r < pd + h && col >= pd && col < pd + w) {
            vars.push_back((ch * h + r - pd) * w + col - pd);
        }
        break;
    }
    case LayerKind::Softmax:
        for (std::size_t i = 0; i < net.width(k - 1); ++i) {
            vars.push_back(i);
        }
        break;
    case LayerKind::Relu:
    case LayerKind::Flatten:
    case LayerKind::Dropout:
        vars.push_back(p);
        break;
    }
    return vars;
}

std::optional<AffineMap> affine_map(const Network& net, std::size_t k) {
    const auto& spec = net.layer(k);
    if (spec.kind == LayerKind::Dense) {
        AffineMap m{Matrix(spec.out, spec.in), spec.bias};
        m.matrix.data = spec.weights;
        return m;
    }
    if (spec.kind != LayerKind::Conv2d) {
        return std::nullopt;
    }
    auto [c, h, w] = chw_of(net.shape(k - 1), k);
    const auto& os = net.shape(k);
    std::size_t oh = os[1], ow = os[2];
    AffineMap m{Matrix(net.width(k), net.width(k - 1)), std::vector<double>(net.width(k))};
    for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t col = 0; col < ow; ++col) {
                std::size_t row = (oc * oh + r) * ow + col;
                m.offset[row] = spec.bias[oc];
                for (std::size_t ic = 0; ic < c; ++ic) {
                    for (std::size_t a = 0; a < spec.kernel_h; ++a) {
                        for (std::size_t b = 0; b < spec.kernel_w; ++b) {
                            m.matrix(row, (ic * h + r + a) * w + col + b) =
                                spec.weights[((oc * c + ic) * spec.kernel_h + a) * spec.kernel_w + b];
                        }
                    }
                }
            }
        }
    }
    return m;
}

bool is_piecewise_linear(LayerKind kind) { return kind != LayerKind::Softmax; }

} // namespace dlv
