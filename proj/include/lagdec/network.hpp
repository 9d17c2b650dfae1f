#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lagdec/errors.hpp"
#include "lagdec/tensor.hpp"

namespace lagdec {

enum class LayerKind { dense, conv2d };
enum class Activation { relu, sigmoid };

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double activate(Activation act, double x) {
    return act == Activation::relu ? (x > 0.0 ? x : 0.0) : sigmoid(x);
}

inline const char* to_string(Activation act) { return act == Activation::relu ? "relu" : "sigmoid"; }

struct ConvGeometry {
    std::size_t in_channels = 0, in_height = 0, in_width = 0;
    std::size_t out_channels = 0, out_height = 0, out_width = 0;
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t stride = 1, padding = 0;
};

/// An affine map x -> W x + b, stored either as a dense matrix or as a 2-D convolution kernel.
///
/// Conv layers consume a [C,H,W] image and produce [out_ch,OH,OW]; both are handled in flattened
/// row-major order so that every layer maps a flat vector to a flat vector.
class AffineLayer {
public:
    static AffineLayer dense(Tensor weight, Tensor bias) {
        if (weight.rank() != 2) throw ShapeError("dense weight must be a matrix, got " + shape_string(weight.shape()));
        if (bias.size() != weight.dim(0)) {
            throw ShapeError("dense bias length " + std::to_string(bias.size()) + " != output dimension " +
                             std::to_string(weight.dim(0)));
        }
        AffineLayer layer;
        layer.kind_ = LayerKind::dense;
        layer.in_shape_ = {weight.dim(1)};
        layer.out_shape_ = {weight.dim(0)};
        layer.weight_ = std::move(weight);
        layer.bias_ = std::move(bias);
        return layer;
    }

    /// `in_shape` is the [C,H,W] shape of the input image.
    static AffineLayer conv2d(Tensor weight, Tensor bias, std::size_t stride, std::size_t padding,
                              std::vector<std::size_t> in_shape) {
        if (weight.rank() != 4) throw ShapeError("conv2d weight must be out_ch x in_ch x kh x kw");
        if (in_shape.size() != 3) throw ShapeError("conv2d input shape must be [C,H,W]");
        if (stride == 0) throw ShapeError("conv2d stride must be positive");
        ConvGeometry g;
        g.out_channels = weight.dim(0);
        g.in_channels = weight.dim(1);
        g.kernel_h = weight.dim(2);
        g.kernel_w = weight.dim(3);
        g.stride = stride;
        g.padding = padding;
        if (in_shape[0] != g.in_channels) {
            throw ShapeError("conv2d kernel expects " + std::to_string(g.in_channels) + " channels, input has " +
                             std::to_string(in_shape[0]));
        }
        g.in_height = in_shape[1];
        g.in_width = in_shape[2];
        const std::size_t ph = g.in_height + 2 * padding;
        const std::size_t pw = g.in_width + 2 * padding;
        if (ph < g.kernel_h || pw < g.kernel_w) throw ShapeError("conv2d kernel larger than padded input");
        g.out_height = (ph - g.kernel_h) / stride + 1;
        g.out_width = (pw - g.kernel_w) / stride + 1;
        if (bias.size() != g.out_channels) {
            throw ShapeError("conv2d bias length " + std::to_string(bias.size()) + " != output channels " +
                             std::to_string(g.out_channels));
        }
        AffineLayer layer;
        layer.kind_ = LayerKind::conv2d;
        layer.in_shape_ = std::move(in_shape);
        layer.out_shape_ = {g.out_channels, g.out_height, g.out_width};
        layer.geometry_ = g;
        layer.weight_ = std::move(weight);
        layer.bias_ = std::move(bias);
        return layer;
    }

    LayerKind kind() const noexcept { return kind_; }
    const Tensor& weight() const noexcept { return weight_; }
    const Tensor& bias() const noexcept { return bias_; }
    const ConvGeometry& geometry() const noexcept { return geometry_; }
    const std::vector<std::size_t>& in_shape() const noexcept { return in_shape_; }
    const std::vector<std::size_t>& out_shape() const noexcept { return out_shape_; }
    std::size_t in_size() const { return shape_volume(in_shape_); }
    std::size_t out_size() const { return shape_volume(out_shape_); }

    /// Bias of output unit `i` (conv biases are shared across a channel).
    double bias_at(std::size_t i) const {
        if (kind_ == LayerKind::dense) return bias_[i];
        return bias_[i / (geometry_.out_height * geometry_.out_width)];
    }

    /// W x, without the bias.
    Vec linear(std::span<const double> x) const {
        if (x.size() != in_size()) {
            throw ShapeError("layer expects input of size " + std::to_string(in_size()) + ", got " +
                             std::to_string(x.size()));
        }
        Vec out(out_size(), 0.0);
        if (kind_ == LayerKind::dense) {
            const std::size_t rows = weight_.dim(0), cols = weight_.dim(1);
            const auto w = weight_.values();
            for (std::size_t r = 0; r < rows; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * x[c];
                out[r] = s;
            }
            return out;
        }
        conv_loop([&](std::size_t o, std::size_t i, double w) { out[o] += w * x[i]; });
        return out;
    }

    /// |W| x, the elementwise absolute value of the operator applied to x (interval radii).
    Vec abs_linear(std::span<const double> x) const {
        if (x.size() != in_size()) throw ShapeError("layer input size mismatch");
        Vec out(out_size(), 0.0);
        if (kind_ == LayerKind::dense) {
            const std::size_t rows = weight_.dim(0), cols = weight_.dim(1);
            const auto w = weight_.values();
            for (std::size_t r = 0; r < rows; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < cols; ++c) s += std::fabs(w[r * cols + c]) * x[c];
                out[r] = s;
            }
            return out;
        }
        conv_loop([&](std::size_t o, std::size_t i, double w) { out[o] += std::fabs(w) * x[i]; });
        return out;
    }

    /// W x + b.
    Vec forward(std::span<const double> x) const {
        Vec out = linear(x);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias_at(i);
        return out;
    }

    /// W^T v: the transposed operator, no bias.
    Vec adjoint(std::span<const double> v) const {
        if (v.size() != out_size()) {
            throw ShapeError("adjoint expects input of size " + std::to_string(out_size()) + ", got " +
                             std::to_string(v.size()));
        }
        Vec out(in_size(), 0.0);
        if (kind_ == LayerKind::dense) {
            const std::size_t rows = weight_.dim(0), cols = weight_.dim(1);
            const auto w = weight_.values();
            for (std::size_t r = 0; r < rows; ++r) {
                const double vr = v[r];
                if (vr == 0.0) continue;
                for (std::size_t c = 0; c < cols; ++c) out[c] += w[r * cols + c] * vr;
            }
            return out;
        }
        conv_loop([&](std::size_t o, std::size_t i, double w) { out[i] += w * v[o]; });
        return out;
    }

    /// The explicit out x in matrix of the layer. Only the LP oracle needs this.
    Tensor materialize() const {
        if (kind_ == LayerKind::dense) return weight_;
        const std::size_t cols = in_size();
        Tensor m({out_size(), cols});
        auto data = m.values();
        conv_loop([&](std::size_t o, std::size_t i, double w) { data[o * cols + i] += w; });
        return m;
    }

private:
    AffineLayer() = default;

    // Visits every (output index, input index, kernel weight) triple of the convolution in a fixed order.
    template <typename Fn>
    void conv_loop(Fn&& fn) const {
        const ConvGeometry& g = geometry_;
        const auto w = weight_.values();
        const auto pad = static_cast<long>(g.padding);
        for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
            for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                    const std::size_t o = (oc * g.out_height + oy) * g.out_width + ox;
                    for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                            const long iy = static_cast<long>(oy * g.stride + ky) - pad;
                            if (iy < 0 || iy >= static_cast<long>(g.in_height)) continue;
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                const long ix = static_cast<long>(ox * g.stride + kx) - pad;
                                if (ix < 0 || ix >= static_cast<long>(g.in_width)) continue;
                                const std::size_t i =
                                    (ic * g.in_height + static_cast<std::size_t>(iy)) * g.in_width +
                                    static_cast<std::size_t>(ix);
                                const double wv = w[((oc * g.in_channels + ic) * g.kernel_h + ky) * g.kernel_w + kx];
                                fn(o, i, wv);
                            }
                        }
                    }
                }
            }
        }
    }

    LayerKind kind_ = LayerKind::dense;
    Tensor weight_;
    Tensor bias_;
    ConvGeometry geometry_;
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> out_shape_;
};

inline Vec forward_affine(const AffineLayer& layer, std::span<const double> x) { return layer.forward(x); }
inline Vec adjoint_affine(const AffineLayer& layer, std::span<const double> v) { return layer.adjoint(v); }

/// Feedforward network: affine layers 0..n-1 with an elementwise activation after every layer but the last.
///
/// Throughout the library hidden layer `h` (0 <= h < n-1) denotes the output of affine layer `h`,
/// i.e. the input of activation `h`.
class Network {
public:
    Network(std::vector<AffineLayer> layers, std::vector<Activation> activations)
        : layers_(std::move(layers)), activations_(std::move(activations)) {
        if (layers_.empty()) throw ShapeError("network needs at least one affine layer");
        if (activations_.size() + 1 != layers_.size()) {
            throw ShapeError("network needs exactly one activation between consecutive affine layers");
        }
        for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
            if (layers_[i].out_size() != layers_[i + 1].in_size()) {
                throw ShapeError("layer " + std::to_string(i) + " output size " +
                                 std::to_string(layers_[i].out_size()) + " does not match layer " +
                                 std::to_string(i + 1) + " input size " + std::to_string(layers_[i + 1].in_size()));
            }
        }
    }

    std::size_t num_affine() const noexcept { return layers_.size(); }
    std::size_t num_hidden() const noexcept { return activations_.size(); }
    const AffineLayer& layer(std::size_t i) const { return layers_.at(i); }
    const std::vector<AffineLayer>& layers() const noexcept { return layers_; }
    Activation activation(std::size_t h) const { return activations_.at(h); }
    const std::vector<Activation>& activations() const noexcept { return activations_; }
    std::size_t input_size() const { return layers_.front().in_size(); }
    std::size_t output_size() const { return layers_.back().out_size(); }
    std::size_t hidden_size(std::size_t h) const { return layers_.at(h).out_size(); }

    bool all_relu() const {
        for (Activation a : activations_) {
            if (a != Activation::relu) return false;
        }
        return true;
    }

    /// The network made of the first `depth` affine layers (the last one loses its activation).
    Network truncated(std::size_t depth) const {
        if (depth == 0 || depth > layers_.size()) throw std::out_of_range("invalid truncation depth");
        return Network({layers_.begin(), layers_.begin() + static_cast<long>(depth)},
                       {activations_.begin(), activations_.begin() + static_cast<long>(depth - 1)});
    }

private:
    std::vector<AffineLayer> layers_;
    std::vector<Activation> activations_;
};

/// Plain forward pass.
inline Vec network_eval(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_size()) {
        throw ShapeError("network expects input of size " + std::to_string(net.input_size()) + ", got " +
                         std::to_string(x.size()));
    }
    Vec cur(x.begin(), x.end());
    for (std::size_t i = 0; i < net.num_affine(); ++i) {
        cur = net.layer(i).forward(cur);
        if (i < net.num_hidden()) {
            for (double& v : cur) v = activate(net.activation(i), v);
        }
    }
    return cur;
}

/// Pre-activations of every hidden layer for input `x`.
inline std::vector<Vec> hidden_preactivations(const Network& net, std::span<const double> x) {
    std::vector<Vec> out;
    Vec cur(x.begin(), x.end());
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        cur = net.layer(h).forward(cur);
        out.push_back(cur);
        for (double& v : cur) v = activate(net.activation(h), v);
    }
    return out;
}

}  // namespace lagdec
