#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "lagdec/hulls.hpp"
#include "lagdec/network.hpp"

namespace lagdec {

struct Box {
    Vec lower;
    Vec upper;
};

struct L2Ball {
    Vec center;
    double radius = 0.0;
};

/// The convex input set C. Box for l-infinity style perturbations, L2Ball otherwise.
class InputDomain {
public:
    InputDomain(Box box) : value_(std::move(box)) {  // NOLINT(google-explicit-constructor)
        const Box& b = std::get<Box>(value_);
        if (b.lower.size() != b.upper.size()) throw ShapeError("box bounds have different lengths");
        for (std::size_t i = 0; i < b.lower.size(); ++i) {
            if (!(b.lower[i] <= b.upper[i])) throw std::invalid_argument("box requires lower <= upper");
        }
    }
    InputDomain(L2Ball ball) : value_(std::move(ball)) {  // NOLINT(google-explicit-constructor)
        if (!(std::get<L2Ball>(value_).radius > 0.0)) throw std::invalid_argument("l2 ball radius must be > 0");
    }

    bool is_box() const noexcept { return std::holds_alternative<Box>(value_); }
    const Box& box() const { return std::get<Box>(value_); }
    const L2Ball& ball() const { return std::get<L2Ball>(value_); }

    std::size_t size() const { return is_box() ? box().lower.size() : ball().center.size(); }

    /// The box itself, or the bounding box of the ball.
    Box bounding_box() const {
        if (is_box()) return box();
        const L2Ball& b = ball();
        Box out{b.center, b.center};
        for (std::size_t i = 0; i < out.lower.size(); ++i) {
            out.lower[i] -= b.radius;
            out.upper[i] += b.radius;
        }
        return out;
    }

    Vec center() const {
        if (!is_box()) return ball().center;
        const Box& b = box();
        Vec c(b.lower.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (b.lower[i] + b.upper[i]);
        return c;
    }

    bool contains(std::span<const double> x, double tol = 0.0) const {
        if (x.size() != size()) return false;
        if (is_box()) {
            const Box& b = box();
            for (std::size_t i = 0; i < x.size(); ++i) {
                if (x[i] < b.lower[i] - tol || x[i] > b.upper[i] + tol) return false;
            }
            return true;
        }
        const L2Ball& b = ball();
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - b.center[i]) * (x[i] - b.center[i]);
        return std::sqrt(s) <= b.radius + tol;
    }

    /// Nearest point of the domain.
    Vec project(std::span<const double> x) const {
        if (x.size() != size()) throw ShapeError("domain/point size mismatch");
        Vec out(x.begin(), x.end());
        if (is_box()) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], box().lower[i], box().upper[i]);
            return out;
        }
        const L2Ball& b = ball();
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += (out[i] - b.center[i]) * (out[i] - b.center[i]);
        const double norm = std::sqrt(s);
        if (norm <= b.radius) return out;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = b.center[i] + (out[i] - b.center[i]) * (b.radius / norm);
        return out;
    }

    /// min over the domain of g^T x.
    double support_min(std::span<const double> g) const {
        if (g.size() != size()) throw ShapeError("domain/objective size mismatch");
        if (is_box()) {
            const Box& b = box();
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * box_argmin(g[i], b.lower[i], b.upper[i]);
            return s;
        }
        const L2Ball& b = ball();
        return dot(g, b.center) - b.radius * std::sqrt(squared_norm(g));
    }

private:
    std::variant<Box, L2Ball> value_;
};

/// Bounds on the pre-activations of every hidden layer h in [0, n-1).
struct PreActBounds {
    std::vector<Vec> lower;
    std::vector<Vec> upper;

    std::size_t num_layers() const noexcept { return lower.size(); }

    bool contains(const std::vector<Vec>& preacts, double tol = 0.0) const {
        for (std::size_t h = 0; h < lower.size(); ++h) {
            for (std::size_t j = 0; j < lower[h].size(); ++j) {
                if (preacts[h][j] < lower[h][j] - tol || preacts[h][j] > upper[h][j] + tol) return false;
            }
        }
        return true;
    }
};

/// Interval image of the box [lo, hi] through an affine layer.
inline std::pair<Vec, Vec> interval_affine(const AffineLayer& layer, std::span<const double> lo,
                                           std::span<const double> hi) {
    Vec center(lo.size()), radius(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
        center[i] = 0.5 * (lo[i] + hi[i]);
        radius[i] = 0.5 * (hi[i] - lo[i]);
    }
    Vec c = layer.forward(center);
    const Vec r = layer.abs_linear(radius);
    Vec out_lo(c.size()), out_hi(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        out_lo[i] = c[i] - r[i];
        out_hi[i] = c[i] + r[i];
    }
    return {std::move(out_lo), std::move(out_hi)};
}

/// Post-activation box of hidden layer h given its pre-activation bounds (activations are monotone).
inline std::pair<Vec, Vec> activation_box(Activation act, const Vec& l, const Vec& u) {
    Vec lo(l.size()), hi(u.size());
    for (std::size_t j = 0; j < l.size(); ++j) {
        lo[j] = activate(act, l[j]);
        hi[j] = activate(act, u[j]);
    }
    return {std::move(lo), std::move(hi)};
}

/// Interval bound propagation through the hidden layers. Ball domains are replaced by their bounding box.
inline PreActBounds interval_propagate(const Network& net, const InputDomain& dom) {
    PreActBounds out;
    Box box = dom.bounding_box();
    Vec lo = std::move(box.lower), hi = std::move(box.upper);
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        auto [l, u] = interval_affine(net.layer(h), lo, hi);
        std::tie(lo, hi) = activation_box(net.activation(h), l, u);
        out.lower.push_back(std::move(l));
        out.upper.push_back(std::move(u));
    }
    return out;
}

/// Lower bound on c^T (output of the last layer) obtained by pushing the interval of the last hidden
/// layer (or the input domain, for a single-layer network) through the final affine layer.
inline double interval_objective_bound(const Network& net, const InputDomain& dom, const PreActBounds& bounds,
                                       std::span<const double> c) {
    const AffineLayer& last = net.layer(net.num_affine() - 1);
    const Vec g = last.adjoint(c);
    double constant = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) constant += c[i] * last.bias_at(i);
    if (net.num_hidden() == 0) return constant + dom.support_min(g);
    const std::size_t h = net.num_hidden() - 1;
    auto [lo, hi] = activation_box(net.activation(h), bounds.lower[h], bounds.upper[h]);
    double s = constant;
    for (std::size_t j = 0; j < g.size(); ++j) s += g[j] * box_argmin(g[j], lo[j], hi[j]);
    return s;
}

/// Backward-pass dual variables of the Wong-Kolter bound.
struct WkState {
    std::vector<Vec> nu;      // per hidden layer, nu_h = D_h nu_hat_h
    std::vector<Vec> nu_hat;  // per hidden layer, nu_hat_h = W_{h+1}^T nu_{h+1}
    std::vector<Vec> slope;   // diagonal of D_h
    Vec input_nu_hat;         // W_0^T nu_0
};

struct WkResult {
    double bound;
    WkState state;
};

/// Wong-Kolter lower bound on c^T z_n over the ReLU relaxation, using the first `depth` affine layers
/// (`c` has the size of layer depth-1's output; `bounds` must cover hidden layers 0..depth-2).
inline WkResult wk_backward_bound(const Network& net, const InputDomain& dom, const PreActBounds& bounds,
                                  std::span<const double> c, std::size_t depth) {
    if (depth == 0 || depth > net.num_affine()) throw std::out_of_range("wk: invalid depth");
    for (std::size_t h = 0; h + 1 < depth; ++h) {
        if (net.activation(h) != Activation::relu) {
            throw UnsupportedActivation("the Wong-Kolter bound is only defined for ReLU networks");
        }
    }
    if (c.size() != net.layer(depth - 1).out_size()) throw ShapeError("wk: objective size mismatch");
    if (bounds.num_layers() + 1 < depth) throw std::invalid_argument("wk: missing intermediate bounds");

    const std::size_t hidden = depth - 1;
    WkState st;
    st.nu.resize(hidden);
    st.nu_hat.resize(hidden);
    st.slope.resize(hidden);

    // nu_n = -c; sum of -nu_i^T b_i starts with the last layer.
    Vec next = negated(c);
    double bound = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) bound -= next[i] * net.layer(depth - 1).bias_at(i);

    for (std::size_t step = 0; step < hidden; ++step) {
        const std::size_t h = hidden - 1 - step;
        Vec nu_hat = net.layer(h + 1).adjoint(next);
        const Vec& l = bounds.lower[h];
        const Vec& u = bounds.upper[h];
        Vec d(nu_hat.size()), nu(nu_hat.size());
        for (std::size_t j = 0; j < nu_hat.size(); ++j) {
            switch (relu_state(l[j], u[j])) {
                case ReluState::blocked: d[j] = 0.0; break;
                case ReluState::passing: d[j] = 1.0; break;
                case ReluState::ambiguous: d[j] = u[j] / (u[j] - l[j]); break;
            }
            nu[j] = d[j] * nu_hat[j];
            if (relu_state(l[j], u[j]) == ReluState::ambiguous) bound += l[j] * positive_part(nu[j]);
            bound -= nu[j] * net.layer(h).bias_at(j);
        }
        st.nu_hat[h] = std::move(nu_hat);
        st.slope[h] = std::move(d);
        st.nu[h] = nu;
        next = std::move(nu);
    }
    st.input_nu_hat = net.layer(0).adjoint(next);
    // min over C of -nu_hat_0^T z_0
    bound += dom.support_min(negated(st.input_nu_hat));
    return {bound, std::move(st)};
}

inline WkResult wk_backward_bound(const Network& net, const InputDomain& dom, const PreActBounds& bounds,
                                  std::span<const double> c) {
    return wk_backward_bound(net, dom, bounds, c, net.num_affine());
}

/// Layer-wise best of interval propagation and the Wong-Kolter bound; each layer reuses the tightened
/// bounds of the layers before it. Sigmoid networks fall back to interval propagation alone.
inline PreActBounds compute_intermediate_bounds(const Network& net, const InputDomain& dom) {
    PreActBounds out;
    const bool use_wk = net.all_relu();
    Box box = dom.bounding_box();
    Vec post_lo = std::move(box.lower), post_hi = std::move(box.upper);
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        auto [l, u] = interval_affine(net.layer(h), post_lo, post_hi);
        if (use_wk) {
            Vec c(l.size(), 0.0);
            for (std::size_t j = 0; j < l.size(); ++j) {
                c[j] = 1.0;
                const double lo = wk_backward_bound(net, dom, out, c, h + 1).bound;
                c[j] = -1.0;
                const double hi = -wk_backward_bound(net, dom, out, c, h + 1).bound;
                c[j] = 0.0;
                if (lo > l[j]) l[j] = lo;
                if (hi < u[j]) u[j] = hi;
                if (l[j] > u[j]) l[j] = u[j] = 0.5 * (l[j] + u[j]);
            }
        }
        std::tie(post_lo, post_hi) = activation_box(net.activation(h), l, u);
        out.lower.push_back(std::move(l));
        out.upper.push_back(std::move(u));
    }
    return out;
}

}  // namespace lagdec
