#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lagdec/network.hpp"

namespace lagdec {

enum class ReluState { blocked, passing, ambiguous };

/// Blocked takes precedence when l == u == 0 (both readings give z = zhat = 0).
inline ReluState relu_state(double l, double u) {
    if (u <= 0.0) return ReluState::blocked;
    if (l >= 0.0) return ReluState::passing;
    return ReluState::ambiguous;
}

struct HullInterval {
    double lower;
    double upper;
};

/// The vertical slice at `zhat` of the triangle relaxation of max(0, zhat) over [l, u].
inline HullInterval relu_hull_eval(double l, double u, double zhat) {
    if (!(l <= u)) throw std::domain_error("relu hull: l > u");
    if (zhat < l || zhat > u) throw std::domain_error("relu hull: zhat outside [l, u]");
    switch (relu_state(l, u)) {
        case ReluState::blocked: return {0.0, 0.0};
        case ReluState::passing: return {zhat, zhat};
        case ReluState::ambiguous: break;
    }
    return {zhat > 0.0 ? zhat : 0.0, u * (zhat - l) / (u - l)};
}

struct VertexMin {
    double zhat;
    double post;
    double value;
};

/// Minimizes a*zhat + b*max(zhat, 0) over the triangle vertices (l,0), (0,0), (u,u).
/// Ties go to the smallest zhat.
inline VertexMin relu_vertex_min(double a, double b, double l, double u) {
    if (!(l < 0.0 && u > 0.0)) throw std::invalid_argument("relu_vertex_min requires an ambiguous neuron");
    const std::array<VertexMin, 3> vertices{VertexMin{l, 0.0, a * l}, VertexMin{0.0, 0.0, 0.0},
                                            VertexMin{u, u, a * u + b * u}};
    VertexMin best = vertices[0];
    for (const VertexMin& v : vertices) {
        if (v.value < best.value) best = v;
    }
    return best;
}

/// argmin of g*x over [l, u]; ties go to l.
inline double box_argmin(double g, double l, double u) { return g < 0.0 ? u : l; }

inline double sigmoid_derivative(double x) {
    const double s = sigmoid(x);
    return s * (1.0 - s);
}

/// One piece of a sigmoid envelope: either the chord between two points or the sigmoid itself.
struct EnvelopePiece {
    enum class Kind { chord, curve };
    Kind kind;
    double lo, hi;
    double slope = 0.0;      // chord only
    double intercept = 0.0;  // chord only

    double eval(double x) const { return kind == Kind::chord ? slope * x + intercept : sigmoid(x); }
};

inline EnvelopePiece chord_piece(double x0, double y0, double x1, double y1) {
    EnvelopePiece p{EnvelopePiece::Kind::chord, x0, x1};
    p.slope = x1 > x0 ? (y1 - y0) / (x1 - x0) : 0.0;
    p.intercept = y0 - p.slope * x0;
    return p;
}

/// Convex hull of the sigmoid graph over [l, u]: concave upper envelope and convex lower envelope.
struct SigmoidHull {
    double l = 0.0, u = 0.0;
    bool degenerate = false;
    std::vector<EnvelopePiece> upper;  // ordered by increasing x, covering [l, u]
    std::vector<EnvelopePiece> lower;
    double upper_tangent = std::numeric_limits<double>::quiet_NaN();  // t > 0, when the upper envelope has a chord+curve split
    double lower_tangent = std::numeric_limits<double>::quiet_NaN();

    static double eval(const std::vector<EnvelopePiece>& pieces, double x) {
        for (const EnvelopePiece& p : pieces) {
            if (x <= p.hi) return p.eval(x);
        }
        return pieces.back().eval(x);
    }
    double eval_upper(double x) const { return eval(upper, x); }
    double eval_lower(double x) const { return eval(lower, x); }
};

/// Root t in (max(0,l), hi] of sigma'(t) (t - l) = sigma(t) - sigma(l), found by bisection.
inline double sigmoid_tangent_point(double l, double u) {
    double lo = l > 0.0 ? l : 0.0;
    double hi = u < 50.0 ? u : 50.0;
    const auto residual = [l](double t) { return sigmoid_derivative(t) * (t - l) - (sigmoid(t) - sigmoid(l)); };
    // residual(lo) >= 0 by convexity of sigma on (-inf, 0]; residual(hi) <= 0 in the split case.
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (residual(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace detail {

inline std::vector<EnvelopePiece> sigmoid_upper_pieces(double l, double u, double& tangent) {
    tangent = std::numeric_limits<double>::quiet_NaN();
    if (l >= 0.0) return {EnvelopePiece{EnvelopePiece::Kind::curve, l, u}};
    const double chord_slope = (sigmoid(u) - sigmoid(l)) / (u - l);
    if (sigmoid_derivative(u) >= chord_slope) return {chord_piece(l, sigmoid(l), u, sigmoid(u))};
    const double t = sigmoid_tangent_point(l, u);
    tangent = t;
    return {chord_piece(l, sigmoid(l), t, sigmoid(t)), EnvelopePiece{EnvelopePiece::Kind::curve, t, u}};
}

}  // namespace detail

/// Builds both envelopes; the lower one is the mirror image of the upper envelope of [-u, -l]
/// under sigma(x) = 1 - sigma(-x).
inline SigmoidHull sigmoid_hull_build(double l, double u) {
    if (!(l <= u)) throw std::domain_error("sigmoid hull: l > u");
    SigmoidHull hull;
    hull.l = l;
    hull.u = u;
    if (l == u) {
        hull.degenerate = true;
        hull.upper = {chord_piece(l, sigmoid(l), u, sigmoid(u))};
        hull.lower = hull.upper;
        return hull;
    }
    hull.upper = detail::sigmoid_upper_pieces(l, u, hull.upper_tangent);
    double mirrored_tangent = 0.0;
    const auto mirrored = detail::sigmoid_upper_pieces(-u, -l, mirrored_tangent);
    for (auto it = mirrored.rbegin(); it != mirrored.rend(); ++it) {
        if (it->kind == EnvelopePiece::Kind::curve) {
            hull.lower.push_back(EnvelopePiece{EnvelopePiece::Kind::curve, -it->hi, -it->lo});
        } else {
            const double x0 = -it->hi, x1 = -it->lo;
            hull.lower.push_back(chord_piece(x0, 1.0 - it->eval(it->hi), x1, 1.0 - it->eval(it->lo)));
        }
    }
    if (!std::isnan(mirrored_tangent)) hull.lower_tangent = -mirrored_tangent;
    return hull;
}

struct ScalarMin {
    double zhat;
    double value;
};

/// Minimizes c_lin*x + c_sig*sigma(x) over [l, u] by checking the endpoints and every stationary point.
inline ScalarMin sigmoid_piece_min(double c_lin, double c_sig, double l, double u) {
    const auto f = [&](double x) { return c_lin * x + c_sig * sigmoid(x); };
    std::array<double, 4> candidates{l, u, l, l};
    std::size_t count = 2;
    if (c_sig != 0.0) {
        const double disc = 1.0 + 4.0 * c_lin / c_sig;
        if (disc >= 0.0) {
            const double root = std::sqrt(disc);
            for (double s : {(1.0 - root) / 2.0, (1.0 + root) / 2.0}) {
                if (s <= 0.0 || s >= 1.0) continue;
                const double x = std::log(s / (1.0 - s));
                if (x >= l && x <= u) candidates[count++] = x;
            }
        }
    }
    ScalarMin best{l, f(l)};
    for (std::size_t i = 1; i < count; ++i) {
        const double x = candidates[i];
        const double v = f(x);
        if (v < best.value || (v == best.value && x < best.zhat)) best = {x, v};
    }
    return best;
}

}  // namespace lagdec
