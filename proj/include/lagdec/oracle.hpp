#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lagdec/decomp.hpp"
#include "lagdec/parallel.hpp"
#include "lagdec/prebounds.hpp"
#include "lagdec/simplex.hpp"

namespace lagdec {

inline constexpr std::size_t kDefaultLpVariableCap = 2000;

/// Column layout of the explicit relaxation: z_0, then (zhat_h, z_h) for every hidden layer.
struct PlanetLayout {
    std::size_t input_offset = 0;
    std::vector<std::size_t> zhat_offset;
    std::vector<std::size_t> post_offset;
    std::size_t num_vars = 0;
};

inline PlanetLayout planet_layout(const Network& net) {
    PlanetLayout lay;
    lay.num_vars = net.input_size();
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        lay.zhat_offset.push_back(lay.num_vars);
        lay.num_vars += net.hidden_size(h);
        lay.post_offset.push_back(lay.num_vars);
        lay.num_vars += net.hidden_size(h);
    }
    return lay;
}

struct PlanetLp {
    ExplicitLp lp;
    PlanetLayout layout;
    std::size_t hull_rows = 0;  // inequality rows contributed by ambiguous neurons
};

/// The triangle relaxation of min c^T f(x) over a box, written out row by row.
inline PlanetLp assemble_planet_lp(const Network& net, const InputDomain& dom, const PreActBounds& bounds,
                                   std::span<const double> c, std::size_t var_cap = kDefaultLpVariableCap) {
    if (!dom.is_box()) throw std::invalid_argument("the LP oracle needs a box domain");
    if (!net.all_relu()) throw UnsupportedActivation("the LP oracle only supports ReLU networks");
    if (c.size() != net.output_size()) throw ShapeError("objective size does not match network output");
    PlanetLp out;
    out.layout = planet_layout(net);
    const PlanetLayout& lay = out.layout;
    if (lay.num_vars > var_cap) {
        throw SizeError("LP has " + std::to_string(lay.num_vars) + " variables, cap is " + std::to_string(var_cap));
    }
    ExplicitLp& lp = out.lp;
    lp = ExplicitLp(lay.num_vars);
    lp.names.resize(lay.num_vars);
    for (std::size_t i = 0; i < net.input_size(); ++i) {
        lp.lower[i] = dom.box().lower[i];
        lp.upper[i] = dom.box().upper[i];
        lp.names[i] = "x_" + std::to_string(i);
    }
    const auto add_affine_terms = [&](Vec& row, std::size_t layer, std::size_t out_index, double scale) {
        const Tensor w = net.layer(layer).materialize();
        const std::size_t cols = w.dim(1);
        const std::size_t src = layer == 0 ? lay.input_offset : lay.post_offset[layer - 1];
        for (std::size_t k = 0; k < cols; ++k) row[src + k] += scale * w[out_index * cols + k];
    };
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        const Vec& l = bounds.lower[h];
        const Vec& u = bounds.upper[h];
        const Tensor w = net.layer(h).materialize();
        const std::size_t cols = w.dim(1);
        const std::size_t src = h == 0 ? lay.input_offset : lay.post_offset[h - 1];
        for (std::size_t j = 0; j < net.hidden_size(h); ++j) {
            const std::size_t zh = lay.zhat_offset[h] + j;
            const std::size_t z = lay.post_offset[h] + j;
            lp.names[zh] = "zhat_" + std::to_string(h) + "_" + std::to_string(j);
            lp.names[z] = "z_" + std::to_string(h) + "_" + std::to_string(j);
            lp.lower[zh] = l[j];
            lp.upper[zh] = u[j];
            lp.lower[z] = 0.0;
            lp.upper[z] = positive_part(u[j]);
            // zhat = W z_prev + b
            Vec row(lay.num_vars, 0.0);
            row[zh] = 1.0;
            for (std::size_t k = 0; k < cols; ++k) row[src + k] -= w[j * cols + k];
            lp.add_eq(std::move(row), net.layer(h).bias_at(j));
            switch (relu_state(l[j], u[j])) {
                case ReluState::blocked: {
                    Vec r(lay.num_vars, 0.0);
                    r[z] = 1.0;
                    lp.add_eq(std::move(r), 0.0);
                    break;
                }
                case ReluState::passing: {
                    Vec r(lay.num_vars, 0.0);
                    r[z] = 1.0;
                    r[zh] = -1.0;
                    lp.add_eq(std::move(r), 0.0);
                    break;
                }
                case ReluState::ambiguous: {
                    Vec nonneg(lay.num_vars, 0.0);  // -z <= 0
                    nonneg[z] = -1.0;
                    lp.add_ineq(std::move(nonneg), 0.0);
                    Vec above(lay.num_vars, 0.0);   // zhat - z <= 0
                    above[zh] = 1.0;
                    above[z] = -1.0;
                    lp.add_ineq(std::move(above), 0.0);
                    // (u - l) z - u zhat <= -u l
                    Vec chord(lay.num_vars, 0.0);
                    chord[z] = u[j] - l[j];
                    chord[zh] = -u[j];
                    lp.add_ineq(std::move(chord), -u[j] * l[j]);
                    out.hull_rows += 3;
                    break;
                }
            }
        }
    }
    // c^T (W_{n-1} z_{n-2} + b_{n-1})
    const std::size_t last = net.num_affine() - 1;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i] == 0.0) continue;
        add_affine_terms(lp.objective, last, i, c[i]);
        lp.constant += c[i] * net.layer(last).bias_at(i);
    }
    return out;
}

/// Concatenates z_0, zhat_b and post of a decomposition primal into an LP point.
inline Vec planet_point(const PlanetLayout& lay, const PrimalCopies& p) {
    Vec x(lay.num_vars, 0.0);
    std::copy(p.input.begin(), p.input.end(), x.begin() + static_cast<long>(lay.input_offset));
    for (std::size_t h = 0; h < lay.zhat_offset.size(); ++h) {
        std::copy(p.zhat_b[h].begin(), p.zhat_b[h].end(), x.begin() + static_cast<long>(lay.zhat_offset[h]));
        std::copy(p.post[h].begin(), p.post[h].end(), x.begin() + static_cast<long>(lay.post_offset[h]));
    }
    return x;
}

/// The relaxation point obtained by a plain forward pass from x.
inline Vec forward_planet_point(const Network& net, const PlanetLayout& lay, std::span<const double> x) {
    Vec out(lay.num_vars, 0.0);
    std::copy(x.begin(), x.end(), out.begin());
    Vec cur(x.begin(), x.end());
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        cur = net.layer(h).forward(cur);
        for (std::size_t j = 0; j < cur.size(); ++j) {
            out[lay.zhat_offset[h] + j] = cur[j];
            cur[j] = positive_part(cur[j]);
            out[lay.post_offset[h] + j] = cur[j];
        }
    }
    return out;
}

/// LP optimum of the relaxation.
inline LpSolution planet_lp_optimum(const Network& net, const InputDomain& dom, const PreActBounds& bounds,
                                    std::span<const double> c) {
    return simplex_solve(assemble_planet_lp(net, dom, bounds, c).lp);
}

struct ExactMin {
    double value = kInf;
    Vec input;
    std::size_t patterns = 0;           // number of patterns enumerated
    std::size_t feasible_patterns = 0;
};

inline constexpr std::size_t kMaxEnumeratedNeurons = 16;

/// Pre-activations of every hidden layer as affine functions A x + a of the input, for a fixed pattern.
/// `passing[h][j]` selects z = zhat (true) or z = 0 (false).
inline ExplicitLp pattern_lp(const Network& net, const Box& box, const PreActBounds& bounds,
                             const std::vector<std::vector<char>>& passing, std::span<const double> c) {
    const std::size_t n_in = net.input_size();
    ExplicitLp lp(n_in);
    lp.lower = box.lower;
    lp.upper = box.upper;
    // Post-activation of the previous layer as rows of [coefficients | constant].
    std::vector<Vec> post(n_in);
    for (std::size_t i = 0; i < n_in; ++i) {
        post[i].assign(n_in + 1, 0.0);
        post[i][i] = 1.0;
    }
    const auto apply = [&](std::size_t layer) {
        const Tensor w = net.layer(layer).materialize();
        const std::size_t rows = w.dim(0), cols = w.dim(1);
        std::vector<Vec> pre(rows, Vec(n_in + 1, 0.0));
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t k = 0; k < cols; ++k) {
                const double wv = w[r * cols + k];
                if (wv == 0.0) continue;
                for (std::size_t i = 0; i <= n_in; ++i) pre[r][i] += wv * post[k][i];
            }
            pre[r][n_in] += net.layer(layer).bias_at(r);
        }
        return pre;
    };
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        std::vector<Vec> pre = apply(h);
        for (std::size_t j = 0; j < pre.size(); ++j) {
            double lo = bounds.lower[h][j], hi = bounds.upper[h][j];
            if (passing[h][j]) lo = std::max(lo, 0.0); else hi = std::min(hi, 0.0);
            if (lo > hi) {
                lp.add_ineq(Vec(n_in, 0.0), -1.0);  // marks the pattern infeasible
                continue;
            }
            Vec coef(pre[j].begin(), pre[j].begin() + static_cast<long>(n_in));
            const double k = pre[j][n_in];
            lp.add_ineq(coef, hi - k);
            lp.add_ineq(negated(coef), k - lo);
            if (!passing[h][j]) std::fill(pre[j].begin(), pre[j].end(), 0.0);
        }
        post = std::move(pre);
    }
    const std::vector<Vec> out = apply(net.num_affine() - 1);
    for (std::size_t r = 0; r < out.size(); ++r) {
        for (std::size_t i = 0; i < n_in; ++i) lp.objective[i] += c[r] * out[r][i];
        lp.constant += c[r] * out[r][n_in];
    }
    return lp;
}

/// Exact minimum of c^T f(x) over the box by enumerating the activation patterns of ambiguous neurons.
/// Neurons with l >= 0 or u <= 0 keep their fixed state.
inline ExactMin exact_min_enumerate(const Network& net, const InputDomain& dom, const PreActBounds& bounds,
                                    std::span<const double> c, std::size_t workers = 1,
                                    std::size_t max_ambiguous = kMaxEnumeratedNeurons) {
    if (!dom.is_box()) throw std::invalid_argument("enumeration needs a box domain");
    if (!net.all_relu()) throw UnsupportedActivation("enumeration only supports ReLU networks");
    if (c.size() != net.output_size()) throw ShapeError("objective size does not match network output");
    std::vector<std::pair<std::size_t, std::size_t>> ambiguous;
    std::vector<std::vector<char>> base(net.num_hidden());
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        base[h].resize(net.hidden_size(h));
        for (std::size_t j = 0; j < base[h].size(); ++j) {
            const ReluState s = relu_state(bounds.lower[h][j], bounds.upper[h][j]);
            base[h][j] = s == ReluState::passing ? 1 : 0;
            if (s == ReluState::ambiguous) ambiguous.emplace_back(h, j);
        }
    }
    if (ambiguous.size() > max_ambiguous) {
        throw SizeError(std::to_string(ambiguous.size()) + " ambiguous neurons exceed the enumeration cap of " +
                        std::to_string(max_ambiguous));
    }
    const std::size_t count = std::size_t{1} << ambiguous.size();
    std::vector<LpSolution> results(count);
    parallel_for(count, workers, [&](std::size_t mask) {
        std::vector<std::vector<char>> pattern = base;
        for (std::size_t a = 0; a < ambiguous.size(); ++a) {
            pattern[ambiguous[a].first][ambiguous[a].second] = (mask >> a) & 1U ? 1 : 0;
        }
        results[mask] = simplex_solve(pattern_lp(net, dom.box(), bounds, pattern, c));
    });
    ExactMin out;
    out.patterns = count;
    for (const LpSolution& s : results) {
        if (s.status != LpStatus::optimal) continue;
        ++out.feasible_patterns;
        if (s.value < out.value) {
            out.value = s.value;
            out.input = s.point;
        }
    }
    return out;
}

struct UpperBound {
    double value = kInf;
    Vec input;
};

/// Smallest c^T f(x) over the candidate inputs.
inline UpperBound feasible_upper_bound(const Network& net, std::span<const double> c,
                                       const std::vector<Vec>& candidates) {
    UpperBound best;
    for (const Vec& x : candidates) {
        const double v = dot(c, network_eval(net, x));
        if (v < best.value) {
            best.value = v;
            best.input = x;
        }
    }
    return best;
}

}  // namespace lagdec
