#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lagdec/hulls.hpp"
#include "lagdec/network.hpp"
#include "lagdec/prebounds.hpp"

namespace lagdec {

// Notation used below. Affine layers are numbered 0..n-1 and hidden layers 0..n-2. The decomposed
// problem has one block per affine layer:
//   block 0     : z_0 in C, zhat_a[0] = W_0 z_0 + b_0
//   block h + 1 : zhat_b[h] in [l_h, u_h], post[h] in hull(zhat_b[h]), zhat_a[h+1] = W_{h+1} post[h] + b_{h+1}
// and one dual vector rho[h] per hidden layer pricing the agreement zhat_b[h] == zhat_a[h].
// The objective enters as the fixed "dual" rho[n-1] = -c.

enum class SolverMethod { supergradient, proximal };

struct SolverConfig {
    SolverMethod method = SolverMethod::supergradient;
    int iterations = 100;
    // Supergradient (Adam ascent with a linearly decaying step)
    double alpha_start = 1e-2;
    double alpha_end = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    // Proximal (method of multipliers, Frank-Wolfe inner solve)
    double eta_start = 10.0;
    double eta_end = 500.0;
    double momentum = 0.3;
    int inner_iterations = 2;

    void validate() const {
        if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
        if (!(alpha_start > 0.0) || !(alpha_end > 0.0)) throw std::invalid_argument("alpha must be positive");
        if (!(eta_start > 0.0) || !(eta_end > 0.0)) throw std::invalid_argument("eta must be positive");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
        if (inner_iterations <= 0) throw std::invalid_argument("inner iterations must be positive");
    }
};

struct DecompDuals {
    std::vector<Vec> rho;
    std::vector<Vec> momentum;
};

struct PrimalCopies {
    Vec input;                  // z_0
    std::vector<Vec> zhat_a;    // n entries
    std::vector<Vec> zhat_b;    // n-1 entries
    std::vector<Vec> post;      // n-1 entries
};

/// One bound computation: network, input domain, intermediate bounds and objective vector c.
/// Sigmoid hulls are built once here.
class DecompProblem {
public:
    DecompProblem(const Network& net, InputDomain domain, PreActBounds bounds, Vec objective)
        : net_(&net), domain_(std::move(domain)), bounds_(std::move(bounds)), objective_(std::move(objective)) {
        if (objective_.size() != net.output_size()) throw ShapeError("objective size does not match network output");
        if (domain_.size() != net.input_size()) throw ShapeError("domain size does not match network input");
        if (bounds_.num_layers() != net.num_hidden()) throw std::invalid_argument("intermediate bounds missing");
        neg_objective_ = negated(objective_);
        hulls_.resize(net.num_hidden());
        for (std::size_t h = 0; h < net.num_hidden(); ++h) {
            if (bounds_.lower[h].size() != net.hidden_size(h)) throw ShapeError("bounds size mismatch");
            if (net.activation(h) != Activation::sigmoid) continue;
            for (std::size_t j = 0; j < bounds_.lower[h].size(); ++j) {
                hulls_[h].push_back(sigmoid_hull_build(bounds_.lower[h][j], bounds_.upper[h][j]));
            }
        }
    }

    const Network& net() const noexcept { return *net_; }
    const InputDomain& domain() const noexcept { return domain_; }
    const PreActBounds& bounds() const noexcept { return bounds_; }
    const Vec& objective() const noexcept { return objective_; }
    std::size_t num_blocks() const noexcept { return net_->num_affine(); }
    std::size_t num_hidden() const noexcept { return net_->num_hidden(); }
    const std::vector<SigmoidHull>& hulls(std::size_t h) const { return hulls_.at(h); }

    /// rho[h] for hidden layers, -c for h == n-1.
    std::span<const double> price(const std::vector<Vec>& rho, std::size_t h) const {
        if (h == num_hidden()) return neg_objective_;
        return rho.at(h);
    }

    std::vector<Vec> zero_duals() const {
        std::vector<Vec> rho;
        for (std::size_t h = 0; h < num_hidden(); ++h) rho.emplace_back(net_->hidden_size(h), 0.0);
        return rho;
    }

private:
    const Network* net_;
    InputDomain domain_;
    PreActBounds bounds_;
    Vec objective_;
    Vec neg_objective_;
    std::vector<std::vector<SigmoidHull>> hulls_;
};

/// Minimizer of one block subproblem. For block 0, `post` holds z_0 and `zhat_b` is empty.
struct BlockPoint {
    Vec zhat_b;
    Vec post;
    Vec zhat_a;
    double value = 0.0;
};

/// argmin over C of -rho_0^T (W_0 z_0 + b_0).
inline BlockPoint inner_min_p0(const Network& net, const InputDomain& dom, std::span<const double> rho0) {
    const AffineLayer& first = net.layer(0);
    const Vec v = first.adjoint(rho0);  // objective is -v^T z_0
    BlockPoint out;
    if (dom.is_box()) {
        const Box& b = dom.box();
        out.post.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out.post[i] = box_argmin(-v[i], b.lower[i], b.upper[i]);
    } else {
        const L2Ball& b = dom.ball();
        out.post = b.center;
        const double norm = std::sqrt(squared_norm(v));
        if (norm > 0.0) {
            for (std::size_t i = 0; i < v.size(); ++i) out.post[i] += b.radius * v[i] / norm;
        }
    }
    out.zhat_a = first.forward(out.post);
    out.value = -dot(rho0, out.zhat_a);
    return out;
}

/// argmin of rho_k^T zhat_b - rho_next^T zhat_a_next over block P_{h+1}.
/// `hulls` is only read for sigmoid layers.
inline BlockPoint inner_min_pk(const AffineLayer& next, Activation act, const Vec& l, const Vec& u,
                               std::span<const double> rho_k, std::span<const double> rho_next,
                               const std::vector<SigmoidHull>& hulls) {
    const Vec w = next.adjoint(rho_next);
    const std::size_t m = w.size();
    if (l.size() != m || u.size() != m || rho_k.size() != m) throw ShapeError("inner_min_pk: size mismatch");
    BlockPoint out;
    out.zhat_b.resize(m);
    out.post.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (act == Activation::relu) {
            switch (relu_state(l[j], u[j])) {
                case ReluState::blocked:
                    out.zhat_b[j] = box_argmin(rho_k[j], l[j], u[j]);
                    out.post[j] = 0.0;
                    break;
                case ReluState::passing:
                    out.zhat_b[j] = box_argmin(rho_k[j] - w[j], l[j], u[j]);
                    out.post[j] = out.zhat_b[j];
                    break;
                case ReluState::ambiguous: {
                    // rho*zhat - w*z is linear, so its minimum over the triangle sits on a vertex,
                    // and every vertex has z = max(zhat, 0).
                    const VertexMin vm = relu_vertex_min(rho_k[j], -w[j], l[j], u[j]);
                    out.zhat_b[j] = vm.zhat;
                    out.post[j] = vm.post;
                    break;
                }
            }
            continue;
        }
        const SigmoidHull& hull = hulls.at(j);
        const auto& pieces = w[j] > 0.0 ? hull.upper : hull.lower;
        double best_x = l[j], best_z = hull.eval_lower(l[j]);
        double best_v = std::numeric_limits<double>::infinity();
        for (const EnvelopePiece& p : pieces) {
            double x;
            if (p.kind == EnvelopePiece::Kind::chord) {
                x = box_argmin(rho_k[j] - w[j] * p.slope, p.lo, p.hi);
            } else {
                x = sigmoid_piece_min(rho_k[j], -w[j], p.lo, p.hi).zhat;
            }
            const double z = p.eval(x);
            const double v = rho_k[j] * x - w[j] * z;
            if (v < best_v) {
                best_v = v;
                best_x = x;
                best_z = z;
            }
        }
        out.zhat_b[j] = best_x;
        out.post[j] = best_z;
    }
    out.zhat_a = next.forward(out.post);
    out.value = dot(rho_k, out.zhat_b) - dot(rho_next, out.zhat_a);
    return out;
}

/// Minimizes block `b` of the decomposed problem with linear prices `rho` (rho[n-1] = -c implied).
inline BlockPoint solve_block(const DecompProblem& pb, std::size_t b, const std::vector<Vec>& rho) {
    if (b == 0) return inner_min_p0(pb.net(), pb.domain(), pb.price(rho, 0));
    const std::size_t h = b - 1;
    return inner_min_pk(pb.net().layer(b), pb.net().activation(h), pb.bounds().lower[h], pb.bounds().upper[h],
                        pb.price(rho, h), pb.price(rho, h + 1), pb.hulls(h));
}

inline void store_block(PrimalCopies& p, std::size_t b, BlockPoint&& x) {
    if (b == 0) {
        p.input = std::move(x.post);
        p.zhat_a[0] = std::move(x.zhat_a);
        return;
    }
    p.zhat_b[b - 1] = std::move(x.zhat_b);
    p.post[b - 1] = std::move(x.post);
    p.zhat_a[b] = std::move(x.zhat_a);
}

inline PrimalCopies empty_primal(const DecompProblem& pb) {
    PrimalCopies p;
    p.zhat_a.resize(pb.num_blocks());
    p.zhat_b.resize(pb.num_hidden());
    p.post.resize(pb.num_hidden());
    return p;
}

struct QResult {
    double bound;
    PrimalCopies primal;
};

/// The decomposition dual q(rho): a valid lower bound on the relaxation for every rho.
inline QResult eval_q(const DecompProblem& pb, const std::vector<Vec>& rho) {
    if (rho.size() != pb.num_hidden()) throw ShapeError("eval_q: wrong number of dual vectors");
    QResult out{0.0, empty_primal(pb)};
    for (std::size_t b = 0; b < pb.num_blocks(); ++b) {
        BlockPoint x = solve_block(pb, b, rho);
        out.bound += x.value;
        store_block(out.primal, b, std::move(x));
    }
    return out;
}

/// Duals rho_h = nu_h taken from the Wong-Kolter backward pass.
inline DecompDuals wk_initialize(const WkState& state) {
    DecompDuals d;
    d.rho = state.nu;
    for (const Vec& v : d.rho) d.momentum.emplace_back(v.size(), 0.0);
    return d;
}

/// Wong-Kolter duals for ReLU networks, zeros otherwise.
inline std::vector<Vec> default_initial_duals(const DecompProblem& pb) {
    if (!pb.net().all_relu()) return pb.zero_duals();
    return wk_initialize(wk_backward_bound(pb.net(), pb.domain(), pb.bounds(), pb.objective()).state).rho;
}

struct SolveResult {
    double bound = 0.0;             // best bound seen
    std::vector<Vec> rho;           // final duals
    PrimalCopies primal;            // minimizer of q at the final duals
    std::vector<double> trace;      // every evaluated bound, in order
};

inline double linear_schedule(double start, double end, int t, int total) {
    if (total <= 1) return start;
    return start + (end - start) * static_cast<double>(t) / static_cast<double>(total - 1);
}

/// Adam ascent on q(rho) with supergradient zhat_b - zhat_a.
inline SolveResult supergradient_solve(const DecompProblem& pb, const SolverConfig& cfg, std::vector<Vec> rho) {
    cfg.validate();
    std::vector<Vec> m, v;
    for (const Vec& r : rho) {
        m.emplace_back(r.size(), 0.0);
        v.emplace_back(r.size(), 0.0);
    }
    SolveResult res;
    QResult q = eval_q(pb, rho);
    res.bound = q.bound;
    res.trace.push_back(q.bound);
    for (int t = 0; t < cfg.iterations; ++t) {
        const double alpha = linear_schedule(cfg.alpha_start, cfg.alpha_end, t, cfg.iterations);
        const double c1 = 1.0 - std::pow(cfg.beta1, t + 1);
        const double c2 = 1.0 - std::pow(cfg.beta2, t + 1);
        for (std::size_t h = 0; h < rho.size(); ++h) {
            for (std::size_t j = 0; j < rho[h].size(); ++j) {
                const double g = q.primal.zhat_b[h][j] - q.primal.zhat_a[h][j];
                m[h][j] = cfg.beta1 * m[h][j] + (1.0 - cfg.beta1) * g;
                v[h][j] = cfg.beta2 * v[h][j] + (1.0 - cfg.beta2) * g * g;
                rho[h][j] += alpha * (m[h][j] / c1) / (std::sqrt(v[h][j] / c2) + cfg.adam_eps);
            }
        }
        q = eval_q(pb, rho);
        res.trace.push_back(q.bound);
        res.bound = std::max(res.bound, q.bound);
    }
    res.rho = std::move(rho);
    res.primal = std::move(q.primal);
    return res;
}

struct ProximalState {
    std::vector<Vec> rho;
    std::vector<Vec> momentum;
    PrimalCopies primal;
    double eta = 1.0;
};

/// Augmented Lagrangian c^T zhat_a[n-1] + sum rho^T r + |r|^2 / (2 eta), with r = zhat_b - zhat_a.
inline double augmented_lagrangian(const DecompProblem& pb, const std::vector<Vec>& rho, const PrimalCopies& p,
                                   double eta) {
    double value = dot(pb.objective(), p.zhat_a.back());
    for (std::size_t h = 0; h < pb.num_hidden(); ++h) {
        const Vec r = subtract(p.zhat_b[h], p.zhat_a[h]);
        value += dot(rho[h], r) + squared_norm(r) / (2.0 * eta);
    }
    return value;
}

/// Gradient of the augmented Lagrangian w.r.t. zhat_b[h] (and minus the gradient w.r.t. zhat_a[h]):
/// the closed-form next duals rho + (zhat_b - zhat_a) / eta.
inline Vec lagrangian_price(const ProximalState& st, std::size_t h) {
    Vec g = st.rho[h];
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += (st.primal.zhat_b[h][j] - st.primal.zhat_a[h][j]) / st.eta;
    return g;
}

/// Linearizes the augmented Lagrangian at the current primals and minimizes it over block `b`.
inline BlockPoint conditional_gradient_step(const DecompProblem& pb, const ProximalState& st, std::size_t b) {
    std::vector<Vec> prices(pb.num_hidden());
    if (b > 0) prices[b - 1] = lagrangian_price(st, b - 1);
    if (b < pb.num_hidden()) prices[b] = lagrangian_price(st, b);
    if (b == 0) return inner_min_p0(pb.net(), pb.domain(), pb.price(prices, 0));
    const std::size_t h = b - 1;
    return inner_min_pk(pb.net().layer(b), pb.net().activation(h), pb.bounds().lower[h], pb.bounds().upper[h],
                        pb.price(prices, h), pb.price(prices, h + 1), pb.hulls(h));
}

/// Coefficients of L(gamma) - L(0) = lin * gamma + quad * gamma^2 / 2 along the Frank-Wolfe segment of block b.
struct StepQuadratic {
    double lin = 0.0;
    double quad = 0.0;
};

inline StepQuadratic block_step_quadratic(const DecompProblem& pb, const ProximalState& st, std::size_t b,
                                          const BlockPoint& x) {
    StepQuadratic q;
    const std::size_t n_hidden = pb.num_hidden();
    if (b > 0) {
        const std::size_t h = b - 1;
        const Vec g = lagrangian_price(st, h);
        const Vec d = subtract(x.zhat_b, st.primal.zhat_b[h]);
        q.lin += dot(g, d);
        q.quad += squared_norm(d) / st.eta;
    }
    const Vec d = subtract(x.zhat_a, st.primal.zhat_a[b]);
    if (b < n_hidden) {
        const Vec g = lagrangian_price(st, b);
        q.lin -= dot(g, d);
        q.quad += squared_norm(d) / st.eta;
    } else {
        q.lin += dot(pb.objective(), d);
    }
    return q;
}

/// Exact minimizer over [0, 1] of the one-dimensional quadratic.
inline double clamped_step(const StepQuadratic& q) {
    if (q.quad < 1e-12) return q.lin < 0.0 ? 1.0 : 0.0;
    return std::clamp(-q.lin / q.quad, 0.0, 1.0);
}

inline double optimal_step_size(const DecompProblem& pb, const ProximalState& st, std::size_t b,
                                const BlockPoint& x) {
    return clamped_step(block_step_quadratic(pb, st, b, x));
}

inline Vec convex_combination(double gamma, const Vec& x, const Vec& z) {
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = gamma * x[i] + (1.0 - gamma) * z[i];
    return out;
}

inline void apply_block_step(PrimalCopies& p, std::size_t b, const BlockPoint& x, double gamma) {
    if (b == 0) {
        p.input = convex_combination(gamma, x.post, p.input);
        p.zhat_a[0] = convex_combination(gamma, x.zhat_a, p.zhat_a[0]);
        return;
    }
    p.zhat_b[b - 1] = convex_combination(gamma, x.zhat_b, p.zhat_b[b - 1]);
    p.post[b - 1] = convex_combination(gamma, x.post, p.post[b - 1]);
    p.zhat_a[b] = convex_combination(gamma, x.zhat_a, p.zhat_a[b]);
}

/// Called before every Frank-Wolfe block update with the state, block index, conditional gradient and step.
using ProximalObserver = std::function<void(const ProximalState&, std::size_t, const BlockPoint&, double)>;

/// Method of multipliers on the decomposition, with Gauss-Seidel Frank-Wolfe inner sweeps.
inline SolveResult proximal_solve(const DecompProblem& pb, const SolverConfig& cfg, std::vector<Vec> rho_init,
                                  const ProximalObserver& observer = {}) {
    cfg.validate();
    ProximalState st;
    st.rho = std::move(rho_init);
    for (const Vec& r : st.rho) st.momentum.emplace_back(r.size(), 0.0);
    QResult q = eval_q(pb, st.rho);
    st.primal = std::move(q.primal);
    SolveResult res;
    res.bound = q.bound;
    res.trace.push_back(q.bound);
    PrimalCopies last_eval = st.primal;
    for (int t = 0; t < cfg.iterations; ++t) {
        st.eta = linear_schedule(cfg.eta_start, cfg.eta_end, t, cfg.iterations);
        for (std::size_t h = 0; h < st.rho.size(); ++h) {
            for (std::size_t j = 0; j < st.rho[h].size(); ++j) {
                const double step = (st.primal.zhat_b[h][j] - st.primal.zhat_a[h][j]) / st.eta;
                st.momentum[h][j] = cfg.momentum * st.momentum[h][j] + step;
                st.rho[h][j] += st.momentum[h][j];
            }
        }
        for (int inner = 0; inner < cfg.inner_iterations; ++inner) {
            for (std::size_t b = 0; b < pb.num_blocks(); ++b) {
                const BlockPoint x = conditional_gradient_step(pb, st, b);
                const double gamma = optimal_step_size(pb, st, b, x);
                if (observer) observer(st, b, x, gamma);
                apply_block_step(st.primal, b, x, gamma);
            }
        }
        QResult qt = eval_q(pb, st.rho);
        res.trace.push_back(qt.bound);
        res.bound = std::max(res.bound, qt.bound);
        last_eval = std::move(qt.primal);
    }
    res.rho = std::move(st.rho);
    res.primal = std::move(last_eval);
    return res;
}

inline SolveResult solve_decomposition(const DecompProblem& pb, const SolverConfig& cfg, std::vector<Vec> rho_init) {
    if (cfg.method == SolverMethod::proximal) return proximal_solve(pb, cfg, std::move(rho_init));
    return supergradient_solve(pb, cfg, std::move(rho_init));
}

}  // namespace lagdec
