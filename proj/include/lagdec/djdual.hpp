#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "lagdec/decomp.hpp"

namespace lagdec {

/// Duals of the plain Lagrangian relaxation: mu prices the affine equalities, lambda the activations.
struct DjDuals {
    std::vector<Vec> mu;
    std::vector<Vec> lambda;
};

/// Inner minimizers of the relaxation for given duals, used as supergradient information.
struct DjPoint {
    Vec input;
    std::vector<Vec> zhat;  // per hidden layer
    std::vector<Vec> post;  // per hidden layer
};

struct DResult {
    double bound;
    DjPoint point;
};

inline DjDuals zero_dj_duals(const Network& net) {
    DjDuals d;
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        d.mu.emplace_back(net.hidden_size(h), 0.0);
        d.lambda.emplace_back(net.hidden_size(h), 0.0);
    }
    return d;
}

inline DResult eval_d(const DecompProblem& pb, const DjDuals& duals) {
    const Network& net = pb.net();
    if (!net.all_relu()) throw UnsupportedActivation("the relaxation dual is only implemented for ReLU networks");
    const std::size_t nh = pb.num_hidden();
    if (duals.mu.size() != nh || duals.lambda.size() != nh) throw ShapeError("eval_d: wrong number of dual vectors");
    const auto mu_at = [&](std::size_t h) { return pb.price(duals.mu, h); };

    DResult out{0.0, {}};
    out.point.zhat.resize(nh);
    out.point.post.resize(nh);
    for (std::size_t h = 0; h <= nh; ++h) {
        const auto mu = mu_at(h);
        for (std::size_t j = 0; j < mu.size(); ++j) out.bound -= mu[j] * net.layer(h).bias_at(j);
    }
    for (std::size_t h = 0; h < nh; ++h) {
        const Vec& l = pb.bounds().lower[h];
        const Vec& u = pb.bounds().upper[h];
        const auto mu = mu_at(h);
        const Vec& lam = duals.lambda[h];
        const Vec w = net.layer(h + 1).adjoint(mu_at(h + 1));
        Vec& zhat = out.point.zhat[h];
        Vec& post = out.point.post[h];
        zhat.resize(l.size());
        post.resize(l.size());
        for (std::size_t j = 0; j < l.size(); ++j) {
            // mu*zhat - lambda*relu(zhat) is piecewise linear with a kink at 0.
            const auto f = [&](double x) { return mu[j] * x - lam[j] * positive_part(x); };
            double best_x = l[j], best_v = f(l[j]);
            if (l[j] < 0.0 && u[j] > 0.0 && f(0.0) < best_v) {
                best_x = 0.0;
                best_v = f(0.0);
            }
            if (f(u[j]) < best_v) {
                best_x = u[j];
                best_v = f(u[j]);
            }
            zhat[j] = best_x;
            out.bound += best_v;

            const double g = lam[j] - w[j];
            post[j] = box_argmin(g, positive_part(l[j]), positive_part(u[j]));
            out.bound += g * post[j];
        }
    }
    const BlockPoint first = inner_min_p0(net, pb.domain(), mu_at(0));
    out.bound += -dot(mu_at(0), net.layer(0).linear(first.post));
    out.point.input = first.post;
    return out;
}

/// Adam ascent on d(mu, lambda). The returned duals are the ones that achieved the best bound.
struct DsgResult {
    double bound = 0.0;
    DjDuals duals;
    std::vector<double> trace;
};

inline DsgResult dsg_supergradient_solve(const DecompProblem& pb, const SolverConfig& cfg, DjDuals duals) {
    cfg.validate();
    const Network& net = pb.net();
    const std::size_t nh = pb.num_hidden();
    std::vector<Vec> m_mu, v_mu, m_lam, v_lam;
    for (std::size_t h = 0; h < nh; ++h) {
        m_mu.emplace_back(duals.mu[h].size(), 0.0);
        v_mu.emplace_back(duals.mu[h].size(), 0.0);
        m_lam.emplace_back(duals.lambda[h].size(), 0.0);
        v_lam.emplace_back(duals.lambda[h].size(), 0.0);
    }
    DsgResult res;
    DResult d = eval_d(pb, duals);
    res.bound = d.bound;
    res.duals = duals;
    res.trace.push_back(d.bound);
    for (int t = 0; t < cfg.iterations; ++t) {
        const double alpha = linear_schedule(cfg.alpha_start, cfg.alpha_end, t, cfg.iterations);
        const double c1 = 1.0 - std::pow(cfg.beta1, t + 1);
        const double c2 = 1.0 - std::pow(cfg.beta2, t + 1);
        const auto adam = [&](double& x, double& m, double& v, double g) {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            x += alpha * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
        };
        for (std::size_t h = 0; h < nh; ++h) {
            const Vec prev = h == 0 ? d.point.input : d.point.post[h - 1];
            const Vec affine = net.layer(h).forward(prev);
            for (std::size_t j = 0; j < duals.mu[h].size(); ++j) {
                const double zhat = d.point.zhat[h][j];
                adam(duals.mu[h][j], m_mu[h][j], v_mu[h][j], zhat - affine[j]);
                adam(duals.lambda[h][j], m_lam[h][j], v_lam[h][j], d.point.post[h][j] - positive_part(zhat));
            }
        }
        d = eval_d(pb, duals);
        res.trace.push_back(d.bound);
        if (d.bound > res.bound) {
            res.bound = d.bound;
            res.duals = duals;
        }
    }
    return res;
}

/// rho = mu.
inline DecompDuals dec_dsg_bridge(const DjDuals& duals) {
    DecompDuals out;
    out.rho = duals.mu;
    for (const Vec& v : out.rho) out.momentum.emplace_back(v.size(), 0.0);
    return out;
}

/// mu = WK nu, lambda = 0.
inline DjDuals dsg_initial_duals(const DecompProblem& pb) {
    DjDuals d = zero_dj_duals(pb.net());
    d.mu = wk_backward_bound(pb.net(), pb.domain(), pb.bounds(), pb.objective()).state.nu;
    return d;
}

}  // namespace lagdec
