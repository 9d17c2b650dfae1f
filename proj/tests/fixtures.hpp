#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lagdec/decomp.hpp"
#include "lagdec/generate.hpp"
#include "lagdec/prebounds.hpp"

namespace lagdec::testing {

inline AffineLayer dense(std::size_t out, std::size_t in, Vec w, Vec b) {
    return AffineLayer::dense(Tensor({out, in}, std::move(w)), Tensor({out}, std::move(b)));
}

/// x -> relu(x) + relu(-x)
inline Network tiny_net() {
    return Network({dense(2, 1, {1, -1}, {0, 0}), dense(1, 2, {1, 1}, {0})}, {Activation::relu});
}

struct Instance {
    Network net;
    InputDomain dom;
    PreActBounds bounds;
    Vec c;
};

inline Instance random_instance(std::uint64_t seed, std::vector<std::size_t> widths, double eps = 0.5,
                                Activation act = Activation::relu) {
    RandomNetSpec spec;
    spec.widths = std::move(widths);
    spec.activation = act;
    Network net = random_network(spec, seed);
    InputDomain dom = random_box(spec.widths.front(), eps, seed + 7919);
    PreActBounds bounds = compute_intermediate_bounds(net, dom);
    Vec c = random_objective(spec.widths.back(), seed + 104729);
    return {std::move(net), std::move(dom), std::move(bounds), std::move(c)};
}

/// Widths of a small random net: 1-3 hidden layers of 3-8 neurons.
inline std::vector<std::size_t> small_widths(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> w{2 + rng() % 3};
    const std::size_t hidden = 1 + rng() % 3;
    for (std::size_t k = 0; k < hidden; ++k) w.push_back(3 + rng() % 6);
    w.push_back(1 + rng() % 3);
    return w;
}

inline Vec sample_box(const Box& box, std::mt19937_64& rng) {
    Vec x(box.lower.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = std::uniform_real_distribution<double>(box.lower[i], box.upper[i])(rng);
    }
    return x;
}

inline Vec sample_ball(const L2Ball& ball, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Vec d(ball.center.size());
    for (double& v : d) v = normal(rng);
    const double norm = std::sqrt(squared_norm(d));
    const double r = ball.radius * std::pow(std::uniform_real_distribution<double>()(rng), 1.0 / d.size());
    Vec x = ball.center;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += r * d[i] / norm;
    return x;
}

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vec v(n);
    for (double& x : v) x = normal(rng);
    return v;
}

inline std::vector<Vec> random_duals(const DecompProblem& pb, std::mt19937_64& rng, double scale = 1.0) {
    std::vector<Vec> rho = pb.zero_duals();
    for (Vec& r : rho) r = random_vec(r.size(), rng, scale);
    return rho;
}

}  // namespace lagdec::testing
