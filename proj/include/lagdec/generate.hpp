#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "lagdec/network.hpp"
#include "lagdec/prebounds.hpp"

namespace lagdec {

struct RandomNetSpec {
    std::vector<std::size_t> widths;  // input, hidden..., output
    Activation activation = Activation::relu;
    double weight_scale = 1.0;         // weights ~ N(0, scale^2 / fan_in)
    double bias_scale = 0.1;
};

/// Gaussian dense network, reproducible from the seed.
inline Network random_network(const RandomNetSpec& spec, std::uint64_t seed) {
    if (spec.widths.size() < 2) throw ShapeError("a network needs at least an input and an output width");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<AffineLayer> layers;
    for (std::size_t k = 0; k + 1 < spec.widths.size(); ++k) {
        const std::size_t in = spec.widths[k], out = spec.widths[k + 1];
        const double std_w = spec.weight_scale / std::sqrt(static_cast<double>(in));
        Vec w(in * out), b(out);
        for (double& v : w) v = std_w * normal(rng);
        for (double& v : b) v = spec.bias_scale * normal(rng);
        layers.push_back(AffineLayer::dense(Tensor({out, in}, std::move(w)), Tensor({out}, std::move(b))));
    }
    return Network(std::move(layers), std::vector<Activation>(spec.widths.size() - 2, spec.activation));
}

/// Box of half-width eps around a uniform point of [-1, 1]^n.
inline InputDomain random_box(std::size_t n, double eps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Box box{Vec(n), Vec(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = unif(rng);
        box.lower[i] = x - eps;
        box.upper[i] = x + eps;
    }
    return box;
}

/// Random objective with entries in {-1, 0, 1}, never all zero.
inline Vec random_objective(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(-1, 1);
    Vec c(n, 0.0);
    for (;;) {
        bool any = false;
        for (double& v : c) {
            v = pick(rng);
            any = any || v != 0.0;
        }
        if (any) return c;
    }
}

}  // namespace lagdec
