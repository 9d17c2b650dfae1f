#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "lagdec/djdual.hpp"
#include "lagdec/oracle.hpp"

using namespace lagdec;
using namespace lagdec::testing;

namespace {

DjDuals random_dj(const Network& net, std::mt19937_64& rng) {
    DjDuals d = zero_dj_duals(net);
    for (Vec& v : d.mu) v = random_vec(v.size(), rng);
    for (Vec& v : d.lambda) v = random_vec(v.size(), rng);
    return d;
}

}  // namespace

TEST(EvalD, ScalarTerm) {
    // x in [-1, 1], zhat = x, output relu(x).
    const Network net({dense(1, 1, {1}, {0}), dense(1, 1, {1}, {0})}, {Activation::relu});
    const InputDomain dom(Box{{-1}, {1}});
    const DecompProblem pb(net, dom, compute_intermediate_bounds(net, dom), Vec{1});
    DjDuals d = zero_dj_duals(net);
    d.mu[0][0] = 1.0;
    d.lambda[0][0] = 2.0;
    const DResult r = eval_d(pb, d);
    EXPECT_EQ(r.point.zhat[0][0], -1.0);
    EXPECT_EQ(r.point.post[0][0], 0.0);
    // -1 from the zhat term, 0 from the z term, -1 from the input term.
    EXPECT_DOUBLE_EQ(r.bound, -2.0);
}

TEST(EvalD, SigmoidUnsupported) {
    const Instance in = random_instance(1, {2, 3, 1}, 0.5, Activation::sigmoid);
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    EXPECT_THROW(eval_d(pb, zero_dj_duals(in.net)), UnsupportedActivation);
}

TEST(EvalD, WeakDualityAgainstLp) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        const double lp = planet_lp_optimum(in.net, in.dom, in.bounds, in.c).value;
        std::mt19937_64 rng(seed);
        for (int k = 0; k < 20; ++k) EXPECT_LE(eval_d(pb, random_dj(in.net, rng)).bound, lp + 1e-8);
        EXPECT_LE(eval_d(pb, dsg_initial_duals(pb)).bound, lp + 1e-8);
    }
}

TEST(DecDsgBridge, DominatesOnRandomDuals) {
    std::size_t violations = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        std::mt19937_64 rng(seed);
        for (int k = 0; k < 20; ++k) {
            const DjDuals d = random_dj(in.net, rng);
            if (eval_q(pb, dec_dsg_bridge(d).rho).bound < eval_d(pb, d).bound - 1e-9) ++violations;
        }
    }
    EXPECT_EQ(violations, 0u);
}

TEST(DecDsgBridge, ZeroDualsAgree) {
    const Instance in = random_instance(4, {3, 6, 6, 2});
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    const DjDuals d = zero_dj_duals(in.net);
    EXPECT_NEAR(eval_q(pb, dec_dsg_bridge(d).rho).bound, eval_d(pb, d).bound, 1e-10);
}

TEST(DecDsgBridge, CopiesMu) {
    DjDuals d;
    d.mu = {Vec{1, 2}, Vec{3}};
    d.lambda = {Vec{4, 5}, Vec{6}};
    const DecompDuals r = dec_dsg_bridge(d);
    EXPECT_EQ(r.rho, d.mu);
    EXPECT_EQ(r.momentum, (std::vector<Vec>{Vec{0, 0}, Vec{0}}));
}

TEST(DsgSolve, ZeroIterations) {
    const Instance in = random_instance(2, {3, 6, 6, 2});
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    SolverConfig cfg;
    cfg.iterations = 0;
    const DjDuals init = dsg_initial_duals(pb);
    const DsgResult r = dsg_supergradient_solve(pb, cfg, init);
    EXPECT_EQ(r.bound, eval_d(pb, init).bound);
    EXPECT_EQ(r.trace.size(), 1u);
}

TEST(DsgSolve, BestDualsReproduceBound) {
    const Instance in = random_instance(3, {3, 8, 8, 2});
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    SolverConfig cfg;
    cfg.iterations = 300;
    const DsgResult r = dsg_supergradient_solve(pb, cfg, dsg_initial_duals(pb));
    double best = -kInf;
    for (double v : r.trace) best = std::max(best, v);
    EXPECT_EQ(r.bound, best);
    EXPECT_EQ(eval_d(pb, r.duals).bound, r.bound);
    EXPECT_GE(eval_q(pb, dec_dsg_bridge(r.duals).rho).bound, r.bound - 1e-9);
}

TEST(DsgSolve, NoBetterThanDecompositionOnAverage) {
    double dsg = 0.0, sg = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        SolverConfig cfg;
        cfg.iterations = 300;
        dsg += dsg_supergradient_solve(pb, cfg, dsg_initial_duals(pb)).bound;
        sg += supergradient_solve(pb, cfg, default_initial_duals(pb)).bound;
    }
    EXPECT_LE(dsg, sg);
}
