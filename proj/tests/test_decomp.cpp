#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "lagdec/decomp.hpp"
#include "lagdec/oracle.hpp"
#include "lagdec/parallel.hpp"

using namespace lagdec;
using namespace lagdec::testing;

namespace {

const std::vector<SigmoidHull> kNoHulls;

/// Exact check of the block constraints carried by a set of primal copies.
double block_violation(const DecompProblem& pb, const PrimalCopies& p) {
    const Network& net = pb.net();
    double worst = 0.0;
    const Box box = pb.domain().bounding_box();
    if (pb.domain().is_box()) {
        for (std::size_t i = 0; i < p.input.size(); ++i) {
            worst = std::max({worst, box.lower[i] - p.input[i], p.input[i] - box.upper[i]});
        }
    } else {
        worst = std::max(worst, std::sqrt(squared_norm(subtract(p.input, pb.domain().ball().center))) -
                                    pb.domain().ball().radius);
    }
    worst = std::max(worst, std::sqrt(squared_norm(subtract(p.zhat_a[0], net.layer(0).forward(p.input)))));
    for (std::size_t h = 0; h < pb.num_hidden(); ++h) {
        for (std::size_t j = 0; j < p.zhat_b[h].size(); ++j) {
            const double l = pb.bounds().lower[h][j], u = pb.bounds().upper[h][j];
            const double x = p.zhat_b[h][j], z = p.post[h][j];
            worst = std::max({worst, l - x, x - u});
            if (net.activation(h) == Activation::relu) {
                const HullInterval hi = relu_hull_eval(l, u, std::clamp(x, l, u));
                worst = std::max({worst, hi.lower - z, z - hi.upper});
            } else {
                const SigmoidHull& hull = pb.hulls(h)[j];
                worst = std::max({worst, hull.eval_lower(x) - z, z - hull.eval_upper(x)});
            }
        }
        worst = std::max(worst, std::sqrt(squared_norm(subtract(p.zhat_a[h + 1], net.layer(h + 1).forward(p.post[h])))));
    }
    return worst;
}

}  // namespace

TEST(InnerMinP0, SignRule) {
    const Network net({dense(2, 2, {1, 0, 0, 1}, {0, 0})}, {});
    const BlockPoint p = inner_min_p0(net, Box{{0, 0}, {1, 1}}, Vec{1, -2});
    EXPECT_EQ(p.post, (Vec{1, 0}));
    EXPECT_EQ(p.zhat_a, (Vec{1, 0}));
    EXPECT_DOUBLE_EQ(p.value, -1.0);
}

TEST(InnerMinP0, ZeroDualsReturnLowerCorner) {
    const Network net({dense(2, 2, {1, 2, 3, 4}, {0, 0})}, {});
    EXPECT_EQ(inner_min_p0(net, Box{{-1, 0}, {1, 1}}, Vec{0, 0}).post, (Vec{-1, 0}));
}

TEST(InnerMinP0, BallZeroDirectionReturnsCenter) {
    const Network net({dense(2, 2, {1, 2, 3, 4}, {0, 0})}, {});
    EXPECT_EQ(inner_min_p0(net, L2Ball{{0.5, -0.5}, 1.0}, Vec{0, 0}).post, (Vec{0.5, -0.5}));
}

TEST(InnerMinP0, MatchesBoxVertexEnumeration) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = 1 + trial % 10;
        const AffineLayer layer = dense(4, dim, random_vec(4 * dim, rng), random_vec(4, rng));
        const Network net({layer}, {});
        const Box box{random_vec(dim, rng), {}};
        Box b = box;
        b.upper = b.lower;
        for (double& v : b.upper) v += 0.5;
        const Vec rho = random_vec(4, rng);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t mask = 0; mask < (std::size_t{1} << dim); ++mask) {
            Vec x(dim);
            for (std::size_t i = 0; i < dim; ++i) x[i] = (mask >> i) & 1U ? b.upper[i] : b.lower[i];
            best = std::min(best, -dot(rho, layer.forward(x)));
        }
        EXPECT_NEAR(inner_min_p0(net, b, rho).value, best, 1e-12);
    }
}

TEST(InnerMinP0, BallMinimizer) {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        const AffineLayer layer = dense(3, 4, random_vec(12, rng), random_vec(3, rng));
        const Network net({layer}, {});
        const L2Ball ball{random_vec(4, rng), 0.7};
        const Vec rho = random_vec(3, rng);
        const BlockPoint p = inner_min_p0(net, ball, rho);
        const InputDomain dom(ball);
        EXPECT_NEAR(p.value, -dot(rho, layer.bias().data()) + dom.support_min(negated(layer.adjoint(rho))), 1e-12);
        std::mt19937_64 srng(trial);
        for (int s = 0; s < 200; ++s) EXPECT_LE(p.value, -dot(rho, layer.forward(sample_ball(ball, srng))) + 1e-12);
    }
}

TEST(InnerMinPk, ScalarAmbiguous) {
    const AffineLayer next = dense(1, 1, {1}, {0});
    const BlockPoint p = inner_min_pk(next, Activation::relu, {-1}, {1}, Vec{0.5}, Vec{-1}, kNoHulls);
    EXPECT_EQ(p.zhat_b, Vec{-1});
    EXPECT_EQ(p.post, Vec{0});
    EXPECT_DOUBLE_EQ(p.value, -0.5);
}

TEST(InnerMinPk, Blocked) {
    const AffineLayer next = dense(1, 1, {1}, {0});
    const BlockPoint p = inner_min_pk(next, Activation::relu, {-2}, {-1}, Vec{1}, Vec{3}, kNoHulls);
    EXPECT_EQ(p.zhat_b, Vec{-2});
    EXPECT_EQ(p.post, Vec{0});
}

TEST(InnerMinPk, Passing) {
    const AffineLayer next = dense(1, 1, {2}, {0});
    // rho - w = 1 - 2 = -1 < 0, so zhat goes to u.
    const BlockPoint p = inner_min_pk(next, Activation::relu, {1}, {3}, Vec{1}, Vec{1}, kNoHulls);
    EXPECT_EQ(p.zhat_b, Vec{3});
    EXPECT_EQ(p.post, Vec{3});
}

TEST(InnerMinPk, MatchesSimplexOnExplicitPolytope) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = 6, out = 3;
        const AffineLayer next = dense(out, m, random_vec(out * m, rng), random_vec(out, rng));
        Vec l(m), u(m);
        for (std::size_t j = 0; j < m; ++j) {
            const double a = random_vec(1, rng)[0], b = random_vec(1, rng)[0];
            l[j] = std::min(a, b);
            u[j] = std::max(a, b);
        }
        const Vec rho = random_vec(m, rng), rho_next = random_vec(out, rng);
        const BlockPoint p = inner_min_pk(next, Activation::relu, l, u, rho, rho_next, kNoHulls);
        // Variables: zhat (m), z (m).
        ExplicitLp lp(2 * m);
        const Vec w = next.adjoint(rho_next);
        for (std::size_t j = 0; j < m; ++j) {
            lp.objective[j] = rho[j];
            lp.objective[m + j] = -w[j];
            lp.lower[j] = l[j];
            lp.upper[j] = u[j];
            lp.lower[m + j] = 0.0;
            lp.upper[m + j] = std::max(u[j], 0.0);
            Vec row(2 * m, 0.0);
            switch (relu_state(l[j], u[j])) {
                case ReluState::blocked:
                    row[m + j] = 1.0;
                    lp.add_eq(row, 0.0);
                    break;
                case ReluState::passing:
                    row[m + j] = 1.0;
                    row[j] = -1.0;
                    lp.add_eq(row, 0.0);
                    break;
                case ReluState::ambiguous: {
                    row[j] = 1.0;
                    row[m + j] = -1.0;
                    lp.add_ineq(row, 0.0);
                    Vec chord(2 * m, 0.0);
                    chord[m + j] = u[j] - l[j];
                    chord[j] = -u[j];
                    lp.add_ineq(chord, -u[j] * l[j]);
                    break;
                }
            }
        }
        lp.constant = -dot(rho_next, next.bias().data());
        const LpSolution s = simplex_solve(lp);
        ASSERT_EQ(s.status, LpStatus::optimal);
        EXPECT_NEAR(p.value, s.value, 1e-9);
    }
}

TEST(InnerMinPk, SigmoidMatchesGrid) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = 4;
        const AffineLayer next = dense(2, m, random_vec(2 * m, rng), random_vec(2, rng));
        Vec l(m), u(m);
        std::vector<SigmoidHull> hulls;
        for (std::size_t j = 0; j < m; ++j) {
            const double a = 3 * random_vec(1, rng)[0], b = 3 * random_vec(1, rng)[0];
            l[j] = std::min(a, b);
            u[j] = std::max(a, b);
            hulls.push_back(sigmoid_hull_build(l[j], u[j]));
        }
        const Vec rho = random_vec(m, rng), rho_next = random_vec(2, rng);
        const BlockPoint p = inner_min_pk(next, Activation::sigmoid, l, u, rho, rho_next, hulls);
        const Vec w = next.adjoint(rho_next);
        double grid = -dot(rho_next, next.bias().data());
        for (std::size_t j = 0; j < m; ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i <= 20000; ++i) {
                const double x = l[j] + (u[j] - l[j]) * i / 20000.0;
                const double z = w[j] > 0 ? hulls[j].eval_upper(x) : hulls[j].eval_lower(x);
                best = std::min(best, rho[j] * x - w[j] * z);
            }
            grid += best;
            EXPECT_LE(hulls[j].eval_lower(p.zhat_b[j]) - 1e-12, p.post[j]);
            EXPECT_LE(p.post[j], hulls[j].eval_upper(p.zhat_b[j]) + 1e-12);
        }
        EXPECT_LE(p.value, grid + 1e-12);
        EXPECT_NEAR(p.value, grid, 1e-6);
    }
}

TEST(EvalQ, WkInitializationReproducesWk) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        const WkResult wk = wk_backward_bound(in.net, in.dom, in.bounds, in.c);
        EXPECT_NEAR(eval_q(pb, wk_initialize(wk.state).rho).bound, wk.bound, 1e-8);
    }
}

TEST(EvalQ, ZeroDualsGiveIntervalStyleBound) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        EXPECT_NEAR(eval_q(pb, pb.zero_duals()).bound, interval_objective_bound(in.net, in.dom, in.bounds, in.c),
                    1e-10);
    }
}

TEST(EvalQ, RandomDualsBelowLpOptimum) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        const LpSolution lp = planet_lp_optimum(in.net, in.dom, in.bounds, in.c);
        std::mt19937_64 rng(seed);
        for (int k = 0; k < 20; ++k) {
            const QResult q = eval_q(pb, random_duals(pb, rng));
            EXPECT_LE(q.bound, lp.value + 1e-8);
            EXPECT_LE(block_violation(pb, q.primal), 1e-12);
        }
    }
}

TEST(WkInitialize, AllPassingAndAllBlocked) {
    const Network net({dense(2, 1, {1, 2}, {5, -5}), dense(1, 2, {1, -1}, {0})}, {Activation::relu});
    const InputDomain dom(Box{{-1}, {1}});
    const PreActBounds b = compute_intermediate_bounds(net, dom);
    ASSERT_EQ(relu_state(b.lower[0][0], b.upper[0][0]), ReluState::passing);
    ASSERT_EQ(relu_state(b.lower[0][1], b.upper[0][1]), ReluState::blocked);
    const WkState st = wk_backward_bound(net, dom, b, Vec{1}).state;
    const DecompDuals d = wk_initialize(st);
    EXPECT_EQ(d.rho[0][0], st.nu_hat[0][0]);
    EXPECT_EQ(d.rho[0][1], 0.0);
    EXPECT_EQ(d.momentum[0], (Vec{0, 0}));
}

TEST(SupergradientSolve, ZeroIterationsIsEvalQ) {
    const Instance in = random_instance(3, {3, 6, 6, 2});
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    SolverConfig cfg;
    cfg.iterations = 0;
    const std::vector<Vec> init = default_initial_duals(pb);
    const SolveResult r = supergradient_solve(pb, cfg, init);
    EXPECT_EQ(r.bound, eval_q(pb, init).bound);
    EXPECT_EQ(r.rho, init);
    EXPECT_EQ(r.trace.size(), 1u);
}

TEST(SupergradientSolve, BestSoFarIsMaxOfTrace) {
    const Instance in = random_instance(5, {3, 8, 8, 2});
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    SolverConfig cfg;
    cfg.iterations = 200;
    const SolveResult r = supergradient_solve(pb, cfg, default_initial_duals(pb));
    double best = -std::numeric_limits<double>::infinity();
    for (double v : r.trace) best = std::max(best, v);
    EXPECT_EQ(r.bound, best);
    EXPECT_EQ(r.trace.size(), 201u);
}

TEST(SupergradientSolve, ConvergesToLpOptimum) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        const LpSolution lp = planet_lp_optimum(in.net, in.dom, in.bounds, in.c);
        SolverConfig cfg;
        cfg.iterations = 1000;
        const SolveResult r = supergradient_solve(pb, cfg, default_initial_duals(pb));
        EXPECT_LE(lp.value - r.bound, 0.01 * std::fabs(lp.value) + 1e-3) << "seed " << seed;
        for (double v : r.trace) EXPECT_LE(v, lp.value + 1e-8);
    }
}

TEST(ConditionalGradient, ZeroResidualMatchesInnerMinimizer) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        std::mt19937_64 rng(seed);
        ProximalState st;
        st.rho = random_duals(pb, rng);
        st.eta = 3.0;
        st.primal = eval_q(pb, st.rho).primal;
        for (std::size_t h = 0; h < pb.num_hidden(); ++h) st.primal.zhat_b[h] = st.primal.zhat_a[h];
        for (std::size_t b = 0; b < pb.num_blocks(); ++b) {
            const BlockPoint x = conditional_gradient_step(pb, st, b);
            const BlockPoint y = solve_block(pb, b, st.rho);
            EXPECT_EQ(x.zhat_b, y.zhat_b);
            EXPECT_EQ(x.post, y.post);
            EXPECT_EQ(x.zhat_a, y.zhat_a);
        }
    }
}

TEST(ConditionalGradient, LargeEtaCoefficientsApproachDuals) {
    const Instance in = random_instance(2, {3, 6, 6, 2});
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    std::mt19937_64 rng(2);
    ProximalState st;
    st.rho = random_duals(pb, rng);
    st.primal = eval_q(pb, random_duals(pb, rng)).primal;
    st.eta = 1e12;
    for (std::size_t h = 0; h < pb.num_hidden(); ++h) {
        const Vec g = lagrangian_price(st, h);
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(g[j], st.rho[h][j], 1e-10);
    }
}

TEST(ConditionalGradient, IteratesStayFeasible) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        SolverConfig cfg;
        cfg.method = SolverMethod::proximal;
        cfg.iterations = 30;
        double worst = 0.0;
        proximal_solve(pb, cfg, default_initial_duals(pb),
                       [&](const ProximalState& st, std::size_t b, const BlockPoint& x, double) {
                           worst = std::max(worst, block_violation(pb, st.primal));
                           PrimalCopies probe = st.primal;
                           apply_block_step(probe, b, x, 1.0);
                           worst = std::max(worst, block_violation(pb, probe));
                       });
        EXPECT_LE(worst, 1e-9) << "seed " << seed;
    }
}

TEST(OptimalStepSize, NoMoveWhenAtCurrentPrimals) {
    const Instance in = random_instance(1, {3, 5, 2});
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    ProximalState st;
    st.rho = default_initial_duals(pb);
    st.eta = 5.0;
    st.primal = eval_q(pb, st.rho).primal;
    BlockPoint same;
    same.post = st.primal.input;
    same.zhat_a = st.primal.zhat_a[0];
    EXPECT_EQ(optimal_step_size(pb, st, 0, same), 0.0);
}

TEST(OptimalStepSize, Clamping) {
    EXPECT_EQ(clamped_step({3.0, 1.0}), 0.0);   // unconstrained minimizer -3
    EXPECT_EQ(clamped_step({-2.0, 1.0}), 1.0);  // unconstrained minimizer 2
    EXPECT_DOUBLE_EQ(clamped_step({-0.5, 2.0}), 0.25);
    EXPECT_EQ(clamped_step({0.0, 0.0}), 0.0);
}

TEST(OptimalStepSize, PerturbationDoesNotImprove) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        SolverConfig cfg;
        cfg.method = SolverMethod::proximal;
        cfg.iterations = 20;
        std::size_t checked = 0, violations = 0;
        proximal_solve(pb, cfg, default_initial_duals(pb),
                       [&](const ProximalState& st, std::size_t b, const BlockPoint& x, double gamma) {
                           const auto value = [&](double g) {
                               PrimalCopies p = st.primal;
                               apply_block_step(p, b, x, g);
                               return augmented_lagrangian(pb, st.rho, p, st.eta);
                           };
                           const double at = value(gamma);
                           for (double d : {-0.01, 0.01}) {
                               if (at - value(std::clamp(gamma + d, 0.0, 1.0)) > 1e-10) ++violations;
                           }
                           ++checked;
                       });
        EXPECT_GT(checked, 0u);
        EXPECT_EQ(violations, 0u);
    }
}

TEST(ProximalSolve, ZeroMomentumIsPlainMultiplierStep) {
    const Instance in = random_instance(6, {3, 6, 6, 2});
    const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
    SolverConfig cfg;
    cfg.method = SolverMethod::proximal;
    cfg.iterations = 1;
    cfg.momentum = 0.0;
    cfg.eta_start = 4.0;
    const std::vector<Vec> init = default_initial_duals(pb);
    const PrimalCopies p0 = eval_q(pb, init).primal;
    const SolveResult r = proximal_solve(pb, cfg, init);
    for (std::size_t h = 0; h < init.size(); ++h) {
        for (std::size_t j = 0; j < init[h].size(); ++j) {
            EXPECT_DOUBLE_EQ(r.rho[h][j], init[h][j] + (p0.zhat_b[h][j] - p0.zhat_a[h][j]) / 4.0);
        }
    }
}

TEST(ProximalSolve, AnytimeSoundAndCloseToLp) {
    double gap = 0.0, scale = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        const LpSolution lp = planet_lp_optimum(in.net, in.dom, in.bounds, in.c);
        SolverConfig cfg;
        cfg.method = SolverMethod::proximal;
        cfg.iterations = 1000;
        const SolveResult r = proximal_solve(pb, cfg, default_initial_duals(pb));
        for (double v : r.trace) EXPECT_LE(v, lp.value + 1e-8);
        gap += lp.value - r.bound;
        scale += std::fabs(lp.value);
    }
    EXPECT_LE(gap / 20, 0.01 * scale / 20 + 1e-3);
}

// 400 outer iterations with two inner sweeps plus one bound evaluation each use 1200 sweeps of inner
// minimization, the cost of 1200 supergradient iterations.
TEST(ProximalSolve, NoWorseThanSupergradientAtMatchedBudget) {
    double gap_sg = 0.0, gap_px = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance in = random_instance(seed, small_widths(seed));
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        const double lp = planet_lp_optimum(in.net, in.dom, in.bounds, in.c).value;
        SolverConfig px;
        px.method = SolverMethod::proximal;
        px.iterations = 400;
        SolverConfig sg;
        sg.iterations = px.iterations * (px.inner_iterations + 1);
        gap_sg += lp - supergradient_solve(pb, sg, default_initial_duals(pb)).bound;
        gap_px += lp - proximal_solve(pb, px, default_initial_duals(pb)).bound;
    }
    EXPECT_LE(gap_px, gap_sg);
}

TEST(Solvers, SigmoidBoundsAreSound) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Instance in = random_instance(seed, {3, 6, 6, 2}, 0.5, Activation::sigmoid);
        const DecompProblem pb(in.net, in.dom, in.bounds, in.c);
        SolverConfig cfg;
        cfg.iterations = 200;
        const SolveResult sg = supergradient_solve(pb, cfg, default_initial_duals(pb));
        cfg.method = SolverMethod::proximal;
        const SolveResult px = proximal_solve(pb, cfg, default_initial_duals(pb));
        EXPECT_GE(sg.bound, sg.trace.front());
        std::mt19937_64 rng(seed);
        double sampled = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 5000; ++s) sampled = std::min(sampled, dot(in.c, network_eval(in.net, sample_box(in.dom.box(), rng))));
        EXPECT_LE(sg.bound, sampled);
        EXPECT_LE(px.bound, sampled);
    }
}

TEST(Solvers, BatchedMatchesSequential) {
    const Instance in = random_instance(8, {3, 8, 8, 3});
    std::vector<Vec> objectives;
    for (std::size_t k = 0; k < 3; ++k) {
        Vec c(3, 0.0);
        c[k] = 1.0;
        objectives.push_back(c);
        c[k] = -1.0;
        objectives.push_back(c);
    }
    SolverConfig cfg;
    cfg.iterations = 50;
    const auto run = [&](std::size_t i) {
        const DecompProblem pb(in.net, in.dom, in.bounds, objectives[i]);
        return supergradient_solve(pb, cfg, default_initial_duals(pb)).bound;
    };
    std::vector<double> sequential(objectives.size()), batched(objectives.size());
    for (std::size_t i = 0; i < objectives.size(); ++i) sequential[i] = run(i);
    parallel_for(objectives.size(), 3, [&](std::size_t i) { batched[i] = run(i); });
    EXPECT_EQ(sequential, batched);
}

TEST(SolverConfig, Validation) {
    SolverConfig cfg;
    cfg.momentum = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.alpha_start = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.iterations = -1;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
