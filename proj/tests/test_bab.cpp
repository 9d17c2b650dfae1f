#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "lagdec/bab.hpp"

using namespace lagdec;
using namespace lagdec::testing;

namespace lagdec {
void PrintTo(BoundMethod m, std::ostream* os) { *os << to_string(m); }
}  // namespace lagdec

namespace {

BabConfig quick_config(BoundMethod m) {
    BabConfig cfg;
    cfg.method = m;
    cfg.solver.iterations = 50;
    cfg.batch_size = 4;
    cfg.max_subproblems = 20000;
    return cfg;
}

}  // namespace

TEST(Verify, TinyNetVerdicts) {
    const Property robust(tiny_net(), Box{{-1}, {1}}, Vec{1}, -0.1);
    EXPECT_EQ(verify(robust, quick_config(BoundMethod::proximal)).verdict, Verdict::robust);
    const Property broken(tiny_net(), Box{{-1}, {1}}, Vec{1}, 0.1);
    const BabResult r = verify(broken, quick_config(BoundMethod::proximal));
    ASSERT_EQ(r.verdict, Verdict::counterexample);
    EXPECT_LT(dot(Vec{1}, network_eval(tiny_net(), r.witness)), 0.1);
}

TEST(Verify, SingleAmbiguousNeuronNeedsOneSplit) {
    const Network pass({dense(2, 1, {1, 1}, {0, 10}), dense(1, 2, {1, -0.5}, {5})}, {Activation::relu});
    // output = relu(x) - 0.5 (x + 10) + 5 = relu(x) - 0.5 x, minimum 0 at x = 0.
    const Property prop(pass, Box{{-1}, {1}}, Vec{1}, -0.01);
    const BabResult r = verify(prop, quick_config(BoundMethod::wk));
    EXPECT_EQ(r.verdict, Verdict::robust);
    EXPECT_LE(r.subproblems, 3u);
}

TEST(SelectSplit, ScoreAndTies) {
    const Network net({dense(2, 1, {1, 1}, {0, 0}), dense(1, 2, {1, 1}, {0})}, {Activation::relu});
    PreActBounds b;
    b.lower = {Vec{-1, -1}};
    b.upper = {Vec{1, 1}};
    const auto tie = select_split(net, b, {}, Vec{1});
    ASSERT_TRUE(tie.has_value());
    EXPECT_EQ(tie->layer, 0u);
    EXPECT_EQ(tie->index, 0u);
    EXPECT_DOUBLE_EQ(tie->score, 0.5);
    b.lower = {Vec{-1, -2}};
    b.upper = {Vec{1, 2}};
    EXPECT_EQ(select_split(net, b, {}, Vec{1})->index, 1u);
    b.lower = {Vec{0, -1}};
    b.upper = {Vec{1, 0}};
    EXPECT_FALSE(select_split(net, b, {}, Vec{1}).has_value());
}

TEST(Branch, ChildrenClampBounds) {
    BabDomain parent;
    parent.bounds.lower = {Vec{-1, -2}};
    parent.bounds.upper = {Vec{1, 3}};
    parent.decisions = {{Decision::free, Decision::free}};
    const auto [on, off] = branch(parent, SplitChoice{0, 1, 1.0});
    EXPECT_EQ(on.bounds.lower[0][1], 0.0);
    EXPECT_EQ(on.bounds.upper[0][1], 3.0);
    EXPECT_EQ(on.decisions[0][1], Decision::passing);
    EXPECT_EQ(off.bounds.lower[0][1], -2.0);
    EXPECT_EQ(off.bounds.upper[0][1], 0.0);
    EXPECT_EQ(off.decisions[0][1], Decision::blocked);
}

TEST(Branch, ChildBoundsNoLooserThanParent) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance in = random_instance(seed, {3, 6, 6, 2});
        const auto split = select_split(in.net, in.bounds, {}, in.c);
        if (!split) continue;
        BabDomain parent;
        parent.bounds = in.bounds;
        parent.decisions = {std::vector<Decision>(6), std::vector<Decision>(6)};
        const auto [on, off] = branch(parent, *split);
        const double parent_lp = planet_lp_optimum(in.net, in.dom, in.bounds, in.c).value;
        for (const BabDomain* child : {&on, &off}) {
            EXPECT_GE(planet_lp_optimum(in.net, in.dom, child->bounds, in.c).value, parent_lp - 1e-9);
        }
    }
}

class VerifyAgreement : public ::testing::TestWithParam<BoundMethod> {};

TEST_P(VerifyAgreement, MatchesEnumeration) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Instance in = random_instance(seed, {3, 5, 5, 2});
        const double exact = exact_min_enumerate(in.net, in.dom, in.bounds, in.c).value;
        const double margin = 0.05 * (1.0 + std::fabs(exact));
        for (double t : {exact - margin, exact + margin}) {
            const Property prop(in.net, in.dom, in.c, t);
            const BabResult r = verify(prop, quick_config(GetParam()));
            const Verdict expected = exact >= t ? Verdict::robust : Verdict::counterexample;
            EXPECT_EQ(r.verdict, expected) << "seed " << seed << " threshold " << t;
            if (r.verdict == Verdict::counterexample) {
                EXPECT_LT(dot(in.c, network_eval(in.net, r.witness)), t);
            }
            for (std::size_t i = 1; i < r.lower_history.size(); ++i) {
                EXPECT_GE(r.lower_history[i], r.lower_history[i - 1]);
                EXPECT_LE(r.upper_history[i], r.upper_history[i - 1]);
            }
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Methods, VerifyAgreement,
                         ::testing::Values(BoundMethod::ip, BoundMethod::wk, BoundMethod::dsg, BoundMethod::dec_dsg,
                                           BoundMethod::supergradient, BoundMethod::proximal),
                         [](const auto& info) {
                             std::string s = to_string(info.param);
                             std::replace(s.begin(), s.end(), '-', '_');
                             return s;
                         });

TEST(Verify, BatchSizeDoesNotChangeVerdict) {
    const Instance in = random_instance(21, {3, 6, 6, 2});
    const double exact = exact_min_enumerate(in.net, in.dom, in.bounds, in.c).value;
    const Property prop(in.net, in.dom, in.c, exact - 0.02 * (1.0 + std::fabs(exact)));
    for (std::size_t batch : {1u, 2u, 8u}) {
        BabConfig cfg = quick_config(BoundMethod::supergradient);
        cfg.batch_size = batch;
        EXPECT_EQ(verify(prop, cfg).verdict, Verdict::robust) << "batch " << batch;
    }
}

TEST(Verify, SubproblemBudget) {
    const Instance in = random_instance(21, {3, 8, 8, 2});
    const double exact = exact_min_enumerate(in.net, in.dom, in.bounds, in.c).value;
    const Property prop(in.net, in.dom, in.c, exact - 1e-3);
    BabConfig cfg = quick_config(BoundMethod::ip);
    cfg.max_subproblems = 1;
    const BabResult r = verify(prop, cfg);
    // The interval bound rarely closes the root, so a budget of one node must stop early.
    if (r.verdict != Verdict::robust) {
        EXPECT_EQ(r.verdict, Verdict::timeout);
    }
    EXPECT_THROW(verify(prop, BabConfig{.batch_size = 0}), std::invalid_argument);
}

TEST(BoundMethod, Names) {
    EXPECT_EQ(parse_bound_method("dec-dsg"), BoundMethod::dec_dsg);
    EXPECT_STREQ(to_string(BoundMethod::proximal), "proximal");
    EXPECT_THROW(parse_bound_method("planet"), std::invalid_argument);
}

// The leaf LP minimizer of this instance sits a rounding error outside the box.
TEST(Verify, LeafWitnessOnBoxBoundary) {
    RandomNetSpec spec;
    spec.widths = {3, 6, 6, 2};
    const Network net = random_network(spec, 5012);
    const InputDomain dom = random_box(3, 0.5, 5012 + 7919);
    const Vec c = random_objective(2, 5012 + 104729);
    const double exact = exact_min_enumerate(net, dom, compute_intermediate_bounds(net, dom), c).value;
    const double t = exact + 0.05 * (1.0 + std::fabs(exact));
    for (BoundMethod m : {BoundMethod::ip, BoundMethod::wk}) {
        const BabResult r = verify(Property(net, dom, c, t), quick_config(m));
        ASSERT_EQ(r.verdict, Verdict::counterexample) << to_string(m);
        EXPECT_TRUE(dom.contains(r.witness, 0.0));
    }
}
