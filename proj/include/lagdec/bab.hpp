#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagdec/decomp.hpp"
#include "lagdec/djdual.hpp"
#include "lagdec/oracle.hpp"
#include "lagdec/parallel.hpp"

namespace lagdec {

enum class BoundMethod { ip, wk, dsg, dec_dsg, supergradient, proximal };

inline const char* to_string(BoundMethod m) {
    switch (m) {
        case BoundMethod::ip: return "ip";
        case BoundMethod::wk: return "wk";
        case BoundMethod::dsg: return "dsg";
        case BoundMethod::dec_dsg: return "dec-dsg";
        case BoundMethod::supergradient: return "supergradient";
        case BoundMethod::proximal: return "proximal";
    }
    return "?";
}

inline BoundMethod parse_bound_method(const std::string& s) {
    for (BoundMethod m : {BoundMethod::ip, BoundMethod::wk, BoundMethod::dsg, BoundMethod::dec_dsg,
                          BoundMethod::supergradient, BoundMethod::proximal}) {
        if (s == to_string(m)) return m;
    }
    throw std::invalid_argument("unknown bounding method '" + s + "'");
}

/// Verify that c^T f(x) >= threshold for every x in the domain.
struct Property {
    Network network;
    InputDomain domain;
    Vec objective;
    double threshold = 0.0;

    Property(Network net, InputDomain dom, Vec c, double t = 0.0)
        : network(std::move(net)), domain(std::move(dom)), objective(std::move(c)), threshold(t) {
        if (objective.size() != network.output_size()) throw ShapeError("property objective size mismatch");
        if (domain.size() != network.input_size()) throw ShapeError("property domain size mismatch");
    }
};

/// Warm-start information carried from a node to its children.
struct WarmStart {
    std::vector<Vec> rho;
    std::optional<DjDuals> dj;
};

struct BoundOutcome {
    double lower = -kInf;
    WarmStart warm;
    std::vector<Vec> candidates;  // inputs worth evaluating for the incumbent
};

/// One lower bound on min c^T f(x) over the relaxation described by `bounds`.
inline BoundOutcome compute_bound(const Network& net, const InputDomain& dom, const PreActBounds& bounds,
                                  const Vec& c, BoundMethod method, const SolverConfig& solver,
                                  const WarmStart* warm = nullptr) {
    BoundOutcome out;
    switch (method) {
        case BoundMethod::ip:
            out.lower = interval_objective_bound(net, dom, bounds, c);
            return out;
        case BoundMethod::wk: {
            WkResult wk = wk_backward_bound(net, dom, bounds, c);
            out.lower = wk.bound;
            out.warm.rho = std::move(wk.state.nu);
            return out;
        }
        default: break;
    }
    const DecompProblem pb(net, dom, bounds, c);
    if (method == BoundMethod::dsg || method == BoundMethod::dec_dsg) {
        DjDuals init = warm && warm->dj ? *warm->dj : dsg_initial_duals(pb);
        DsgResult r = dsg_supergradient_solve(pb, solver, std::move(init));
        out.lower = r.bound;
        out.candidates.push_back(eval_d(pb, r.duals).point.input);
        if (method == BoundMethod::dec_dsg) {
            QResult q = eval_q(pb, dec_dsg_bridge(r.duals).rho);
            out.lower = std::max(out.lower, q.bound);
            out.candidates.push_back(q.primal.input);
        }
        out.warm.rho = r.duals.mu;
        out.warm.dj = std::move(r.duals);
        return out;
    }
    std::vector<Vec> init = warm && !warm->rho.empty() ? warm->rho : default_initial_duals(pb);
    SolverConfig cfg = solver;
    cfg.method = method == BoundMethod::proximal ? SolverMethod::proximal : SolverMethod::supergradient;
    SolveResult r = solve_decomposition(pb, cfg, std::move(init));
    out.lower = r.bound;
    out.candidates.push_back(std::move(r.primal.input));
    out.warm.rho = std::move(r.rho);
    return out;
}

/// ReLU decision of a branch-and-bound node.
enum class Decision : signed char { free = 0, passing = 1, blocked = -1 };

struct BabDomain {
    std::uint64_t id = 0;
    std::vector<std::vector<Decision>> decisions;
    PreActBounds bounds;  // inherited, clamped by the decisions
    WarmStart warm;
    double lower = -kInf;
    double upper = kInf;  // best network value found inside this node
};

struct SplitChoice {
    std::size_t layer;
    std::size_t index;
    double score;
};

/// Impact score |w| * u|l| / (u - l) of every ambiguous neuron, with w = W_{h+1}^T rho_{h+1}
/// (rho_{n-1} = -c). Returns nothing when no neuron is ambiguous.
inline std::optional<SplitChoice> select_split(const Network& net, const PreActBounds& bounds,
                                               const std::vector<Vec>& rho, const Vec& c) {
    std::optional<SplitChoice> best;
    const Vec neg_c = negated(c);
    for (std::size_t h = 0; h < net.num_hidden(); ++h) {
        const Vec& next = h + 1 < net.num_hidden() ? (rho.empty() ? Vec(net.hidden_size(h + 1), 0.0) : rho[h + 1])
                                                   : neg_c;
        const Vec w = net.layer(h + 1).adjoint(next);
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double l = bounds.lower[h][j], u = bounds.upper[h][j];
            if (relu_state(l, u) != ReluState::ambiguous) continue;
            const double score = std::fabs(w[j]) * u * (-l) / (u - l);
            if (!best || score > best->score) best = SplitChoice{h, j, score};
        }
    }
    return best;
}

/// The two children of `parent` after fixing neuron (layer, index). Child ids are left to the caller.
inline std::pair<BabDomain, BabDomain> branch(const BabDomain& parent, const SplitChoice& split) {
    BabDomain on = parent, off = parent;
    on.decisions[split.layer][split.index] = Decision::passing;
    on.bounds.lower[split.layer][split.index] = std::max(0.0, parent.bounds.lower[split.layer][split.index]);
    off.decisions[split.layer][split.index] = Decision::blocked;
    off.bounds.upper[split.layer][split.index] = std::min(0.0, parent.bounds.upper[split.layer][split.index]);
    return {std::move(on), std::move(off)};
}

enum class Verdict { robust, counterexample, timeout };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::robust: return "robust";
        case Verdict::counterexample: return "counterexample";
        case Verdict::timeout: return "timeout";
    }
    return "?";
}

struct BabConfig {
    BoundMethod method = BoundMethod::proximal;
    SolverConfig solver{};
    std::size_t batch_size = 8;
    std::size_t max_subproblems = 100000;
    double time_limit_s = 0.0;  // 0 disables the wall-clock budget
    std::size_t workers = 1;
};

struct BabResult {
    Verdict verdict = Verdict::timeout;
    Vec witness;                       // set for counterexamples
    double witness_value = kInf;
    double global_lower = -kInf;
    double global_upper = kInf;
    std::size_t subproblems = 0;       // number of bounded nodes, root included
    std::vector<double> lower_history;
    std::vector<double> upper_history;
};

namespace detail {

struct DomainOrder {
    bool operator()(const BabDomain& a, const BabDomain& b) const {
        if (a.lower != b.lower) return a.lower < b.lower;
        return a.id < b.id;
    }
};

}  // namespace detail

/// Best-first branch and bound over ReLU splits.
inline BabResult verify(const Property& prop, const BabConfig& cfg) {
    if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    const Network& net = prop.network;
    const Vec& c = prop.objective;
    const auto started = std::chrono::steady_clock::now();
    const auto out_of_time = [&] {
        if (cfg.time_limit_s <= 0.0) return false;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() > cfg.time_limit_s;
    };

    BabResult res;
    bool undecided_leaf = false;
    double undecided_lower = kInf;
    // Solver points can leave the domain by rounding, so candidates are projected first.
    const auto offer = [&](const Vec& candidate) {
        if (candidate.size() != net.input_size()) return;
        const Vec x = prop.domain.project(candidate);
        if (!prop.domain.contains(x, 0.0)) return;
        const double v = dot(c, network_eval(net, x));
        if (v < res.global_upper) {
            res.global_upper = v;
            res.witness = x;
            res.witness_value = v;
        }
    };

    // Bounds a node in place. Leaves of box domains are decided exactly by their LP.
    const auto bound_node = [&](BabDomain& node, std::vector<Vec>& candidates) {
        const auto split = select_split(net, node.bounds, {}, c);
        if (!split && prop.domain.is_box()) {
            std::vector<std::vector<char>> pattern(net.num_hidden());
            for (std::size_t h = 0; h < net.num_hidden(); ++h) {
                for (std::size_t j = 0; j < net.hidden_size(h); ++j) {
                    pattern[h].push_back(node.bounds.lower[h][j] >= 0.0 ? 1 : 0);
                }
            }
            const LpSolution lp = simplex_solve(pattern_lp(net, prop.domain.box(), node.bounds, pattern, c));
            if (lp.status != LpStatus::optimal) {
                node.lower = kInf;
                return;
            }
            node.lower = std::max(node.lower, lp.value);
            candidates.push_back(lp.point);
            return;
        }
        BoundOutcome b = compute_bound(net, prop.domain, node.bounds, c, cfg.method, cfg.solver, &node.warm);
        node.lower = std::max(node.lower, b.lower);
        node.warm = std::move(b.warm);
        candidates = std::move(b.candidates);
    };
    const auto is_leaf = [&](const BabDomain& node) { return !select_split(net, node.bounds, {}, c).has_value(); };
    const auto closed = [&](const BabDomain& node) {
        return node.lower >= prop.threshold || node.lower >= res.global_upper;
    };

    BabDomain root;
    root.bounds = compute_intermediate_bounds(net, prop.domain);
    root.decisions.resize(net.num_hidden());
    for (std::size_t h = 0; h < net.num_hidden(); ++h) root.decisions[h].assign(net.hidden_size(h), Decision::free);
    offer(prop.domain.center());
    {
        std::vector<Vec> cands;
        bound_node(root, cands);
        for (const Vec& x : cands) offer(x);
    }
    res.subproblems = 1;
    std::set<BabDomain, detail::DomainOrder> queue;
    std::uint64_t next_id = 1;
    const auto record = [&] {
        const double lo = std::min(queue.empty() ? kInf : queue.begin()->lower, undecided_lower);
        res.global_lower = std::max(res.global_lower, std::min(lo, res.global_upper));
        res.lower_history.push_back(res.global_lower);
        res.upper_history.push_back(res.global_upper);
    };
    const auto admit = [&](BabDomain&& node) {
        if (closed(node)) return;
        if (is_leaf(node)) {
            // an exact leaf below the threshold whose minimizer does not evaluate below it
            undecided_leaf = true;
            undecided_lower = std::min(undecided_lower, node.lower);
            return;
        }
        queue.insert(std::move(node));
    };
    res.global_lower = root.lower;
    admit(std::move(root));
    record();

    for (;;) {
        if (res.global_upper < prop.threshold) {
            res.verdict = Verdict::counterexample;
            return res;
        }
        if (queue.empty()) {
            res.verdict = undecided_leaf ? Verdict::timeout : Verdict::robust;
            return res;
        }
        if (res.subproblems >= cfg.max_subproblems || out_of_time()) {
            res.verdict = Verdict::timeout;
            return res;
        }
        std::vector<BabDomain> children;
        while (!queue.empty() && children.size() < 2 * cfg.batch_size) {
            BabDomain parent = std::move(queue.extract(queue.begin()).value());
            const std::vector<Vec> rho = parent.warm.rho.empty()
                                             ? wk_backward_bound(net, prop.domain, parent.bounds, c).state.nu
                                             : parent.warm.rho;
            const auto split = select_split(net, parent.bounds, rho, c);
            auto [on, off] = branch(parent, *split);
            on.id = next_id++;
            off.id = next_id++;
            children.push_back(std::move(on));
            children.push_back(std::move(off));
        }
        std::vector<std::vector<Vec>> candidates(children.size());
        parallel_for(children.size(), cfg.workers, [&](std::size_t i) { bound_node(children[i], candidates[i]); });
        res.subproblems += children.size();
        for (std::size_t i = 0; i < children.size(); ++i) {
            for (const Vec& x : candidates[i]) offer(x);
        }
        for (BabDomain& child : children) admit(std::move(child));
        // Nodes made redundant by a better incumbent.
        for (auto it = queue.begin(); it != queue.end();) {
            it = closed(*it) ? queue.erase(it) : std::next(it);
        }
        record();
    }
}

}  // namespace lagdec
