#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lagdec/bab.hpp"
#include "lagdec/io.hpp"
#include "lagdec/oracle.hpp"
#include "lagdec/parallel.hpp"

namespace lagdec {

/// Methods understood by the runner: every bounding method plus "bab" and "oracle".
struct RunSpec {
    std::string model_path;
    std::vector<std::string> property_paths;
    std::vector<std::string> methods{"wk"};
    SolverConfig solver{};
    BoundMethod bab_method = BoundMethod::proximal;
    std::size_t batch_size = 8;
    std::size_t max_subproblems = 100000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string out_path;
};

struct Problem {
    std::string id;
    std::shared_ptr<const Network> network;
    InputDomain domain;
    Vec objective;
    double threshold = 0.0;
};

struct CsvRow {
    std::string problem_id;
    std::string method;
    int iters = 0;
    double time_s = 0.0;
    double bound = 0.0;
    std::string verdict;
    std::size_t subproblems = 0;
    bool has_subproblems = false;
};

inline const char* kCsvHeader = "problem_id,method,iters,time_s,bound,verdict,subproblems";

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const std::vector<CsvRow>& rows) {
    os << kCsvHeader << '\n';
    for (const CsvRow& r : rows) {
        os << r.problem_id << ',' << r.method << ',' << r.iters << ',' << format_double(r.time_s) << ','
           << format_double(r.bound) << ',' << r.verdict << ',';
        if (r.has_subproblems) os << r.subproblems;
        os << '\n';
    }
}

inline void check_method(const std::string& m) {
    if (m == "bab" || m == "oracle") return;
    parse_bound_method(m);
}

/// Runs one (problem, method) pair. Intermediate bounds are computed per call so rows stay independent.
inline CsvRow run_method(const Problem& p, const std::string& method, const RunSpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    CsvRow row;
    row.problem_id = p.id;
    row.method = method;
    const Network& net = *p.network;
    try {
        if (method == "bab") {
            BabConfig cfg;
            cfg.method = spec.bab_method;
            cfg.solver = spec.solver;
            cfg.batch_size = spec.batch_size;
            cfg.max_subproblems = spec.max_subproblems;
            const BabResult r = verify(Property(net, p.domain, p.objective, p.threshold), cfg);
            row.iters = spec.solver.iterations;
            row.bound = r.global_lower;
            row.verdict = to_string(r.verdict);
            row.subproblems = r.subproblems;
            row.has_subproblems = true;
        } else {
            const PreActBounds bounds = compute_intermediate_bounds(net, p.domain);
            if (method == "oracle") {
                const LpSolution lp = planet_lp_optimum(net, p.domain, bounds, p.objective);
                if (lp.status != LpStatus::optimal) throw std::runtime_error(std::string("LP ") + to_string(lp.status));
                row.bound = lp.value;
            } else {
                const BoundMethod m = parse_bound_method(method);
                const bool iterative = m != BoundMethod::ip && m != BoundMethod::wk;
                row.iters = iterative ? spec.solver.iterations : 0;
                row.bound = compute_bound(net, p.domain, bounds, p.objective, m, spec.solver).lower;
            }
        }
    } catch (const std::exception& e) {
        throw std::runtime_error("problem '" + p.id + "', method " + method + ": " + e.what());
    }
    row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

/// One row per (problem, method), in problem-major order regardless of the worker count.
inline std::vector<CsvRow> run_problems(const std::vector<Problem>& problems, const RunSpec& spec) {
    for (const std::string& m : spec.methods) check_method(m);
    spec.solver.validate();
    const std::size_t nm = spec.methods.size();
    std::vector<CsvRow> rows(problems.size() * nm);
    parallel_for(rows.size(), spec.workers, [&](std::size_t i) {
        rows[i] = run_method(problems[i / nm], spec.methods[i % nm], spec);
    });
    return rows;
}

inline std::string path_stem(const std::string& path) {
    const std::size_t slash = path.find_last_of("/\\");
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    const std::size_t dot = name.find_last_of('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

/// Loads the model and properties listed in the RunSpec and runs every requested method.
inline std::vector<CsvRow> run_experiment(const RunSpec& spec) {
    auto net = std::make_shared<const Network>(load_model(spec.model_path));
    std::vector<Problem> problems;
    for (const std::string& path : spec.property_paths) {
        PropertySpec prop = load_property(path);
        if (prop.objective.size() != net->output_size()) {
            throw ShapeError("property '" + path + "': objective size does not match the model output");
        }
        problems.push_back(Problem{path_stem(path), net, std::move(prop.domain), std::move(prop.objective),
                                   prop.threshold});
    }
    return run_problems(problems, spec);
}

}  // namespace lagdec
