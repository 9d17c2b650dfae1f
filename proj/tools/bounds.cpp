// Command-line front end: bounds, branch and bound, and random problem generation.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lagdec/generate.hpp"
#include "lagdec/io.hpp"
#include "lagdec/runner.hpp"

namespace {

std::vector<std::string> split_commas(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const std::string& item : items) {
        std::stringstream ss(item);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (!part.empty()) out.push_back(part);
        }
    }
    return out;
}

int generate(const std::vector<std::size_t>& widths, std::uint64_t seed, double eps, double threshold,
             const std::string& activation, const std::string& model_out, const std::string& property_out) {
    lagdec::RandomNetSpec spec;
    spec.widths = widths;
    spec.activation = activation == "sigmoid" ? lagdec::Activation::sigmoid : lagdec::Activation::relu;
    const lagdec::Network net = lagdec::random_network(spec, seed);
    lagdec::save_model(net, model_out);
    lagdec::PropertySpec prop{lagdec::random_box(widths.front(), eps, seed + 1),
                              lagdec::random_objective(widths.back(), seed + 2), threshold};
    lagdec::save_property(prop, property_out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lower bounds and complete verification for feedforward ReLU/sigmoid networks"};
    lagdec::RunSpec spec;
    std::vector<std::string> methods{"wk"};
    std::string bab_method = "proximal";
    app.add_option("--model", spec.model_path, "model JSON file");
    app.add_option("--property", spec.property_paths, "property JSON file (repeatable)");
    app.add_option("--method", methods, "ip,wk,dsg,dec-dsg,supergradient,proximal,bab,oracle (comma separated)");
    app.add_option("--iters", spec.solver.iterations, "solver iterations")->capture_default_str();
    app.add_option("--alpha-start", spec.solver.alpha_start, "supergradient step at the first iteration")
        ->capture_default_str();
    app.add_option("--alpha-end", spec.solver.alpha_end, "supergradient step at the last iteration")
        ->capture_default_str();
    app.add_option("--eta-start", spec.solver.eta_start, "proximal weight at the first iteration")
        ->capture_default_str();
    app.add_option("--eta-end", spec.solver.eta_end, "proximal weight at the last iteration")->capture_default_str();
    app.add_option("--momentum", spec.solver.momentum, "dual momentum coefficient")->capture_default_str();
    app.add_option("--inner-iters", spec.solver.inner_iterations, "Frank-Wolfe sweeps per outer iteration")
        ->capture_default_str();
    app.add_option("--bound-method", bab_method, "bounding method used inside bab")->capture_default_str();
    app.add_option("--batch", spec.batch_size, "bab sub-problems bounded per batch")->capture_default_str();
    app.add_option("--max-subproblems", spec.max_subproblems, "bab budget")->capture_default_str();
    app.add_option("--seed", spec.seed, "random seed")->capture_default_str();
    app.add_option("--workers", spec.workers, "worker threads")->capture_default_str();
    app.add_option("--out", spec.out_path, "CSV output path (stdout when omitted)");

    CLI::App* gen = app.add_subcommand("generate", "write a random model and property");
    std::vector<std::size_t> widths{5, 20, 20, 3};
    std::uint64_t gen_seed = 0;
    double eps = 0.5, threshold = 0.0;
    std::string activation = "relu", model_out = "model.json", property_out = "property.json";
    gen->add_option("--widths", widths, "layer widths, input first")->delimiter(',')->capture_default_str();
    gen->add_option("--seed", gen_seed, "random seed")->capture_default_str();
    gen->add_option("--eps", eps, "half-width of the input box")->capture_default_str();
    gen->add_option("--threshold", threshold, "property threshold")->capture_default_str();
    gen->add_option("--activation", activation, "relu or sigmoid")->capture_default_str();
    gen->add_option("--model-out", model_out, "model path")->capture_default_str();
    gen->add_option("--property-out", property_out, "property path")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) return generate(widths, gen_seed, eps, threshold, activation, model_out, property_out);
        if (spec.model_path.empty() || spec.property_paths.empty()) {
            std::cerr << "error: --model and at least one --property are required\n";
            return 1;
        }
        spec.methods = split_commas(methods);
        spec.bab_method = lagdec::parse_bound_method(bab_method);
        const std::vector<lagdec::CsvRow> rows = lagdec::run_experiment(spec);
        if (spec.out_path.empty()) {
            lagdec::write_csv(std::cout, rows);
        } else {
            std::ofstream out(spec.out_path);
            if (!out) throw std::runtime_error("cannot write '" + spec.out_path + "'");
            lagdec::write_csv(out, rows);
        }
        for (const lagdec::CsvRow& r : rows) {
            if (r.verdict == "counterexample") return 2;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
