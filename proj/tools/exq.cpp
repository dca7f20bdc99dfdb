#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "exq/driver.hpp"

namespace {

// exit codes: 0 success, 1 partial failure, 2 configuration error
constexpr int kOk = 0;
constexpr int kPartialFailure = 1;
constexpr int kConfigError = 2;

exq::RunConfig load_config_or_die(const std::string& path, std::size_t workers, long long seed) {
    exq::RunConfig cfg = exq::load_run_config(path);
    cfg.metrics.workers = workers;
    if (seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.metrics.seed = cfg.seed;
    }
    if (cfg.output_dir == "out") {
        if (const char* env = std::getenv("EXQ_OUTPUT_DIR")) cfg.output_dir = env;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-classifier explanation quality toolkit"};
    app.require_subcommand(1);
    // let `exq train --config ...` resolve the global options too
    app.fallthrough();

    std::string config_path;
    std::size_t workers = 1;
    long long seed_override = -1;
    app.add_option("--config", config_path, "JSON run configuration")->required(false);
    app.add_option("--workers", workers, "worker thread count (must not change results)");
    app.add_option("--seed", seed_override, "override the config master seed");

    auto* train = app.add_subcommand("train", "train all configured models");
    auto* evaluate = app.add_subcommand("evaluate", "run both explanation-quality metrics");

    auto* frontier = app.add_subcommand("frontier", "Pareto frontier and weighted ranking");
    std::string points_path;
    std::string quality = "infidelity";
    double min_auc = -1;
    frontier->add_option("--points", points_path,
                         "candidate points JSON (instead of evaluation exports)");
    frontier->add_option("--quality", quality, "second objective: infidelity | lipschitz");
    frontier->add_option("--min-auc", min_auc, "constraint: minimum AUC");

    auto* perturb = app.add_subcommand("perturb", "dump perturbed copies of one document");
    std::string doc_id;
    std::size_t n_perturb = 15;
    perturb->add_option("--doc", doc_id, "document id")->required();
    perturb->add_option("-n", n_perturb, "number of perturbations");

    auto* adapter_check = app.add_subcommand("adapter-check", "validate an external model adapter");
    std::string adapter_command;
    adapter_check->add_option("--command", adapter_command, "adapter command line")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (adapter_check->parsed()) {
            exq::ExternalModelHandle handle(adapter_command);
            std::cout << "hello ok: name=" << handle.name()
                      << " representation=" << handle.representation() << "\n";
            if (handle.representation() == "sparse-vector") {
                exq::SparseVector probe{4, {0, 2}, {0.5, 0.5}};
                auto probs = handle.predict({probe});
                std::cout << "predict ok: " << probs[0] << "\n";
            } else {
                auto probs = handle.predict_tokens({{"hello", "world"}});
                std::cout << "predict ok: " << probs[0] << "\n";
            }
            handle.shutdown();
            std::cout << "adapter protocol ok\n";
            return kOk;
        }

        if (config_path.empty()) {
            std::cerr << "error: --config is required\n";
            return kConfigError;
        }
        exq::RunConfig cfg;
        try {
            cfg = load_config_or_die(config_path, workers, seed_override);
        } catch (const std::exception& e) {
            std::cerr << "configuration error: " << e.what() << "\n";
            return kConfigError;
        }

        if (train->parsed()) {
            int failures = exq::run_train(cfg);
            return failures == 0 ? kOk : kPartialFailure;
        }
        if (evaluate->parsed()) {
            int failures = exq::run_evaluate(cfg);
            return failures == 0 ? kOk : kPartialFailure;
        }
        if (frontier->parsed()) {
            std::vector<exq::CandidatePoint> points =
                points_path.empty() ? exq::candidate_points_from_exports(cfg)
                                    : exq::candidate_points_from_file(points_path);
            exq::FrontierOptions opts;
            exq::Objective q = quality == "lipschitz" ? exq::Objective::LipschitzMin
                                                      : exq::Objective::InfidelityMin;
            opts.objectives = {exq::Objective::AucMax, q};
            opts.weights = {{exq::Objective::AucMax, 1.0}, {q, 1.0}};
            if (min_auc >= 0)
                opts.constraints.push_back({exq::Objective::AucMax, min_auc,
                                            std::numeric_limits<double>::infinity()});
            return exq::run_frontier(cfg, points, opts);
        }
        if (perturb->parsed()) {
            std::cout << exq::run_perturb_dump(cfg, doc_id, n_perturb);
            return kOk;
        }
    } catch (const exq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kPartialFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kPartialFailure;
    }
    return kOk;
}
