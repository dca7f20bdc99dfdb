#pragma once

#include <filesystem>
#include <iostream>

#include "exq/external.hpp"
#include "exq/metrics.hpp"
#include "exq/model_io.hpp"
#include "exq/report.hpp"
#include "exq/tradeoff.hpp"

namespace exq {

struct ModelSpec {
    std::string id;
    std::string type;  // logistic | additive | forest | embedding-classifier | external
    nlohmann::json params = nlohmann::json::object();
};

struct AttributionSpec {
    std::string model;
    std::string method;  // truth | lime | shap | saliency | ig
    nlohmann::json params = nlohmann::json::object();
};

struct RunConfig {
    std::string train_corpus;
    std::string test_corpus;
    TextConfig text;
    std::string embeddings_load_path;  // empty: train the built-in embeddings
    std::size_t embedding_dim = 16;
    std::size_t embedding_window = 4;
    std::vector<ModelSpec> models;
    std::vector<AttributionSpec> attributions;
    MetricConfig metrics;
    std::string target = "logit";  // attribution/metric target space
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string output_dir = "out";
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig cfg;
    if (!j.contains("seed") || !j["seed"].is_number())
        throw Error("config: master seed is mandatory");
    cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.seed_set = true;
    cfg.train_corpus = j.at("train_corpus").get<std::string>();
    cfg.test_corpus = j.at("test_corpus").get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("target")) {
        cfg.target = j["target"].get<std::string>();
        if (cfg.target != "logit" && cfg.target != "probability")
            throw Error("config: target must be 'logit' or 'probability'");
    }
    if (j.contains("text")) {
        const auto& t = j["text"];
        cfg.text.min_df = t.value("min_df", std::size_t{1});
        cfg.text.max_features = t.value("max_features", std::size_t{0});
        cfg.text.ngram_max = t.value("ngram_max", 1);
        if (cfg.text.ngram_max < 1 || cfg.text.ngram_max > 2)
            throw Error("config: ngram_max must be 1 or 2");
    }
    if (j.contains("embeddings")) {
        const auto& e = j["embeddings"];
        if (e.contains("load_path")) cfg.embeddings_load_path = e["load_path"].get<std::string>();
        cfg.embedding_dim = e.value("dim", std::size_t{16});
        cfg.embedding_window = e.value("window", std::size_t{4});
    }
    for (const auto& m : j.value("models", nlohmann::json::array())) {
        ModelSpec spec;
        spec.id = m.at("id").get<std::string>();
        spec.type = m.at("type").get<std::string>();
        if (m.contains("params")) spec.params = m["params"];
        cfg.models.push_back(spec);
    }
    for (const auto& a : j.value("attributions", nlohmann::json::array())) {
        AttributionSpec spec;
        spec.model = a.at("model").get<std::string>();
        spec.method = a.at("method").get<std::string>();
        if (a.contains("params")) spec.params = a["params"];
        cfg.attributions.push_back(spec);
    }
    if (j.contains("metrics")) {
        const auto& m = j["metrics"];
        cfg.metrics.pi = m.value("pi", 0.1);
        cfg.metrics.k = m.value("k", std::size_t{10});
        cfg.metrics.eps = m.value("eps", 0.25);
        cfg.metrics.neighborhood_size = m.value("m", std::size_t{15});
        cfg.metrics.lipschitz_sample = m.value("lipschitz_sample", std::size_t{35});
        cfg.metrics.infidelity_sample = m.value("infidelity_sample", std::size_t{100});
        cfg.metrics.n_draws = m.value("n_draws", std::size_t{256});
        cfg.metrics.sigma_scale = m.value("sigma_scale", 0.1);
    }
    cfg.metrics.seed = cfg.seed;

    for (const std::string& path : {cfg.train_corpus, cfg.test_corpus})
        if (!std::filesystem::exists(path)) throw Error("config: missing corpus file " + path);
    if (!cfg.embeddings_load_path.empty() && !std::filesystem::exists(cfg.embeddings_load_path))
        throw Error("config: missing embedding file " + cfg.embeddings_load_path);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    return parse_run_config(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Trained artifact bundle

struct Artifacts {
    TfidfModel tfidf;
    EmbeddingTable embeddings;
    std::map<std::string, LinearModel> linear;
    std::map<std::string, AdditiveModel> additive;
    std::map<std::string, ForestModel> forest;
    std::map<std::string, EmbeddingClassifier> embedding_cls;
    std::map<std::string, std::string> external_commands;
    std::map<std::string, double> test_auc;
};

// train everything in the config; returns nonzero model-failure count
inline int run_train(const RunConfig& cfg, Artifacts* out_artifacts = nullptr,
                     std::ostream& log = std::cout) {
    std::filesystem::create_directories(cfg.output_dir);
    Corpus train = load_corpus_tsv(cfg.train_corpus);
    Corpus test = load_corpus_tsv(cfg.test_corpus);

    Artifacts art;
    Vocabulary vocab = build_vocab(train, cfg.text);
    art.tfidf = fit_tfidf(vocab, cfg.text.ngram_max);

    std::vector<SparseVector> X_train, X_test;
    std::vector<int> y_train, y_test;
    for (const auto& d : train) {
        X_train.push_back(transform(art.tfidf, d).vector);
        y_train.push_back(d.label);
    }
    for (const auto& d : test) {
        X_test.push_back(transform(art.tfidf, d).vector);
        y_test.push_back(d.label);
    }

    if (!cfg.embeddings_load_path.empty()) {
        art.embeddings = load_embeddings(cfg.embeddings_load_path);
        auto extra = embedding_load_report(art.embeddings, vocab);
        if (!extra.empty())
            log << "embeddings: " << extra.size() << " tokens outside task vocabulary\n";
    } else {
        TrainEmbeddingsReport report;
        art.embeddings = train_embeddings(train, cfg.embedding_dim, cfg.embedding_window, &report);
        if (report.rank_reduced)
            log << "embeddings: rank reduced to " << art.embeddings.dim << "\n";
    }

    int failures = 0;
    for (const auto& spec : cfg.models) {
        try {
            TrainLog tlog;
            std::uint64_t seed = derive_seed(cfg.seed, "train/" + spec.id);
            std::vector<double> scores;
            if (spec.type == "logistic") {
                LogisticConfig mc;
                mc.l2 = spec.params.value("l2", 1e-4);
                mc.lr = spec.params.value("lr", 0.1);
                mc.epochs = spec.params.value("epochs", std::size_t{20});
                mc.seed = seed;
                art.linear[spec.id] = train_logistic(X_train, y_train, mc, &tlog);
                for (const auto& x : X_test) scores.push_back(art.linear[spec.id].predict_proba(x));
            } else if (spec.type == "additive") {
                AdditiveConfig mc;
                mc.n_bins = spec.params.value("n_bins", std::size_t{256});
                mc.rounds = spec.params.value("rounds", std::size_t{500});
                mc.lr = spec.params.value("lr", 0.1);
                mc.seed = seed;
                art.additive[spec.id] = train_additive(X_train, y_train, mc, &tlog);
                for (const auto& x : X_test)
                    scores.push_back(art.additive[spec.id].predict_proba(x));
            } else if (spec.type == "forest") {
                ForestConfig mc;
                mc.n_trees = spec.params.value("n_trees", std::size_t{100});
                mc.max_depth = spec.params.value("max_depth", std::size_t{12});
                mc.mtry_fraction = spec.params.value("mtry_fraction", 0.0);
                mc.seed = seed;
                art.forest[spec.id] = train_forest(X_train, y_train, mc);
                for (const auto& x : X_test) scores.push_back(art.forest[spec.id].predict_proba(x));
            } else if (spec.type == "embedding-classifier") {
                EmbeddingClassifierConfig mc;
                mc.freeze_embeddings = spec.params.value("freeze_embeddings", true);
                mc.lr = spec.params.value("lr", 0.5);
                mc.epochs = spec.params.value("epochs", std::size_t{30});
                mc.seed = seed;
                art.embedding_cls[spec.id] =
                    train_embedding_classifier(train, art.embeddings, mc, &tlog);
                for (const auto& d : test)
                    scores.push_back(art.embedding_cls[spec.id].predict_proba(d.tokens));
            } else if (spec.type == "external") {
                art.external_commands[spec.id] = spec.params.at("command").get<std::string>();
                ExternalModelHandle handle(art.external_commands[spec.id]);
                if (handle.representation() == "sparse-vector")
                    scores = handle.predict(X_test);
                else {
                    std::vector<std::vector<std::string>> toks;
                    for (const auto& d : test) toks.push_back(d.tokens);
                    scores = handle.predict_tokens(toks);
                }
            } else {
                throw Error("unknown model type: " + spec.type);
            }
            art.test_auc[spec.id] = auc(scores, y_test);
            for (const auto& w : tlog.warnings) log << spec.id << ": warning: " << w << "\n";
            nlohmann::json tl{{"epoch_loss", tlog.epoch_loss}, {"warnings", tlog.warnings}};
            write_text_file(cfg.output_dir + "/train_log_" + spec.id + ".json", tl.dump(2) + "\n");
        } catch (const std::exception& e) {
            log << spec.id << ": training failed: " << e.what() << "\n";
            ++failures;
        }
    }

    // persist artifacts
    write_text_file(cfg.output_dir + "/tfidf.json", to_json(art.tfidf).dump() + "\n");
    write_text_file(cfg.output_dir + "/embeddings.json", to_json(art.embeddings).dump() + "\n");
    for (const auto& [id, m] : art.linear)
        write_text_file(cfg.output_dir + "/model_" + id + ".json", to_json(m).dump() + "\n");
    for (const auto& [id, m] : art.additive)
        write_text_file(cfg.output_dir + "/model_" + id + ".json", to_json(m).dump() + "\n");
    for (const auto& [id, m] : art.forest)
        write_text_file(cfg.output_dir + "/model_" + id + ".json", to_json(m).dump() + "\n");
    for (const auto& [id, m] : art.embedding_cls)
        write_text_file(cfg.output_dir + "/model_" + id + ".json", to_json(m).dump() + "\n");
    nlohmann::json aucj = nlohmann::json::object();
    for (const auto& [id, v] : art.test_auc) aucj[id] = v;
    write_text_file(cfg.output_dir + "/auc.json", aucj.dump(2) + "\n");

    log << "model            auc\n";
    for (const auto& [id, v] : art.test_auc) log << id << "  " << v << "\n";

    if (out_artifacts) *out_artifacts = std::move(art);
    return failures;
}

inline Artifacts load_artifacts(const RunConfig& cfg) {
    Artifacts art;
    art.tfidf = tfidf_from_json(read_json_file(cfg.output_dir + "/tfidf.json"));
    art.embeddings = embedding_table_from_json(read_json_file(cfg.output_dir + "/embeddings.json"));
    for (const auto& spec : cfg.models) {
        std::string path = cfg.output_dir + "/model_" + spec.id + ".json";
        if (spec.type == "external") {
            art.external_commands[spec.id] = spec.params.at("command").get<std::string>();
            continue;
        }
        if (!std::filesystem::exists(path)) throw Error("missing model artifact: " + path);
        auto j = read_json_file(path);
        if (spec.type == "logistic")
            art.linear[spec.id] = linear_from_json(j);
        else if (spec.type == "additive")
            art.additive[spec.id] = additive_from_json(j);
        else if (spec.type == "forest")
            art.forest[spec.id] = forest_from_json(j);
        else if (spec.type == "embedding-classifier")
            art.embedding_cls[spec.id] = embedding_classifier_from_json(j);
    }
    auto aucj = read_json_file(cfg.output_dir + "/auc.json");
    for (auto it = aucj.begin(); it != aucj.end(); ++it) art.test_auc[it.key()] = it.value();
    return art;
}

// ---------------------------------------------------------------------------
// Pair wiring

namespace detail {

// target-space output of a feature-space model
inline ModelFn feature_model_fn(const Artifacts& art, const std::string& model_id,
                                const std::string& target) {
    bool logit_space = target == "logit";
    if (auto it = art.linear.find(model_id); it != art.linear.end()) {
        const LinearModel* m = &it->second;
        return [m, logit_space](const SparseVector& x) {
            return logit_space ? m->logit(x) : m->predict_proba(x);
        };
    }
    if (auto it = art.additive.find(model_id); it != art.additive.end()) {
        const AdditiveModel* m = &it->second;
        return [m, logit_space](const SparseVector& x) {
            return logit_space ? m->logit(x) : m->predict_proba(x);
        };
    }
    if (auto it = art.forest.find(model_id); it != art.forest.end()) {
        const ForestModel* m = &it->second;
        return [m, logit_space](const SparseVector& x) {
            return logit_space ? m->logit(x) : m->predict_proba(x);
        };
    }
    throw Error("no feature-space model with id '" + model_id + "'");
}

}  // namespace detail

inline EvalPair build_eval_pair(const Artifacts& art, const AttributionSpec& spec,
                                const std::string& target) {
    EvalPair pair;
    pair.model_id = spec.model;
    pair.method = spec.method;

    bool is_embedding = art.embedding_cls.count(spec.model) > 0;
    if (spec.method == "saliency" || spec.method == "ig") {
        if (!is_embedding)
            throw Error("invalid pair: " + spec.model + "/" + spec.method +
                        " (gradient attributions require the embedding classifier)");
        const EmbeddingClassifier* model = &art.embedding_cls.at(spec.model);
        pair.position_kind = true;
        std::string method = spec.method;
        std::size_t ig_steps = spec.params.value("steps", std::size_t{32});
        auto attribute = [model, method, ig_steps,
                          id = spec.model](const std::vector<std::string>& tokens,
                                           std::uint64_t) -> Attribution {
            if (method == "saliency") return saliency(*model, tokens, id);
            IntegratedGradientsConfig icfg;
            icfg.steps = ig_steps;
            return integrated_gradients(*model, tokens, icfg, id);
        };
        pair.attribute = [attribute](const std::vector<std::string>& tokens, std::uint64_t seed) {
            return attribute(tokens, seed).scores;
        };
        pair.represent = [model](const std::vector<std::string>& tokens) {
            std::vector<double> flat;
            flat.reserve(tokens.size() * model->table.dim);
            for (const auto& t : tokens) {
                auto e = model->embed(t);
                flat.insert(flat.end(), e.begin(), e.end());
            }
            return flat;
        };
        bool logit_space = target == "logit";
        pair.model_on_repr = [model, logit_space](const std::vector<double>& flat) {
            std::size_t dim = model->table.dim;
            std::vector<std::vector<double>> embs(flat.size() / dim,
                                                  std::vector<double>(dim, 0.0));
            for (std::size_t i = 0; i < flat.size(); ++i) embs[i / dim][i % dim] = flat[i];
            double z = model->logit_of_embeddings(embs);
            return logit_space ? z : sigmoid(z);
        };
        // per-token scalar distributed along that token's embedding direction
        pair.attribute_on_repr = [model, attribute](const std::vector<std::string>& tokens,
                                                    std::uint64_t seed) {
            auto scores = attribute(tokens, seed).scores;
            std::size_t dim = model->table.dim;
            std::vector<double> flat(tokens.size() * dim, 0.0);
            for (std::size_t t = 0; t < tokens.size(); ++t) {
                auto e = model->embed(tokens[t]);
                double n = 0;
                for (double v : e) n += v * v;
                n = std::sqrt(n);
                if (n == 0) continue;
                for (std::size_t d = 0; d < dim; ++d) flat[t * dim + d] = scores[t] * e[d] / n;
            }
            return flat;
        };
        return pair;
    }

    // feature-kind methods on the TF-IDF space
    const TfidfModel* tfidf = &art.tfidf;
    pair.position_kind = false;
    pair.represent = [tfidf](const std::vector<std::string>& tokens) {
        return transform(*tfidf, tokens).vector.to_dense();
    };

    // validate the pairing before wiring closures so mismatches surface as
    // pair errors rather than generic model-lookup failures
    if (spec.method == "truth" && !art.linear.count(spec.model) && !art.additive.count(spec.model))
        throw Error("invalid pair: " + spec.model +
                    "/truth (true local explanations need an interpretable model)");
    if (spec.method != "truth" && spec.method != "lime" && spec.method != "shap")
        throw Error("unknown attribution method: " + spec.method);

    ModelFn model_fn = detail::feature_model_fn(art, spec.model, target);
    pair.model_on_repr = [model_fn](const std::vector<double>& dense) {
        return model_fn(SparseVector::from_dense(dense));
    };

    std::function<Attribution(const SparseVector&, std::uint64_t)> attribute_sv;
    if (spec.method == "truth") {
        if (auto it = art.linear.find(spec.model); it != art.linear.end()) {
            const LinearModel* m = &it->second;
            attribute_sv = [m, id = spec.model](const SparseVector& x, std::uint64_t) {
                return truth_linear(*m, x, id);
            };
        } else if (auto it2 = art.additive.find(spec.model); it2 != art.additive.end()) {
            const AdditiveModel* m = &it2->second;
            attribute_sv = [m, id = spec.model](const SparseVector& x, std::uint64_t) {
                return truth_additive(*m, x, id);
            };
        } else {
            throw Error("invalid pair: " + spec.model +
                        "/truth (true local explanations need an interpretable model)");
        }
    } else if (spec.method == "lime") {
        LimeConfig lcfg;
        lcfg.n_samples = spec.params.value("n_samples", std::size_t{200});
        lcfg.kernel_width = spec.params.value("kernel_width", 0.75);
        lcfg.n_report_features = spec.params.value("n_report_features", std::size_t{10});
        attribute_sv = [model_fn, lcfg, id = spec.model](const SparseVector& x,
                                                         std::uint64_t seed) {
            LimeConfig c = lcfg;
            c.seed = seed;
            return lime(model_fn, x, c, id);
        };
    } else if (spec.method == "shap") {
        KernelShapConfig scfg;
        scfg.n_samples = spec.params.value("n_samples", std::size_t{200});
        attribute_sv = [model_fn, scfg, id = spec.model](const SparseVector& x,
                                                         std::uint64_t seed) {
            KernelShapConfig c = scfg;
            c.seed = seed;
            return kernel_shap(model_fn, x, c, {}, id);
        };
    } else {
        throw Error("unknown attribution method: " + spec.method);
    }

    pair.attribute = [tfidf, attribute_sv](const std::vector<std::string>& tokens,
                                           std::uint64_t seed) -> std::vector<double> {
        auto tr = transform(*tfidf, tokens);
        if (tr.empty_projection) return std::vector<double>(tfidf->vocabulary.size(), 0.0);
        return attribute_sv(tr.vector, seed).scores;
    };
    pair.attribute_on_repr = pair.attribute;
    return pair;
}

// ---------------------------------------------------------------------------
// Evaluate / frontier / perturb commands

inline int run_evaluate(const RunConfig& cfg, std::ostream& log = std::cout,
                        std::vector<EvaluationRun>* out_runs = nullptr) {
    Artifacts art = load_artifacts(cfg);
    Corpus test = load_corpus_tsv(cfg.test_corpus);
    NeighborIndex index = build_neighbor_index(art.embeddings, cfg.metrics.k);

    std::vector<EvalPair> pairs;
    for (const auto& spec : cfg.attributions)
        pairs.push_back(build_eval_pair(art, spec, cfg.target));

    auto runs = evaluate_suite(pairs, test, index, cfg.metrics);

    std::filesystem::create_directories(cfg.output_dir);
    write_text_file(cfg.output_dir + "/evaluation.csv", evaluation_csv(runs));
    write_text_file(cfg.output_dir + "/evaluation.json", evaluation_json(runs).dump(2) + "\n");
    write_text_file(cfg.output_dir + "/lipschitz_boxplot.svg", boxplot_svg(runs, "lipschitz"));
    write_text_file(cfg.output_dir + "/infidelity_boxplot.svg", boxplot_svg(runs, "infidelity"));

    int failures = 0;
    for (const auto& run : runs) {
        if (run.failed) {
            log << run.model_id << "/" << run.method << ": failed: " << run.failure << "\n";
            ++failures;
        } else {
            log << run.model_id << "/" << run.method
                << "  lipschitz median=" << run.lipschitz_stats.median
                << "  infidelity median=" << run.infidelity_stats.median << "\n";
        }
    }
    if (out_runs) *out_runs = std::move(runs);
    return failures;
}

inline std::vector<CandidatePoint> candidate_points_from_exports(const RunConfig& cfg) {
    auto eval = read_json_file(cfg.output_dir + "/evaluation.json");
    auto aucj = read_json_file(cfg.output_dir + "/auc.json");
    std::vector<CandidatePoint> points;
    std::vector<std::string> missing;
    for (const auto& run : eval) {
        if (run.value("failed", false)) continue;
        CandidatePoint p;
        p.model_id = run.at("model").get<std::string>();
        p.method = run.at("method").get<std::string>();
        if (!aucj.contains(p.model_id)) {
            missing.push_back(p.id() + ": no AUC for model " + p.model_id);
            continue;
        }
        p.auc = aucj[p.model_id].get<double>();
        p.infidelity = run.at("infidelity").at("stats").at("median").get<double>();
        p.lipschitz = run.at("lipschitz").at("stats").at("median").get<double>();
        points.push_back(p);
    }
    if (!missing.empty()) {
        std::string msg = "frontier: missing metric columns:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw Error(msg);
    }
    return points;
}

inline std::vector<CandidatePoint> candidate_points_from_file(const std::string& path) {
    auto j = read_json_file(path);
    std::vector<CandidatePoint> points;
    for (const auto& e : j) {
        CandidatePoint p;
        p.model_id = e.at("model").get<std::string>();
        p.method = e.at("method").get<std::string>();
        p.auc = e.at("auc").get<double>();
        p.infidelity = e.at("infidelity").get<double>();
        p.lipschitz = e.at("lipschitz").get<double>();
        points.push_back(p);
    }
    return points;
}

struct FrontierOptions {
    std::vector<Objective> objectives = {Objective::AucMax, Objective::InfidelityMin};
    std::vector<std::pair<Objective, double>> weights = {{Objective::AucMax, 1.0},
                                                         {Objective::InfidelityMin, 1.0}};
    std::vector<ObjectiveConstraint> constraints;
};

inline int run_frontier(const RunConfig& cfg, const std::vector<CandidatePoint>& points,
                        const FrontierOptions& opts, std::ostream& log = std::cout) {
    auto pareto = pareto_frontier(points, opts.objectives);
    auto ranking = weighted_rank(points, opts.weights, opts.constraints);

    std::filesystem::create_directories(cfg.output_dir);
    nlohmann::json j = frontier_json(pareto);
    nlohmann::json rank = nlohmann::json::array();
    for (const auto& r : ranking.ranking)
        rank.push_back({{"model", r.point.model_id}, {"method", r.point.method}, {"score", r.score}});
    j["ranking"] = rank;
    nlohmann::json excl = nlohmann::json::array();
    for (const auto& p : ranking.excluded) excl.push_back(p.id());
    j["excluded_by_constraints"] = excl;
    write_text_file(cfg.output_dir + "/frontier.json", j.dump(2) + "\n");
    write_text_file(cfg.output_dir + "/frontier.txt", frontier_table(pareto));
    Objective quality = opts.objectives.size() > 1 ? opts.objectives[1] : Objective::InfidelityMin;
    write_text_file(cfg.output_dir + "/frontier.svg", frontier_svg(points, pareto, quality));

    log << frontier_table(pareto);
    if (ranking.ranking.empty())
        log << "ranking: empty (all points excluded by constraints)\n";
    else
        for (std::size_t i = 0; i < ranking.ranking.size(); ++i)
            log << "rank " << i + 1 << ": " << ranking.ranking[i].point.id()
                << "  score=" << ranking.ranking[i].score << "\n";
    return 0;
}

// TSV dump of n perturbations of one document; replaced tokens marked *tok*.
inline std::string run_perturb_dump(const RunConfig& cfg, const std::string& doc_id,
                                    std::size_t n) {
    Artifacts art = load_artifacts(cfg);
    Corpus test = load_corpus_tsv(cfg.test_corpus);
    const Document* doc = nullptr;
    for (const auto& d : test)
        if (d.id == doc_id) doc = &d;
    if (!doc) throw Error("unknown doc id: " + doc_id);
    NeighborIndex index = build_neighbor_index(art.embeddings, cfg.metrics.k);

    PerturbationConfig pcfg;
    pcfg.pi = cfg.metrics.pi;
    pcfg.k = cfg.metrics.k;
    pcfg.seed = derive_seed(cfg.seed, "perturb-dump/" + doc_id);
    auto draws = make_neighborhood(*doc, index, pcfg, n);

    std::ostringstream out;
    for (const auto& p : draws) {
        out << p.source_id;
        std::size_t ri = 0;
        for (std::size_t t = 0; t < p.tokens.size(); ++t) {
            bool replaced = ri < p.replaced_positions.size() && p.replaced_positions[ri] == t;
            if (replaced) ++ri;
            out << '\t' << (replaced ? "*" + p.tokens[t] + "*" : p.tokens[t]);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace exq
