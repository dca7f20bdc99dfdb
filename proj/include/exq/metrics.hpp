#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include <nlohmann/json.hpp>

#include "exq/attributions.hpp"
#include "exq/common.hpp"
#include "exq/perturb.hpp"

namespace exq {

struct LipschitzResult {
    std::string doc_id;
    std::optional<double> value;  // absent when the neighborhood is empty
    std::size_t argmax_draw = 0;
    std::size_t n_retained = 0;
    std::size_t n_generated = 0;
};

struct InfidelityResult {
    std::string doc_id;
    double value = 0.0;
    std::size_t n_draws = 0;
    double sigma_scale = 0.0;
};

// max over retained perturbations of ||phi(x) - phi(x_j)||2 / ||x - x_j||2.
// The radius filter uses the normalized distance ||x - x_j|| / ||x||; the
// ratio itself uses raw distances. Zero-distance draws are skipped.
inline LipschitzResult local_lipschitz(const std::vector<double>& attrib_x,
                                       const std::vector<double>& repr_x,
                                       const std::vector<std::vector<double>>& attrib_perturbed,
                                       const std::vector<std::vector<double>>& repr_perturbed,
                                       double eps, const std::string& doc_id = "") {
    if (attrib_perturbed.size() != repr_perturbed.size())
        throw Error("local_lipschitz: neighborhood size mismatch");
    LipschitzResult res;
    res.doc_id = doc_id;
    res.n_generated = repr_perturbed.size();
    double x_norm = 0;
    for (double v : repr_x) x_norm += v * v;
    x_norm = std::sqrt(x_norm);
    if (x_norm == 0) throw Error("local_lipschitz: zero-norm representation");

    for (std::size_t j = 0; j < repr_perturbed.size(); ++j) {
        double d_raw = l2_distance(repr_x, repr_perturbed[j]);
        if (d_raw == 0) continue;
        if (d_raw / x_norm > eps) continue;
        double num = l2_distance(attrib_x, attrib_perturbed[j]);
        double ratio = num / d_raw;
        ++res.n_retained;
        if (!res.value || ratio > *res.value) {
            res.value = ratio;
            res.argmax_draw = j;
        }
    }
    return res;
}

// Monte-Carlo mean of (I . phi - (f(x) - f(x - I)))^2 over the noise draws.
inline InfidelityResult infidelity(const std::function<double(const std::vector<double>&)>& model_fn,
                                   const std::vector<double>& attribution,
                                   const std::vector<double>& x,
                                   const std::vector<std::vector<double>>& noise_draws,
                                   double sigma_scale, const std::string& doc_id = "") {
    if (attribution.size() != x.size()) throw Error("infidelity: attribution/input size mismatch");
    InfidelityResult res;
    res.doc_id = doc_id;
    res.n_draws = noise_draws.size();
    res.sigma_scale = sigma_scale;
    double f_x = model_fn(x);
    double acc = 0;
    std::vector<double> shifted(x.size());
    for (const auto& noise : noise_draws) {
        if (noise.size() != x.size()) throw Error("infidelity: noise dimension mismatch");
        double i_dot_phi = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            i_dot_phi += noise[i] * attribution[i];
            shifted[i] = x[i] - noise[i];
        }
        double r = i_dot_phi - (f_x - model_fn(shifted));
        acc += r * r;
    }
    res.value = res.n_draws ? acc / static_cast<double>(res.n_draws) : 0.0;
    return res;
}

// ---------------------------------------------------------------------------
// Batch evaluation

struct SummaryStats {
    std::size_t n = 0;
    double mean = 0, median = 0, q1 = 0, q3 = 0;
};

inline SummaryStats summarize(std::vector<double> values) {
    SummaryStats s;
    s.n = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(values.size() - 1);
        auto lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, values.size() - 1);
        double frac = pos - static_cast<double>(lo);
        return values[lo] * (1 - frac) + values[hi] * frac;
    };
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    s.median = quantile(0.5);
    s.q1 = quantile(0.25);
    s.q3 = quantile(0.75);
    return s;
}

struct MetricConfig {
    double pi = 0.1;
    std::size_t k = 10;
    double eps = 0.25;
    std::size_t neighborhood_size = 15;
    std::size_t lipschitz_sample = 35;
    std::size_t infidelity_sample = 100;
    std::size_t n_draws = 256;
    double sigma_scale = 0.1;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    nlohmann::json to_json() const {
        return {{"pi", pi},
                {"k", k},
                {"eps", eps},
                {"neighborhood_size", neighborhood_size},
                {"lipschitz_sample", lipschitz_sample},
                {"infidelity_sample", infidelity_sample},
                {"n_draws", n_draws},
                {"sigma_scale", sigma_scale},
                {"seed", seed}};
    }
};

// One (model, attribution method) pair, wired up as closures so the engine
// stays agnostic of model internals. `attribute` must derive all sampling
// randomness from the seed argument.
struct EvalPair {
    std::string model_id;
    std::string method;
    bool position_kind = false;
    // dense attribution in the comparison space, from a token sequence
    std::function<std::vector<double>(const std::vector<std::string>&, std::uint64_t)> attribute;
    // dense numericalized representation of a token sequence
    std::function<std::vector<double>(const std::vector<std::string>&)> represent;
    // target-space model output on a dense representation (infidelity side)
    std::function<double(const std::vector<double>&)> model_on_repr;
    // attribution aligned coordinate-by-coordinate with the representation
    std::function<std::vector<double>(const std::vector<std::string>&, std::uint64_t)>
        attribute_on_repr;
};

struct EvaluationRun {
    std::string model_id;
    std::string method;
    std::vector<LipschitzResult> lipschitz;
    std::vector<InfidelityResult> infidelity;
    SummaryStats lipschitz_stats;
    SummaryStats infidelity_stats;
    std::size_t empty_neighborhoods = 0;
    bool failed = false;
    std::string failure;
    nlohmann::json config_snapshot;
};

namespace detail {

inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string error_msg;
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) break;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    error_msg = e.what();
                    failed.store(true);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failed.load()) throw Error(error_msg);
}

}  // namespace detail

// Runs both metrics for every pair. Per-document seeds derive from
// (run seed, pair, doc id), so results are bitwise independent of worker
// count. A pair failure is isolated and recorded; the run continues.
inline std::vector<EvaluationRun> evaluate_suite(const std::vector<EvalPair>& pairs,
                                                 const Corpus& docs, const NeighborIndex& index,
                                                 const MetricConfig& cfg) {
    std::vector<EvaluationRun> runs;
    std::size_t n_lip = std::min(cfg.lipschitz_sample, docs.size());
    std::size_t n_inf = std::min(cfg.infidelity_sample, docs.size());

    for (const auto& pair : pairs) {
        EvaluationRun run;
        run.model_id = pair.model_id;
        run.method = pair.method;
        run.config_snapshot = cfg.to_json();
        run.config_snapshot["model"] = pair.model_id;
        run.config_snapshot["method"] = pair.method;
        try {
            std::string pair_label = pair.model_id + "/" + pair.method;

            // --- local Lipschitz over the first n_lip documents
            run.lipschitz.resize(n_lip);
            detail::parallel_for(n_lip, cfg.workers, [&](std::size_t di) {
                const Document& doc = docs[di];
                PerturbationConfig pcfg;
                pcfg.pi = cfg.pi;
                pcfg.k = cfg.k;
                pcfg.seed = derive_seed(derive_seed(cfg.seed, pair_label), doc.id);
                auto neighborhood = make_neighborhood(doc, index, pcfg, cfg.neighborhood_size);

                std::uint64_t aseed = derive_seed(pcfg.seed, "attrib-original");
                auto attrib_x = pair.attribute(doc.tokens, aseed);
                auto repr_x = pair.represent(doc.tokens);
                std::vector<std::vector<double>> attribs, reprs;
                for (std::size_t j = 0; j < neighborhood.size(); ++j) {
                    attribs.push_back(pair.attribute(neighborhood[j].tokens,
                                                     derive_seed(pcfg.seed, "attrib-draw", j)));
                    reprs.push_back(pair.represent(neighborhood[j].tokens));
                }
                run.lipschitz[di] =
                    local_lipschitz(attrib_x, repr_x, attribs, reprs, cfg.eps, doc.id);
            });

            // --- infidelity over the first n_inf documents
            // componentwise sigma over the evaluation sample, in representation space
            std::vector<double> sigma;
            if (!pair.position_kind) {
                std::vector<double> mean, sq;
                std::size_t dim = 0;
                for (std::size_t di = 0; di < n_inf; ++di) {
                    auto r = pair.represent(docs[di].tokens);
                    if (dim == 0) {
                        dim = r.size();
                        mean.assign(dim, 0.0);
                        sq.assign(dim, 0.0);
                    }
                    for (std::size_t i = 0; i < dim; ++i) {
                        mean[i] += r[i];
                        sq[i] += r[i] * r[i];
                    }
                }
                sigma.assign(dim, 0.0);
                for (std::size_t i = 0; i < dim; ++i) {
                    double m = mean[i] / static_cast<double>(n_inf);
                    double var = sq[i] / static_cast<double>(n_inf) - m * m;
                    sigma[i] = var > 0 ? std::sqrt(var) : 0.0;
                }
            } else {
                // variable-length representations: pool per embedding dimension,
                // broadcast across token positions
                auto probe = pair.represent(docs[0].tokens);
                std::size_t edim = probe.size() / docs[0].tokens.size();
                std::vector<double> mean(edim, 0.0), sq(edim, 0.0);
                std::size_t count = 0;
                for (std::size_t di = 0; di < n_inf; ++di) {
                    auto r = pair.represent(docs[di].tokens);
                    for (std::size_t i = 0; i < r.size(); ++i) {
                        mean[i % edim] += r[i];
                        sq[i % edim] += r[i] * r[i];
                    }
                    count += r.size() / edim;
                }
                sigma.assign(edim, 0.0);
                for (std::size_t d = 0; d < edim; ++d) {
                    double m = mean[d] / static_cast<double>(count);
                    double var = sq[d] / static_cast<double>(count) - m * m;
                    sigma[d] = var > 0 ? std::sqrt(var) : 0.0;
                }
            }

            run.infidelity.resize(n_inf);
            detail::parallel_for(n_inf, cfg.workers, [&](std::size_t di) {
                const Document& doc = docs[di];
                std::uint64_t dseed =
                    derive_seed(derive_seed(cfg.seed, pair_label + "/inf"), doc.id);
                auto x = pair.represent(doc.tokens);
                auto phi = pair.attribute_on_repr(doc.tokens, derive_seed(dseed, "attrib"));

                std::vector<double> sig = sigma;
                if (pair.position_kind) {
                    // broadcast per-dimension sigma over token positions
                    std::size_t edim = sigma.size();
                    sig.resize(x.size());
                    for (std::size_t i = 0; i < x.size(); ++i) sig[i] = sigma[i % edim];
                }
                std::vector<bool> support(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) support[i] = x[i] != 0.0;

                GaussianNoiseConfig ncfg;
                ncfg.sigma_scale = cfg.sigma_scale;
                ncfg.n_draws = cfg.n_draws;
                ncfg.seed = derive_seed(dseed, "noise");
                ncfg.full_support = pair.position_kind;  // embeddings are dense
                auto draws = gaussian_perturbations(x, support, sig, ncfg);
                run.infidelity[di] =
                    infidelity(pair.model_on_repr, phi, x, draws, cfg.sigma_scale, doc.id);
            });

            std::vector<double> lvals, ivals;
            for (const auto& r : run.lipschitz) {
                if (r.value)
                    lvals.push_back(*r.value);
                else
                    ++run.empty_neighborhoods;
            }
            for (const auto& r : run.infidelity) ivals.push_back(r.value);
            run.lipschitz_stats = summarize(lvals);
            run.infidelity_stats = summarize(ivals);
        } catch (const std::exception& e) {
            run.failed = true;
            run.failure = e.what();
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

}  // namespace exq
