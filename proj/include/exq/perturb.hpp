#pragma once

#include <unordered_set>

#include "exq/common.hpp"
#include "exq/embeddings.hpp"
#include "exq/rng.hpp"
#include "exq/text.hpp"

namespace exq {

struct PerturbationConfig {
    double pi = 0.1;
    std::size_t k = 10;
    std::uint64_t seed = 0;
    bool distance_weighted = false;  // default: uniform over the k neighbors
    std::unordered_set<std::string> excluded_tokens;
};

struct PerturbedDoc {
    std::string source_id;
    std::vector<std::string> tokens;       // same length as source
    std::vector<std::size_t> replaced_positions;
    std::size_t out_of_index_tokens = 0;   // never replaced, reported
};

// Per-token Bernoulli(pi) selection; each selected token is replaced by a
// draw from its nearest neighbors. Length is always preserved.
inline PerturbedDoc perturb_document(const Document& doc, const NeighborIndex& index,
                                     const PerturbationConfig& cfg) {
    if (cfg.pi < 0.0 || cfg.pi > 1.0) throw Error("perturb_document: pi must be in [0,1]");
    if (cfg.k < 1) throw Error("perturb_document: k must be >= 1");
    RngStream rng(cfg.seed);
    PerturbedDoc out;
    out.source_id = doc.id;
    out.tokens.reserve(doc.tokens.size());
    for (std::size_t p = 0; p < doc.tokens.size(); ++p) {
        const std::string& tok = doc.tokens[p];
        bool selected = rng.uniform() < cfg.pi;
        bool eligible = index.has(tok) && !cfg.excluded_tokens.count(tok);
        if (!index.has(tok)) ++out.out_of_index_tokens;
        if (!selected || !eligible) {
            out.tokens.push_back(tok);
            continue;
        }
        std::size_t row = index.token_to_row.at(tok);
        const auto& ids = index.neighbor_ids[row];
        std::size_t pool = std::min(cfg.k, ids.size());
        if (pool == 0) {
            out.tokens.push_back(tok);
            continue;
        }
        std::size_t pick;
        if (cfg.distance_weighted) {
            const auto& dists = index.neighbor_dists[row];
            double total = 0;
            for (std::size_t i = 0; i < pool; ++i) total += 1.0 / (1e-12 + dists[i]);
            double u = rng.uniform() * total;
            pick = pool - 1;
            double acc = 0;
            for (std::size_t i = 0; i < pool; ++i) {
                acc += 1.0 / (1e-12 + dists[i]);
                if (u <= acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.uniform_int(pool);
        }
        out.tokens.push_back(index.tokens[ids[pick]]);
        out.replaced_positions.push_back(p);
    }
    return out;
}

// m independent draws; each draw's seed derives from (seed, doc id, draw index)
// so any single draw is reproducible in isolation.
inline std::vector<PerturbedDoc> make_neighborhood(const Document& doc, const NeighborIndex& index,
                                                   const PerturbationConfig& cfg, std::size_t m) {
    if (m < 1) throw Error("make_neighborhood: m must be >= 1");
    std::vector<PerturbedDoc> out;
    out.reserve(m);
    for (std::size_t draw = 0; draw < m; ++draw) {
        PerturbationConfig per_draw = cfg;
        per_draw.seed = derive_seed(derive_seed(cfg.seed, doc.id), "perturb-draw", draw);
        out.push_back(perturb_document(doc, index, per_draw));
    }
    return out;
}

struct GaussianNoiseConfig {
    double sigma_scale = 0.1;
    std::uint64_t seed = 0;
    std::size_t n_draws = 0;
    bool full_support = false;  // sparse inputs: noise restricted to support unless set
};

// Zero-mean Gaussian noise, per-coordinate sigma = sigma_scale * supplied
// componentwise standard deviation of the representation.
inline std::vector<std::vector<double>> gaussian_perturbations(
    const std::vector<double>& x_dense, const std::vector<bool>& support,
    const std::vector<double>& component_std, const GaussianNoiseConfig& cfg) {
    if (component_std.size() != x_dense.size())
        throw Error("gaussian_perturbations: sigma dimension mismatch");
    RngStream rng(cfg.seed);
    std::vector<std::vector<double>> draws;
    draws.reserve(cfg.n_draws);
    for (std::size_t d = 0; d < cfg.n_draws; ++d) {
        std::vector<double> noise(x_dense.size(), 0.0);
        for (std::size_t i = 0; i < x_dense.size(); ++i) {
            double g = rng.gaussian();  // fixed draw count regardless of support
            if (!cfg.full_support && !support.empty() && !support[i]) continue;
            noise[i] = cfg.sigma_scale * component_std[i] * g;
        }
        draws.push_back(std::move(noise));
    }
    return draws;
}

inline std::vector<std::vector<double>> gaussian_perturbations(
    const SparseVector& x, const std::vector<double>& component_std,
    const GaussianNoiseConfig& cfg) {
    std::vector<bool> support(x.dim, false);
    for (std::size_t idx : x.indices) support[idx] = true;
    return gaussian_perturbations(x.to_dense(), support, component_std, cfg);
}

// Componentwise standard deviation over an evaluation sample.
inline std::vector<double> component_std(const std::vector<SparseVector>& sample,
                                         std::size_t dim) {
    std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
    for (const auto& sv : sample)
        for (std::size_t i = 0; i < sv.indices.size(); ++i) {
            mean[sv.indices[i]] += sv.values[i];
            sq[sv.indices[i]] += sv.values[i] * sv.values[i];
        }
    double n = static_cast<double>(sample.size());
    std::vector<double> out(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        double m = mean[i] / n;
        double var = sq[i] / n - m * m;
        out[i] = var > 0 ? std::sqrt(var) : 0.0;
    }
    return out;
}

}  // namespace exq
