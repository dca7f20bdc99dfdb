#pragma once

#include <bit>
#include <functional>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "exq/common.hpp"
#include "exq/models.hpp"
#include "exq/rng.hpp"

namespace exq {

enum class UnitKind { Feature, TokenPosition };

struct Attribution {
    UnitKind unit_kind = UnitKind::Feature;
    std::vector<double> scores;  // length V (feature) or n_tokens (position)
    std::string method;
    std::string model_id;
    std::string target = "logit";
    nlohmann::json metadata = nlohmann::json::object();

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["unit_kind"] = unit_kind == UnitKind::Feature ? "feature" : "token-position";
        if (unit_kind == UnitKind::Feature) {
            // sparse dump for feature-kind
            nlohmann::json idx = nlohmann::json::array(), val = nlohmann::json::array();
            for (std::size_t i = 0; i < scores.size(); ++i) {
                if (scores[i] != 0.0) {
                    idx.push_back(i);
                    val.push_back(scores[i]);
                }
            }
            j["dim"] = scores.size();
            j["idx"] = idx;
            j["val"] = val;
        } else {
            j["scores"] = scores;
        }
        j["method"] = method;
        j["model_id"] = model_id;
        j["target"] = target;
        j["metadata"] = metadata;
        return j;
    }
};

using ModelFn = std::function<double(const SparseVector&)>;

// ---------------------------------------------------------------------------
// True local explanations

inline Attribution truth_linear(const LinearModel& model, const SparseVector& x,
                                const std::string& model_id = "lr") {
    if (model.weights.size() != x.dim) throw Error("truth_linear: dimension mismatch");
    Attribution a;
    a.method = "truth";
    a.model_id = model_id;
    a.scores.assign(x.dim, 0.0);
    for (std::size_t i = 0; i < x.indices.size(); ++i)
        a.scores[x.indices[i]] = model.weights[x.indices[i]] * x.values[i];
    return a;
}

inline Attribution truth_additive(const AdditiveModel& model, const SparseVector& x,
                                  const std::string& model_id = "ebm") {
    if (model.bin_edges.size() != x.dim) throw Error("truth_additive: dimension mismatch");
    Attribution a;
    a.method = "truth";
    a.model_id = model_id;
    a.scores.assign(x.dim, 0.0);
    auto dense = x.to_dense();
    for (std::size_t j = 0; j < x.dim; ++j) a.scores[j] = model.shape(j, dense[j]);
    return a;
}

// ---------------------------------------------------------------------------
// LIME: weighted ridge over binary presence masks of the nonzero features

struct LimeConfig {
    std::size_t n_samples = 200;
    double kernel_width = 0.75;
    std::size_t n_report_features = 10;  // 0 = keep all
    double ridge_penalty = 1e-3;
    std::uint64_t seed = 0;
    bool enumerate_masks = false;  // all 2^m masks instead of sampling
};

inline Attribution lime(const ModelFn& model_fn, const SparseVector& x, const LimeConfig& cfg,
                        const std::string& model_id = "model") {
    const std::size_t m = x.indices.size();
    if (m == 0) throw Error("lime: x must have at least one nonzero feature");

    std::vector<std::vector<bool>> masks;
    if (cfg.enumerate_masks) {
        if (m > 20) throw Error("lime: mask enumeration limited to 20 features");
        for (std::uint64_t bits = 0; bits < (1ull << m); ++bits) {
            std::vector<bool> mask(m);
            for (std::size_t i = 0; i < m; ++i) mask[i] = (bits >> i) & 1;
            masks.push_back(std::move(mask));
        }
    } else {
        RngStream rng(cfg.seed);
        for (std::size_t s = 0; s < cfg.n_samples; ++s) {
            std::vector<bool> mask(m);
            for (std::size_t i = 0; i < m; ++i) mask[i] = rng.uniform() < 0.5;
            masks.push_back(std::move(mask));
        }
    }

    bool all_same = true;
    for (std::size_t s = 1; s < masks.size() && all_same; ++s) all_same = masks[s] == masks[0];
    if (all_same && masks.size() > 1)
        throw Error("lime: degenerate sampling (all masks identical); increase n_samples");

    const std::size_t ns = masks.size();
    Eigen::MatrixXd Z(ns, m + 1);
    Eigen::VectorXd yv(ns), w(ns);
    double x_norm = x.norm2();
    for (std::size_t s = 0; s < ns; ++s) {
        SparseVector masked;
        masked.dim = x.dim;
        double norm = 0;
        for (std::size_t i = 0; i < m; ++i)
            if (masks[s][i]) norm += x.values[i] * x.values[i];
        norm = std::sqrt(norm);
        double dot = 0;
        for (std::size_t i = 0; i < m; ++i) {
            Z(s, static_cast<Eigen::Index>(i)) = masks[s][i] ? 1.0 : 0.0;
            if (masks[s][i]) {
                masked.indices.push_back(x.indices[i]);
                masked.values.push_back(x.values[i] / norm);  // re-normalized
                dot += x.values[i] * (x.values[i] / norm);
            }
        }
        Z(s, static_cast<Eigen::Index>(m)) = 1.0;  // intercept
        double cos_dist = (norm > 0 && x_norm > 0) ? 1.0 - dot / x_norm : 1.0;
        w(s) = std::exp(-cos_dist * cos_dist / (cfg.kernel_width * cfg.kernel_width));
        yv(s) = model_fn(masked);
    }

    Eigen::MatrixXd A = Z.transpose() * w.asDiagonal() * Z;
    for (std::size_t i = 0; i < m; ++i)
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += cfg.ridge_penalty;
    Eigen::VectorXd b = Z.transpose() * w.asDiagonal() * yv;
    Eigen::VectorXd beta = A.ldlt().solve(b);

    // weighted R^2 of the surrogate
    Eigen::VectorXd fitted = Z * beta;
    double wsum = w.sum();
    double ymean = (w.array() * yv.array()).sum() / wsum;
    double ss_tot = (w.array() * (yv.array() - ymean).square()).sum();
    double ss_res = (w.array() * (yv.array() - fitted.array()).square()).sum();
    double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;

    Attribution a;
    a.method = "lime";
    a.model_id = model_id;
    a.scores.assign(x.dim, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        a.scores[x.indices[i]] = beta(static_cast<Eigen::Index>(i));

    if (cfg.n_report_features > 0 && m > cfg.n_report_features) {
        std::vector<std::size_t> order(x.indices.begin(), x.indices.end());
        std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
            double ap = std::abs(a.scores[p]), aq = std::abs(a.scores[q]);
            if (ap != aq) return ap > aq;
            return p < q;
        });
        for (std::size_t i = cfg.n_report_features; i < order.size(); ++i)
            a.scores[order[i]] = 0.0;
    }
    a.metadata = {{"seed", cfg.seed},
                  {"n_samples", ns},
                  {"kernel_width", cfg.kernel_width},
                  {"surrogate_r2", r2},
                  {"enumerated", cfg.enumerate_masks}};
    return a;
}

// ---------------------------------------------------------------------------
// Kernel SHAP: Shapley-kernel-weighted least squares with the efficiency
// constraint enforced exactly by eliminating one coefficient.

struct KernelShapConfig {
    std::size_t n_samples = 200;
    std::uint64_t seed = 0;
    bool enumerate_coalitions = false;
};

namespace detail {

inline SparseVector coalition_vector(const SparseVector& x, const SparseVector& background,
                                     const std::vector<bool>& in_coalition) {
    // background everywhere, overridden at x's nonzero positions that are in S
    std::vector<double> dense = background.dim ? background.to_dense()
                                               : std::vector<double>(x.dim, 0.0);
    dense.resize(x.dim, 0.0);
    for (std::size_t i = 0; i < x.indices.size(); ++i)
        if (in_coalition[i]) dense[x.indices[i]] = x.values[i];
    return SparseVector::from_dense(dense);
}

inline double log_factorial(std::size_t n) {
    double s = 0;
    for (std::size_t i = 2; i <= n; ++i) s += std::log(static_cast<double>(i));
    return s;
}

}  // namespace detail

inline Attribution kernel_shap(const ModelFn& model_fn, const SparseVector& x,
                               const KernelShapConfig& cfg, SparseVector background = {},
                               const std::string& model_id = "model") {
    if (background.dim == 0) background.dim = x.dim;
    const std::size_t m = x.indices.size();
    Attribution a;
    a.method = "shap";
    a.model_id = model_id;
    a.scores.assign(x.dim, 0.0);
    a.metadata = {{"seed", cfg.seed},
                  {"n_samples", cfg.n_samples},
                  {"enumerated", cfg.enumerate_coalitions}};
    if (m == 0) return a;

    double f_bg = model_fn(background);
    double f_x = model_fn(x);
    double delta = f_x - f_bg;
    if (m == 1) {
        a.scores[x.indices[0]] = delta;
        return a;
    }

    // coalitions with their regression weights
    std::vector<std::vector<bool>> coalitions;
    std::vector<double> weights;
    bool enumerate = cfg.enumerate_coalitions || (m <= 12 && ((1ull << m) - 2) <= cfg.n_samples);
    if (enumerate) {
        if (m > 25) throw Error("kernel_shap: coalition enumeration limited to 25 features");
        for (std::uint64_t bits = 1; bits < (1ull << m) - 1; ++bits) {
            std::vector<bool> s(m);
            std::size_t size = 0;
            for (std::size_t i = 0; i < m; ++i) {
                s[i] = (bits >> i) & 1;
                size += s[i];
            }
            // Shapley kernel: (m-1) / (C(m,|S|) |S| (m-|S|))
            double log_c = detail::log_factorial(m) - detail::log_factorial(size) -
                           detail::log_factorial(m - size);
            double wgt = (static_cast<double>(m) - 1.0) /
                         (std::exp(log_c) * static_cast<double>(size) *
                          static_cast<double>(m - size));
            coalitions.push_back(std::move(s));
            weights.push_back(wgt);
        }
    } else {
        // sample sizes from the kernel distribution, subsets uniformly within a size
        RngStream rng(cfg.seed);
        std::vector<double> size_weight(m);  // index s-1 for size s in [1, m-1]
        double total = 0;
        for (std::size_t s = 1; s < m; ++s) {
            size_weight[s - 1] = 1.0 / (static_cast<double>(s) * static_cast<double>(m - s));
            total += size_weight[s - 1];
        }
        std::vector<std::size_t> pool(m);
        for (std::size_t draw = 0; draw < cfg.n_samples; ++draw) {
            double u = rng.uniform() * total;
            std::size_t size = m - 1;
            double acc = 0;
            for (std::size_t s = 1; s < m; ++s) {
                acc += size_weight[s - 1];
                if (u <= acc) {
                    size = s;
                    break;
                }
            }
            std::iota(pool.begin(), pool.end(), 0);
            for (std::size_t i = 0; i < size; ++i)
                std::swap(pool[i], pool[i + rng.uniform_int(m - i)]);
            std::vector<bool> s(m, false);
            for (std::size_t i = 0; i < size; ++i) s[pool[i]] = true;
            coalitions.push_back(std::move(s));
            weights.push_back(1.0);  // kernel absorbed into the sampling distribution
        }
    }

    bool all_same = true;
    for (std::size_t i = 1; i < coalitions.size() && all_same; ++i)
        all_same = coalitions[i] == coalitions[0];
    if (all_same && coalitions.size() > 1)
        throw Error("kernel_shap: degenerate sampling (all coalitions identical); increase n_samples");

    // eliminate phi_{m-1} via the efficiency constraint
    const std::size_t ns = coalitions.size();
    const auto p = static_cast<Eigen::Index>(m - 1);
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(ns), p);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(ns)), w(static_cast<Eigen::Index>(ns));
    for (std::size_t s = 0; s < ns; ++s) {
        double z_last = coalitions[s][m - 1] ? 1.0 : 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i)
            Z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) =
                (coalitions[s][i] ? 1.0 : 0.0) - z_last;
        double f_s = model_fn(detail::coalition_vector(x, background, coalitions[s]));
        yv(static_cast<Eigen::Index>(s)) = f_s - f_bg - z_last * delta;
        w(static_cast<Eigen::Index>(s)) = weights[s];
    }
    Eigen::MatrixXd A = Z.transpose() * w.asDiagonal() * Z;
    Eigen::VectorXd b = Z.transpose() * w.asDiagonal() * yv;
    // tiny Tikhonov term keeps undersampled systems solvable without moving
    // well-determined solutions beyond the stated tolerances
    A.diagonal().array() += 1e-12;
    Eigen::VectorXd phi = A.ldlt().solve(b);

    double phi_last = delta;
    for (Eigen::Index i = 0; i < p; ++i) {
        a.scores[x.indices[static_cast<std::size_t>(i)]] = phi(i);
        phi_last -= phi(i);
    }
    a.scores[x.indices[m - 1]] = phi_last;
    return a;
}

// Exact Shapley values by full subset enumeration; the test oracle for
// kernel_shap. Refuses more than 15 active features.
inline Attribution exact_shapley(const ModelFn& model_fn, const SparseVector& x,
                                 SparseVector background = {},
                                 const std::string& model_id = "model") {
    if (background.dim == 0) background.dim = x.dim;
    const std::size_t m = x.indices.size();
    if (m > 15) throw Error("exact_shapley: refusing more than 15 nonzero features");
    Attribution a;
    a.method = "exact-shapley";
    a.model_id = model_id;
    a.scores.assign(x.dim, 0.0);
    if (m == 0) return a;

    std::vector<double> f_of(1ull << m);
    std::vector<bool> mask(m);
    for (std::uint64_t bits = 0; bits < (1ull << m); ++bits) {
        for (std::size_t i = 0; i < m; ++i) mask[i] = (bits >> i) & 1;
        f_of[bits] = model_fn(detail::coalition_vector(x, background, mask));
    }
    std::vector<double> fact(m + 1, 1.0);
    for (std::size_t i = 1; i <= m; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
    for (std::size_t i = 0; i < m; ++i) {
        double phi = 0;
        for (std::uint64_t bits = 0; bits < (1ull << m); ++bits) {
            if ((bits >> i) & 1) continue;
            auto size = static_cast<std::size_t>(std::popcount(bits));
            double wgt = fact[size] * fact[m - size - 1] / fact[m];
            phi += wgt * (f_of[bits | (1ull << i)] - f_of[bits]);
        }
        a.scores[x.indices[i]] = phi;
    }
    return a;
}

// ---------------------------------------------------------------------------
// Gradient attributions for the embedding classifier

inline Attribution saliency(const EmbeddingClassifier& model,
                            const std::vector<std::string>& tokens,
                            const std::string& model_id = "emb") {
    auto grad = gradient_wrt_embeddings(model, tokens);
    Attribution a;
    a.unit_kind = UnitKind::TokenPosition;
    a.method = "saliency";
    a.model_id = model_id;
    a.metadata = {{"aggregation", "l2-norm"}};
    for (const auto& row : grad) {
        double s = 0;
        for (double v : row) s += v * v;
        a.scores.push_back(std::sqrt(s));
    }
    return a;
}

struct IntegratedGradientsConfig {
    std::size_t steps = 32;
    // empty baseline = all-zero embeddings
    std::vector<std::vector<double>> baseline;
};

inline Attribution integrated_gradients(const EmbeddingClassifier& model,
                                        const std::vector<std::string>& tokens,
                                        const IntegratedGradientsConfig& cfg = {},
                                        const std::string& model_id = "emb") {
    if (cfg.steps < 8) throw Error("integrated_gradients: steps must be >= 8");
    if (tokens.empty()) throw Error("integrated_gradients: empty token sequence");
    const std::size_t n = tokens.size();
    const std::size_t dim = model.table.dim;

    std::vector<std::vector<double>> emb;
    emb.reserve(n);
    for (const auto& t : tokens) emb.push_back(model.embed(t));
    std::vector<std::vector<double>> base =
        cfg.baseline.empty() ? std::vector<std::vector<double>>(n, std::vector<double>(dim, 0.0))
                             : cfg.baseline;
    if (base.size() != n) throw Error("integrated_gradients: baseline shape mismatch");

    // midpoint Riemann average of the path gradients
    std::vector<std::vector<double>> avg_grad(n, std::vector<double>(dim, 0.0));
    std::vector<std::vector<double>> point(n, std::vector<double>(dim, 0.0));
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        double alpha = (static_cast<double>(s) + 0.5) / static_cast<double>(cfg.steps);
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t d = 0; d < dim; ++d)
                point[t][d] = base[t][d] + alpha * (emb[t][d] - base[t][d]);
        // logit gradient w.r.t. embeddings at the path point (mean pooling: w/n)
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t d = 0; d < dim; ++d)
                avg_grad[t][d] += model.head_weights[d] / static_cast<double>(n);
    }
    for (auto& row : avg_grad)
        for (auto& v : row) v /= static_cast<double>(cfg.steps);

    Attribution a;
    a.unit_kind = UnitKind::TokenPosition;
    a.method = "ig";
    a.model_id = model_id;
    a.metadata = {{"steps", cfg.steps}, {"aggregation", "signed-dim-sum"}};
    double total = 0;
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0;
        for (std::size_t d = 0; d < dim; ++d) s += (emb[t][d] - base[t][d]) * avg_grad[t][d];
        a.scores.push_back(s);
        total += s;
    }
    double residual = std::abs(total - (model.logit_of_embeddings(emb) -
                                        model.logit_of_embeddings(base)));
    a.metadata["completeness_residual"] = residual;
    return a;
}

}  // namespace exq
