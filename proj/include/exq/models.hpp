#pragma once

#include <algorithm>
#include <functional>
#include <numeric>

#include "exq/common.hpp"
#include "exq/embeddings.hpp"
#include "exq/rng.hpp"
#include "exq/text.hpp"

namespace exq {

struct TrainLog {
    std::vector<double> epoch_loss;
    std::vector<std::string> warnings;

    // non-increasing over any 5-epoch window, else flag divergence
    void check_divergence() {
        for (std::size_t e = 5; e < epoch_loss.size(); ++e) {
            if (epoch_loss[e] > epoch_loss[e - 5]) {
                warnings.push_back("loss increased over epochs " + std::to_string(e - 5) + ".." +
                                   std::to_string(e));
                return;
            }
        }
    }
};

inline void require_two_classes(const std::vector<int>& y) {
    bool has0 = false, has1 = false;
    for (int v : y) (v == 1 ? has1 : has0) = true;
    if (!has0 || !has1) throw Error("training data must contain both classes");
}

// ---------------------------------------------------------------------------
// Logistic regression

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;

    double logit(const SparseVector& x) const {
        double z = bias;
        for (std::size_t i = 0; i < x.indices.size(); ++i)
            z += weights[x.indices[i]] * x.values[i];
        return z;
    }
    double predict_proba(const SparseVector& x) const { return sigmoid(logit(x)); }
};

struct LogisticConfig {
    double l2 = 1e-4;
    double lr = 0.1;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

inline LinearModel train_logistic(const std::vector<SparseVector>& X, const std::vector<int>& y,
                                  const LogisticConfig& cfg, TrainLog* log = nullptr) {
    if (X.size() != y.size() || X.size() < 2) throw Error("train_logistic: need |X| = |y| >= 2");
    require_two_classes(y);
    const std::size_t n = X.size();
    const std::size_t dim = X[0].dim;
    LinearModel model;
    model.weights.assign(dim, 0.0);

    RngStream shuffle_rng(derive_seed(cfg.seed, "logistic-shuffle"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    TrainLog local_log;
    TrainLog& tl = log ? *log : local_log;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t end = std::min(n, start + cfg.batch_size);
            double batch = static_cast<double>(end - start);
            std::vector<double> gw(dim, 0.0);
            double gb = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const SparseVector& x = X[order[s]];
                double g = model.predict_proba(x) - y[order[s]];
                for (std::size_t i = 0; i < x.indices.size(); ++i)
                    gw[x.indices[i]] += g * x.values[i];
                gb += g;
            }
            for (std::size_t j = 0; j < dim; ++j)
                model.weights[j] -= cfg.lr * (gw[j] / batch + cfg.l2 * model.weights[j]);
            model.bias -= cfg.lr * gb / batch;
        }
        double loss = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double p = model.predict_proba(X[s]);
            loss += y[s] ? -std::log(std::max(p, 1e-300)) : -std::log(std::max(1.0 - p, 1e-300));
        }
        loss /= static_cast<double>(n);
        if (!std::isfinite(loss))
            throw Error("train_logistic: non-finite loss at epoch " + std::to_string(epoch));
        tl.epoch_loss.push_back(loss);
    }
    tl.check_divergence();
    return model;
}

// ---------------------------------------------------------------------------
// Main-effects additive model (cyclic boosting over per-feature histograms)

struct AdditiveModel {
    // per feature: interior bin edges (strictly increasing) and one score per bin
    std::vector<std::vector<double>> bin_edges;
    std::vector<std::vector<double>> bin_scores;
    double intercept = 0.0;

    std::size_t bin_of(std::size_t feature, double x) const {
        const auto& edges = bin_edges[feature];
        return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), x) -
                                        edges.begin());
    }
    double shape(std::size_t feature, double x) const {
        return bin_scores[feature][bin_of(feature, x)];
    }
    double logit(const SparseVector& x) const {
        double z = intercept;
        auto dense = x.to_dense();
        for (std::size_t j = 0; j < dense.size(); ++j) z += shape(j, dense[j]);
        return z;
    }
    double predict_proba(const SparseVector& x) const { return sigmoid(logit(x)); }
};

struct AdditiveConfig {
    std::size_t n_bins = 256;
    std::size_t rounds = 500;
    double lr = 0.1;
    std::uint64_t seed = 0;
};

inline AdditiveModel train_additive(const std::vector<SparseVector>& X, const std::vector<int>& y,
                                    const AdditiveConfig& cfg, TrainLog* log = nullptr) {
    if (X.size() != y.size() || X.size() < 2) throw Error("train_additive: need |X| = |y| >= 2");
    require_two_classes(y);
    const std::size_t n = X.size();
    const std::size_t dim = X[0].dim;

    // dense column store
    std::vector<std::vector<double>> cols(dim, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < X[s].indices.size(); ++i)
            cols[X[s].indices[i]][s] = X[s].values[i];

    AdditiveModel model;
    model.bin_edges.resize(dim);
    model.bin_scores.resize(dim);
    std::vector<std::vector<std::size_t>> bin_of(dim, std::vector<std::size_t>(n));
    for (std::size_t j = 0; j < dim; ++j) {
        std::vector<double> sorted = cols[j];
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> edges;
        for (std::size_t b = 1; b < cfg.n_bins; ++b) {
            std::size_t q = b * n / cfg.n_bins;
            double e = sorted[std::min(q, n - 1)];
            if (edges.empty() || e > edges.back()) edges.push_back(e);
        }
        model.bin_edges[j] = std::move(edges);
        model.bin_scores[j].assign(model.bin_edges[j].size() + 1, 0.0);
        for (std::size_t s = 0; s < n; ++s) bin_of[j][s] = model.bin_of(j, cols[j][s]);
    }

    double base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    model.intercept = logit_of_prob(base);

    std::vector<double> logit(n, model.intercept);
    TrainLog local_log;
    TrainLog& tl = log ? *log : local_log;
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        for (std::size_t j = 0; j < dim; ++j) {
            const std::size_t nb = model.bin_scores[j].size();
            std::vector<double> residual_sum(nb, 0.0);
            std::vector<std::size_t> count(nb, 0);
            for (std::size_t s = 0; s < n; ++s) {
                double r = y[s] - sigmoid(logit[s]);
                residual_sum[bin_of[j][s]] += r;
                ++count[bin_of[j][s]];
            }
            for (std::size_t b = 0; b < nb; ++b) {
                if (count[b] == 0) continue;
                model.bin_scores[j][b] += cfg.lr * residual_sum[b] / static_cast<double>(count[b]);
            }
            for (std::size_t s = 0; s < n; ++s) {
                std::size_t b = bin_of[j][s];
                if (count[b] > 0)
                    logit[s] += cfg.lr * residual_sum[b] / static_cast<double>(count[b]);
            }
        }
        double loss = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double p = sigmoid(logit[s]);
            loss += y[s] ? -std::log(std::max(p, 1e-300)) : -std::log(std::max(1.0 - p, 1e-300));
        }
        loss /= static_cast<double>(n);
        if (!std::isfinite(loss))
            throw Error("train_additive: non-finite loss at round " + std::to_string(round));
        tl.epoch_loss.push_back(loss);
    }
    tl.check_divergence();
    return model;
}

// ---------------------------------------------------------------------------
// Random forest (bagging + Gini CART)

struct TreeNode {
    bool is_leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    double leaf_prob = 0.5;
    std::int32_t left = -1;
    std::int32_t right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const std::vector<double>& x) const {
        std::size_t cur = 0;
        while (!nodes[cur].is_leaf) {
            cur = x[nodes[cur].feature] <= nodes[cur].threshold
                      ? static_cast<std::size_t>(nodes[cur].left)
                      : static_cast<std::size_t>(nodes[cur].right);
        }
        return nodes[cur].leaf_prob;
    }
};

struct ForestModel {
    std::vector<Tree> trees;
    std::size_t n_features = 0;

    double predict_proba(const SparseVector& x) const {
        auto dense = x.to_dense();
        double s = 0;
        for (const auto& t : trees) s += t.predict(dense);
        return s / static_cast<double>(trees.size());
    }
    double logit(const SparseVector& x) const { return logit_of_prob(predict_proba(x)); }
};

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;
    double mtry_fraction = 0.0;  // <= 0: use sqrt(V)
    std::size_t min_samples_split = 2;
    std::uint64_t seed = 0;
};

namespace detail {

inline double gini(double pos, double total) {
    if (total == 0) return 0.0;
    double p = pos / total;
    return 2.0 * p * (1.0 - p);
}

inline std::int32_t grow_tree(const std::vector<std::vector<double>>& cols,
                              const std::vector<int>& y, std::vector<std::size_t>& samples,
                              std::size_t depth, const ForestConfig& cfg, std::size_t mtry,
                              RngStream& rng, Tree& tree) {
    double pos = 0;
    for (std::size_t s : samples) pos += y[s];
    double total = static_cast<double>(samples.size());
    auto make_leaf = [&]() {
        TreeNode leaf;
        leaf.is_leaf = true;
        leaf.leaf_prob = total > 0 ? pos / total : 0.5;
        tree.nodes.push_back(leaf);
        return static_cast<std::int32_t>(tree.nodes.size() - 1);
    };
    if (depth >= cfg.max_depth || samples.size() < cfg.min_samples_split || pos == 0 ||
        pos == total)
        return make_leaf();

    const std::size_t dim = cols.size();
    std::vector<std::size_t> feats(dim);
    std::iota(feats.begin(), feats.end(), 0);
    for (std::size_t i = 0; i < mtry && i < dim; ++i)
        std::swap(feats[i], feats[i + rng.uniform_int(dim - i)]);
    feats.resize(std::min(mtry, dim));
    std::sort(feats.begin(), feats.end());

    double parent_impurity = gini(pos, total);
    double best_gain = 1e-12;
    std::size_t best_feature = 0;
    double best_threshold = 0;
    std::vector<std::pair<double, int>> vals;
    for (std::size_t f : feats) {
        vals.clear();
        for (std::size_t s : samples) vals.emplace_back(cols[f][s], y[s]);
        std::sort(vals.begin(), vals.end());
        double left_pos = 0, left_n = 0;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            left_pos += vals[i].second;
            left_n += 1;
            if (vals[i].first == vals[i + 1].first) continue;
            double right_pos = pos - left_pos;
            double right_n = total - left_n;
            double gain = parent_impurity - (left_n / total) * gini(left_pos, left_n) -
                          (right_n / total) * gini(right_pos, right_n);
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = f;
                best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
            }
        }
    }
    if (best_gain <= 1e-12) return make_leaf();

    std::vector<std::size_t> left_samples, right_samples;
    for (std::size_t s : samples) {
        if (cols[best_feature][s] <= best_threshold)
            left_samples.push_back(s);
        else
            right_samples.push_back(s);
    }
    if (left_samples.empty() || right_samples.empty()) return make_leaf();

    TreeNode node;
    node.is_leaf = false;
    node.feature = best_feature;
    node.threshold = best_threshold;
    tree.nodes.push_back(node);
    auto self = static_cast<std::int32_t>(tree.nodes.size() - 1);
    auto left = grow_tree(cols, y, left_samples, depth + 1, cfg, mtry, rng, tree);
    auto right = grow_tree(cols, y, right_samples, depth + 1, cfg, mtry, rng, tree);
    tree.nodes[static_cast<std::size_t>(self)].left = left;
    tree.nodes[static_cast<std::size_t>(self)].right = right;
    return self;
}

}  // namespace detail

inline ForestModel train_forest(const std::vector<SparseVector>& X, const std::vector<int>& y,
                                const ForestConfig& cfg) {
    if (X.size() != y.size() || X.size() < 2) throw Error("train_forest: need |X| = |y| >= 2");
    require_two_classes(y);
    const std::size_t n = X.size();
    const std::size_t dim = X[0].dim;
    std::vector<std::vector<double>> cols(dim, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < X[s].indices.size(); ++i)
            cols[X[s].indices[i]][s] = X[s].values[i];

    std::size_t mtry = cfg.mtry_fraction > 0
                           ? std::max<std::size_t>(
                                 1, static_cast<std::size_t>(std::lround(cfg.mtry_fraction * dim)))
                           : std::max<std::size_t>(
                                 1, static_cast<std::size_t>(std::lround(std::sqrt(dim))));

    ForestModel model;
    model.n_features = dim;
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
        RngStream rng(derive_seed(cfg.seed, "forest-tree", t));
        std::vector<std::size_t> samples(n);
        for (auto& s : samples) s = rng.uniform_int(n);
        Tree tree;
        detail::grow_tree(cols, y, samples, 0, cfg, mtry, rng, tree);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Embedding classifier: sigmoid(w . mean(embedding(token_i)) + b)

struct EmbeddingClassifier {
    EmbeddingTable table;
    std::vector<double> head_weights;  // length table.dim
    double head_bias = 0.0;
    std::size_t out_of_table_tokens = 0;  // flagged during training

    std::vector<double> embed(const std::string& tok) const {
        auto it = table.token_to_row.find(tok);
        if (it == table.token_to_row.end()) return std::vector<double>(table.dim, 0.0);
        return table.matrix[it->second];
    }

    std::vector<double> pooled(const std::vector<std::string>& tokens) const {
        std::vector<double> mean(table.dim, 0.0);
        for (const auto& t : tokens) {
            auto e = embed(t);
            for (std::size_t d = 0; d < table.dim; ++d) mean[d] += e[d];
        }
        for (auto& v : mean) v /= static_cast<double>(tokens.size());
        return mean;
    }

    double logit(const std::vector<std::string>& tokens) const {
        if (tokens.empty()) throw Error("EmbeddingClassifier: empty token sequence");
        auto mean = pooled(tokens);
        double z = head_bias;
        for (std::size_t d = 0; d < table.dim; ++d) z += head_weights[d] * mean[d];
        return z;
    }
    double predict_proba(const std::vector<std::string>& tokens) const {
        return sigmoid(logit(tokens));
    }

    // logit of a full embedding matrix (used along IG paths)
    double logit_of_embeddings(const std::vector<std::vector<double>>& embs) const {
        double z = head_bias;
        double n = static_cast<double>(embs.size());
        for (const auto& row : embs)
            for (std::size_t d = 0; d < table.dim; ++d) z += head_weights[d] * row[d] / n;
        return z;
    }
};

struct EmbeddingClassifierConfig {
    bool freeze_embeddings = true;
    double lr = 0.5;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

inline EmbeddingClassifier train_embedding_classifier(const Corpus& corpus,
                                                      const EmbeddingTable& table,
                                                      const EmbeddingClassifierConfig& cfg,
                                                      TrainLog* log = nullptr) {
    if (corpus.size() < 2) throw Error("train_embedding_classifier: need >= 2 documents");
    std::vector<int> y;
    for (const auto& d : corpus) y.push_back(d.label);
    require_two_classes(y);

    EmbeddingClassifier model;
    model.table = table;
    model.head_weights.assign(table.dim, 0.0);
    for (const auto& d : corpus)
        for (const auto& t : d.tokens)
            if (!table.has(t)) ++model.out_of_table_tokens;

    const std::size_t n = corpus.size();
    RngStream shuffle_rng(derive_seed(cfg.seed, "embcls-shuffle"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    TrainLog local_log;
    TrainLog& tl = log ? *log : local_log;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t end = std::min(n, start + cfg.batch_size);
            double batch = static_cast<double>(end - start);
            std::vector<double> gw(table.dim, 0.0);
            double gb = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const Document& doc = corpus[order[s]];
                auto mean = model.pooled(doc.tokens);
                double z = model.head_bias;
                for (std::size_t d = 0; d < table.dim; ++d) z += model.head_weights[d] * mean[d];
                double g = sigmoid(z) - doc.label;
                for (std::size_t d = 0; d < table.dim; ++d) gw[d] += g * mean[d];
                gb += g;
                if (!cfg.freeze_embeddings) {
                    double scale = g / static_cast<double>(doc.tokens.size());
                    for (const auto& t : doc.tokens) {
                        auto it = model.table.token_to_row.find(t);
                        if (it == model.table.token_to_row.end()) continue;
                        auto& row = model.table.matrix[it->second];
                        for (std::size_t d = 0; d < table.dim; ++d)
                            row[d] -= cfg.lr * scale * model.head_weights[d] / batch;
                    }
                }
            }
            for (std::size_t d = 0; d < table.dim; ++d)
                model.head_weights[d] -= cfg.lr * gw[d] / batch;
            model.head_bias -= cfg.lr * gb / batch;
        }
        double loss = 0.0;
        for (const auto& doc : corpus) {
            double p = model.predict_proba(doc.tokens);
            loss += doc.label ? -std::log(std::max(p, 1e-300)) : -std::log(std::max(1.0 - p, 1e-300));
        }
        loss /= static_cast<double>(n);
        if (!std::isfinite(loss))
            throw Error("train_embedding_classifier: non-finite loss at epoch " +
                        std::to_string(epoch));
        tl.epoch_loss.push_back(loss);
    }
    tl.check_divergence();
    return model;
}

// Analytic gradient of the pre-sigmoid logit w.r.t. each token's embedding
// vector; under mean pooling every row is w / n_tokens.
inline std::vector<std::vector<double>> gradient_wrt_embeddings(
    const EmbeddingClassifier& model, const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw Error("gradient_wrt_embeddings: empty token sequence");
    double n = static_cast<double>(tokens.size());
    std::vector<double> row(model.table.dim);
    for (std::size_t d = 0; d < model.table.dim; ++d) row[d] = model.head_weights[d] / n;
    return std::vector<std::vector<double>>(tokens.size(), row);
}

}  // namespace exq
