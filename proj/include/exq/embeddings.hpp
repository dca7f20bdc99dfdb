#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Dense>

#include "exq/common.hpp"
#include "exq/text.hpp"

namespace exq {

struct EmbeddingTable {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, std::size_t> token_to_row;
    std::size_t dim = 0;
    std::vector<std::vector<double>> matrix;  // one row per token

    bool has(const std::string& tok) const { return token_to_row.count(tok) > 0; }

    const std::vector<double>& row(const std::string& tok) const {
        auto it = token_to_row.find(tok);
        if (it == token_to_row.end()) throw Error("EmbeddingTable: unknown token " + tok);
        return matrix[it->second];
    }

    bool row_is_zero(std::size_t r) const {
        for (double v : matrix[r])
            if (v != 0.0) return false;
        return true;
    }
};

// word2vec text format: header `V dim`, then `token v1 ... v_dim` per line.
inline EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open embedding file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(path + ":1: missing header");
    std::istringstream header(line);
    long long v = -1, d = -1;
    if (!(header >> v >> d) || v < 0 || d <= 0)
        throw Error(path + ":1: malformed header, expected 'V dim'");
    EmbeddingTable table;
    table.dim = static_cast<std::size_t>(d);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        std::vector<double> row;
        double x;
        while (ls >> x) row.push_back(x);
        if (row.size() != table.dim)
            throw Error(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(table.dim) + " values, got " + std::to_string(row.size()));
        if (table.token_to_row.count(tok))
            throw Error(path + ":" + std::to_string(lineno) + ": duplicate token '" + tok + "'");
        table.token_to_row.emplace(tok, table.tokens.size());
        table.tokens.push_back(tok);
        table.matrix.push_back(std::move(row));
    }
    if (table.tokens.size() != static_cast<std::size_t>(v))
        throw Error(path + ": header declares " + std::to_string(v) + " tokens, file has " +
                    std::to_string(table.tokens.size()));
    return table;
}

// Loaded tokens that the task vocabulary does not know about; harmless, reported.
inline std::vector<std::string> embedding_load_report(const EmbeddingTable& table,
                                                      const Vocabulary& vocab) {
    std::vector<std::string> extra;
    for (const auto& t : table.tokens)
        if (!vocab.token_to_index.count(t)) extra.push_back(t);
    return extra;
}

struct TrainEmbeddingsReport {
    std::size_t effective_rank = 0;
    bool rank_reduced = false;
    std::vector<std::string> zero_rows;  // tokens with no co-occurrence
};

// Deterministic count-based trainer: symmetric windowed co-occurrence,
// positive PMI, rank-dim truncated SVD (U * sqrt(S)). Stands in for an
// externally trained word2vec model, which remains loadable.
inline EmbeddingTable train_embeddings(const Corpus& corpus, std::size_t dim, std::size_t window,
                                       TrainEmbeddingsReport* report = nullptr) {
    if (corpus.empty()) throw Error("train_embeddings: empty corpus");

    // token universe ordered by (count desc, token asc)
    std::map<std::string, std::size_t> counts;
    for (const auto& doc : corpus)
        for (const auto& t : doc.tokens) ++counts[t];
    std::vector<std::pair<std::string, std::size_t>> order(counts.begin(), counts.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    EmbeddingTable table;
    for (std::size_t i = 0; i < order.size(); ++i) {
        table.token_to_row.emplace(order[i].first, i);
        table.tokens.push_back(order[i].first);
    }
    const std::size_t v = table.tokens.size();
    if (dim > v) throw Error("train_embeddings: dim exceeds vocabulary size");

    Eigen::MatrixXd cooc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(v),
                                                 static_cast<Eigen::Index>(v));
    for (const auto& doc : corpus) {
        for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
            auto a = static_cast<Eigen::Index>(table.token_to_row.at(doc.tokens[i]));
            for (std::size_t j = i + 1; j < std::min(doc.tokens.size(), i + 1 + window); ++j) {
                auto b = static_cast<Eigen::Index>(table.token_to_row.at(doc.tokens[j]));
                if (a == b) continue;
                cooc(a, b) += 1.0;
                cooc(b, a) += 1.0;
            }
        }
    }

    double total = cooc.sum();
    Eigen::VectorXd marg = cooc.rowwise().sum();
    Eigen::MatrixXd ppmi = Eigen::MatrixXd::Zero(cooc.rows(), cooc.cols());
    if (total > 0) {
        for (Eigen::Index r = 0; r < cooc.rows(); ++r) {
            if (marg(r) == 0) continue;
            for (Eigen::Index c = 0; c < cooc.cols(); ++c) {
                if (cooc(r, c) == 0 || marg(c) == 0) continue;
                double pmi = std::log(cooc(r, c) * total / (marg(r) * marg(c)));
                if (pmi > 0) ppmi(r, c) = pmi;
            }
        }
    }

    // PPMI is symmetric: eigenpairs give the SVD with singular values |lambda|.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ppmi);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(v));
    std::iota(idx.begin(), idx.end(), 0);
    const auto& evals = eig.eigenvalues();
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        double ma = std::abs(evals(a)), mb = std::abs(evals(b));
        if (ma != mb) return ma > mb;
        return a < b;
    });
    std::size_t rank = 0;
    for (auto i : idx)
        if (std::abs(evals(i)) > 1e-12) ++rank;
    std::size_t use_dim = std::min(dim, std::max<std::size_t>(rank, 1));
    if (report) {
        report->effective_rank = rank;
        report->rank_reduced = use_dim < dim;
    }

    table.dim = use_dim;
    table.matrix.assign(v, std::vector<double>(use_dim, 0.0));
    for (std::size_t c = 0; c < use_dim; ++c) {
        Eigen::VectorXd vec = eig.eigenvectors().col(idx[c]);
        // sign convention: largest-magnitude component positive
        Eigen::Index mr = 0;
        for (Eigen::Index r = 1; r < vec.size(); ++r)
            if (std::abs(vec(r)) > std::abs(vec(mr))) mr = r;
        if (vec(mr) < 0) vec = -vec;
        double scale = std::sqrt(std::abs(evals(idx[c])));
        for (std::size_t r = 0; r < v; ++r)
            table.matrix[r][c] = vec(static_cast<Eigen::Index>(r)) * scale;
    }

    // tokens with no co-occurrence stay at the zero vector
    for (std::size_t r = 0; r < v; ++r) {
        if (marg(static_cast<Eigen::Index>(r)) == 0) {
            std::fill(table.matrix[r].begin(), table.matrix[r].end(), 0.0);
            if (report) report->zero_rows.push_back(table.tokens[r]);
        }
    }
    return table;
}

struct NeighborIndex {
    std::size_t k = 0;
    std::vector<std::string> tokens;  // aligned with table rows
    std::unordered_map<std::string, std::size_t> token_to_row;
    std::vector<std::vector<std::size_t>> neighbor_ids;
    std::vector<std::vector<double>> neighbor_dists;
    std::vector<bool> indexed;  // false for zero-vector rows

    bool has(const std::string& tok) const {
        auto it = token_to_row.find(tok);
        return it != token_to_row.end() && indexed[it->second];
    }
};

// Exact brute-force k-NN by l2 distance; ties break by ascending token index.
// Zero-vector rows are neither indexed nor eligible as neighbors.
inline NeighborIndex build_neighbor_index(const EmbeddingTable& table, std::size_t k) {
    if (k < 1) throw Error("build_neighbor_index: k must be >= 1");
    const std::size_t v = table.tokens.size();
    std::vector<std::size_t> valid;
    for (std::size_t r = 0; r < v; ++r)
        if (!table.row_is_zero(r)) valid.push_back(r);
    if (valid.size() < 2) throw Error("build_neighbor_index: need >= 2 tokens with nonzero vectors");

    NeighborIndex index;
    index.k = k;
    index.tokens = table.tokens;
    index.token_to_row = table.token_to_row;
    index.neighbor_ids.resize(v);
    index.neighbor_dists.resize(v);
    index.indexed.assign(v, false);

    for (std::size_t r : valid) {
        std::vector<std::pair<double, std::size_t>> cand;
        cand.reserve(valid.size() - 1);
        for (std::size_t other : valid) {
            if (other == r) continue;
            cand.emplace_back(l2_distance(table.matrix[r], table.matrix[other]), other);
        }
        std::sort(cand.begin(), cand.end());
        std::size_t keep = std::min(k, cand.size());
        for (std::size_t i = 0; i < keep; ++i) {
            index.neighbor_ids[r].push_back(cand[i].second);
            index.neighbor_dists[r].push_back(cand[i].first);
        }
        index.indexed[r] = true;
    }
    return index;
}

}  // namespace exq
