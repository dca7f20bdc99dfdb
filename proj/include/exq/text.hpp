#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "exq/common.hpp"

namespace exq {

inline constexpr const char* kNumberToken = "numbertoken";

struct Document {
    std::string id;
    int label = 0;  // {0,1}
    std::vector<std::string> tokens;
};

using Corpus = std::vector<Document>;

// Lowercase; tokens are maximal letter runs; every maximal digit run becomes
// the catch-all "numbertoken". Total function, empty result allowed.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    bool in_digits = false;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
        if (in_digits) {
            out.emplace_back(kNumberToken);
            in_digits = false;
        }
    };
    for (unsigned char c : text) {
        if (std::isdigit(c)) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
            in_digits = true;
        } else if (std::isalpha(c)) {
            if (in_digits) {
                out.emplace_back(kNumberToken);
                in_digits = false;
            }
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

struct Vocabulary {
    std::unordered_map<std::string, std::size_t> token_to_index;
    std::vector<std::string> index_to_token;       // dense, size V
    std::vector<std::size_t> document_frequency;   // aligned to indices
    std::size_t n_docs = 0;

    std::size_t size() const { return index_to_token.size(); }
};

struct TextConfig {
    std::size_t min_df = 1;
    std::size_t max_features = 0;  // 0 = unlimited
    int ngram_max = 1;             // 1 or 2
};

// Feature strings for a document under the n-gram setting; bigrams join with '_'.
inline std::vector<std::string> feature_tokens(const std::vector<std::string>& tokens, int ngram_max) {
    std::vector<std::string> out = tokens;
    if (ngram_max >= 2) {
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
            out.push_back(tokens[i] + "_" + tokens[i + 1]);
    }
    return out;
}

inline Vocabulary build_vocab(const Corpus& corpus, const TextConfig& cfg = {}) {
    if (corpus.empty()) throw Error("build_vocab: empty corpus");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        auto feats = feature_tokens(doc.tokens, cfg.ngram_max);
        std::sort(feats.begin(), feats.end());
        feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
        for (const auto& t : feats) ++df[t];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [tok, d] : df)
        if (d >= cfg.min_df) kept.emplace_back(tok, d);
    if (kept.empty()) throw Error("build_vocab: no token survives min_df filtering");
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (cfg.max_features > 0 && kept.size() > cfg.max_features) kept.resize(cfg.max_features);

    Vocabulary vocab;
    vocab.n_docs = corpus.size();
    for (std::size_t i = 0; i < kept.size(); ++i) {
        vocab.token_to_index.emplace(kept[i].first, i);
        vocab.index_to_token.push_back(kept[i].first);
        vocab.document_frequency.push_back(kept[i].second);
    }
    return vocab;
}

struct TfidfModel {
    Vocabulary vocabulary;
    std::vector<double> idf;
    int ngram_max = 1;
};

inline TfidfModel fit_tfidf(const Vocabulary& vocab, int ngram_max = 1) {
    TfidfModel model;
    model.vocabulary = vocab;
    model.ngram_max = ngram_max;
    model.idf.resize(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        model.idf[i] = std::log((1.0 + static_cast<double>(vocab.n_docs)) /
                                (1.0 + static_cast<double>(vocab.document_frequency[i]))) +
                       1.0;
    }
    return model;
}

struct TransformResult {
    SparseVector vector;
    bool empty_projection = false;  // no in-vocabulary token
};

inline TransformResult transform(const TfidfModel& model, const std::vector<std::string>& tokens) {
    std::map<std::size_t, double> tf;
    for (const auto& t : feature_tokens(tokens, model.ngram_max)) {
        auto it = model.vocabulary.token_to_index.find(t);
        if (it != model.vocabulary.token_to_index.end()) tf[it->second] += 1.0;
    }
    TransformResult res;
    res.vector.dim = model.vocabulary.size();
    if (tf.empty()) {
        res.empty_projection = true;
        return res;
    }
    double norm = 0;
    for (auto& [idx, count] : tf) {
        count *= model.idf[idx];
        norm += count * count;
    }
    norm = std::sqrt(norm);
    for (const auto& [idx, val] : tf) {
        res.vector.indices.push_back(idx);
        res.vector.values.push_back(val / norm);
    }
    return res;
}

inline TransformResult transform(const TfidfModel& model, const Document& doc) {
    return transform(model, doc.tokens);
}

// TSV corpus: one `label<TAB>text` line per document. Empty documents and
// malformed lines abort with the offending line number.
inline Corpus load_corpus_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path);
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error(path + ":" + std::to_string(lineno) + ": missing tab separator");
        std::string label_str = line.substr(0, tab);
        if (label_str != "0" && label_str != "1")
            throw Error(path + ":" + std::to_string(lineno) + ": label must be 0 or 1, got '" +
                        label_str + "'");
        Document doc;
        doc.id = "doc" + std::to_string(lineno);
        doc.label = label_str == "1" ? 1 : 0;
        doc.tokens = tokenize(line.substr(tab + 1));
        if (doc.tokens.empty())
            throw Error(path + ":" + std::to_string(lineno) + ": document empty after preprocessing");
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

}  // namespace exq
