#pragma once

#include <fstream>

#include <nlohmann/json.hpp>

#include "exq/models.hpp"

namespace exq {

using nlohmann::json;

inline json to_json(const Vocabulary& v) {
    return {{"tokens", v.index_to_token}, {"df", v.document_frequency}, {"n_docs", v.n_docs}};
}

inline Vocabulary vocabulary_from_json(const json& j) {
    Vocabulary v;
    v.index_to_token = j.at("tokens").get<std::vector<std::string>>();
    v.document_frequency = j.at("df").get<std::vector<std::size_t>>();
    v.n_docs = j.at("n_docs").get<std::size_t>();
    for (std::size_t i = 0; i < v.index_to_token.size(); ++i)
        v.token_to_index.emplace(v.index_to_token[i], i);
    return v;
}

inline json to_json(const TfidfModel& m) {
    return {{"type", "tfidf"},
            {"vocabulary", to_json(m.vocabulary)},
            {"idf", m.idf},
            {"ngram_max", m.ngram_max}};
}

inline TfidfModel tfidf_from_json(const json& j) {
    TfidfModel m;
    m.vocabulary = vocabulary_from_json(j.at("vocabulary"));
    m.idf = j.at("idf").get<std::vector<double>>();
    m.ngram_max = j.at("ngram_max").get<int>();
    return m;
}

inline json to_json(const EmbeddingTable& t) {
    return {{"tokens", t.tokens}, {"dim", t.dim}, {"matrix", t.matrix}};
}

inline EmbeddingTable embedding_table_from_json(const json& j) {
    EmbeddingTable t;
    t.tokens = j.at("tokens").get<std::vector<std::string>>();
    t.dim = j.at("dim").get<std::size_t>();
    t.matrix = j.at("matrix").get<std::vector<std::vector<double>>>();
    for (std::size_t i = 0; i < t.tokens.size(); ++i) t.token_to_row.emplace(t.tokens[i], i);
    return t;
}

inline json to_json(const LinearModel& m) {
    return {{"type", "linear"}, {"weights", m.weights}, {"bias", m.bias}};
}

inline LinearModel linear_from_json(const json& j) {
    LinearModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    return m;
}

inline json to_json(const AdditiveModel& m) {
    return {{"type", "additive"},
            {"bin_edges", m.bin_edges},
            {"bin_scores", m.bin_scores},
            {"intercept", m.intercept}};
}

inline AdditiveModel additive_from_json(const json& j) {
    AdditiveModel m;
    m.bin_edges = j.at("bin_edges").get<std::vector<std::vector<double>>>();
    m.bin_scores = j.at("bin_scores").get<std::vector<std::vector<double>>>();
    m.intercept = j.at("intercept").get<double>();
    return m;
}

inline json to_json(const ForestModel& m) {
    json trees = json::array();
    for (const auto& t : m.trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({{"leaf", n.is_leaf},
                             {"f", n.feature},
                             {"t", n.threshold},
                             {"p", n.leaf_prob},
                             {"l", n.left},
                             {"r", n.right}});
        trees.push_back(nodes);
    }
    return {{"type", "forest"}, {"n_features", m.n_features}, {"trees", trees}};
}

inline ForestModel forest_from_json(const json& j) {
    ForestModel m;
    m.n_features = j.at("n_features").get<std::size_t>();
    for (const auto& tj : j.at("trees")) {
        Tree t;
        for (const auto& nj : tj) {
            TreeNode n;
            n.is_leaf = nj.at("leaf").get<bool>();
            n.feature = nj.at("f").get<std::size_t>();
            n.threshold = nj.at("t").get<double>();
            n.leaf_prob = nj.at("p").get<double>();
            n.left = nj.at("l").get<std::int32_t>();
            n.right = nj.at("r").get<std::int32_t>();
            t.nodes.push_back(n);
        }
        m.trees.push_back(std::move(t));
    }
    return m;
}

inline json to_json(const EmbeddingClassifier& m) {
    return {{"type", "embedding-classifier"},
            {"table", to_json(m.table)},
            {"head_weights", m.head_weights},
            {"head_bias", m.head_bias},
            {"out_of_table_tokens", m.out_of_table_tokens}};
}

inline EmbeddingClassifier embedding_classifier_from_json(const json& j) {
    EmbeddingClassifier m;
    m.table = embedding_table_from_json(j.at("table"));
    m.head_weights = j.at("head_weights").get<std::vector<double>>();
    m.head_bias = j.at("head_bias").get<double>();
    m.out_of_table_tokens = j.at("out_of_table_tokens").get<std::size_t>();
    return m;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json_file(const std::string& path) {
    return json::parse(read_text_file(path));
}

}  // namespace exq
