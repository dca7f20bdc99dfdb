#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "exq/rng.hpp"
#include "exq/text.hpp"

namespace exq::testsupport {

// Deterministic two-class corpus: positive documents oversample "risk"
// tokens, negatives oversample "benign" tokens, both share filler.
inline Corpus make_synthetic_corpus(std::uint64_t seed, std::size_t n_docs) {
    std::vector<std::string> risk, benign, filler;
    for (char c = 'a'; c < 'a' + 20; ++c) {
        risk.push_back(std::string("risk") + c);
        benign.push_back(std::string("benign") + c);
        filler.push_back(std::string("filler") + c);
    }
    Corpus corpus;
    RngStream rng(seed);
    for (std::size_t i = 0; i < n_docs; ++i) {
        Document doc;
        doc.id = "doc" + std::to_string(i + 1);
        doc.label = static_cast<int>(i % 2);
        std::size_t len = 30 + rng.uniform_int(30);
        for (std::size_t t = 0; t < len; ++t) {
            double u = rng.uniform();
            double p_risk = doc.label ? 0.35 : 0.15;
            double p_benign = doc.label ? 0.15 : 0.35;
            if (u < p_risk)
                doc.tokens.push_back(risk[rng.uniform_int(risk.size())]);
            else if (u < p_risk + p_benign)
                doc.tokens.push_back(benign[rng.uniform_int(benign.size())]);
            else
                doc.tokens.push_back(filler[rng.uniform_int(filler.size())]);
        }
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

inline void write_corpus_tsv(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& doc : corpus) {
        out << doc.label << '\t';
        for (std::size_t i = 0; i < doc.tokens.size(); ++i)
            out << (i ? " " : "") << doc.tokens[i];
        out << '\n';
    }
}

inline std::string temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("exq_test_" + name);
    std::filesystem::create_directories(dir);
    return dir.string();
}

// Minimal well-behaved adapter used by the protocol tests.
inline std::string write_adapter_script(const std::string& dir) {
    std::string path = dir + "/adapter.py";
    std::ofstream out(path);
    out << R"(import json, sys
for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "hello":
        print(json.dumps({"op": "hello", "representation": "sparse-vector", "name": "toy"}))
    elif req["op"] == "predict":
        probs = []
        for x in req["inputs"]:
            s = sum(v for v in x["val"])
            probs.append(1.0 / (1.0 + pow(2.718281828459045, -s)))
        print(json.dumps({"op": "predict", "probs": probs}))
    elif req["op"] == "bye":
        sys.exit(0)
    sys.stdout.flush()
)";
    return path;
}

}  // namespace exq::testsupport
