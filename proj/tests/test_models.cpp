#include <doctest.h>

#include <cmath>

#include "exq/external.hpp"
#include "exq/model_io.hpp"
#include "exq/models.hpp"
#include "exq/tradeoff.hpp"
#include "support.hpp"

using namespace exq;

namespace {

SparseVector sv1(double x) { return {1, {0}, {x}}; }

std::pair<std::vector<SparseVector>, std::vector<int>> separable_1d(std::size_t n) {
    std::vector<SparseVector> X;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
        bool pos = i % 2 == 0;
        X.push_back(sv1(pos ? 1.0 : -1.0));
        y.push_back(pos ? 1 : 0);
    }
    return {X, y};
}

}  // namespace

TEST_CASE("train_logistic: separable sign problem") {
    auto [X, y] = separable_1d(40);
    LogisticConfig cfg;
    cfg.l2 = 0.0;
    cfg.epochs = 50;
    TrainLog log;
    auto model = train_logistic(X, y, cfg, &log);
    CHECK(model.weights[0] > 0);
    for (std::size_t i = 0; i < X.size(); ++i)
        CHECK((model.predict_proba(X[i]) > 0.5) == (y[i] == 1));
    CHECK(log.warnings.empty());
}

TEST_CASE("zero-weight linear model predicts 0.5 everywhere") {
    LinearModel m;
    m.weights = {0, 0, 0};
    CHECK(m.predict_proba({3, {1}, {0.7}}) == doctest::Approx(0.5));
}

TEST_CASE("train_logistic recovers generating weights on synthetic data") {
    // generate from logit = 3 x0 - 2 x1
    RngStream rng(101);
    std::vector<SparseVector> X;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        double x0 = rng.gaussian(), x1 = rng.gaussian();
        double p = sigmoid(3.0 * x0 - 2.0 * x1);
        X.push_back(SparseVector::from_dense({x0, x1}));
        y.push_back(rng.uniform() < p ? 1 : 0);
    }
    std::vector<SparseVector> X_test;
    std::vector<int> y_test;
    for (int i = 0; i < 200; ++i) {
        double x0 = rng.gaussian(), x1 = rng.gaussian();
        X_test.push_back(SparseVector::from_dense({x0, x1}));
        y_test.push_back(rng.uniform() < sigmoid(3.0 * x0 - 2.0 * x1) ? 1 : 0);
    }
    LogisticConfig cfg;
    cfg.epochs = 60;
    cfg.lr = 0.5;
    auto model = train_logistic(X, y, cfg);
    CHECK(model.weights[0] > 0);
    CHECK(model.weights[1] < 0);
    std::vector<double> scores;
    for (const auto& x : X_test) scores.push_back(model.predict_proba(x));
    CHECK(auc(scores, y_test) >= 0.95);
}

TEST_CASE("trainers reject single-class data") {
    std::vector<SparseVector> X = {sv1(1.0), sv1(2.0)};
    std::vector<int> y = {1, 1};
    CHECK_THROWS_AS(static_cast<void>(train_logistic(X, y, {})), Error);
    CHECK_THROWS_AS(static_cast<void>(train_additive(X, y, {})), Error);
    CHECK_THROWS_AS(static_cast<void>(train_forest(X, y, {})), Error);
}

TEST_CASE("train_additive: rounds=0 gives the base-rate intercept model") {
    auto [X, y] = separable_1d(10);
    AdditiveConfig cfg;
    cfg.rounds = 0;
    auto model = train_additive(X, y, cfg);
    CHECK(model.predict_proba(sv1(1.0)) == doctest::Approx(0.5));  // balanced labels
    for (const auto& scores : model.bin_scores)
        for (double s : scores) CHECK(s == 0.0);
}

TEST_CASE("additive model algebra: zero shapes, intercept ln 3") {
    AdditiveModel m;
    m.bin_edges = {{}, {}};
    m.bin_scores = {{0.0}, {0.0}};
    m.intercept = std::log(3.0);
    CHECK(m.predict_proba({2, {0}, {0.4}}) == doctest::Approx(0.75));
}

TEST_CASE("train_additive concentrates on the informative feature") {
    // y depends only on feature 3 of 10
    RngStream rng(55);
    std::vector<SparseVector> X;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
        std::vector<double> x(10, 0.0);
        for (auto& v : x) v = rng.uniform();
        X.push_back(SparseVector::from_dense(x));
        y.push_back(x[3] > 0.5 ? 1 : 0);
    }
    AdditiveConfig cfg;
    cfg.n_bins = 16;
    cfg.rounds = 60;
    auto model = train_additive(X, y, cfg);
    // sweeping the informative feature across the step moves the logit far
    // more than sweeping any noise feature
    auto effect = [&](std::size_t j) { return model.shape(j, 0.9) - model.shape(j, 0.1); };
    CHECK(effect(3) > 1.0);
    for (std::size_t j = 0; j < 10; ++j)
        if (j != 3) CHECK(effect(3) > 2.0 * std::abs(effect(j)));

    // and crossing the step moves the probability by a wide margin (absolute
    // thresholds are fragile here: the nine noise shapes at 0.5 contribute a
    // small bias of their own)
    std::vector<double> lo(10, 0.5), hi(10, 0.5);
    lo[3] = 0.1;
    hi[3] = 0.9;
    double p_hi = model.predict_proba(SparseVector::from_dense(hi));
    double p_lo = model.predict_proba(SparseVector::from_dense(lo));
    CHECK(p_hi > 0.6);
    CHECK(p_hi - p_lo > 0.25);
}

TEST_CASE("train_forest: depth 0, separable stumps, seed behavior") {
    SUBCASE("max_depth=0 gives single-leaf trees at the bootstrap base rate") {
        auto [X, y] = separable_1d(50);
        ForestConfig cfg;
        cfg.max_depth = 0;
        cfg.n_trees = 10;
        auto model = train_forest(X, y, cfg);
        for (const auto& tree : model.trees) {
            REQUIRE(tree.nodes.size() == 1);
            CHECK(tree.nodes[0].is_leaf);
        }
        CHECK(model.predict_proba(sv1(1.0)) == doctest::Approx(0.5).epsilon(0.3));
    }
    SUBCASE("perfectly separable data, depth 1, training AUC 1.0") {
        auto [X, y] = separable_1d(50);
        ForestConfig cfg;
        cfg.max_depth = 1;
        cfg.n_trees = 25;
        auto model = train_forest(X, y, cfg);
        std::vector<double> scores;
        for (const auto& x : X) scores.push_back(model.predict_proba(x));
        CHECK(auc(scores, y) == doctest::Approx(1.0));
    }
    SUBCASE("same seed reproduces, different seed differs somewhere") {
        RngStream rng(77);
        std::vector<SparseVector> X;
        std::vector<int> y;
        for (int i = 0; i < 100; ++i) {
            std::vector<double> x = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
            X.push_back(SparseVector::from_dense(x));
            y.push_back(x[0] + 0.8 * rng.gaussian() > 0 ? 1 : 0);
        }
        ForestConfig cfg;
        cfg.n_trees = 10;
        cfg.max_depth = 4;
        cfg.seed = 1;
        auto m1 = train_forest(X, y, cfg);
        auto m2 = train_forest(X, y, cfg);
        cfg.seed = 2;
        auto m3 = train_forest(X, y, cfg);
        bool any_diff = false;
        for (const auto& x : X) {
            CHECK(m1.predict_proba(x) == m2.predict_proba(x));
            if (m1.predict_proba(x) != m3.predict_proba(x)) any_diff = true;
        }
        CHECK(any_diff);
    }
}

TEST_CASE("forest prediction is the mean of its trees' leaf outputs") {
    ForestModel m;
    m.n_features = 1;
    Tree stump;
    stump.nodes = {{false, 0, 0.5, 0.0, 1, 2}, {true, 0, 0, 0.2, -1, -1}, {true, 0, 0, 0.9, -1, -1}};
    m.trees = {stump};
    CHECK(m.predict_proba(sv1(0.7)) == doctest::Approx(0.9));
    CHECK(m.predict_proba(sv1(0.3)) == doctest::Approx(0.2));

    Tree leaf;
    leaf.nodes = {{true, 0, 0, 0.5, -1, -1}};
    m.trees.push_back(leaf);
    double manual = (0.9 + 0.5) / 2.0;
    CHECK(m.predict_proba(sv1(0.7)) == doctest::Approx(manual));
}

namespace {

EmbeddingTable toy_table() {
    EmbeddingTable t;
    t.tokens = {"up", "down", "flat"};
    t.dim = 2;
    t.matrix = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}};
    for (std::size_t i = 0; i < t.tokens.size(); ++i) t.token_to_row.emplace(t.tokens[i], i);
    return t;
}

}  // namespace

TEST_CASE("embedding classifier: frozen separable training reaches accuracy 1.0") {
    Corpus corpus;
    for (int i = 0; i < 20; ++i) {
        corpus.push_back({"p" + std::to_string(i), 1, {"up", "flat"}});
        corpus.push_back({"n" + std::to_string(i), 0, {"down", "flat"}});
    }
    EmbeddingClassifierConfig cfg;
    cfg.epochs = 80;
    auto model = train_embedding_classifier(corpus, toy_table(), cfg);
    for (const auto& doc : corpus)
        CHECK((model.predict_proba(doc.tokens) > 0.5) == (doc.label == 1));
}

TEST_CASE("embedding classifier algebra") {
    EmbeddingClassifier m;
    m.table = toy_table();
    m.head_weights = {0.0, 0.0};
    CHECK(m.predict_proba({"up", "down"}) == doctest::Approx(0.5));

    m.head_weights = {2.0, -1.0};
    SUBCASE("mean-pooling gradient rows equal w/n; single token row equals w") {
        auto g = gradient_wrt_embeddings(m, {"up", "down"});
        CHECK(g[0][0] == doctest::Approx(1.0));
        CHECK(g[1][1] == doctest::Approx(-0.5));
        auto g1 = gradient_wrt_embeddings(m, {"up"});
        CHECK(g1[0][0] == doctest::Approx(2.0));
        CHECK(g1[0][1] == doctest::Approx(-1.0));
    }
    SUBCASE("logit is linear in a single token's embedding") {
        double z1 = m.logit({"up", "flat"});
        m.table.matrix[0] = {2.0, 0.0};  // scale "up" by 2
        double z2 = m.logit({"up", "flat"});
        // contribution of "up" doubles: z = (w.e_up + w.e_flat)/2
        double up_contrib1 = 2.0 * 1.0 / 2.0;
        double up_contrib2 = 2.0 * 2.0 / 2.0;
        CHECK(z2 - z1 == doctest::Approx(up_contrib2 - up_contrib1));
    }
}

TEST_CASE("embedding classifier gradient matches central finite differences") {
    Corpus corpus;
    for (int i = 0; i < 3; ++i) corpus.push_back({"p" + std::to_string(i), 1, {"up", "flat"}});
    for (int i = 0; i < 2; ++i) corpus.push_back({"n" + std::to_string(i), 0, {"down"}});
    EmbeddingClassifierConfig cfg;
    cfg.epochs = 5;
    auto model = train_embedding_classifier(corpus, toy_table(), cfg);

    std::vector<std::string> tokens = {"up", "down", "flat"};
    auto grad = gradient_wrt_embeddings(model, tokens);
    const double h = 1e-6;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        for (std::size_t d = 0; d < model.table.dim; ++d) {
            auto plus = model, minus = model;
            plus.table.matrix[model.table.token_to_row.at(tokens[t])][d] += h;
            minus.table.matrix[model.table.token_to_row.at(tokens[t])][d] -= h;
            // duplicate tokens would share the bump; the toy sequence has none
            double fd = (plus.logit(tokens) - minus.logit(tokens)) / (2 * h);
            CHECK(grad[t][d] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("external adapter protocol round trip") {
    auto dir = testsupport::temp_dir("adapter");
    auto script = testsupport::write_adapter_script(dir);
    ExternalModelHandle handle("python3 " + script);
    CHECK(handle.name() == "toy");
    CHECK(handle.representation() == "sparse-vector");
    auto probs = handle.predict({{3, {0, 1}, {0.5, 0.5}}, {3, {}, {}}});
    REQUIRE(probs.size() == 2);
    CHECK(probs[0] == doctest::Approx(sigmoid(1.0)));
    CHECK(probs[1] == doctest::Approx(0.5));
    handle.shutdown();
}

TEST_CASE("external adapter: malformed response is a protocol error") {
    auto dir = testsupport::temp_dir("adapter_bad");
    std::string path = dir + "/bad.py";
    {
        std::ofstream out(path);
        out << "import sys\nfor line in sys.stdin:\n    print('not json')\n    sys.stdout.flush()\n";
    }
    CHECK_THROWS_AS(ExternalModelHandle("python3 " + path), Error);
}

TEST_CASE("external adapter: timeout is retried then fails") {
    auto dir = testsupport::temp_dir("adapter_slow");
    std::string path = dir + "/slow.py";
    {
        std::ofstream out(path);
        out << "import time\ntime.sleep(30)\n";
    }
    CHECK_THROWS_WITH_AS(ExternalModelHandle("python3 " + path, 200),
                         doctest::Contains("timed out"), Error);
}

TEST_CASE("model serialization round trips") {
    auto [X, y] = separable_1d(20);
    LogisticConfig cfg;
    cfg.epochs = 5;
    auto lr = train_logistic(X, y, cfg);
    auto lr2 = linear_from_json(to_json(lr));
    CHECK(lr2.predict_proba(sv1(0.3)) == lr.predict_proba(sv1(0.3)));

    ForestConfig fcfg;
    fcfg.n_trees = 5;
    fcfg.max_depth = 2;
    auto rf = train_forest(X, y, fcfg);
    auto rf2 = forest_from_json(to_json(rf));
    CHECK(rf2.predict_proba(sv1(-1.0)) == rf.predict_proba(sv1(-1.0)));
}
