#include <doctest.h>

#include <cmath>

#include "exq/attributions.hpp"
#include "support.hpp"

using namespace exq;

namespace {

EmbeddingClassifier toy_classifier() {
    EmbeddingClassifier m;
    m.table.tokens = {"up", "down", "flat"};
    m.table.dim = 2;
    m.table.matrix = {{1.0, 0.0}, {-1.0, 0.5}, {0.0, 1.0}};
    for (std::size_t i = 0; i < m.table.tokens.size(); ++i)
        m.table.token_to_row.emplace(m.table.tokens[i], i);
    m.head_weights = {2.0, -1.0};
    m.head_bias = 0.1;
    return m;
}

}  // namespace

TEST_CASE("truth attributions match hand-computed values") {
    SUBCASE("linear: w_i * x_i") {
        LinearModel m;
        m.weights = {2.0, -3.0, 0.5};
        SparseVector x{3, {0, 2}, {0.5, 4.0}};
        auto a = truth_linear(m, x);
        CHECK(a.scores == std::vector<double>{1.0, 0.0, 2.0});
        CHECK(a.method == "truth");
        CHECK(a.unit_kind == UnitKind::Feature);
    }
    SUBCASE("additive: per-feature shape values") {
        AdditiveModel m;
        m.bin_edges = {{0.5}, {0.5}};        // two bins per feature
        m.bin_scores = {{-1.0, 1.0}, {0.25, 0.75}};
        m.intercept = 0.0;
        SparseVector x{2, {0, 1}, {0.9, 0.2}};
        auto a = truth_additive(m, x);
        CHECK(a.scores[0] == doctest::Approx(1.0));   // 0.9 falls in the upper bin
        CHECK(a.scores[1] == doctest::Approx(0.25));  // 0.2 falls in the lower bin
        // sum of shapes + intercept equals the logit
        CHECK(a.scores[0] + a.scores[1] + m.intercept == doctest::Approx(m.logit(x)));
    }
    SUBCASE("dimension mismatch throws") {
        LinearModel m;
        m.weights = {1.0};
        CHECK_THROWS_AS(static_cast<void>(truth_linear(m, SparseVector{2, {0}, {1.0}})), Error);
    }
}

TEST_CASE("lime recovers a linear model on masked inputs (enumerated masks)") {
    // model whose masked-input behavior is exactly linear in the mask bits:
    // f(z) = sum_i z_i * c_i with c_i depending only on presence, achieved by
    // reading the *sign pattern* rather than magnitudes
    SparseVector x{4, {0, 1, 2, 3}, {0.5, 0.5, 0.5, 0.5}};
    std::vector<double> c = {1.0, -2.0, 0.5, 3.0};
    ModelFn f = [&](const SparseVector& z) {
        double s = 0;
        for (std::size_t i = 0; i < z.indices.size(); ++i) s += c[z.indices[i]];
        return s;
    };
    LimeConfig cfg;
    cfg.enumerate_masks = true;
    cfg.ridge_penalty = 1e-9;
    cfg.n_report_features = 0;
    auto a = lime(f, x, cfg);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.scores[i] == doctest::Approx(c[i]).epsilon(1e-5));
    CHECK(a.metadata["surrogate_r2"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lime: sampling determinism, top-k retention, degenerate input") {
    SparseVector x{6, {0, 1, 2, 3, 4, 5}, {0.3, 0.3, 0.3, 0.3, 0.3, 0.3}};
    ModelFn f = [](const SparseVector& z) { return z.norm2(); };
    LimeConfig cfg;
    cfg.n_samples = 100;
    cfg.seed = 42;

    SUBCASE("same seed same result, different seed differs") {
        auto a = lime(f, x, cfg), b = lime(f, x, cfg);
        CHECK(a.scores == b.scores);
        cfg.seed = 43;
        auto d = lime(f, x, cfg);
        CHECK(a.scores != d.scores);
    }
    SUBCASE("top-k keeps exactly k nonzeros") {
        cfg.n_report_features = 3;
        auto a = lime(f, x, cfg);
        std::size_t nz = 0;
        for (double s : a.scores) nz += s != 0.0;
        CHECK(nz == 3);
    }
    SUBCASE("empty input throws") {
        CHECK_THROWS_AS(static_cast<void>(lime(f, SparseVector{4, {}, {}}, cfg)), Error);
    }
}

namespace {

// a deliberately non-additive model for the Shapley oracle comparison
ModelFn interaction_model() {
    return [](const SparseVector& z) {
        auto d = z.to_dense();
        double out = 0.3;
        for (std::size_t i = 0; i < d.size(); ++i) out += (static_cast<double>(i) + 1.0) * 0.2 * d[i];
        if (d.size() >= 2) out += 1.5 * d[0] * d[1];
        if (d.size() >= 5) out += -0.7 * d[2] * d[4];
        return out;
    };
}

}  // namespace

TEST_CASE("kernel_shap (full enumeration) equals the exact Shapley oracle") {
    auto f = interaction_model();
    for (std::size_t m : {2u, 3u, 5u, 8u}) {
        std::vector<std::size_t> idx(m);
        std::vector<double> val(m);
        for (std::size_t i = 0; i < m; ++i) {
            idx[i] = i;
            val[i] = 0.4 + 0.1 * static_cast<double>(i);
        }
        SparseVector x{m, idx, val};
        KernelShapConfig cfg;
        cfg.enumerate_coalitions = true;
        auto approx = kernel_shap(f, x, cfg);
        auto exact = exact_shapley(f, x);
        for (std::size_t i = 0; i < m; ++i)
            CHECK(approx.scores[i] == doctest::Approx(exact.scores[i]).epsilon(1e-8));
    }
}

TEST_CASE("shapley axioms on the oracle and the regression") {
    auto f = interaction_model();
    SparseVector x{5, {0, 1, 2, 3, 4}, {1.0, 1.0, 1.0, 1.0, 1.0}};
    KernelShapConfig cfg;
    cfg.enumerate_coalitions = true;

    SUBCASE("efficiency: scores sum to f(x) - f(0)") {
        auto a = kernel_shap(f, x, cfg);
        double total = 0;
        for (double s : a.scores) total += s;
        SparseVector zero{5, {}, {}};
        CHECK(total == doctest::Approx(f(x) - f(zero)).epsilon(1e-10));
    }
    SUBCASE("dummy feature gets zero") {
        // feature 3 has no effect in this model
        ModelFn g = [](const SparseVector& z) {
            auto d = z.to_dense();
            return 2.0 * d[0] + d[1] * d[2];
        };
        SparseVector y{4, {0, 1, 2, 3}, {1.0, 1.0, 1.0, 1.0}};
        auto a = kernel_shap(g, y, cfg);
        auto e = exact_shapley(g, y);
        CHECK(std::abs(a.scores[3]) < 1e-10);
        CHECK(std::abs(e.scores[3]) < 1e-12);
    }
    SUBCASE("symmetry: interchangeable features get equal scores") {
        ModelFn g = [](const SparseVector& z) {
            auto d = z.to_dense();
            return d[0] + d[1] + 3.0 * d[0] * d[1];
        };
        SparseVector y{2, {0, 1}, {1.0, 1.0}};
        auto e = exact_shapley(g, y);
        CHECK(e.scores[0] == doctest::Approx(e.scores[1]));
    }
    SUBCASE("linearity of the oracle") {
        ModelFn g1 = [](const SparseVector& z) { return z.to_dense()[0] * 2.0; };
        ModelFn g2 = [](const SparseVector& z) {
            auto d = z.to_dense();
            return d[0] * d[1];
        };
        ModelFn gsum = [&](const SparseVector& z) { return g1(z) + g2(z); };
        SparseVector y{2, {0, 1}, {1.0, 1.0}};
        auto e1 = exact_shapley(g1, y), e2 = exact_shapley(g2, y), es = exact_shapley(gsum, y);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(es.scores[i] == doctest::Approx(e1.scores[i] + e2.scores[i]).epsilon(1e-12));
    }
}

TEST_CASE("kernel_shap sampled path: determinism and rough agreement") {
    auto f = interaction_model();
    std::vector<std::size_t> idx(14);
    std::vector<double> val(14, 0.5);
    std::iota(idx.begin(), idx.end(), 0);
    SparseVector x{14, idx, val};
    KernelShapConfig cfg;
    cfg.n_samples = 3000;
    cfg.seed = 7;
    auto a = kernel_shap(f, x, cfg);
    auto b = kernel_shap(f, x, cfg);
    CHECK(a.scores == b.scores);

    // efficiency holds exactly even on the sampled path
    double total = 0;
    for (double s : a.scores) total += s;
    SparseVector zero{14, {}, {}};
    CHECK(total == doctest::Approx(f(x) - f(zero)).epsilon(1e-10));

    // truncate to 12 features to compare against the oracle at a loose tolerance
    SparseVector x12{12, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, std::vector<double>(12, 0.5)};
    KernelShapConfig scfg;
    scfg.n_samples = 4000;
    scfg.seed = 3;
    // force the sampled branch even though enumeration would fit
    auto approx = kernel_shap(f, x12, scfg);
    auto exact = exact_shapley(f, x12);
    for (std::size_t i = 0; i < 12; ++i)
        CHECK(approx.scores[i] == doctest::Approx(exact.scores[i]).epsilon(0.15));
}

TEST_CASE("kernel_shap edge cases") {
    ModelFn f = [](const SparseVector& z) { return z.norm2(); };
    KernelShapConfig cfg;
    SUBCASE("single nonzero feature gets the whole delta") {
        SparseVector x{4, {2}, {0.8}};
        auto a = kernel_shap(f, x, cfg);
        CHECK(a.scores[2] == doctest::Approx(0.8));
        CHECK(a.scores[0] == 0.0);
    }
    SUBCASE("all-zero input gives all-zero scores") {
        auto a = kernel_shap(f, SparseVector{3, {}, {}}, cfg);
        for (double s : a.scores) CHECK(s == 0.0);
    }
    SUBCASE("exact_shapley refuses m > 15") {
        std::vector<std::size_t> idx(16);
        std::iota(idx.begin(), idx.end(), 0);
        SparseVector x{16, idx, std::vector<double>(16, 1.0)};
        CHECK_THROWS_AS(static_cast<void>(exact_shapley(f, x)), Error);
    }
}

TEST_CASE("saliency is the l2 norm of the per-token gradient rows") {
    auto m = toy_classifier();
    std::vector<std::string> tokens = {"up", "down"};
    auto a = saliency(m, tokens);
    REQUIRE(a.scores.size() == 2);
    CHECK(a.unit_kind == UnitKind::TokenPosition);
    // gradient row = w/n = {1.0, -0.5} for each position
    double expected = std::sqrt(1.0 + 0.25);
    CHECK(a.scores[0] == doctest::Approx(expected));
    CHECK(a.scores[1] == doctest::Approx(expected));
    CHECK(a.scores[0] >= 0.0);
}

TEST_CASE("integrated gradients: completeness and linear-model exactness") {
    auto m = toy_classifier();
    std::vector<std::string> tokens = {"up", "down", "flat"};

    SUBCASE("completeness residual vanishes for the linear head") {
        auto a = integrated_gradients(m, tokens);
        CHECK(a.metadata["completeness_residual"].get<double>() < 1e-10);
        double total = 0;
        for (double s : a.scores) total += s;
        std::vector<std::vector<double>> base(3, std::vector<double>(2, 0.0));
        std::vector<std::vector<double>> emb;
        for (const auto& t : tokens) emb.push_back(m.embed(t));
        CHECK(total == doctest::Approx(m.logit_of_embeddings(emb) - m.logit_of_embeddings(base)));
    }
    SUBCASE("per-token scores equal (e_t - b_t) . w / n for a linear head") {
        auto a = integrated_gradients(m, tokens);
        // up: (1,0).(2,-1)/3 ; down: (-1,0.5).(2,-1)/3 ; flat: (0,1).(2,-1)/3
        CHECK(a.scores[0] == doctest::Approx(2.0 / 3.0));
        CHECK(a.scores[1] == doctest::Approx(-2.5 / 3.0));
        CHECK(a.scores[2] == doctest::Approx(-1.0 / 3.0));
    }
    SUBCASE("nonzero baseline shifts scores accordingly") {
        IntegratedGradientsConfig cfg;
        cfg.baseline.assign(3, {1.0, 0.0});
        auto a = integrated_gradients(m, tokens, cfg);
        // up's embedding equals the baseline, so its path contribution is 0
        CHECK(a.scores[0] == doctest::Approx(0.0));
    }
    SUBCASE("step count below 8 and empty sequence throw") {
        IntegratedGradientsConfig cfg;
        cfg.steps = 4;
        CHECK_THROWS_AS(static_cast<void>(integrated_gradients(m, tokens, cfg)), Error);
        CHECK_THROWS_AS(static_cast<void>(integrated_gradients(m, {})), Error);
    }
}

TEST_CASE("attribution JSON export shape") {
    LinearModel m;
    m.weights = {1.0, 0.0, 2.0};
    auto a = truth_linear(m, SparseVector{3, {0, 2}, {1.0, 1.0}});
    auto j = a.to_json();
    CHECK(j["unit_kind"] == "feature");
    CHECK(j["dim"] == 3);
    CHECK(j["idx"].size() == 2);  // sparse: zero entries omitted

    auto s = saliency(toy_classifier(), {"up"});
    auto js = s.to_json();
    CHECK(js["unit_kind"] == "token-position");
    CHECK(js["scores"].size() == 1);
}
