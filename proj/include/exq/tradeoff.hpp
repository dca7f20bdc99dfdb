#pragma once

#include <algorithm>
#include <numeric>

#include "exq/attributions.hpp"
#include "exq/common.hpp"

namespace exq {

// Exact Mann-Whitney AUC; ties count half.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw Error("auc: size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw Error("auc: both classes must be present");

    // rank-sum with midranks for ties
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) rank_sum_pos += midrank;
        i = j;
    }
    double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// ---------------------------------------------------------------------------
// Pareto frontier over (model, attribution) candidates

struct CandidatePoint {
    std::string model_id;
    std::string method;
    double auc = 0;         // maximize
    double infidelity = 0;  // minimize
    double lipschitz = 0;   // minimize

    std::string id() const { return model_id + "/" + method; }
};

enum class Objective { AucMax, InfidelityMin, LipschitzMin };

inline double objective_value(const CandidatePoint& p, Objective o) {
    switch (o) {
        case Objective::AucMax: return p.auc;
        case Objective::InfidelityMin: return p.infidelity;
        default: return p.lipschitz;
    }
}

inline bool objective_maximize(Objective o) { return o == Objective::AucMax; }

// q dominates p: at least as good everywhere, strictly better somewhere
inline bool dominates(const CandidatePoint& q, const CandidatePoint& p,
                      const std::vector<Objective>& objectives) {
    bool strict = false;
    for (Objective o : objectives) {
        double vq = objective_value(q, o), vp = objective_value(p, o);
        if (!objective_maximize(o)) {
            vq = -vq;
            vp = -vp;
        }
        if (vq < vp) return false;
        if (vq > vp) strict = true;
    }
    return strict;
}

struct DominatedPoint {
    CandidatePoint point;
    CandidatePoint witness;  // one dominating point
};

struct ParetoResult {
    std::vector<CandidatePoint> optimal;
    std::vector<DominatedPoint> dominated;
};

inline ParetoResult pareto_frontier(const std::vector<CandidatePoint>& points,
                                    const std::vector<Objective>& objectives) {
    if (points.empty()) throw Error("pareto_frontier: no points");
    ParetoResult res;
    for (const auto& p : points) {
        const CandidatePoint* witness = nullptr;
        for (const auto& q : points) {
            if (&q == &p) continue;
            if (dominates(q, p, objectives)) {
                witness = &q;
                break;
            }
        }
        if (witness)
            res.dominated.push_back({p, *witness});
        else
            res.optimal.push_back(p);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Weighted multi-objective ranking with per-field constraints

struct ObjectiveConstraint {
    Objective field;
    double min_value = -std::numeric_limits<double>::infinity();
    double max_value = std::numeric_limits<double>::infinity();
};

struct RankedPoint {
    CandidatePoint point;
    double score = 0;
};

struct WeightedRanking {
    std::vector<RankedPoint> ranking;
    std::vector<CandidatePoint> excluded;  // constraint violations
};

inline WeightedRanking weighted_rank(const std::vector<CandidatePoint>& points,
                                     const std::vector<std::pair<Objective, double>>& weights,
                                     const std::vector<ObjectiveConstraint>& constraints = {}) {
    double wsum = 0;
    for (const auto& [o, w] : weights) {
        if (w < 0) throw Error("weighted_rank: weights must be nonnegative");
        wsum += w;
    }
    if (wsum == 0) throw Error("weighted_rank: weights must not all be zero");

    WeightedRanking out;
    std::vector<CandidatePoint> kept;
    for (const auto& p : points) {
        bool ok = true;
        for (const auto& c : constraints) {
            double v = objective_value(p, c.field);
            if (v < c.min_value || v > c.max_value) ok = false;
        }
        (ok ? kept : out.excluded).push_back(p);
    }
    if (kept.empty()) return out;  // explicit empty ranking

    // min-max normalization; minimize-direction fields negated first
    for (const auto& p : kept) {
        double score = 0;
        for (const auto& [o, w] : weights) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const auto& q : kept) {
                double v = objective_value(q, o);
                if (!objective_maximize(o)) v = -v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            double v = objective_value(p, o);
            if (!objective_maximize(o)) v = -v;
            double norm = hi > lo ? (v - lo) / (hi - lo) : 1.0;
            score += w * norm;
        }
        out.ranking.push_back({p, score});
    }
    std::sort(out.ranking.begin(), out.ranking.end(), [](const RankedPoint& a, const RankedPoint& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.point.model_id != b.point.model_id) return a.point.model_id < b.point.model_id;
        return a.point.method < b.point.method;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Truth-vs-surrogate overlap

struct OverlapReport {
    std::size_t top_k = 0;
    std::size_t overlap = 0;           // |top_k(truth) ∩ top_k(surrogate)| by |score|
    double rank_correlation = 0;       // Spearman over the union, signed scores
};

namespace detail {

inline std::vector<std::size_t> top_k_by_abs(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] != 0.0) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        double aa = std::abs(scores[a]), ab = std::abs(scores[b]);
        if (aa != ab) return aa > ab;
        return a < b;
    });
    if (idx.size() > k) idx.resize(k);
    return idx;
}

inline std::vector<double> ranks_of(const std::vector<double>& vals) {
    std::vector<std::size_t> order(vals.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<double> ranks(vals.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && vals[order[j]] == vals[order[i]]) ++j;
        double mid = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0;
        for (std::size_t t = i; t < j; ++t) ranks[order[t]] = mid;
        i = j;
    }
    return ranks;
}

}  // namespace detail

inline OverlapReport overlap_report(const Attribution& truth, const Attribution& surrogate,
                                    std::size_t top_k) {
    if (truth.unit_kind != UnitKind::Feature || surrogate.unit_kind != UnitKind::Feature)
        throw Error("overlap_report: both attributions must be feature-kind");
    if (truth.scores.size() != surrogate.scores.size())
        throw Error("overlap_report: feature spaces differ");

    OverlapReport rep;
    rep.top_k = top_k;
    auto t_top = detail::top_k_by_abs(truth.scores, top_k);
    auto s_top = detail::top_k_by_abs(surrogate.scores, top_k);
    for (std::size_t i : t_top)
        if (std::find(s_top.begin(), s_top.end(), i) != s_top.end()) ++rep.overlap;

    // Spearman over the union of top-k sets
    std::vector<std::size_t> uni = t_top;
    for (std::size_t i : s_top)
        if (std::find(uni.begin(), uni.end(), i) == uni.end()) uni.push_back(i);
    if (uni.size() >= 2) {
        std::vector<double> tv, sv;
        for (std::size_t i : uni) {
            tv.push_back(truth.scores[i]);
            sv.push_back(surrogate.scores[i]);
        }
        auto rt = detail::ranks_of(tv);
        auto rs = detail::ranks_of(sv);
        double mt = 0, ms = 0;
        for (std::size_t i = 0; i < rt.size(); ++i) {
            mt += rt[i];
            ms += rs[i];
        }
        mt /= static_cast<double>(rt.size());
        ms /= static_cast<double>(rs.size());
        double num = 0, dt = 0, ds = 0;
        for (std::size_t i = 0; i < rt.size(); ++i) {
            num += (rt[i] - mt) * (rs[i] - ms);
            dt += (rt[i] - mt) * (rt[i] - mt);
            ds += (rs[i] - ms) * (rs[i] - ms);
        }
        rep.rank_correlation = (dt > 0 && ds > 0) ? num / std::sqrt(dt * ds) : 0.0;
    }
    return rep;
}

}  // namespace exq
