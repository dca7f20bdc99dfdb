#pragma once

#include <cstdio>
#include <sstream>

#include "exq/metrics.hpp"
#include "exq/tradeoff.hpp"

namespace exq {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// One row per document per (pair, metric); byte-stable across runs.
inline std::string evaluation_csv(const std::vector<EvaluationRun>& runs) {
    std::ostringstream out;
    out << "model,method,metric,doc_id,value\n";
    for (const auto& run : runs) {
        if (run.failed) continue;
        for (const auto& r : run.lipschitz) {
            out << run.model_id << ',' << run.method << ",lipschitz," << r.doc_id << ','
                << (r.value ? fmt_double(*r.value) : "NA") << '\n';
        }
        for (const auto& r : run.infidelity) {
            out << run.model_id << ',' << run.method << ",infidelity," << r.doc_id << ','
                << fmt_double(r.value) << '\n';
        }
    }
    return out.str();
}

inline nlohmann::json stats_json(const SummaryStats& s) {
    return {{"n", s.n}, {"mean", s.mean}, {"median", s.median}, {"q1", s.q1}, {"q3", s.q3}};
}

inline nlohmann::json evaluation_json(const std::vector<EvaluationRun>& runs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& run : runs) {
        nlohmann::json j;
        j["model"] = run.model_id;
        j["method"] = run.method;
        j["failed"] = run.failed;
        if (run.failed) {
            j["failure"] = run.failure;
            out.push_back(j);
            continue;
        }
        j["config"] = run.config_snapshot;
        j["lipschitz"] = {{"stats", stats_json(run.lipschitz_stats)},
                          {"empty_neighborhoods", run.empty_neighborhoods}};
        j["infidelity"] = {{"stats", stats_json(run.infidelity_stats)}};
        nlohmann::json lip = nlohmann::json::array(), inf = nlohmann::json::array();
        for (const auto& r : run.lipschitz) {
            nlohmann::json e{{"doc_id", r.doc_id},
                             {"n_retained", r.n_retained},
                             {"n_generated", r.n_generated}};
            if (r.value) {
                e["value"] = *r.value;
                e["argmax_draw"] = r.argmax_draw;
            }
            lip.push_back(e);
        }
        for (const auto& r : run.infidelity)
            inf.push_back({{"doc_id", r.doc_id},
                           {"value", r.value},
                           {"n_draws", r.n_draws},
                           {"sigma_scale", r.sigma_scale}});
        j["lipschitz"]["per_document"] = lip;
        j["infidelity"]["per_document"] = inf;
        out.push_back(j);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Self-contained SVG plots (diffable, no rendering dependency)

// One box per (model, method) for the chosen metric.
inline std::string boxplot_svg(const std::vector<EvaluationRun>& runs, const std::string& metric) {
    struct Box {
        std::string label;
        SummaryStats stats;
        double lo = 0, hi = 0;
    };
    std::vector<Box> boxes;
    double vmax = 1e-300;
    for (const auto& run : runs) {
        if (run.failed) continue;
        Box b;
        b.label = run.model_id + "/" + run.method;
        std::vector<double> vals;
        if (metric == "lipschitz") {
            b.stats = run.lipschitz_stats;
            for (const auto& r : run.lipschitz)
                if (r.value) vals.push_back(*r.value);
        } else {
            b.stats = run.infidelity_stats;
            for (const auto& r : run.infidelity) vals.push_back(r.value);
        }
        if (vals.empty()) continue;
        b.lo = *std::min_element(vals.begin(), vals.end());
        b.hi = *std::max_element(vals.begin(), vals.end());
        vmax = std::max(vmax, b.hi);
        boxes.push_back(b);
    }
    const double width = 120.0 * std::max<std::size_t>(boxes.size(), 1) + 80;
    const double height = 360, plot_h = 280, base_y = 320;
    auto yof = [&](double v) { return base_y - (vmax > 0 ? v / vmax : 0) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<text x=\"10\" y=\"20\" font-size=\"14\">" << metric << "</text>\n";
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        double cx = 80 + 120.0 * static_cast<double>(i) + 40;
        svg << "<line x1=\"" << cx << "\" y1=\"" << yof(b.lo) << "\" x2=\"" << cx << "\" y2=\""
            << yof(b.hi) << "\" stroke=\"black\"/>\n";
        svg << "<rect x=\"" << cx - 30 << "\" y=\"" << yof(b.stats.q3) << "\" width=\"60\" height=\""
            << yof(b.stats.q1) - yof(b.stats.q3) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
        svg << "<line x1=\"" << cx - 30 << "\" y1=\"" << yof(b.stats.median) << "\" x2=\"" << cx + 30
            << "\" y2=\"" << yof(b.stats.median) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << cx << "\" y=\"345\" font-size=\"10\" text-anchor=\"middle\">"
            << b.label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

// AUC-vs-quality scatter with the frontier polyline.
inline std::string frontier_svg(const std::vector<CandidatePoint>& points,
                                const ParetoResult& pareto, Objective quality) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.auc);
        xmax = std::max(xmax, p.auc);
        double q = objective_value(p, quality);
        ymin = std::min(ymin, q);
        ymax = std::max(ymax, q);
    }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto xof = [&](double v) { return 60 + (v - xmin) / (xmax - xmin) * 400; };
    auto yof = [&](double v) { return 340 - (v - ymin) / (ymax - ymin) * 280; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"400\">\n";
    std::vector<CandidatePoint> frontier = pareto.optimal;
    std::sort(frontier.begin(), frontier.end(),
              [](const CandidatePoint& a, const CandidatePoint& b) { return a.auc < b.auc; });
    svg << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : frontier)
        svg << xof(p.auc) << ',' << yof(objective_value(p, quality)) << ' ';
    svg << "\"/>\n";
    for (const auto& p : points) {
        bool opt = std::any_of(pareto.optimal.begin(), pareto.optimal.end(),
                               [&](const CandidatePoint& q) { return q.id() == p.id(); });
        svg << "<circle cx=\"" << xof(p.auc) << "\" cy=\"" << yof(objective_value(p, quality))
            << "\" r=\"4\" fill=\"" << (opt ? "#d62728" : "#1f77b4") << "\"/>\n";
        svg << "<text x=\"" << xof(p.auc) + 6 << "\" y=\"" << yof(objective_value(p, quality)) - 4
            << "\" font-size=\"9\">" << p.id() << "</text>\n";
    }
    svg << "<text x=\"240\" y=\"385\" font-size=\"12\">auc</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

inline nlohmann::json frontier_json(const ParetoResult& res) {
    auto point_json = [](const CandidatePoint& p) {
        return nlohmann::json{{"model", p.model_id},
                              {"method", p.method},
                              {"auc", p.auc},
                              {"infidelity", p.infidelity},
                              {"lipschitz", p.lipschitz}};
    };
    nlohmann::json j;
    j["optimal"] = nlohmann::json::array();
    for (const auto& p : res.optimal) j["optimal"].push_back(point_json(p));
    j["dominated"] = nlohmann::json::array();
    for (const auto& d : res.dominated)
        j["dominated"].push_back(
            {{"point", point_json(d.point)}, {"dominated_by", point_json(d.witness)}});
    return j;
}

inline std::string frontier_table(const ParetoResult& res) {
    std::ostringstream out;
    out << "pareto-optimal:\n";
    for (const auto& p : res.optimal)
        out << "  " << p.id() << "  auc=" << fmt_double(p.auc)
            << "  infidelity=" << fmt_double(p.infidelity)
            << "  lipschitz=" << fmt_double(p.lipschitz) << "\n";
    out << "dominated:\n";
    for (const auto& d : res.dominated)
        out << "  " << d.point.id() << "  (dominated by " << d.witness.id() << ")\n";
    return out.str();
}

}  // namespace exq
