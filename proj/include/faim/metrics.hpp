#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "faim/csv.hpp"
#include "faim/errors.hpp"
#include "faim/grid.hpp"

namespace faim {

struct Prediction {
    std::string group;
    bool positive = false; // ground truth
    double score = 0.0;
};

struct MetricRow {
    std::string scope; // "overall" or a group label
    long long count = 0;
    long long tp = 0, fp = 0, tn = 0, fn = 0;
    std::optional<double> accuracy, precision, recall, fpr, fnr;
    double positive_rate = 0.0; // fraction predicted positive
    std::optional<double> d_accuracy, d_precision, d_recall, d_fpr, d_fnr;
};

struct RatioEntry {
    std::string numerator_scope;
    std::string denominator_scope;
    std::optional<double> value;
};

/// Per-group and aggregate confusion-matrix metrics at a threshold, plus the
/// positive-prediction-rate ratios between group pairs.
struct EvaluationReport {
    double threshold = 0.5;
    std::vector<MetricRow> rows; // rows[0] = overall, then groups sorted
    std::vector<RatioEntry> positive_rate_ratios;

    const MetricRow* find(const std::string& scope) const {
        for (const auto& r : rows)
            if (r.scope == scope) return &r;
        return nullptr;
    }
};

namespace detail {

inline MetricRow make_metric_row(const std::string& scope, std::span<const Prediction> preds,
                                 std::span<const std::size_t> rows, double threshold) {
    if (rows.empty()) throw data_error("empty scope '" + scope + "'");
    MetricRow m;
    m.scope = scope;
    for (std::size_t i : rows) {
        const Prediction& p = preds[i];
        const bool predicted_positive = p.score >= threshold;
        if (p.positive)
            predicted_positive ? ++m.tp : ++m.fn;
        else
            predicted_positive ? ++m.fp : ++m.tn;
    }
    m.count = static_cast<long long>(rows.size());
    const double n = static_cast<double>(m.count);
    m.accuracy = static_cast<double>(m.tp + m.tn) / n;
    m.positive_rate = static_cast<double>(m.tp + m.fp) / n;

    // Class-support-weighted two-class precision and recall. A class nobody
    // was assigned to has vacuously perfect precision; a class with no
    // ground-truth members carries zero weight.
    const double support_pos = static_cast<double>(m.tp + m.fn);
    const double support_neg = static_cast<double>(m.tn + m.fp);
    const double prec_pos =
        (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 1.0;
    const double prec_neg =
        (m.tn + m.fn) > 0 ? static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fn) : 1.0;
    m.precision = (support_pos * prec_pos + support_neg * prec_neg) / n;
    double recall_weighted = 0.0;
    if (support_pos > 0) recall_weighted += static_cast<double>(m.tp);
    if (support_neg > 0) recall_weighted += static_cast<double>(m.tn);
    m.recall = recall_weighted / n;

    if (support_neg > 0) m.fpr = static_cast<double>(m.fp) / support_neg;
    if (support_pos > 0) m.fnr = static_cast<double>(m.fn) / support_pos;
    return m;
}

} // namespace detail

/// Threshold the scores (predicted positive iff score >= threshold) and
/// report accuracy, precision, recall, FPR and FNR overall and per group.
/// Ratios with a zero denominator stay undefined rather than collapsing to 0.
inline EvaluationReport confusion_metrics(std::span<const Prediction> preds, double threshold) {
    if (preds.empty()) throw data_error("empty scope 'overall'");
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw config_error("threshold outside [0,1]");
    EvaluationReport report;
    report.threshold = threshold;

    std::vector<std::size_t> all(preds.size());
    std::map<std::string, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        all[i] = i;
        by_group[preds[i].group].push_back(i);
    }
    report.rows.push_back(detail::make_metric_row("overall", preds, all, threshold));
    for (const auto& [group, rows] : by_group)
        report.rows.push_back(detail::make_metric_row(group, preds, rows, threshold));

    for (const auto& [ga, rows_a] : by_group) {
        for (const auto& [gb, rows_b] : by_group) {
            if (ga == gb) continue;
            const MetricRow* a = report.find(ga);
            const MetricRow* b = report.find(gb);
            RatioEntry e{ga, gb, std::nullopt};
            if (b->positive_rate > 0.0) e.value = a->positive_rate / b->positive_rate;
            report.positive_rate_ratios.push_back(std::move(e));
        }
    }
    return report;
}

/// Per-cell after - before. Scopes must match; a delta is undefined whenever
/// either side is.
inline EvaluationReport delta_report(const EvaluationReport& after, const EvaluationReport& before) {
    std::set<std::string> sa, sb;
    for (const auto& r : after.rows) sa.insert(r.scope);
    for (const auto& r : before.rows) sb.insert(r.scope);
    if (sa != sb) throw data_error("scope mismatch between reports");

    EvaluationReport out = after;
    for (auto& row : out.rows) {
        const MetricRow* b = before.find(row.scope);
        auto diff = [](const std::optional<double>& x,
                       const std::optional<double>& y) -> std::optional<double> {
            if (x && y) return *x - *y;
            return std::nullopt;
        };
        row.d_accuracy = diff(row.accuracy, b->accuracy);
        row.d_precision = diff(row.precision, b->precision);
        row.d_recall = diff(row.recall, b->recall);
        row.d_fpr = diff(row.fpr, b->fpr);
        row.d_fnr = diff(row.fnr, b->fnr);
    }
    return out;
}

inline std::optional<double> positive_rate_ratio(const EvaluationReport& report,
                                                 const std::string& scope_a,
                                                 const std::string& scope_b) {
    const MetricRow* a = report.find(scope_a);
    const MetricRow* b = report.find(scope_b);
    if (!a || !b) throw data_error("unknown scope in positive rate ratio");
    if (b->positive_rate <= 0.0) return std::nullopt;
    return a->positive_rate / b->positive_rate;
}

struct PerScoreReport {
    std::size_t bin = 0;
    double bin_center = 0.0;
    EvaluationReport report;
};

/// One report per grid bin, sliced by the given keys (records whose slice key
/// falls into the bin). Bins without records are omitted.
inline std::vector<PerScoreReport> per_score_report(std::span<const Prediction> preds,
                                                    std::span<const double> slice_scores,
                                                    const ScoreGrid& grid, double threshold) {
    if (preds.empty()) throw data_error("empty scope 'overall'");
    if (slice_scores.size() != preds.size())
        throw config_error("slice score count does not match prediction count");
    std::map<std::size_t, std::vector<Prediction>> by_bin;
    for (std::size_t i = 0; i < preds.size(); ++i)
        by_bin[grid.bin_of(slice_scores[i])].push_back(preds[i]);
    std::vector<PerScoreReport> out;
    out.reserve(by_bin.size());
    for (const auto& [bin, slice] : by_bin)
        out.push_back({bin, grid.center(bin), confusion_metrics(slice, threshold)});
    return out;
}

/// Same, sliced by the records' own scores.
inline std::vector<PerScoreReport> per_score_report(std::span<const Prediction> preds,
                                                    const ScoreGrid& grid, double threshold) {
    std::vector<double> keys;
    keys.reserve(preds.size());
    for (const auto& p : preds) keys.push_back(p.score);
    return per_score_report(preds, keys, grid, threshold);
}

namespace detail {

inline std::string metric_cell(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

inline std::string text_cell(const std::optional<double>& v, const std::optional<double>& delta) {
    char buf[48];
    if (!v) return "undefined";
    if (delta)
        std::snprintf(buf, sizeof(buf), "%.3f (%+.3f)", *v, *delta);
    else
        std::snprintf(buf, sizeof(buf), "%.3f", *v);
    return buf;
}

} // namespace detail

/// CSV export, one row per scope. Column order: scope, accuracy, precision,
/// recall, fpr, fnr, then the deltas. Undefined ratios render as "undefined";
/// deltas are empty when no baseline was attached.
inline std::string report_to_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << "scope,accuracy,precision,recall,fpr,fnr,"
           "d_accuracy,d_precision,d_recall,d_fpr,d_fnr\n";
    for (const auto& r : report.rows) {
        out << csv::escape(r.scope);
        for (const auto* v : {&r.accuracy, &r.precision, &r.recall, &r.fpr, &r.fnr})
            out << ',' << detail::metric_cell(*v);
        for (const auto* v : {&r.d_accuracy, &r.d_precision, &r.d_recall, &r.d_fpr, &r.d_fnr})
            out << ',' << (v->has_value() ? detail::metric_cell(*v) : "");
        out << '\n';
    }
    return out.str();
}

/// Aligned text table in the layout of the experiment tables: absolute value
/// with the delta in parentheses when a baseline is present.
inline std::string report_to_text(const EvaluationReport& report,
                                  const EvaluationReport* before = nullptr) {
    std::ostringstream out;
    auto pad = [](const std::string& s, std::size_t w) {
        std::string p = s;
        while (p.size() < w) p += ' ';
        return p;
    };
    const std::size_t scope_w = 16, cell_w = 17;
    out << pad("scope", scope_w) << pad("n", 10) << pad("accuracy", cell_w)
        << pad("precision", cell_w) << pad("recall", cell_w) << pad("fpr", cell_w)
        << pad("fnr", cell_w) << '\n';
    auto emit_rows = [&](const EvaluationReport& rep, bool with_delta) {
        for (const auto& r : rep.rows) {
            out << pad(r.scope, scope_w) << pad(std::to_string(r.count), 10);
            out << pad(detail::text_cell(r.accuracy, with_delta ? r.d_accuracy : std::nullopt), cell_w)
                << pad(detail::text_cell(r.precision, with_delta ? r.d_precision : std::nullopt), cell_w)
                << pad(detail::text_cell(r.recall, with_delta ? r.d_recall : std::nullopt), cell_w)
                << pad(detail::text_cell(r.fpr, with_delta ? r.d_fpr : std::nullopt), cell_w)
                << pad(detail::text_cell(r.fnr, with_delta ? r.d_fnr : std::nullopt), cell_w) << '\n';
        }
    };
    if (before) {
        out << "-- before --\n";
        emit_rows(*before, false);
        out << "-- after --\n";
    }
    emit_rows(report, before != nullptr);
    if (!report.positive_rate_ratios.empty()) {
        out << "-- positive prediction rate ratios --\n";
        for (const auto& e : report.positive_rate_ratios) {
            out << e.numerator_scope << " / " << e.denominator_scope << ": ";
            if (e.value) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * *e.value);
                out << buf;
            } else {
                out << "undefined";
            }
            out << '\n';
        }
    }
    return out.str();
}

} // namespace faim
