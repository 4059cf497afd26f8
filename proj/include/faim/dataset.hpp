#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "faim/csv.hpp"
#include "faim/errors.hpp"
#include "faim/grid.hpp"

namespace faim {

struct Record {
    std::string id;
    std::string group;
    double raw_score = 0.0;
    bool positive = false;
};

/// Individuals with group label, raw score and binary ground-truth label.
struct GroupedDataset {
    std::vector<Record> records;

    std::vector<std::string> groups() const {
        std::set<std::string> seen;
        for (const auto& r : records) seen.insert(r.group);
        return {seen.begin(), seen.end()};
    }

    std::vector<double> scores() const {
        std::vector<double> s;
        s.reserve(records.size());
        for (const auto& r : records) s.push_back(r.raw_score);
        return s;
    }
};

/// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Optional min-max normalization onto [0, 1] (a constant input maps to 0.5
/// everywhere), then snapping to bin centers. Idempotent on snapped input.
inline std::vector<double> truncate_scores(std::span<const double> scores, const ScoreGrid& grid,
                                           bool normalize) {
    if (scores.empty()) throw data_error("empty input");
    std::vector<double> out(scores.begin(), scores.end());
    if (normalize) {
        const auto [mn, mx] = std::minmax_element(out.begin(), out.end());
        const double lo = *mn, hi = *mx;
        if (hi > lo) {
            for (double& s : out) s = (s - lo) / (hi - lo);
        } else {
            for (double& s : out) s = 0.5;
        }
    }
    for (double& s : out) {
        if (!(s >= 0.0 && s <= 1.0))
            throw data_error("unnormalized input: score outside [0,1]");
        s = grid.snap(s);
    }
    return out;
}

/// Column-name mapping for generic CSV ingestion. An empty id column means
/// ids are synthesized from row numbers.
struct CsvSchema {
    std::string id;
    std::string group = "group";
    std::string score = "raw_score";
    std::string label = "ground_truth";
};

namespace detail {

inline double parse_double_field(const std::string& s, std::size_t line_no, const std::string& col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw data_error("line " + std::to_string(line_no) + ": unparsable value '" + s +
                         "' in column '" + col + "'");
    }
}

inline bool parse_label_field(const std::string& s, std::size_t line_no, const std::string& col) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw data_error("line " + std::to_string(line_no) + ": ground-truth value '" + s +
                     "' in column '" + col + "' is not 0 or 1");
}

} // namespace detail

inline GroupedDataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
    const csv::Table table = csv::read_file(path);
    const std::size_t group_col = table.column(schema.group);
    const std::size_t score_col = table.column(schema.score);
    const std::size_t label_col = table.column(schema.label);
    const bool has_id = !schema.id.empty();
    const std::size_t id_col = has_id ? table.column(schema.id) : 0;

    GroupedDataset data;
    data.records.reserve(table.rows.size());
    std::set<std::string> ids;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::size_t line_no = i + 2;
        Record r;
        r.id = has_id ? row[id_col] : std::to_string(i + 1);
        r.group = row[group_col];
        r.raw_score = detail::parse_double_field(row[score_col], line_no, schema.score);
        r.positive = detail::parse_label_field(row[label_col], line_no, schema.label);
        if (!ids.insert(r.id).second)
            throw data_error("duplicate id '" + r.id + "' (line " + std::to_string(line_no) + ")");
        data.records.push_back(std::move(r));
    }
    if (data.records.empty()) throw data_error("empty dataset");
    return data;
}

/// Canonical dataset CSV: id, group, raw_score[, fair_score], ground_truth.
inline void write_dataset_csv(const std::string& path, const GroupedDataset& data,
                              const std::vector<double>* fair_scores = nullptr) {
    if (fair_scores && fair_scores->size() != data.records.size())
        throw config_error("fair score count does not match dataset size");
    std::ofstream out(path);
    if (!out) throw config_error("cannot write file '" + path + "'");
    out << (fair_scores ? "id,group,raw_score,fair_score,ground_truth\n"
                        : "id,group,raw_score,ground_truth\n");
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const Record& r = data.records[i];
        out << csv::escape(r.id) << ',' << csv::escape(r.group) << ','
            << format_double(r.raw_score) << ',';
        if (fair_scores) out << format_double((*fair_scores)[i]) << ',';
        out << (r.positive ? '1' : '0') << '\n';
    }
    if (!out) throw config_error("cannot write file '" + path + "'");
}

} // namespace faim
