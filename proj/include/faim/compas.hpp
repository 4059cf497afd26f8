#pragma once

#include <string>

#include "faim/csv.hpp"
#include "faim/dataset.hpp"
#include "faim/errors.hpp"

namespace faim {

enum class CompasDimension { sex, race, age_cat };

inline CompasDimension parse_compas_dimension(const std::string& name) {
    if (name == "sex") return CompasDimension::sex;
    if (name == "race") return CompasDimension::race;
    if (name == "age_cat") return CompasDimension::age_cat;
    throw config_error("unknown group dimension '" + name + "' (expected sex, race or age_cat)");
}

inline const char* compas_dimension_column(CompasDimension dim) {
    switch (dim) {
        case CompasDimension::sex: return "sex";
        case CompasDimension::race: return "race";
        default: return "age_cat";
    }
}

struct CompasPrepared {
    GroupedDataset dataset;
    long long rows_read = 0;
    long long rows_skipped = 0; // rows with an empty required field
};

/// Broward County recidivism export -> GroupedDataset. Decile scores 1..10
/// map onto [0, 1] as (decile - 1) / 9 and two_year_recid is the ground
/// truth. For the race dimension, 'Native American' and 'Asian' are merged
/// into 'Other'.
inline CompasPrepared prepare_compas(const std::string& path, CompasDimension dim) {
    const csv::Table table = csv::read_file(path);
    const std::size_t decile_col = table.column("decile_score");
    const std::size_t recid_col = table.column("two_year_recid");
    const std::size_t group_col = table.column(compas_dimension_column(dim));
    const bool has_id = table.has_column("id");
    const std::size_t id_col = has_id ? table.column("id") : 0;

    CompasPrepared out;
    out.rows_read = static_cast<long long>(table.rows.size());
    std::set<std::string> ids;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::size_t line_no = i + 2;
        const std::string& decile_raw = row[decile_col];
        const std::string& recid_raw = row[recid_col];
        std::string group = row[group_col];
        if (decile_raw.empty() || recid_raw.empty() || group.empty()) {
            ++out.rows_skipped;
            continue;
        }
        long decile = 0;
        try {
            std::size_t pos = 0;
            decile = std::stol(decile_raw, &pos);
            if (pos != decile_raw.size()) throw std::invalid_argument(decile_raw);
        } catch (const std::exception&) {
            throw data_error("line " + std::to_string(line_no) + ": unparsable decile_score '" +
                             decile_raw + "'");
        }
        if (decile < 1 || decile > 10)
            throw data_error("line " + std::to_string(line_no) + ": decile_score " +
                             std::to_string(decile) + " outside 1..10");
        if (dim == CompasDimension::race && (group == "Native American" || group == "Asian"))
            group = "Other";

        Record r;
        r.id = has_id ? row[id_col] : std::to_string(i + 1);
        r.group = std::move(group);
        r.raw_score = static_cast<double>(decile - 1) / 9.0;
        r.positive = detail::parse_label_field(recid_raw, line_no, "two_year_recid");
        if (!ids.insert(r.id).second)
            throw data_error("duplicate id '" + r.id + "' (line " + std::to_string(line_no) + ")");
        out.dataset.records.push_back(std::move(r));
    }
    if (out.dataset.records.empty()) throw data_error("empty dataset");
    return out;
}

/// Normalized image of the high-risk cutoff (decile >= 5) under the same
/// decile mapping.
inline double compas_high_risk_threshold() { return 4.0 / 9.0; }

} // namespace faim
