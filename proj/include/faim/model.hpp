#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faim/dataset.hpp"
#include "faim/errors.hpp"
#include "faim/histogram.hpp"
#include "faim/transport.hpp"

namespace faim {

/// Per-group interpolation weights over the three fairness criteria:
/// calibration within groups (a), balance for the negative class (b),
/// balance for the positive class (c).
struct ThetaWeights {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

inline void validate_theta(const ThetaWeights& t) {
    for (double v : {t.a, t.b, t.c})
        if (!(v >= 0.0 && v <= 1.0))
            throw config_error("theta components must lie in [0,1]");
    if (std::abs(t.a + t.b + t.c - 1.0) > 1e-9)
        throw config_error("theta components must sum to 1");
}

enum class ClassLabel { negative, positive };

inline const char* class_name(ClassLabel cls) {
    return cls == ClassLabel::negative ? "negative" : "positive";
}

namespace detail {

struct GroupIndex {
    std::vector<std::size_t> rows;
    long long positives = 0;
};

inline std::map<std::string, GroupIndex> index_groups(const GroupedDataset& data) {
    std::map<std::string, GroupIndex> idx;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        auto& gi = idx[data.records[i].group];
        gi.rows.push_back(i);
        if (data.records[i].positive) ++gi.positives;
    }
    return idx;
}

inline const GroupIndex& find_group(const std::map<std::string, GroupIndex>& idx,
                                    const std::string& group) {
    auto it = idx.find(group);
    if (it == idx.end()) throw data_error("unknown group '" + group + "'");
    return it->second;
}

} // namespace detail

struct CalibrationFit {
    std::vector<double> lambda_pos; // per-bin positive fraction; base rate on empty bins
    ScoreHistogram mu_a;            // distribution of the recalibrated scores
};

/// Criterion A fit for one group: per-bin positive fractions and the
/// histogram of the group's scores after replacing each score by its bin's
/// positive fraction. Bins with no group members fall back to the group base
/// rate.
inline CalibrationFit fit_calibration(const GroupedDataset& data, const ScoreGrid& grid,
                                      const std::string& group) {
    const auto idx = detail::index_groups(data);
    const auto& gi = detail::find_group(idx, group);

    std::vector<double> members(grid.bins(), 0.0), positives(grid.bins(), 0.0);
    for (std::size_t row : gi.rows) {
        const Record& r = data.records[row];
        if (!(r.raw_score >= 0.0 && r.raw_score <= 1.0))
            throw data_error("unnormalized input: score outside [0,1]");
        const std::size_t b = grid.bin_of(r.raw_score);
        members[b] += 1.0;
        if (r.positive) positives[b] += 1.0;
    }
    const double base_rate = static_cast<double>(gi.positives) / static_cast<double>(gi.rows.size());
    std::vector<double> lambda(grid.bins());
    for (std::size_t b = 0; b < grid.bins(); ++b)
        lambda[b] = members[b] > 0.0 ? positives[b] / members[b] : base_rate;

    std::vector<double> transformed;
    transformed.reserve(gi.rows.size());
    for (std::size_t row : gi.rows)
        transformed.push_back(lambda[grid.bin_of(data.records[row].raw_score)]);
    return {std::move(lambda), histogram_from_scores(transformed, grid)};
}

/// Distribution of a group's raw scores conditional on the ground-truth
/// class: sigma- for negative, sigma+ for positive.
inline ScoreHistogram conditional_distribution(const GroupedDataset& data, const ScoreGrid& grid,
                                               const std::string& group, ClassLabel cls) {
    const auto idx = detail::index_groups(data);
    const auto& gi = detail::find_group(idx, group);
    std::vector<double> scores;
    for (std::size_t row : gi.rows) {
        const Record& r = data.records[row];
        if (r.positive == (cls == ClassLabel::positive)) scores.push_back(r.raw_score);
    }
    if (scores.empty())
        throw data_error("degenerate class: group '" + group + "' has no " + class_name(cls) +
                         " members");
    return histogram_from_scores(scores, grid);
}

/// Output of one balance-criterion fit (B with the negative class, C with
/// the positive class).
struct BalanceFit {
    ScoreHistogram sigma_bar;                     // barycenter of the class conditionals
    std::map<std::string, TransportMap> maps;     // T+-_t per group
    std::map<std::string, ScoreHistogram> targets; // mu_b or mu_c per group
};

namespace detail {

// Shared balance-side machinery. Groups listed in `required` must have class
// members; other groups without them are left out of the barycenter (their
// weight share is renormalized over the participating groups).
inline BalanceFit fit_balance_side(const GroupedDataset& data,
                                   const std::map<std::string, GroupIndex>& idx,
                                   const ScoreGrid& grid, ClassLabel cls,
                                   const std::set<std::string>& required) {
    const bool positive_class = cls == ClassLabel::positive;

    std::map<std::string, std::vector<double>> class_scores;
    std::string offenders;
    for (const auto& [group, gi] : idx) {
        auto& scores = class_scores[group];
        for (std::size_t row : gi.rows)
            if (data.records[row].positive == positive_class)
                scores.push_back(data.records[row].raw_score);
        if (scores.empty() && required.count(group)) {
            if (!offenders.empty()) offenders += ", ";
            offenders += "'" + group + "'";
        }
    }
    if (!offenders.empty())
        throw data_error("degenerate class: group(s) " + offenders + " have no " +
                         class_name(cls) + " members");

    std::vector<std::string> participating;
    double total_members = 0.0;
    for (const auto& [group, scores] : class_scores) {
        if (!scores.empty()) {
            participating.push_back(group);
            total_members += static_cast<double>(idx.at(group).rows.size());
        }
    }
    if (participating.empty()) throw data_error("degenerate class: no " +
                                                std::string(class_name(cls)) + " members at all");

    std::vector<ScoreHistogram> sigmas;
    std::vector<double> weights;
    for (const auto& group : participating) {
        sigmas.push_back(histogram_from_scores(class_scores[group], grid));
        weights.push_back(static_cast<double>(idx.at(group).rows.size()) / total_members);
    }
    ScoreHistogram sigma_bar = barycenter(sigmas, weights);

    BalanceFit fit{sigma_bar, {}, {}};
    for (std::size_t k = 0; k < participating.size(); ++k) {
        const std::string& group = participating[k];
        TransportMap map = optimal_transport_map(sigmas[k], sigma_bar);
        // Full-group target: class members move through the map, everyone
        // else keeps their raw score.
        std::vector<double> transformed;
        transformed.reserve(idx.at(group).rows.size());
        for (std::size_t row : idx.at(group).rows) {
            const Record& r = data.records[row];
            transformed.push_back(r.positive == positive_class ? map(r.raw_score) : r.raw_score);
        }
        fit.targets.emplace(group, histogram_from_scores(transformed, grid));
        fit.maps.emplace(group, std::move(map));
    }
    return fit;
}

} // namespace detail

/// Criterion B/C fit across all groups: the shared barycenter of the
/// per-group class conditionals (weighted by group population share), the
/// per-group optimal maps onto it, and the per-group full-population target
/// distributions. Every group must have members of the class.
inline BalanceFit fit_balance_target(const GroupedDataset& data, const ScoreGrid& grid,
                                     ClassLabel cls) {
    const auto idx = detail::index_groups(data);
    std::set<std::string> required;
    for (const auto& [group, gi] : idx) required.insert(group);
    return detail::fit_balance_side(data, idx, grid, cls, required);
}

struct GroupModel {
    std::string group;
    ScoreHistogram nu;                  // raw score distribution
    std::vector<double> lambda_pos;     // per-bin positive fraction
    ScoreHistogram mu_a;                // calibration target
    std::optional<ScoreHistogram> mu_b; // negative-balance target
    std::optional<ScoreHistogram> mu_c; // positive-balance target
    ScoreHistogram mu_bar;              // theta-weighted barycenter of the targets
    TransportMap final_map;             // raw -> fair lookup
    long long n_total = 0;
    long long n_positive = 0;
};

struct FaimModel {
    ScoreGrid grid;
    std::map<std::string, GroupModel> groups;
    std::map<std::string, ThetaWeights> thetas;
};

/// End-to-end fit: per group, build the three criterion targets, combine
/// them into the theta-weighted barycenter and extract the final raw-to-fair
/// transport map. A zero theta component drops the corresponding target, so
/// a group lacking one class is only an error when the matching theta is
/// positive.
inline FaimModel fit(const GroupedDataset& data, const ScoreGrid& grid,
                     const std::map<std::string, ThetaWeights>& thetas) {
    if (data.records.empty()) throw data_error("empty dataset");
    const auto idx = detail::index_groups(data);
    for (const auto& [group, theta] : thetas) {
        validate_theta(theta);
        if (!idx.count(group)) throw config_error("theta given for unknown group '" + group + "'");
    }
    for (const auto& [group, gi] : idx)
        if (!thetas.count(group)) throw config_error("missing theta for group '" + group + "'");

    std::set<std::string> need_b, need_c;
    for (const auto& [group, theta] : thetas) {
        if (theta.b > 0.0) need_b.insert(group);
        if (theta.c > 0.0) need_c.insert(group);
    }
    std::optional<BalanceFit> balance_neg, balance_pos;
    if (!need_b.empty())
        balance_neg = detail::fit_balance_side(data, idx, grid, ClassLabel::negative, need_b);
    if (!need_c.empty())
        balance_pos = detail::fit_balance_side(data, idx, grid, ClassLabel::positive, need_c);

    FaimModel model{grid, {}, thetas};
    for (const auto& [group, gi] : idx) {
        std::vector<double> group_scores;
        group_scores.reserve(gi.rows.size());
        for (std::size_t row : gi.rows) group_scores.push_back(data.records[row].raw_score);
        ScoreHistogram nu = histogram_from_scores(group_scores, grid);
        CalibrationFit cal = fit_calibration(data, grid, group);
        const ThetaWeights& theta = thetas.at(group);

        std::optional<ScoreHistogram> mu_b, mu_c;
        if (balance_neg && balance_neg->targets.count(group))
            mu_b = balance_neg->targets.at(group);
        if (balance_pos && balance_pos->targets.count(group))
            mu_c = balance_pos->targets.at(group);

        std::vector<ScoreHistogram> components{cal.mu_a};
        std::vector<double> weights{theta.a};
        if (mu_b) {
            components.push_back(*mu_b);
            weights.push_back(theta.b);
        }
        if (mu_c) {
            components.push_back(*mu_c);
            weights.push_back(theta.c);
        }
        ScoreHistogram mu_bar = barycenter(components, weights);
        TransportMap final_map = optimal_transport_map(nu, mu_bar);

        model.groups.emplace(group, GroupModel{group, std::move(nu), std::move(cal.lambda_pos),
                                               std::move(cal.mu_a), std::move(mu_b),
                                               std::move(mu_c), std::move(mu_bar),
                                               std::move(final_map),
                                               static_cast<long long>(gi.rows.size()),
                                               gi.positives});
    }
    return model;
}

/// Fair score for one individual: the raw score is truncated to the model
/// grid and looked up in the group's final map; scores in bins the fit never
/// saw come back unchanged (as the truncated value).
inline double apply(const FaimModel& model, const std::string& group, double raw_score) {
    const auto it = model.groups.find(group);
    if (it == model.groups.end()) throw data_error("unknown group '" + group + "'");
    if (!(raw_score >= 0.0 && raw_score <= 1.0))
        throw data_error("unnormalized input: score outside [0,1]");
    return it->second.final_map(raw_score);
}

inline std::vector<double> apply_all(const FaimModel& model, const GroupedDataset& data) {
    std::vector<double> fair;
    fair.reserve(data.records.size());
    for (const auto& r : data.records) fair.push_back(apply(model, r.group, r.raw_score));
    return fair;
}

struct IncompatibilityReport {
    double determinant = 0.0;
    double base_rate_1 = 0.0;
    double base_rate_2 = 0.0;
};

/// Determinant (N1 - n1) * n2 - (N2 - n2) * n1 of the joint fairness system
/// for two groups. Zero signals equal base rates or the no-positives
/// degenerate case; otherwise the three criteria force perfect prediction.
inline IncompatibilityReport incompatibility_determinant(long long n1_total, long long n1_pos,
                                                         long long n2_total, long long n2_pos) {
    if (n1_total <= 0 || n2_total <= 0) throw data_error("nonpositive group totals");
    if (n1_pos < 0 || n2_pos < 0 || n1_pos > n1_total || n2_pos > n2_total)
        throw data_error("positive counts must lie between 0 and the group total");
    const double N1 = static_cast<double>(n1_total), n1 = static_cast<double>(n1_pos);
    const double N2 = static_cast<double>(n2_total), n2 = static_cast<double>(n2_pos);
    return {(N1 - n1) * n2 - (N2 - n2) * n1, n1 / N1, n2 / N2};
}

} // namespace faim
