#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "faim/errors.hpp"
#include "faim/histogram.hpp"

namespace faim {

/// Per-bin lookup table translating raw scores on a grid into fair scores in
/// [0, 1]. Bins that carried no source mass when the map was fitted are
/// undefined and map to their own bin center, so scores never seen during
/// fitting pass through unchanged (after truncation to the grid).
class TransportMap {
public:
    TransportMap(ScoreGrid grid, std::vector<double> target, std::vector<bool> defined)
        : grid_(grid), target_(std::move(target)), defined_(std::move(defined)) {
        if (target_.size() != grid_.bins() || defined_.size() != grid_.bins())
            throw config_error("transport map size does not match grid bin count");
        double prev = -1.0;
        for (std::size_t i = 0; i < target_.size(); ++i) {
            if (!defined_[i]) {
                target_[i] = grid_.center(i);
                continue;
            }
            double& t = target_[i];
            if (t < 0.0 || t > 1.0) {
                if (t < -1e-9 || t > 1.0 + 1e-9)
                    throw config_error("transport map target outside [0,1]");
                t = std::clamp(t, 0.0, 1.0);
            }
            if (t < prev - 1e-9)
                throw config_error("transport map must be monotone on defined bins");
            prev = t;
        }
    }

    static TransportMap identity(const ScoreGrid& grid) {
        std::vector<double> target(grid.bins());
        for (std::size_t i = 0; i < target.size(); ++i) target[i] = grid.center(i);
        return TransportMap(grid, std::move(target), std::vector<bool>(grid.bins(), true));
    }

    const ScoreGrid& grid() const { return grid_; }
    double target(std::size_t bin) const { return target_[bin]; }
    bool defined(std::size_t bin) const { return defined_[bin]; }

    /// Fair score for a raw score: truncation to the grid, then table lookup.
    double operator()(double raw_score) const { return target_[grid_.bin_of(raw_score)]; }

private:
    ScoreGrid grid_;
    std::vector<double> target_;
    std::vector<bool> defined_;
};

namespace detail {

struct CouplingEntry {
    std::size_t from;
    std::size_t to;
    double mass;
};

inline void require_normalized(const ScoreHistogram& h) {
    if (!h.is_normalized()) throw data_error("histogram is not normalized");
}

/// Monotone (north-west-corner) coupling between two normalized histograms on
/// the same grid. In one dimension this coupling is optimal for quadratic
/// cost. Ties in cumulative mass are resolved in ascending bin order.
inline std::vector<CouplingEntry> monotone_coupling(const ScoreHistogram& a, const ScoreHistogram& b) {
    require_same_grid(a.grid(), b.grid());
    require_normalized(a);
    require_normalized(b);
    const auto sa = a.support();
    const auto sb = b.support();
    if (sa.empty() || sb.empty()) throw data_error("empty distribution");

    std::vector<CouplingEntry> plan;
    plan.reserve(sa.size() + sb.size());
    std::size_t ia = 0, ib = 0;
    double ra = sa[0].mass, rb = sb[0].mass;
    while (ia < sa.size() && ib < sb.size()) {
        const double m = std::min(ra, rb);
        if (m > 0.0) plan.push_back({sa[ia].bin, sb[ib].bin, m});
        ra -= m;
        rb -= m;
        const bool advance_a = ra <= 1e-15;
        const bool advance_b = rb <= 1e-15;
        if (advance_a && ++ia < sa.size()) ra = sa[ia].mass;
        if (advance_b && ++ib < sb.size()) rb = sb[ib].mass;
        if (!advance_a && !advance_b) break; // unreachable; guards fp stalls
    }
    return plan;
}

} // namespace detail

/// Quadratic transport cost of the monotone coupling between a and b.
/// Equals wasserstein2(a, b)^2 up to round-off; the two are computed along
/// independent routes (coupling enumeration vs. quantile integration).
inline double monotone_coupling_cost(const ScoreHistogram& a, const ScoreHistogram& b) {
    double cost = 0.0;
    for (const auto& e : detail::monotone_coupling(a, b)) {
        const double d = a.grid().center(e.from) - b.grid().center(e.to);
        cost += e.mass * d * d;
    }
    return cost;
}

/// Quadratic Wasserstein distance, computed exactly on the piecewise-constant
/// quantile functions of the two histograms.
inline double wasserstein2(const ScoreHistogram& a, const ScoreHistogram& b) {
    detail::require_same_grid(a.grid(), b.grid());
    detail::require_normalized(a);
    detail::require_normalized(b);
    const auto sa = a.support();
    const auto sb = b.support();
    if (sa.empty() || sb.empty()) throw data_error("empty distribution");

    double cost = 0.0;
    double prev = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < sa.size() && ib < sb.size()) {
        const double qa = sa[ia].cum;
        const double qb = sb[ib].cum;
        const double q = std::min(qa, qb);
        const double d = a.grid().center(sa[ia].bin) - b.grid().center(sb[ib].bin);
        cost += (q - prev) * d * d;
        prev = q;
        if (qa <= q + 1e-15) ++ia;
        if (qb <= q + 1e-15) ++ib;
    }
    return std::sqrt(std::max(0.0, cost));
}

/// Optimal transport map for quadratic cost: the monotone coupling reduced to
/// a per-bin map by barycentric projection (each source bin maps to the
/// coupling-weighted mean of the target bin centers it feeds). Zero-mass
/// source bins are left undefined.
inline TransportMap optimal_transport_map(const ScoreHistogram& source, const ScoreHistogram& target) {
    const auto plan = detail::monotone_coupling(source, target);
    const std::size_t n = source.grid().bins();
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<double> weighted(n, 0.0), sent(n, 0.0);
    std::vector<std::size_t> sole_target(n, kNone); // single destination, if any
    for (const auto& e : plan) {
        weighted[e.from] += e.mass * target.grid().center(e.to);
        sent[e.from] += e.mass;
        sole_target[e.from] = sole_target[e.from] == kNone || sole_target[e.from] == e.to
                                  ? e.to
                                  : n; // n marks "several destinations"
    }
    std::vector<double> map_target(n);
    std::vector<bool> defined(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (sent[i] > 0.0) {
            // A bin feeding a single destination maps to that center exactly,
            // keeping self-transport bit-identical.
            map_target[i] = sole_target[i] < n
                                ? target.grid().center(sole_target[i])
                                : std::clamp(weighted[i] / sent[i], 0.0, 1.0);
            defined[i] = true;
        } else {
            map_target[i] = source.grid().center(i);
        }
    }
    return TransportMap(source.grid(), std::move(map_target), std::move(defined));
}

/// Redistributes each source bin's mass at its mapped value. Output is
/// normalized.
inline ScoreHistogram push_forward(const ScoreHistogram& source, const TransportMap& map) {
    detail::require_same_grid(source.grid(), map.grid());
    const auto& grid = source.grid();
    std::vector<double> out(grid.bins(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < grid.bins(); ++i) {
        const double m = source.mass()[i];
        if (m <= 0.0) continue;
        out[grid.bin_of(map.target(i))] += m;
        total += m;
    }
    if (total <= 0.0) throw data_error("empty distribution");
    for (double& v : out) v /= total;
    return ScoreHistogram(grid, std::move(out));
}

/// Geodesic interpolation between a and b in Wasserstein space: push a
/// through (1 - theta) * id + theta * T, where T is the optimal map a -> b.
inline ScoreHistogram displacement_interpolate(const ScoreHistogram& a, const ScoreHistogram& b,
                                               double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw config_error("theta outside [0,1]");
    const TransportMap t = optimal_transport_map(a, b);
    const auto& grid = a.grid();
    std::vector<double> target(grid.bins());
    std::vector<bool> defined(grid.bins());
    for (std::size_t i = 0; i < grid.bins(); ++i) {
        defined[i] = t.defined(i);
        target[i] = defined[i] ? (1.0 - theta) * grid.center(i) + theta * t.target(i)
                               : grid.center(i);
    }
    return push_forward(a, TransportMap(grid, std::move(target), std::move(defined)));
}

/// Wasserstein-2 barycenter by quantile averaging: each input's quantile
/// function is sampled at Q midpoint levels, averaged with the given weights,
/// and the averaged values are re-binned onto the grid. Weights must be
/// nonnegative and sum to 1 within 1e-9.
inline ScoreHistogram barycenter(const std::vector<ScoreHistogram>& dists,
                                 const std::vector<double>& weights) {
    if (dists.empty()) throw config_error("barycenter of empty distribution list");
    if (weights.size() != dists.size())
        throw config_error("barycenter weights do not match distribution count");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < -1e-12) throw config_error("negative barycenter weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw config_error("barycenter weights must sum to 1");
    const ScoreGrid& grid = dists[0].grid();
    for (const auto& d : dists) {
        detail::require_same_grid(grid, d.grid());
        detail::require_normalized(d);
    }

    // A single active component is its own barycenter; return it exactly.
    std::size_t active = 0, last_active = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] > 0.0) {
            ++active;
            last_active = k;
        }
    }
    if (active == 1) return dists[last_active];

    std::vector<std::vector<ScoreHistogram::SupportPoint>> supports;
    supports.reserve(dists.size());
    for (const auto& d : dists) {
        supports.push_back(d.support());
        if (supports.back().empty()) throw data_error("empty distribution");
    }

    const std::size_t quantile_count = std::max<std::size_t>(1000, 10 * grid.bins());
    std::vector<std::size_t> cursor(dists.size(), 0);
    std::vector<double> out(grid.bins(), 0.0);
    for (std::size_t l = 0; l < quantile_count; ++l) {
        const double q = (static_cast<double>(l) + 0.5) / static_cast<double>(quantile_count);
        double value = 0.0;
        for (std::size_t k = 0; k < dists.size(); ++k) {
            const auto& sp = supports[k];
            std::size_t& c = cursor[k];
            while (c + 1 < sp.size() && sp[c].cum < q - 1e-15) ++c;
            value += weights[k] * grid.center(sp[c].bin);
        }
        out[grid.bin_of(std::clamp(value, 0.0, 1.0))] += 1.0;
    }
    for (double& v : out) v /= static_cast<double>(quantile_count);
    return ScoreHistogram(grid, std::move(out));
}

} // namespace faim
