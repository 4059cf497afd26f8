#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "faim/errors.hpp"
#include "faim/grid.hpp"

namespace faim {

/// Discrete distribution over the bin centers of a ScoreGrid. Normally holds
/// probability mass (total 1 within 1e-9); pass require_normalized = false to
/// carry raw counts and call normalized() before handing it to transport ops.
class ScoreHistogram {
public:
    ScoreHistogram(ScoreGrid grid, std::vector<double> mass, bool require_normalized = true)
        : grid_(grid), mass_(std::move(mass)) {
        if (mass_.size() != grid_.bins())
            throw config_error("histogram mass size does not match grid bin count");
        double total = 0.0;
        for (double& m : mass_) {
            if (m < 0.0) {
                if (m < -1e-12) throw data_error("negative histogram mass");
                m = 0.0;
            }
            total += m;
        }
        if (require_normalized && std::abs(total - 1.0) > 1e-9)
            throw data_error("histogram is not normalized");
    }

    const ScoreGrid& grid() const { return grid_; }
    const std::vector<double>& mass() const { return mass_; }

    double total() const {
        double t = 0.0;
        for (double m : mass_) t += m;
        return t;
    }

    bool is_normalized() const { return std::abs(total() - 1.0) <= 1e-9; }

    ScoreHistogram normalized() const {
        const double t = total();
        if (t <= 0.0) throw data_error("empty distribution");
        std::vector<double> m = mass_;
        for (double& v : m) v /= t;
        return ScoreHistogram(grid_, std::move(m));
    }

    /// One entry per positive-mass bin, with the cumulative mass up to and
    /// including that bin. The backbone of the quantile-function operations.
    struct SupportPoint {
        std::size_t bin;
        double mass;
        double cum;
    };

    std::vector<SupportPoint> support() const {
        std::vector<SupportPoint> sp;
        double cum = 0.0;
        for (std::size_t i = 0; i < mass_.size(); ++i) {
            if (mass_[i] > 0.0) {
                cum += mass_[i];
                sp.push_back({i, mass_[i], cum});
            }
        }
        return sp;
    }

    bool operator==(const ScoreHistogram& other) const {
        return grid_ == other.grid_ && mass_ == other.mass_;
    }

private:
    ScoreGrid grid_;
    std::vector<double> mass_;
};

/// Normalized histogram of a batch of scores. Scores must already lie in
/// [0, 1]; the upper endpoint is clamped into the last bin.
inline ScoreHistogram histogram_from_scores(std::span<const double> scores, const ScoreGrid& grid) {
    if (scores.empty()) throw data_error("empty distribution");
    std::vector<double> mass(grid.bins(), 0.0);
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0))
            throw data_error("unnormalized input: score outside [0,1]");
        mass[grid.bin_of(s)] += 1.0;
    }
    const double n = static_cast<double>(scores.size());
    for (double& m : mass) m /= n;
    return ScoreHistogram(grid, std::move(mass));
}

} // namespace faim
