#pragma once

#include <cmath>
#include <cstddef>

#include "faim/errors.hpp"

namespace faim {

/// Uniform binning of the score interval [0, 1]. Bin i covers
/// [i*stepsize, (i+1)*stepsize) and is represented by its center
/// (i + 0.5) * stepsize. All distributions and transport maps in this
/// library live on the bin centers of such a grid.
class ScoreGrid {
public:
    explicit ScoreGrid(double stepsize) : stepsize_(stepsize) {
        if (!(stepsize > 0.0))
            throw config_error("stepsize must be positive");
        const double span = upper() - lower();
        const long long n = std::llround(span / stepsize);
        if (n < 1 || std::abs(static_cast<double>(n) * stepsize - span) > 1e-9)
            throw config_error("stepsize must divide [0,1] into a whole number of bins");
        bins_ = static_cast<std::size_t>(n);
    }

    static constexpr double lower() { return 0.0; }
    static constexpr double upper() { return 1.0; }
    double stepsize() const { return stepsize_; }
    std::size_t bins() const { return bins_; }

    double center(std::size_t bin) const {
        return lower() + (static_cast<double>(bin) + 0.5) * stepsize_;
    }

    /// Bin index of a score in [0, 1]. Values within 1e-12 of a bin boundary
    /// belong to the bin on the right; the upper endpoint falls into the
    /// last bin.
    std::size_t bin_of(double score) const {
        const double x = score - lower();
        long long i = static_cast<long long>(std::floor(x / stepsize_));
        const long long last = static_cast<long long>(bins_) - 1;
        if (i < 0) i = 0;
        if (i > last) i = last;
        while (i < last && x >= static_cast<double>(i + 1) * stepsize_ - 1e-12) ++i;
        while (i > 0 && x < static_cast<double>(i) * stepsize_ - 1e-12) --i;
        return static_cast<std::size_t>(i);
    }

    /// Nearest representable score: the center of the bin the value falls in.
    double snap(double score) const { return center(bin_of(score)); }

    bool operator==(const ScoreGrid& other) const {
        return bins_ == other.bins_ && stepsize_ == other.stepsize_;
    }

private:
    double stepsize_;
    std::size_t bins_;
};

namespace detail {

inline void require_same_grid(const ScoreGrid& a, const ScoreGrid& b) {
    if (!(a == b)) throw config_error("grid mismatch");
}

} // namespace detail

} // namespace faim
