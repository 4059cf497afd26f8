#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "faim/dataset.hpp"
#include "faim/errors.hpp"

namespace faim {

/// Two-group bivariate-normal score generator. Each individual draws a group
/// uniformly, then a (true, predicted) pair from the group's normal; the
/// ground-truth label is true score > threshold and the raw score is the
/// min-max normalization of the predicted score over the whole sample.
struct SyntheticConfig {
    long long n = 100000;
    std::array<std::string, 2> group_labels{"blue", "orange"};
    std::array<double, 2> true_means{1.0, -1.0};
    std::array<double, 2> predicted_means{2.0, -3.0};
    std::array<double, 4> covariance{1.0, 0.8, 0.8, 1.0}; // row-major (true, predicted)
    double threshold = 0.0;
    std::uint64_t seed = 42;
};

struct SyntheticRecord {
    std::string id;
    std::string group;
    double true_score = 0.0;
    double predicted_score = 0.0;
};

struct SyntheticData {
    GroupedDataset dataset;              // raw_score = normalized predicted score
    std::vector<SyntheticRecord> side;   // original-scale scores
    double normalized_threshold = 0.5;   // image of config.threshold under the normalization
};

namespace detail {

// Box-Muller on top of mt19937_64 keeps the generator bit-reproducible across
// standard libraries, unlike std::normal_distribution.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { // [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    std::pair<double, double> normal_pair() {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
        return {r * std::cos(angle), r * std::sin(angle)};
    }

private:
    std::mt19937_64 engine_;
};

struct Cholesky2x2 {
    double a, b, c; // lower-triangular factor [[a, 0], [b, c]]
};

inline Cholesky2x2 cholesky(const std::array<double, 4>& cov) {
    if (std::abs(cov[1] - cov[2]) > 1e-12)
        throw config_error("covariance must be symmetric");
    if (!(cov[0] > 0.0)) throw config_error("covariance must be positive-definite");
    const double a = std::sqrt(cov[0]);
    const double b = cov[1] / a;
    const double rest = cov[3] - b * b;
    if (!(rest > 0.0)) throw config_error("covariance must be positive-definite");
    return {a, b, std::sqrt(rest)};
}

} // namespace detail

inline SyntheticData generate_synthetic(const SyntheticConfig& config) {
    if (config.n < 1) throw config_error("empty dataset: n must be at least 1");
    const detail::Cholesky2x2 chol = detail::cholesky(config.covariance);
    detail::GaussianSource rng(config.seed);

    SyntheticData out;
    out.side.reserve(config.n);
    out.dataset.records.reserve(config.n);
    std::vector<double> predicted(config.n);
    for (long long i = 0; i < config.n; ++i) {
        const std::size_t g = rng.uniform01() < 0.5 ? 0 : 1;
        const auto [z1, z2] = rng.normal_pair();
        const double true_score = config.true_means[g] + chol.a * z1;
        const double predicted_score = config.predicted_means[g] + chol.b * z1 + chol.c * z2;
        predicted[i] = predicted_score;
        out.side.push_back({std::to_string(i + 1), config.group_labels[g], true_score,
                            predicted_score});
        out.dataset.records.push_back({std::to_string(i + 1), config.group_labels[g], 0.0,
                                       true_score > config.threshold});
    }

    double lo = predicted[0], hi = predicted[0];
    for (double p : predicted) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    if (hi > lo) {
        for (long long i = 0; i < config.n; ++i)
            out.dataset.records[i].raw_score = (predicted[i] - lo) / (hi - lo);
        out.normalized_threshold = (config.threshold - lo) / (hi - lo);
    } else {
        for (auto& r : out.dataset.records) r.raw_score = 0.5;
        out.normalized_threshold = 0.5;
    }
    return out;
}

inline void write_side_table_csv(const std::string& path, const std::vector<SyntheticRecord>& side) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write file '" + path + "'");
    out << "id,group,true_score,predicted_score\n";
    for (const auto& r : side) {
        out << csv::escape(r.id) << ',' << csv::escape(r.group) << ','
            << format_double(r.true_score) << ',' << format_double(r.predicted_score) << '\n';
    }
    if (!out) throw config_error("cannot write file '" + path + "'");
}

} // namespace faim
