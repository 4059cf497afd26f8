#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "faim/metrics.hpp"
#include "faim/synthetic.hpp"

using namespace faim;

namespace {

std::vector<Prediction> small_sample() {
    // group a: 3 records, group b: 2 records; threshold 0.5.
    return {
        {"a", true, 0.9},  // tp
        {"a", false, 0.7}, // fp
        {"a", false, 0.2}, // tn
        {"b", true, 0.1},  // fn
        {"b", false, 0.3}, // tn
    };
}

} // namespace

TEST_CASE("confusion_metrics on a hand-checked sample") {
    const auto report = confusion_metrics(small_sample(), 0.5);
    const auto* overall = report.find("overall");
    REQUIRE(overall != nullptr);
    CHECK(overall->count == 5);
    CHECK(overall->tp == 1);
    CHECK(overall->fp == 1);
    CHECK(overall->tn == 2);
    CHECK(overall->fn == 1);
    CHECK(*overall->accuracy == doctest::Approx(0.6));
    CHECK(*overall->fpr == doctest::Approx(1.0 / 3.0));
    CHECK(*overall->fnr == doctest::Approx(0.5));
    // support-weighted: positives 2 * (1/2), negatives 3 * (2/3), over 5
    CHECK(*overall->precision == doctest::Approx((2.0 * 0.5 + 3.0 * (2.0 / 3.0)) / 5.0));
    CHECK(*overall->recall == doctest::Approx(*overall->accuracy));
    CHECK(overall->positive_rate == doctest::Approx(0.4));

    const auto* a = report.find("a");
    CHECK(*a->accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(*a->fpr == doctest::Approx(0.5));
}

TEST_CASE("degenerate classifier that predicts everyone positive") {
    std::vector<Prediction> preds;
    for (int i = 0; i < 10; ++i) preds.push_back({"g", i < 4, 0.8});
    const auto report = confusion_metrics(preds, 0.5);
    const auto* overall = report.find("overall");
    CHECK(*overall->fpr == doctest::Approx(1.0));
    CHECK(*overall->fnr == doctest::Approx(0.0));
    CHECK(*overall->accuracy == doctest::Approx(0.4));
    // The empty predicted-negative class carries vacuously perfect precision,
    // so the weighted value is p^2 + (1 - p).
    CHECK(*overall->precision == doctest::Approx(0.4 * 0.4 + 0.6));
}

TEST_CASE("undefined ratios stay undefined") {
    std::vector<Prediction> all_positive{{"g", true, 0.9}, {"g", true, 0.2}};
    const auto report = confusion_metrics(all_positive, 0.5);
    const auto* overall = report.find("overall");
    CHECK_FALSE(overall->fpr.has_value()); // no ground-truth negatives
    CHECK(overall->fnr.has_value());
    const std::string csv = report_to_csv(report);
    CHECK(csv.find("undefined") != std::string::npos);
    CHECK(csv.rfind("scope,accuracy,precision,recall,fpr,fnr,"
                    "d_accuracy,d_precision,d_recall,d_fpr,d_fnr\n", 0) == 0);
}

TEST_CASE("report invariants") {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Prediction> preds;
    for (int i = 0; i < 500; ++i)
        preds.push_back({i % 3 == 0 ? "a" : "b", unit(rng) < 0.4, unit(rng)});
    const auto report = confusion_metrics(preds, 0.5);

    SUBCASE("order independence") {
        auto shuffled = preds;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto report2 = confusion_metrics(shuffled, 0.5);
        for (const auto& row : report.rows) {
            const auto* other = report2.find(row.scope);
            CHECK(*row.accuracy == *other->accuracy);
            CHECK(*row.precision == *other->precision);
            CHECK(row.tp == other->tp);
        }
    }
    SUBCASE("confusion cells partition the ground truth") {
        for (const auto& row : report.rows) {
            long long negatives = 0, positives = 0;
            for (const auto& p : preds) {
                if (row.scope != "overall" && p.group != row.scope) continue;
                p.positive ? ++positives : ++negatives;
            }
            CHECK(row.fp + row.tn == negatives);
            CHECK(row.fn + row.tp == positives);
        }
    }
    SUBCASE("overall accuracy is the record-weighted mean of group accuracies") {
        double weighted = 0.0;
        long long total = 0;
        for (const auto& row : report.rows) {
            if (row.scope == "overall") continue;
            weighted += *row.accuracy * static_cast<double>(row.count);
            total += row.count;
        }
        CHECK(std::abs(weighted / static_cast<double>(total) - *report.find("overall")->accuracy) <
              1e-12);
    }
}

TEST_CASE("delta_report") {
    const auto before = confusion_metrics(small_sample(), 0.5);

    SUBCASE("identical reports give all-zero deltas") {
        const auto delta = delta_report(before, before);
        for (const auto& row : delta.rows) {
            CHECK(*row.d_accuracy == 0.0);
            CHECK(*row.d_precision == 0.0);
            CHECK(*row.d_recall == 0.0);
            if (row.fpr) CHECK(*row.d_fpr == 0.0);
            if (row.fnr) CHECK(*row.d_fnr == 0.0);
        }
    }
    SUBCASE("after minus before") {
        auto sample = small_sample();
        sample[3].score = 0.9; // the fn becomes a tp
        const auto after = confusion_metrics(sample, 0.5);
        const auto delta = delta_report(after, before);
        CHECK(*delta.find("overall")->d_accuracy == doctest::Approx(0.2));
        CHECK(*delta.find("b")->d_fnr == doctest::Approx(-1.0));
    }
    SUBCASE("scope mismatch") {
        std::vector<Prediction> other{{"c", true, 0.9}};
        const auto report_c = confusion_metrics(other, 0.5);
        CHECK_THROWS_AS(delta_report(report_c, before), data_error);
    }
}

TEST_CASE("positive_rate_ratio") {
    SUBCASE("identical groups ratio 1") {
        std::vector<Prediction> preds{{"a", true, 0.9}, {"a", false, 0.1},
                                      {"b", true, 0.9}, {"b", false, 0.1}};
        const auto report = confusion_metrics(preds, 0.5);
        CHECK(*positive_rate_ratio(report, "a", "b") == doctest::Approx(1.0));
        // the ratio table in the report agrees
        bool found = false;
        for (const auto& e : report.positive_rate_ratios)
            if (e.numerator_scope == "a" && e.denominator_scope == "b") {
                found = true;
                CHECK(*e.value == doctest::Approx(1.0));
            }
        CHECK(found);
    }
    SUBCASE("zero denominator is undefined") {
        std::vector<Prediction> preds{{"a", true, 0.9}, {"b", false, 0.1}, {"b", true, 0.2}};
        const auto report = confusion_metrics(preds, 0.5);
        CHECK_FALSE(positive_rate_ratio(report, "a", "b").has_value());
    }
}

TEST_CASE("per_score_report") {
    ScoreGrid grid(0.25);

    SUBCASE("single-bin dataset reduces to confusion_metrics") {
        std::vector<Prediction> preds{{"g", true, 0.6}, {"g", false, 0.6}};
        const auto bins = per_score_report(preds, grid, 0.5);
        REQUIRE(bins.size() == 1);
        const auto direct = confusion_metrics(preds, 0.5);
        CHECK(*bins[0].report.find("overall")->accuracy == *direct.find("overall")->accuracy);
        CHECK(bins[0].bin == grid.bin_of(0.6));
    }
    SUBCASE("explicit slice keys split independently of the evaluated score") {
        std::vector<Prediction> preds{{"g", true, 0.9}, {"g", false, 0.9}};
        const std::vector<double> keys{0.1, 0.9};
        const auto bins = per_score_report(preds, keys, grid, 0.5);
        REQUIRE(bins.size() == 2);
        CHECK(bins[0].report.find("overall")->count == 1);
    }
    SUBCASE("synthetic accuracy dips near the decision boundary") {
        const auto synth = generate_synthetic({.n = 50000, .seed = 2});
        std::vector<Prediction> preds;
        for (const auto& r : synth.dataset.records)
            preds.push_back({r.group, r.positive, r.raw_score});
        ScoreGrid coarse(0.1);
        const auto bins = per_score_report(preds, coarse, synth.normalized_threshold);
        const std::size_t boundary = coarse.bin_of(synth.normalized_threshold);
        double boundary_acc = 1.0, low_acc = 0.0, high_acc = 0.0;
        for (const auto& b : bins) {
            const double acc = *b.report.find("overall")->accuracy;
            if (b.bin == boundary) boundary_acc = acc;
            if (b.bin == 0) low_acc = acc;
            if (b.bin == coarse.bins() - 1) high_acc = acc;
        }
        CHECK(low_acc > boundary_acc);
        CHECK(high_acc > boundary_acc);
    }
}

TEST_CASE("text rendering carries values and deltas") {
    const auto before = confusion_metrics(small_sample(), 0.5);
    auto sample = small_sample();
    sample[3].score = 0.9;
    const auto after = delta_report(confusion_metrics(sample, 0.5), before);
    const std::string text = report_to_text(after, &before);
    CHECK(text.find("-- before --") != std::string::npos);
    CHECK(text.find("-- after --") != std::string::npos);
    CHECK(text.find("(+0.200)") != std::string::npos);
    CHECK(text.find("overall") != std::string::npos);
}
