#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "reference.hpp"

using namespace shiftkit;

namespace {

// Test posteriors of a two-Gaussian sample of `size` points at prevalence p.
std::pair<std::vector<double>, double> gaussian_sample(double p, std::size_t size, std::uint32_t seed) {
    const auto npos = static_cast<std::size_t>(std::ceil(p * size));
    const auto s = fixtures::gaussian_scores(npos, size - npos, seed);
    return {s.posteriors(), fixtures::positive_fraction(s.labels())};
}

}  // namespace

TEST(CC, Examples) {
    EXPECT_DOUBLE_EQ(cc(std::vector<double>{0.9, 0.2, 0.8, 0.7}).p, 0.75);
    EXPECT_EQ(cc(std::vector<double>(10, 0.1)).p, 0.0);
}

TEST(CC, MatchesRecount) {
    const auto y = fixtures::uniform_posteriors(500, 3);
    int n = 0;
    for (double v : y)
        if (v > 0.5) ++n;
    EXPECT_EQ(cc(y).p, n / 500.0);
}

TEST(PCC, Examples) {
    EXPECT_DOUBLE_EQ(pcc(std::vector<double>{0.2, 0.8}).p, 0.5);
    EXPECT_NEAR(pcc(std::vector<double>(7, 0.3)).p, 0.3, 1e-15);
    const auto y = fixtures::uniform_posteriors(1000, 4);
    long double s = 0;
    for (double v : y) s += v;
    EXPECT_NEAR(pcc(y).p, static_cast<double>(s / 1000), 1e-12);
}

TEST(Rates, Examples) {
    const ScoredSet sep({0.9, 0.8, 0.1, 0.2}, std::vector<Label>{1, 1, 0, 0});
    const auto crisp_rates = estimate_rates(sep, false);
    EXPECT_EQ(crisp_rates.tpr, 1.0);
    EXPECT_EQ(crisp_rates.fpr, 0.0);
    const ScoredSet flat(std::vector<double>(6, 0.5), std::vector<Label>{1, 0, 1, 0, 1, 0});
    const auto soft = estimate_rates(flat, true);
    EXPECT_EQ(soft.tpr, 0.5);
    EXPECT_EQ(soft.fpr, 0.5);
}

TEST(Rates, MatchContingencyTable) {
    const auto p = fixtures::uniform_posteriors(300, 8);
    const auto y = fixtures::bernoulli_labels(300, 0.4, 9);
    double tp = 0, fn = 0, fp = 0, tn = 0, spos = 0, sneg = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool hat = p[i] > 0.5;
        if (y[i] == 1) {
            (hat ? tp : fn) += 1;
            spos += p[i];
        } else {
            (hat ? fp : tn) += 1;
            sneg += p[i];
        }
    }
    const ScoredSet val(p, y);
    const auto c = estimate_rates(val, false);
    EXPECT_DOUBLE_EQ(c.tpr, tp / (tp + fn));
    EXPECT_DOUBLE_EQ(c.fpr, fp / (fp + tn));
    const auto s = estimate_rates(val, true);
    EXPECT_NEAR(s.tpr, spos / (tp + fn), 1e-14);
    EXPECT_NEAR(s.fpr, sneg / (fp + tn), 1e-14);
}

TEST(Rates, SingleClassIsDegenerate) {
    const ScoredSet val({0.3, 0.7}, std::vector<Label>{1, 1});
    EXPECT_THROW(estimate_rates(val, true), DegenerateError);
}

TEST(Adjust, Examples) {
    EXPECT_NEAR(adjust(0.5, {0.8, 0.2}).p, 0.5, 1e-15);
    EXPECT_NEAR(adjust(0.2, {0.9, 0.1}).p, 0.125, 1e-15);
    const auto low = adjust(0.05, {0.8, 0.2});
    EXPECT_NEAR(low.raw, -0.25, 1e-15);
    EXPECT_EQ(low.p, 0.0);
    const auto degenerate = adjust(0.37, {0.4, 0.4});
    EXPECT_TRUE(degenerate.degenerate);
    EXPECT_EQ(degenerate.p, 0.37);
}

TEST(Adjust, PerfectRatesAreIdentity) {
    for (double p : fixtures::uniform_posteriors(100, 12)) EXPECT_EQ(adjust(p, {1.0, 0.0}).p, p);
}

TEST(PACC, PerfectRatesEqualPcc) {
    const ScoredSet val({1.0, 1.0, 0.0, 0.0}, std::vector<Label>{1, 1, 0, 0});
    const auto test = fixtures::uniform_posteriors(50, 13);
    EXPECT_DOUBLE_EQ(pacc(val, test).p, pcc(test).p);
}

TEST(PACC, OracleCalibratedScoresRecoverPrevalence) {
    // Scores take 5 values; each value equals the positive share of its group.
    std::vector<double> s;
    std::vector<Label> y;
    const int groups[5][2] = {{1, 9}, {3, 7}, {5, 5}, {7, 3}, {9, 1}};
    for (int g = 0; g < 5; ++g)
        for (int rep = 0; rep < 3; ++rep) {
            for (int i = 0; i < groups[g][0]; ++i) y.push_back(1);
            for (int i = 0; i < groups[g][1]; ++i) y.push_back(0);
            for (int i = 0; i < 10; ++i) s.push_back(groups[g][0] / 10.0);
        }
    const ScoredSet val(s, y);
    EXPECT_NEAR(pacc(val, s).p, fixtures::positive_fraction(y), 1e-9);
}

TEST(PACC, BeatsCcUnderPriorShift) {
    const auto val = fixtures::gaussian_scores(500, 500, 1);
    int wins = 0;
    for (std::uint32_t i = 0; i < 100; ++i) {
        const auto [test, truth] = gaussian_sample(0.8, 250, 100 + i);
        wins += std::abs(pacc(val, test).p - truth) < std::abs(cc(test).p - truth);
    }
    EXPECT_GE(wins, 80);
}

TEST(ACC, RangeAndAdjustment) {
    const auto val = fixtures::gaussian_scores(300, 300, 2);
    for (std::uint32_t i = 0; i < 20; ++i) {
        const auto test = fixtures::uniform_posteriors(100, i);
        const auto e = acc(val, test);
        EXPECT_GE(e.p, 0.0);
        EXPECT_LE(e.p, 1.0);
        const auto r = estimate_rates(val, false);
        EXPECT_NEAR(e.raw, (cc(test).p - r.fpr) / (r.tpr - r.fpr), 1e-15);
    }
}

TEST(EMQ, NoShiftFixedPoint) {
    const std::vector<double> y{0.2, 0.8, 0.4, 0.6};
    const auto r = emq(y, 0.5);
    EXPECT_EQ(r.estimate.iterations, 1u);
    EXPECT_NEAR(r.estimate.p, 0.5, 1e-15);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(r.posteriors[i], y[i], 1e-12);
}

TEST(EMQ, TwoPointRecurrence) {
    const std::vector<double> y{0.9, 0.9};
    // q <- mean of (q/pi) y / ((q/pi) y + ((1-q)/(1-pi)) (1-y)), iterated until |dq| < 1e-6
    double q = 0.5;
    for (int it = 0; it < 1000; ++it) {
        const double next = (q * 0.9) / (q * 0.9 + (1 - q) * 0.1);
        const bool done = std::abs(next - q) < 1e-6;
        q = next;
        if (done) break;
    }
    const auto r = emq(y, 0.5);
    EXPECT_NEAR(r.estimate.p, q, 1e-12);
    EXPECT_NEAR(r.estimate.p, 1.0, 1e-5);
}

TEST(EMQ, RecoversShiftedPrevalence) {
    for (std::uint32_t i = 0; i < 10; ++i) {
        const auto [test, truth] = gaussian_sample(0.8, 250, 40 + i);
        EXPECT_LT(std::abs(emq(test, 0.5).estimate.p - 0.8), 0.05) << "seed " << i;
    }
}

TEST(EMQ, PriorEqualsMeanPosterior) {
    for (std::uint32_t i = 0; i < 20; ++i) {
        const auto y = fixtures::uniform_posteriors(60 + i, 70 + i);
        const auto r = emq(y, 0.3 + 0.02 * i);
        EXPECT_NEAR(r.estimate.p, mean(r.posteriors), 1e-9);
    }
}

TEST(EMQ, Errors) {
    EXPECT_THROW(emq(std::vector<double>{}, 0.5), DataError);
    EXPECT_THROW(emq(std::vector<double>{0.5}, 0.0), DataError);
}

TEST(Hellinger, Examples) {
    const Histogram a({0.5, 0.5}), b({0.9, 0.1});
    EXPECT_EQ(hellinger(a, a), 0.0);
    EXPECT_NEAR(hellinger(Histogram({1, 0, 0}), Histogram({0, 0, 1})), 1.0, 1e-15);
    EXPECT_NEAR(hellinger(a, b), std::sqrt(1 - (std::sqrt(0.45) + std::sqrt(0.05))), 1e-12);
}

TEST(HDy, SeparableMixture) {
    const Histogram pos({0, 0, 0, 1}), neg({1, 0, 0, 0}), test({0.7, 0, 0, 0.3});
    EXPECT_NEAR(hdy_from_histograms(pos, neg, test).p, 0.30, 1e-12);
    EXPECT_EQ(hdy_from_histograms(pos, neg, pos).p, 1.0);
}

TEST(HDy, ExactOnDisjointSupports) {
    const Histogram pos({0, 0, 0, 0, 0.1, 0.2, 0.3, 0.4}), neg({0.4, 0.3, 0.2, 0.1, 0, 0, 0, 0});
    for (int k = 0; k <= 100; k += 7) {
        const double p = k / 100.0;
        EXPECT_EQ(hdy_from_histograms(pos, neg, mix(pos, neg, p)).p, p);
    }
}

TEST(HDy, MatchesExhaustiveGrid) {
    for (std::uint32_t f = 0; f < 5; ++f) {
        const auto val = fixtures::gaussian_scores(200 + 20 * f, 250, 500 + f);
        const auto [test, truth] = gaussian_sample(0.4, 250, 600 + f);
        EXPECT_EQ(hdy(val, test, 8).p, reference::hdy_argmin(val, test, 8)) << "fixture " << f;
    }
}

TEST(KDEy, FlatObjectiveReturnsHalf) {
    const std::vector<double> s{0.1, 0.4, 0.7, 0.1, 0.4, 0.7};
    const ScoredSet val(s, std::vector<Label>{1, 1, 1, 0, 0, 0});
    EXPECT_EQ(kdey(val, std::vector<double>{0.2, 0.9}).p, 0.5);
}

TEST(KDEy, PurePositiveSample) {
    std::mt19937 g(4);
    std::normal_distribution<double> z(0, 1);
    std::vector<double> p;
    std::vector<Label> y;
    auto post = [](double x) { return 1 / (1 + std::exp(-3 * x)); };
    for (int i = 0; i < 300; ++i) {
        p.push_back(post(2 + z(g)));
        y.push_back(1);
        p.push_back(post(-2 + z(g)));
        y.push_back(0);
    }
    const ScoredSet val(p, y);
    EXPECT_GE(kdey(val, val.posteriors_of(1)).p, 0.95);
}

TEST(KDEy, GoldenSectionMatchesFineGrid) {
    for (std::uint32_t f = 0; f < 5; ++f) {
        const auto val = fixtures::gaussian_scores(150, 150 + 30 * f, 700 + f);
        const auto [test, truth] = gaussian_sample(0.15 + 0.17 * f, 200, 800 + f);
        EXPECT_NEAR(kdey(val, test).p, reference::kdey_grid(val, test, 0.1), 0.002) << "fixture " << f;
    }
}

TEST(Quantifiers, EstimatesWithinUnitInterval) {
    const auto val = fixtures::gaussian_scores(100, 100, 3);
    for (std::uint32_t i = 0; i < 25; ++i) {
        const auto test = fixtures::uniform_posteriors(40, 900 + i);
        for (double p : {cc(test).p, pcc(test).p, acc(val, test).p, pacc(val, test).p, emq(test, 0.5).estimate.p,
                         hdy(val, test).p, kdey(val, test).p}) {
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
        }
    }
}
