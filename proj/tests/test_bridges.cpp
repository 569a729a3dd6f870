#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace shiftkit;

namespace {

// A test sample with hidden labels, plus label-peeking factories written
// independently of the library oracles.
struct Fixture {
    ScoredSet val;
    std::vector<double> scores;
    std::vector<Label> labels;

    TestSubset test() const { return whole(scores); }

    double frac_pos(const TestSubset& s) const {
        double n = 0;
        for (auto r : s.rows) n += labels[r];
        return n / s.size();
    }
    double accuracy(const TestSubset& s) const {
        double n = 0;
        for (auto r : s.rows) n += (scores[r] > 0.5 ? 1 : 0) == labels[r];
        return n / s.size();
    }
    QuantifierFactory quantifier() const {
        return [this](const ScoredSet&, const TestSubset& s) { return frac_pos(s); };
    }
    AccuracyFactory predictor() const {
        return [this](const ScoredSet&, const TestSubset& s, double) { return accuracy(s); };
    }
    CalibratorFactory calibrator() const {
        return [this](const ScoredSet&, const TestSubset& s) {
            std::vector<double> out;
            for (std::size_t i = 0; i < s.size(); ++i) {
                double pos = 0, n = 0;
                for (auto r : s.rows)
                    if (scores[r] == s.posteriors[i]) {
                        pos += labels[r];
                        n += 1;
                    }
                out.push_back(pos / n);
            }
            return out;
        };
    }
};

// kNN-like discrete scores so that exact-score groups are non-trivial.
Fixture make_fixture(std::uint32_t seed, std::size_t n = 200) {
    Fixture f;
    f.val = fixtures::gaussian_scores(100, 100, seed);
    const auto p = fixtures::uniform_posteriors(n, seed + 1);
    for (double v : p) f.scores.push_back(std::round(v * 10) / 10);
    f.labels.resize(n);
    const auto coin = fixtures::uniform_posteriors(n, seed + 2);
    for (std::size_t i = 0; i < n; ++i) f.labels[i] = coin[i] < f.scores[i] ? 1 : 0;
    return f;
}

CalibratorFactory constant_calibrator(double v) {
    return [v](const ScoredSet&, const TestSubset& s) { return std::vector<double>(s.size(), v); };
}

}  // namespace

TEST(CalToQuant, IdentityConstantAndOracle) {
    for (std::uint32_t s = 0; s < 10; ++s) {
        const auto f = make_fixture(10 * s);
        const Calibrator identity;
        EXPECT_NEAR(cal_to_quant(identity, f.scores).p, pcc(f.scores).p, 1e-12);
        EXPECT_NEAR(cal_to_quant(constant_calibrator(0.3), f.val, f.test()).p, 0.3, 1e-12);
        EXPECT_NEAR(cal_to_quant(f.calibrator(), f.val, f.test()).p, f.frac_pos(f.test()), 1e-12);
    }
}

TEST(CalToQuant, PacCalMatchesPacc) {
    int checked = 0;
    for (std::uint32_t s = 0; s < 20; ++s) {
        const auto val = fixtures::gaussian_scores(300, 300, 100 + s);
        const auto r = estimate_rates(val, true);
        auto test = fixtures::gaussian_scores(150, 100, 200 + s).posteriors();
        std::erase_if(test, [&](double v) { return v < r.fpr || v > r.tpr; });
        const auto c = paccal_fit(val, test);
        if (std::get<AffineForm>(c.form()).sigmoid) continue;
        ++checked;
        EXPECT_NEAR(cal_to_quant(c, test).p, pacc(val, test).p, 1e-12);
    }
    EXPECT_GT(checked, 15);
}

TEST(CalToAcc, OracleAndConstants) {
    for (std::uint32_t s = 0; s < 10; ++s) {
        const auto f = make_fixture(10 * s + 3);
        EXPECT_NEAR(cal_to_acc(f.calibrator(), f.val, f.test()).acc, f.accuracy(f.test()), 1e-12);
        EXPECT_NEAR(cal_to_acc(constant_calibrator(0.5), f.val, f.test()).acc, 0.5, 1e-15);
        const CalibratorFactory confident = [](const ScoredSet&, const TestSubset& t) {
            return std::vector<double>(t.size(), t.posteriors.front() > 0.5 ? 1.0 : 0.0);
        };
        EXPECT_EQ(cal_to_acc(confident, f.val, f.test()).acc, 1.0);
    }
}

TEST(CalToAcc, EmptyPartitionIsDegenerate) {
    const auto f = make_fixture(1);
    const auto all_high = whole(std::vector<double>{0.7, 0.8, 0.9});
    EXPECT_THROW(cal_to_acc(constant_calibrator(0.5), f.val, all_high), DegenerateError);
}

TEST(QuantToCal, OracleGivesBinPositiveRates) {
    for (std::uint32_t s = 0; s < 10; ++s) {
        const auto f = make_fixture(10 * s + 5);
        const auto raw = quant_to_cal_values(f.quantifier(), f.val, f.test(), 5);
        for (std::size_t b = 0; b < 5; ++b) {
            double pos = 0, n = 0;
            for (std::size_t i = 0; i < f.scores.size(); ++i)
                if (std::min<std::size_t>(4, static_cast<std::size_t>(f.scores[i] * 5)) == b) {
                    pos += f.labels[i];
                    n += 1;
                }
            EXPECT_NEAR(raw[b], n > 0 ? pos / n : (b + 0.5) / 5, 1e-12) << "bin " << b;
        }
    }
}

TEST(QuantToCal, EmptyBinsGetCenters) {
    Fixture f = make_fixture(7, 10);
    f.scores = {0.05, 0.1, 0.15, 0.05, 0.1, 0.1, 0.15, 0.1, 0.05, 0.15};
    const auto raw = quant_to_cal_values(f.quantifier(), f.val, f.test(), 5);
    for (std::size_t b = 1; b < 5; ++b) EXPECT_EQ(raw[b], bin_center(b, 5));
}

TEST(QuantToCal, UninformativeScoresBalancedLabels) {
    Fixture f = make_fixture(8, 10);
    f.scores = {0.1, 0.1, 0.3, 0.3, 0.5, 0.5, 0.7, 0.7, 0.9, 0.9};
    f.labels = {1, 0, 0, 1, 1, 0, 0, 1, 1, 0};
    for (double v : quant_to_cal_values(f.quantifier(), f.val, f.test(), 5)) EXPECT_EQ(v, 0.5);
}

TEST(QuantToAcc, OracleAndHandCases) {
    for (std::uint32_t s = 0; s < 10; ++s) {
        const auto f = make_fixture(10 * s + 6);
        EXPECT_NEAR(quant_to_acc(f.quantifier(), f.val, f.test()).acc, f.accuracy(f.test()), 1e-12);
    }
    const auto f = make_fixture(1);
    const QuantifierFactory perfect = [](const ScoredSet&, const TestSubset& t) {
        return t.posteriors.front() > 0.5 ? 1.0 : 0.0;
    };
    EXPECT_EQ(quant_to_acc(perfect, f.val, f.test()).acc, 1.0);
    const QuantifierFactory half = [](const ScoredSet&, const TestSubset&) { return 0.5; };
    EXPECT_EQ(quant_to_acc(half, f.val, whole(std::vector<double>{0.2, 0.4, 0.6, 0.8})).acc, 0.5);
}

TEST(AccToQuant, OracleAndHandCases) {
    for (std::uint32_t s = 0; s < 10; ++s) {
        const auto f = make_fixture(10 * s + 7);
        EXPECT_NEAR(acc_to_quant(f.predictor(), f.val, f.test()).p, f.frac_pos(f.test()), 1e-12);
        const AccuracyFactory always_right = [](const ScoredSet&, const TestSubset&, double) { return 1.0; };
        EXPECT_NEAR(acc_to_quant(always_right, f.val, f.test()).p, cc(f.scores).p, 1e-15);
        const AccuracyFactory coin = [](const ScoredSet&, const TestSubset&, double) { return 0.5; };
        EXPECT_NEAR(acc_to_quant(coin, f.val, f.test()).p, 0.5, 1e-15);
    }
}

TEST(AccToCal, OracleGivesBinPositiveRates) {
    for (std::uint32_t s = 0; s < 10; ++s) {
        auto f = make_fixture(10 * s + 9);
        // a score of exactly 0.5 sits in an upper bin but is predicted negative
        std::replace(f.scores.begin(), f.scores.end(), 0.5, 0.45);
        const auto raw = acc_to_cal_values(f.predictor(), f.val, f.test(), 6);
        for (std::size_t b = 0; b < 6; ++b) {
            double pos = 0, n = 0;
            for (std::size_t i = 0; i < f.scores.size(); ++i)
                if (std::min<std::size_t>(5, static_cast<std::size_t>(f.scores[i] * 6)) == b) {
                    pos += f.labels[i];
                    n += 1;
                }
            EXPECT_NEAR(raw[b], n > 0 ? pos / n : (b + 0.5) / 6, 1e-12) << "bin " << b;
        }
    }
}

TEST(AccToCal, ConfidentPredictorAndOddBins) {
    const auto f = make_fixture(2);
    const AccuracyFactory always_right = [](const ScoredSet&, const TestSubset&, double) { return 1.0; };
    const auto raw = acc_to_cal_values(always_right, f.val, f.test(), 6);
    EXPECT_EQ(raw, (std::vector<double>{0, 0, 0, 1, 1, 1}));
    EXPECT_THROW(acc_to_cal_values(always_right, f.val, f.test(), 5), DataError);
}

TEST(Bridges, ConcreteMethodsStayInRange) {
    const auto val = fixtures::gaussian_scores(200, 200, 300);
    const auto test = whole(fixtures::gaussian_scores(180, 70, 301).posteriors());
    const auto q = quantifier_factory([](const ScoredSet& v, std::span<const double> t) { return pacc(v, t); });
    const auto a = accuracy_factory([](const ScoredSet& v, std::span<const double> t, double th) {
        return atc(v, t, ConfidenceScore::MaxConfidence, th);
    });
    const auto c = calibrator_factory([](const ScoredSet& v, std::span<const double> t) { return dmcal_fit(v, t); });
    for (double v : {cal_to_quant(c, val, test).p, cal_to_acc(c, val, test).acc, quant_to_acc(q, val, test).acc,
                     acc_to_quant(a, val, test).p}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    for (const auto& cal : {quant_to_cal(q, val, test), acc_to_cal(a, val, test)})
        for (double v : cal.apply(std::span<const double>(test.posteriors))) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
}

TEST(Bridges, BinErrorsNameTheBin) {
    const auto f = make_fixture(4);
    const QuantifierFactory failing = [](const ScoredSet&, const TestSubset&) -> double {
        throw DegenerateError("no data");
    };
    try {
        quant_to_cal(failing, f.val, f.test());
        FAIL();
    } catch (const DegenerateError& e) {
        EXPECT_NE(std::string(e.what()).find("bin 0"), std::string::npos);
    }
}
