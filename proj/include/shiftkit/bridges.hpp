#pragma once

// Adaptations that turn a method for one task (calibration, quantification,
// accuracy prediction) into a method for another.
//
// Sub-methods are passed as fit-and-apply functions receiving the labelled
// validation scores and a subset of the test sample. The subset carries the
// test row ids so that label-peeking oracles can be plugged in unchanged.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shiftkit/calibrate.hpp"
#include "shiftkit/cap.hpp"
#include "shiftkit/core.hpp"
#include "shiftkit/error.hpp"
#include "shiftkit/quantify.hpp"

namespace shiftkit {

/// Test posteriors plus their row ids in the full test sample.
struct TestSubset {
    std::vector<double> posteriors;
    std::vector<std::size_t> rows;

    std::size_t size() const noexcept { return posteriors.size(); }
    bool empty() const noexcept { return posteriors.empty(); }
};

inline TestSubset whole(std::span<const double> posteriors) {
    TestSubset t;
    t.posteriors.assign(posteriors.begin(), posteriors.end());
    t.rows.resize(posteriors.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i] = i;
    return t;
}

/// Calibrated posteriors for `test`, fitted with access to `val`.
using CalibratorFactory = std::function<std::vector<double>(const ScoredSet& val, const TestSubset& test)>;
/// Positive prevalence of `test`, fitted with access to `val`.
using QuantifierFactory = std::function<double(const ScoredSet& val, const TestSubset& test)>;
/// Accuracy of the thresholded classifier on `test`, fitted with access to `val`.
using AccuracyFactory = std::function<double(const ScoredSet& val, const TestSubset& test, double threshold)>;

struct BridgeConfig {
    std::size_t bins_quant_to_cal = 5;
    std::size_t bins_acc_to_cal = 6;
    double threshold = 0.5;

    void validate() const {
        detail::require(bins_quant_to_cal >= 2, "BridgeConfig: bins_quant_to_cal must be >= 2");
        detail::require(bins_acc_to_cal >= 2 && bins_acc_to_cal % 2 == 0,
                        "BridgeConfig: bins_acc_to_cal must be even and >= 2");
    }
};

// ---------------------------------------------------------------------------
// Partitions induced by the crisp classifier
// ---------------------------------------------------------------------------

struct ScoredPartition {
    ScoredSet pos, neg;
};

struct TestPartition {
    TestSubset pos, neg;
};

inline ScoredPartition partition(const ScoredSet& val, double threshold) {
    std::vector<std::size_t> p, n;
    for (std::size_t i = 0; i < val.size(); ++i) (crisp(val.posteriors()[i], threshold) ? p : n).push_back(i);
    return {val.subset(p), val.subset(n)};
}

inline TestPartition partition(const TestSubset& test, double threshold) {
    TestPartition out;
    for (std::size_t i = 0; i < test.size(); ++i) {
        auto& side = crisp(test.posteriors[i], threshold) ? out.pos : out.neg;
        side.posteriors.push_back(test.posteriors[i]);
        side.rows.push_back(test.rows[i]);
    }
    return out;
}

/// Test points grouped into b equal-width posterior bins.
inline std::vector<TestSubset> bin_subsets(const TestSubset& test, std::size_t bins) {
    std::vector<TestSubset> out(bins);
    for (std::size_t i = 0; i < test.size(); ++i) {
        auto& s = out[bin_index(test.posteriors[i], bins)];
        s.posteriors.push_back(test.posteriors[i]);
        s.rows.push_back(test.rows[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// calibration -> quantification
// ---------------------------------------------------------------------------

inline PrevalenceEstimate cal_to_quant(const Calibrator& calibrator, std::span<const double> test_posteriors) {
    if (test_posteriors.empty()) throw DataError("cal_to_quant: empty test sample");
    const double p = mean(calibrator.apply(test_posteriors));
    return {p, calibrator.method() + "_cal2quant", 0, p, false};
}

inline PrevalenceEstimate cal_to_quant(const CalibratorFactory& calibrate, const ScoredSet& val, const TestSubset& test) {
    if (test.empty()) throw DataError("cal_to_quant: empty test sample");
    const double p = mean(calibrate(val, test));
    return {p, "cal2quant", 0, p, false};
}

// ---------------------------------------------------------------------------
// calibration -> accuracy
// ---------------------------------------------------------------------------

/// [sum over predicted positives of h+(x) + sum over predicted negatives of (1 - h-(x))] / |test|
/// with h+ and h- calibrated separately on each side of the threshold.
inline AccuracyEstimate cal_to_acc(const CalibratorFactory& calibrate, const ScoredSet& val, const TestSubset& test,
                                   double threshold = 0.5) {
    if (test.empty()) throw DataError("cal_to_acc: empty test sample");
    const auto vp = partition(val, threshold);
    const auto tp = partition(test, threshold);
    if (vp.pos.empty() || tp.pos.empty()) throw DegenerateError("cal_to_acc: empty predicted-positive partition");
    if (vp.neg.empty() || tp.neg.empty()) throw DegenerateError("cal_to_acc: empty predicted-negative partition");
    double total = 0.0;
    for (double v : calibrate(vp.pos, tp.pos)) total += v;
    for (double v : calibrate(vp.neg, tp.neg)) total += 1.0 - v;
    return {clip01(total / static_cast<double>(test.size())), "cal2acc"};
}

// ---------------------------------------------------------------------------
// quantification -> calibration
// ---------------------------------------------------------------------------

namespace detail {

template <typename F>
double per_bin(std::size_t bin, F&& f) {
    try {
        return f();
    } catch (const DegenerateError& e) {
        throw DegenerateError("bin " + std::to_string(bin) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("bin " + std::to_string(bin) + ": " + e.what());
    }
}

}  // namespace detail

/// Per-bin prevalence estimates before post-processing; empty bins get their center.
inline std::vector<double> quant_to_cal_values(const QuantifierFactory& quantify, const ScoredSet& val,
                                               const TestSubset& test, std::size_t bins = 5) {
    detail::require(bins >= 2, "quant_to_cal: need at least 2 bins");
    const auto groups = bin_subsets(test, bins);
    std::vector<double> raw(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        raw[i] = groups[i].empty() ? bin_center(i, bins)
                                   : clip01(detail::per_bin(i, [&] { return quantify(val, groups[i]); }));
    }
    return raw;
}

inline Calibrator quant_to_cal(const QuantifierFactory& quantify, const ScoredSet& val, const TestSubset& test,
                               std::size_t bins = 5, std::string method = "quant2cal") {
    return {CalibrationMap::from_bin_values(quant_to_cal_values(quantify, val, test, bins)), std::move(method)};
}

// ---------------------------------------------------------------------------
// quantification -> accuracy
// ---------------------------------------------------------------------------

/// [p+ |test+| + (1 - p-) |test-|] / |test| with one quantifier per predicted class.
inline AccuracyEstimate quant_to_acc(const QuantifierFactory& quantify, const ScoredSet& val, const TestSubset& test,
                                     double threshold = 0.5) {
    if (test.empty()) throw DataError("quant_to_acc: both test partitions are empty");
    const auto vp = partition(val, threshold);
    const auto tp = partition(test, threshold);
    double total = 0.0;
    if (!tp.pos.empty()) total += clip01(quantify(vp.pos, tp.pos)) * static_cast<double>(tp.pos.size());
    if (!tp.neg.empty()) total += (1.0 - clip01(quantify(vp.neg, tp.neg))) * static_cast<double>(tp.neg.size());
    return {clip01(total / static_cast<double>(test.size())), "quant2acc"};
}

// ---------------------------------------------------------------------------
// accuracy -> quantification
// ---------------------------------------------------------------------------

/// acc+ |test+|/|test| + (1 - acc-) |test-|/|test| with one predictor per predicted class.
inline PrevalenceEstimate acc_to_quant(const AccuracyFactory& predict, const ScoredSet& val, const TestSubset& test,
                                       double threshold = 0.5) {
    if (test.empty()) throw DataError("acc_to_quant: both test partitions are empty");
    const auto vp = partition(val, threshold);
    const auto tp = partition(test, threshold);
    const double n = static_cast<double>(test.size());
    double p = 0.0;
    if (!tp.pos.empty())
        p += clip01(predict(vp.pos, tp.pos, threshold)) * static_cast<double>(tp.pos.size()) / n;
    if (!tp.neg.empty())
        p += (1.0 - clip01(predict(vp.neg, tp.neg, threshold))) * static_cast<double>(tp.neg.size()) / n;
    return {clip01(p), "acc2quant", 0, p, false};
}

// ---------------------------------------------------------------------------
// accuracy -> calibration
// ---------------------------------------------------------------------------

/// Per-bin values: a_i above the midpoint, 1 - a_i below it; empty bins get their center.
inline std::vector<double> acc_to_cal_values(const AccuracyFactory& predict, const ScoredSet& val,
                                             const TestSubset& test, std::size_t bins = 6, double threshold = 0.5) {
    detail::require(bins >= 2 && bins % 2 == 0, "acc_to_cal: number of bins must be even and >= 2");
    const auto groups = bin_subsets(test, bins);
    std::vector<double> raw(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        if (groups[i].empty()) {
            raw[i] = bin_center(i, bins);
            continue;
        }
        const double a = clip01(detail::per_bin(i, [&] { return predict(val, groups[i], threshold); }));
        raw[i] = i >= bins / 2 ? a : 1.0 - a;
    }
    return raw;
}

inline Calibrator acc_to_cal(const AccuracyFactory& predict, const ScoredSet& val, const TestSubset& test,
                             std::size_t bins = 6, double threshold = 0.5, std::string method = "acc2cal") {
    return {CalibrationMap::from_bin_values(acc_to_cal_values(predict, val, test, bins, threshold)), std::move(method)};
}

// ---------------------------------------------------------------------------
// Adapters from the concrete methods
// ---------------------------------------------------------------------------

/// Wrap a calibrator fitter (val, test posteriors) -> Calibrator.
template <typename Fit>
CalibratorFactory calibrator_factory(Fit fit) {
    return [fit](const ScoredSet& val, const TestSubset& test) {
        const Calibrator c = fit(val, std::span<const double>(test.posteriors));
        return c.apply(std::span<const double>(test.posteriors));
    };
}

/// Wrap a quantifier (val, test posteriors) -> PrevalenceEstimate.
template <typename Quant>
QuantifierFactory quantifier_factory(Quant q) {
    return [q](const ScoredSet& val, const TestSubset& test) {
        return q(val, std::span<const double>(test.posteriors)).p;
    };
}

/// Wrap an accuracy predictor (val, test posteriors, threshold) -> AccuracyEstimate.
template <typename Pred>
AccuracyFactory accuracy_factory(Pred pred) {
    return [pred](const ScoredSet& val, const TestSubset& test, double threshold) {
        return pred(val, std::span<const double>(test.posteriors), threshold).acc;
    };
}

}  // namespace shiftkit
