#pragma once

// Aggregative class-prevalence estimators.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shiftkit/core.hpp"
#include "shiftkit/error.hpp"
#include "shiftkit/models.hpp"

namespace shiftkit {

struct PrevalenceEstimate {
    double p = 0.0;
    std::string method;
    std::size_t iterations = 0;
    double raw = 0.0;         // value before clipping / adjustment
    bool degenerate = false;  // adjustment skipped because tpr ~ fpr
};

struct RateEstimates {
    double tpr = 0.0;
    double fpr = 0.0;
    bool soft = false;
};

inline PrevalenceEstimate cc(std::span<const double> test_posteriors, double threshold = 0.5) {
    detail::require(!test_posteriors.empty(), "cc: empty test sample");
    std::size_t pos = 0;
    for (double y : test_posteriors) pos += y > threshold;
    const double p = static_cast<double>(pos) / static_cast<double>(test_posteriors.size());
    return {p, "CC", 0, p, false};
}

inline PrevalenceEstimate pcc(std::span<const double> test_posteriors) {
    detail::require(!test_posteriors.empty(), "pcc: empty test sample");
    const double p = mean(test_posteriors);
    return {p, "PCC", 0, p, false};
}

/// tpr/fpr on labelled validation scores. Crisp: thresholded counts.
/// Soft: mean posterior over each true class.
inline RateEstimates estimate_rates(const ScoredSet& val, bool soft, double threshold = 0.5) {
    const auto& y = val.labels();
    const auto& p = val.posteriors();
    double pos_sum = 0.0, neg_sum = 0.0;
    std::size_t npos = 0, nneg = 0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const double v = soft ? p[i] : static_cast<double>(crisp(p[i], threshold));
        if (y[i] == 1) {
            pos_sum += v;
            ++npos;
        } else {
            neg_sum += v;
            ++nneg;
        }
    }
    if (npos == 0 || nneg == 0)
        throw DegenerateError(std::string("estimate_rates: validation set lacks class ") + (npos == 0 ? "1" : "0"));
    return {pos_sum / static_cast<double>(npos), neg_sum / static_cast<double>(nneg), soft};
}

inline RateEstimates estimate_rates(const ProbModel& model, const LabeledSet& val, bool soft, double threshold = 0.5) {
    return estimate_rates(model.score(val), soft, threshold);
}

/// (p_raw - fpr) / (tpr - fpr), clipped to [0,1]. Returns p_raw when tpr ~ fpr.
inline PrevalenceEstimate adjust(double p_raw, const RateEstimates& rates) {
    const double denom = rates.tpr - rates.fpr;
    if (std::abs(denom) < 1e-8) return {p_raw, "", 0, p_raw, true};
    const double raw = (p_raw - rates.fpr) / denom;
    return {clip01(raw), "", 0, raw, false};
}

inline PrevalenceEstimate acc(const ScoredSet& val, std::span<const double> test_posteriors, double threshold = 0.5) {
    auto est = adjust(cc(test_posteriors, threshold).p, estimate_rates(val, false, threshold));
    est.method = "ACC";
    return est;
}

inline PrevalenceEstimate pacc(const ScoredSet& val, std::span<const double> test_posteriors) {
    auto est = adjust(pcc(test_posteriors).p, estimate_rates(val, true));
    est.method = "PACC";
    return est;
}

inline PrevalenceEstimate pacc(const ProbModel& model, const LabeledSet& val, std::span<const double> test_posteriors) {
    return pacc(model.score(val), test_posteriors);
}

// ---------------------------------------------------------------------------
// EMQ (expectation maximisation of priors and posteriors)
// ---------------------------------------------------------------------------

struct EmqResult {
    PrevalenceEstimate estimate;
    std::vector<double> posteriors;  // adjusted test posteriors
    double posterior_prior = 0.0;    // prior the returned posteriors were computed with
};

inline constexpr double kEmqClamp = 1e-6;

/// Posterior y (calibrated for prior `from`) re-weighted to prior `to`.
inline double reweight_posterior(double y, double from, double to) {
    const double pos = (to / from) * y;
    const double neg = ((1.0 - to) / (1.0 - from)) * (1.0 - y);
    return pos / (pos + neg);
}

inline EmqResult emq(std::span<const double> test_posteriors, double train_prior, double tol = 1e-6,
                     std::size_t max_iter = 1000) {
    detail::require(!test_posteriors.empty(), "emq: empty test sample");
    if (!(train_prior > 0.0 && train_prior < 1.0)) throw DataError("emq: training prior must lie in (0,1)");
    std::vector<double> y(test_posteriors.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(test_posteriors[i])) throw DataError("emq: non-finite posterior");
        y[i] = std::clamp(test_posteriors[i], kEmqClamp, 1.0 - kEmqClamp);
    }

    std::vector<double> s(y.size());
    double q = train_prior;
    double used = q;
    std::size_t it = 0;
    while (it < max_iter) {
        ++it;
        used = q;
        for (std::size_t i = 0; i < y.size(); ++i) s[i] = reweight_posterior(y[i], train_prior, q);
        const double next = mean(s);
        const bool done = std::abs(next - q) < tol;
        q = next;
        if (done) break;
    }
    return {{q, "EMQ", it, q, false}, std::move(s), used};
}

// ---------------------------------------------------------------------------
// Distribution matching: HDy and KDEy
// ---------------------------------------------------------------------------

inline double hellinger(const Histogram& a, const Histogram& b) {
    if (a.bins() != b.bins()) throw DataError("hellinger: bin count mismatch");
    double bc = 0.0;
    for (std::size_t i = 0; i < a.bins(); ++i) bc += std::sqrt(a[i] * b[i]);
    return std::sqrt(std::max(0.0, 1.0 - bc));
}

inline Histogram mix(const Histogram& pos, const Histogram& neg, double p) {
    std::vector<double> d(pos.bins());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p * pos[i] + (1.0 - p) * neg[i];
    return Histogram(std::move(d));
}

inline constexpr std::size_t kHdyGridSteps = 100;

/// argmin over the 0.01 grid of HD(mixture, test); ties go to the smaller p.
inline PrevalenceEstimate hdy_from_histograms(const Histogram& pos, const Histogram& neg, const Histogram& test) {
    double best_p = 0.0;
    double best_hd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= kHdyGridSteps; ++k) {
        const double p = static_cast<double>(k) / static_cast<double>(kHdyGridSteps);
        const double hd = hellinger(mix(pos, neg, p), test);
        if (hd < best_hd) {
            best_hd = hd;
            best_p = p;
        }
    }
    return {best_p, "HDy", kHdyGridSteps + 1, best_p, false};
}

struct ClassHistograms {
    Histogram pos;
    Histogram neg;
};

inline ClassHistograms class_histograms(const ScoredSet& val, std::size_t bins) {
    if (!val.has_both_classes()) throw DegenerateError("validation set must contain both classes");
    return {build_histogram(val.posteriors_of(1), bins), build_histogram(val.posteriors_of(0), bins)};
}

inline PrevalenceEstimate hdy(const ScoredSet& val, std::span<const double> test_posteriors, std::size_t bins = 8) {
    const auto h = class_histograms(val, bins);
    return hdy_from_histograms(h.pos, h.neg, build_histogram(test_posteriors, bins));
}

namespace detail {

inline double gaussian_kde(double y, std::span<const double> sample, double bandwidth) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    double s = 0.0;
    for (double c : sample) {
        const double z = (y - c) / bandwidth;
        s += std::exp(-0.5 * z * z);
    }
    return inv_sqrt_2pi * s / (bandwidth * static_cast<double>(sample.size()));
}

}  // namespace detail

/// Mixture log-likelihood of the test posteriors under class-conditional KDEs.
class KdeyObjective {
public:
    KdeyObjective(const ScoredSet& val, std::span<const double> test_posteriors, double bandwidth) {
        detail::require(!test_posteriors.empty(), "kdey: empty test sample");
        detail::require(bandwidth > 0.0, "kdey: bandwidth must be positive");
        if (!val.has_both_classes()) throw DegenerateError("kdey: validation set must contain both classes");
        const auto pos = val.posteriors_of(1);
        const auto neg = val.posteriors_of(0);
        fpos_.reserve(test_posteriors.size());
        fneg_.reserve(test_posteriors.size());
        for (double y : test_posteriors) {
            fpos_.push_back(detail::gaussian_kde(y, pos, bandwidth));
            fneg_.push_back(detail::gaussian_kde(y, neg, bandwidth));
        }
    }

    double operator()(double p) const {
        double s = 0.0;
        for (std::size_t i = 0; i < fpos_.size(); ++i) s += std::log(p * fpos_[i] + (1.0 - p) * fneg_[i] + 1e-12);
        return s / static_cast<double>(fpos_.size());
    }

private:
    std::vector<double> fpos_, fneg_;
};

/// Golden-section maximisation of the KDE mixture likelihood over p in [0,1].
inline PrevalenceEstimate kdey(const ScoredSet& val, std::span<const double> test_posteriors, double bandwidth = 0.1) {
    const KdeyObjective f(val, test_posteriors, bandwidth);

    // The objective is concave in p; equal values at 0, 1/2 and 1 mean it is flat.
    const double f0 = f(0.0), fh = f(0.5), f1 = f(1.0);
    const double scale = 1e-12 * std::max({1.0, std::abs(f0), std::abs(fh)});
    if (std::abs(f0 - fh) <= scale && std::abs(f1 - fh) <= scale) return {0.5, "KDEy", 0, 0.5, false};

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = 1.0;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    std::size_t it = 0;
    while (b - a > 1e-4) {
        ++it;
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    const double p = clip01(0.5 * (a + b));
    return {p, "KDEy", it, p, false};
}

}  // namespace shiftkit
