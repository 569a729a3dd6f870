#pragma once

// Classifier accuracy prediction: Naive, ATC and DoC.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "shiftkit/core.hpp"
#include "shiftkit/error.hpp"
#include "shiftkit/eval.hpp"
#include "shiftkit/models.hpp"

namespace shiftkit {

struct AccuracyEstimate {
    double acc = 0.0;
    std::string method;
};

inline AccuracyEstimate naive_acc(const ScoredSet& val, double threshold = 0.5) {
    detail::require(!val.empty(), "naive_acc: empty validation set");
    return {crisp_accuracy(val.posteriors(), val.labels(), threshold), "Naive"};
}

inline AccuracyEstimate naive_acc(const ProbModel& model, const LabeledSet& val, double threshold = 0.5) {
    return naive_acc(model.score(val), threshold);
}

// ---------------------------------------------------------------------------
// ATC
// ---------------------------------------------------------------------------

enum class ConfidenceScore { MaxConfidence, NegativeEntropy };

inline double confidence(double y, ConfidenceScore kind) {
    if (kind == ConfidenceScore::MaxConfidence) return std::max(y, 1.0 - y);
    auto xlogx = [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; };
    return xlogx(y) + xlogx(1.0 - y);
}

/// Threshold tau such that the share of validation scores strictly above tau
/// equals the validation accuracy: the (1-acc) empirical quantile, or -inf
/// when the validation accuracy is 1.
inline double atc_threshold(const ScoredSet& val, ConfidenceScore kind, double threshold = 0.5) {
    detail::require(!val.empty(), "atc: empty validation set");
    const auto& p = val.posteriors();
    const auto& y = val.labels();
    std::size_t correct = 0;
    std::vector<double> scores(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        correct += crisp(p[i], threshold) == y[i];
        scores[i] = confidence(p[i], kind);
    }
    const std::size_t below = p.size() - correct;
    if (below == 0) return -std::numeric_limits<double>::infinity();
    std::sort(scores.begin(), scores.end());
    return scores[below - 1];
}

inline double share_above(std::span<const double> posteriors, double tau, ConfidenceScore kind) {
    std::size_t above = 0;
    for (double y : posteriors) above += confidence(y, kind) > tau;
    return static_cast<double>(above) / static_cast<double>(posteriors.size());
}

inline AccuracyEstimate atc(const ScoredSet& val, std::span<const double> test_posteriors,
                            ConfidenceScore kind = ConfidenceScore::MaxConfidence, double threshold = 0.5) {
    if (test_posteriors.empty()) throw DataError("atc: empty test sample");
    const double tau = atc_threshold(val, kind, threshold);
    return {share_above(test_posteriors, tau, kind), kind == ConfidenceScore::MaxConfidence ? "ATC-MC" : "ATC-NE"};
}

// ---------------------------------------------------------------------------
// DoC
// ---------------------------------------------------------------------------

inline double mean_max_confidence(std::span<const double> posteriors) {
    detail::require(!posteriors.empty(), "mean_max_confidence: empty input");
    double s = 0.0;
    for (double y : posteriors) s += std::max(y, 1.0 - y);
    return s / static_cast<double>(posteriors.size());
}

/// accuracy gap = slope * confidence gap + intercept, gaps taken against the full validation set.
struct DocRegressor {
    double slope = 0.0;
    double intercept = 0.0;
    double val_reference_confidence = 0.0;
    double val_reference_accuracy = 0.0;
};

/// Ordinary least squares of y on x.
inline std::pair<double, double> least_squares_line(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size() && !x.empty(), "least_squares_line: size mismatch");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw DegenerateError("doc_fit: degenerate regression (fewer than 2 distinct confidence gaps)");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

inline DocRegressor doc_fit(const ScoredSet& val, std::span<const ScoredSet> samples, double threshold = 0.5) {
    detail::require(!val.empty(), "doc_fit: empty validation set");
    const double ref_conf = mean_max_confidence(val.posteriors());
    const double ref_acc = crisp_accuracy(val.posteriors(), val.labels(), threshold);
    std::vector<double> xs, ys;
    for (const auto& s : samples) {
        xs.push_back(mean_max_confidence(s.posteriors()) - ref_conf);
        ys.push_back(crisp_accuracy(s.posteriors(), s.labels(), threshold) - ref_acc);
    }
    const auto [slope, intercept] = least_squares_line(xs, ys);
    return {slope, intercept, ref_conf, ref_acc};
}

/// Samples drawn from the validation set with the given protocol (APP or uniform).
inline DocRegressor doc_fit(const ScoredSet& val, const SampleProtocol& protocol, double threshold = 0.5) {
    std::vector<SampleDraw> draws;
    switch (protocol.kind) {
        case ProtocolKind::APP: draws = app_draws(val.labels(), protocol); break;
        case ProtocolKind::UniformRandom: draws = uniform_draws(val.size(), protocol); break;
        case ProtocolKind::CSMixture: throw DataError("doc_fit: CS mixtures need target-domain labels; use uniform");
    }
    std::vector<ScoredSet> samples;
    samples.reserve(draws.size());
    for (const auto& d : draws) samples.push_back(val.subset(d.rows));
    return doc_fit(val, samples, threshold);
}

inline DocRegressor doc_fit(const ProbModel& model, const LabeledSet& val, const SampleProtocol& protocol,
                            double threshold = 0.5) {
    return doc_fit(model.score(val), protocol, threshold);
}

inline AccuracyEstimate doc_predict(const DocRegressor& reg, std::span<const double> test_posteriors) {
    const double gap = mean_max_confidence(test_posteriors) - reg.val_reference_confidence;
    return {clip01(reg.val_reference_accuracy + reg.slope * gap + reg.intercept), "DoC"};
}

}  // namespace shiftkit
