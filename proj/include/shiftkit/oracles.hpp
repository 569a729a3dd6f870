#pragma once

// Label-peeking perfect calibrator, quantifier and accuracy predictor, and
// the finite-sample checks showing that each one can be rebuilt exactly from
// either of the others.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftkit/bridges.hpp"
#include "shiftkit/core.hpp"
#include "shiftkit/error.hpp"
#include "shiftkit/models.hpp"

namespace shiftkit {

/// Hidden test labels and the raw classifier scores they align with.
struct OracleContext {
    std::vector<Label> hidden_labels;
    std::vector<double> scores;

    OracleContext(std::vector<Label> labels, std::vector<double> raw_scores)
        : hidden_labels(std::move(labels)), scores(std::move(raw_scores)) {
        detail::require(hidden_labels.size() == scores.size(), "OracleContext: labels/scores length mismatch");
    }

    static OracleContext from_model(const ProbModel& model, const LabeledSet& test) {
        return OracleContext(test.labels(), model.predict(test));
    }

    std::size_t size() const noexcept { return scores.size(); }
};

/// Exact positive fraction of the given test rows.
inline double oracle_quant(const OracleContext& ctx, std::span<const std::size_t> rows) {
    if (rows.empty()) throw DataError("oracle_quant: empty subset");
    std::size_t pos = 0;
    for (std::size_t r : rows) pos += ctx.hidden_labels.at(r) == 1;
    return static_cast<double>(pos) / static_cast<double>(rows.size());
}

/// Exact accuracy of the thresholded classifier on the given test rows.
inline double oracle_acc(const OracleContext& ctx, std::span<const std::size_t> rows, double threshold = 0.5) {
    if (rows.empty()) throw DataError("oracle_acc: empty subset");
    std::size_t ok = 0;
    for (std::size_t r : rows) ok += crisp(ctx.scores.at(r), threshold) == ctx.hidden_labels.at(r);
    return static_cast<double>(ok) / static_cast<double>(rows.size());
}

namespace detail {

/// Positions grouped by bitwise-equal value, in order of first appearance.
inline std::vector<std::vector<std::size_t>> exact_groups(std::span<const double> values) {
    std::map<std::uint64_t, std::size_t> slot;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto key = std::bit_cast<std::uint64_t>(values[i]);
        auto [it, fresh] = slot.try_emplace(key, groups.size());
        if (fresh) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    return groups;
}

}  // namespace detail

/// Each point's value becomes the positive fraction among points sharing its exact raw score.
inline std::vector<double> oracle_calibrate(std::span<const Label> labels, std::span<const double> raw_scores) {
    detail::require(labels.size() == raw_scores.size(), "oracle_calibrate: labels/scores length mismatch");
    std::vector<double> out(raw_scores.size());
    for (const auto& g : detail::exact_groups(raw_scores)) {
        std::size_t pos = 0;
        for (std::size_t i : g) pos += labels[i] == 1;
        const double v = static_cast<double>(pos) / static_cast<double>(g.size());
        for (std::size_t i : g) out[i] = v;
    }
    return out;
}

inline std::vector<double> oracle_calibrate(const OracleContext& ctx, std::span<const std::size_t> rows) {
    std::vector<Label> y;
    std::vector<double> s;
    for (std::size_t r : rows) {
        y.push_back(ctx.hidden_labels.at(r));
        s.push_back(ctx.scores.at(r));
    }
    return oracle_calibrate(y, s);
}

// Oracles in the shape the bridges consume. The validation argument is ignored.

inline CalibratorFactory oracle_calibrator(const OracleContext& ctx) {
    return [&ctx](const ScoredSet&, const TestSubset& test) { return oracle_calibrate(ctx, test.rows); };
}

inline QuantifierFactory oracle_quantifier(const OracleContext& ctx) {
    return [&ctx](const ScoredSet&, const TestSubset& test) { return oracle_quant(ctx, test.rows); };
}

inline AccuracyFactory oracle_accuracy(const OracleContext& ctx) {
    return [&ctx](const ScoredSet&, const TestSubset& test, double threshold) {
        return oracle_acc(ctx, test.rows, threshold);
    };
}

/// Calibrator built from a quantifier by grouping test points on exactly equal
/// raw scores and quantifying each group: h~(x) = rho([x]_h).
inline CalibratorFactory grouped_calibrator(QuantifierFactory quantify) {
    return [quantify = std::move(quantify)](const ScoredSet& val, const TestSubset& test) {
        std::vector<double> out(test.size());
        for (const auto& g : detail::exact_groups(test.posteriors)) {
            TestSubset part;
            for (std::size_t i : g) {
                part.posteriors.push_back(test.posteriors[i]);
                part.rows.push_back(test.rows[i]);
            }
            const double v = quantify(val, part);
            for (std::size_t i : g) out[i] = v;
        }
        return out;
    };
}

/// Quantifier built from an accuracy predictor through acc_to_quant.
inline QuantifierFactory quantifier_from_accuracy(AccuracyFactory predict, double threshold = 0.5) {
    return [predict = std::move(predict), threshold](const ScoredSet& val, const TestSubset& test) {
        return acc_to_quant(predict, val, test, threshold).p;
    };
}

/// max over groups of equal calibrated value of |value - positive fraction of the group|.
inline double calibration_residual(std::span<const Label> labels, std::span<const double> calibrated) {
    double worst = 0.0;
    for (const auto& g : detail::exact_groups(calibrated)) {
        std::size_t pos = 0;
        for (std::size_t i : g) pos += labels[i] == 1;
        const double frac = static_cast<double>(pos) / static_cast<double>(g.size());
        worst = std::max(worst, std::abs(frac - calibrated[g.front()]));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Reduction report
// ---------------------------------------------------------------------------

inline constexpr double kLemmaTolerance = 1e-12;

struct LemmaReport {
    struct Entry {
        std::string name;
        std::string statement;
        double residual = 0.0;
        bool passed = false;
    };

    std::vector<Entry> entries;
    std::size_t n = 0;
    double prevalence = 0.0;
    double accuracy = 0.0;

    bool all_passed() const {
        return std::all_of(entries.begin(), entries.end(), [](const Entry& e) { return e.passed; });
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["n"] = n;
        j["true_prevalence"] = prevalence;
        j["true_accuracy"] = accuracy;
        j["tolerance"] = kLemmaTolerance;
        j["all_passed"] = all_passed();
        auto& arr = j["lemmas"] = nlohmann::json::array();
        for (const auto& e : entries)
            arr.push_back({{"name", e.name}, {"statement", e.statement}, {"residual", e.residual}, {"passed", e.passed}});
        return j;
    }

    std::string to_table() const {
        std::string out = "lemma               residual     status  statement\n";
        char buf[256];
        for (const auto& e : entries) {
            std::snprintf(buf, sizeof buf, "%-18s  %.3e    %-6s  %s\n", e.name.c_str(), e.residual,
                          e.passed ? "ok" : "FAIL", e.statement.c_str());
            out += buf;
        }
        return out;
    }
};

/// Checks the six reductions on the test sample held by `ctx`.
inline LemmaReport verify_reductions(const OracleContext& ctx, double threshold = 0.5) {
    if (ctx.size() == 0) throw DataError("verify_reductions: empty test sample");
    const auto test = whole(ctx.scores);
    const auto tp = partition(test, threshold);
    if (tp.pos.empty()) throw DegenerateError("verify_reductions: no predicted positives in the test sample");
    if (tp.neg.empty()) throw DegenerateError("verify_reductions: no predicted negatives in the test sample");

    // Unlabelled stand-in for the validation data; the oracles never read it.
    const ScoredSet val(ctx.scores);

    std::size_t pos = 0, correct = 0;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        pos += ctx.hidden_labels[i] == 1;
        correct += crisp(ctx.scores[i], threshold) == ctx.hidden_labels[i];
    }
    const double n = static_cast<double>(ctx.size());
    const double rho = static_cast<double>(pos) / n;
    const double alpha = static_cast<double>(correct) / n;

    LemmaReport rep;
    rep.n = ctx.size();
    rep.prevalence = rho;
    rep.accuracy = alpha;
    auto add = [&rep](std::string name, std::string statement, double residual) {
        rep.entries.push_back({std::move(name), std::move(statement), residual, residual < kLemmaTolerance});
    };

    const auto cal_star = oracle_calibrator(ctx);
    const auto quant_star = oracle_quantifier(ctx);
    const auto acc_star = oracle_accuracy(ctx);

    add("L1_cal_to_quant", "mean of perfectly calibrated posteriors equals the prevalence",
        std::abs(cal_to_quant(cal_star, val, test).p - rho));

    add("L2_cal_to_acc", "per-partition perfect calibration yields the exact accuracy",
        std::abs(cal_to_acc(cal_star, val, test, threshold).acc - alpha));

    const auto from_quant = grouped_calibrator(quant_star);
    add("L3_quant_to_cal", "group prevalences of equal raw scores are perfectly calibrated",
        calibration_residual(ctx.hidden_labels, from_quant(val, test)));

    add("L4_quant_to_acc", "perfect quantifier -> perfect calibrator -> exact accuracy",
        std::abs(cal_to_acc(from_quant, val, test, threshold).acc - alpha));

    add("L5_acc_to_quant", "per-partition perfect accuracies yield the exact prevalence",
        std::abs(acc_to_quant(acc_star, val, test, threshold).p - rho));

    const auto from_acc = grouped_calibrator(quantifier_from_accuracy(acc_star, threshold));
    add("L6_acc_to_cal", "perfect accuracy predictor -> perfect quantifier -> perfectly calibrated scores",
        calibration_residual(ctx.hidden_labels, from_acc(val, test)));

    return rep;
}

inline LemmaReport verify_reductions(const ProbModel& model, const LabeledSet& test, double threshold = 0.5) {
    return verify_reductions(OracleContext::from_model(model, test), threshold);
}

}  // namespace shiftkit
