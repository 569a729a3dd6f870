#pragma once

// Post-hoc calibrators: Platt scaling, PacCal (PACC as an affine calibrator),
// DMCal (HDy mixture proportions per bin) and EMQ posteriors.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "shiftkit/core.hpp"
#include "shiftkit/error.hpp"
#include "shiftkit/models.hpp"
#include "shiftkit/quantify.hpp"

namespace shiftkit {

struct IdentityForm {};

struct ConstantForm {
    double value = 0.5;
};

/// sigma(a * y + b)
struct SigmoidForm {
    double a = 1.0;
    double b = 0.0;
    std::size_t iterations = 0;
};

/// y * beta + gamma, optionally passed through a sigmoid.
struct AffineForm {
    double beta = 1.0;
    double gamma = 0.0;
    bool sigmoid = false;
};

/// Prior re-weighting learnt by EMQ.
struct EmqForm {
    double train_prior = 0.5;
    double test_prior = 0.5;
};

class Calibrator {
public:
    using Form = std::variant<IdentityForm, ConstantForm, SigmoidForm, AffineForm, CalibrationMap, EmqForm>;

    Calibrator() : form_(IdentityForm{}), method_("identity") {}
    Calibrator(Form form, std::string method) : form_(std::move(form)), method_(std::move(method)) {}

    const Form& form() const noexcept { return form_; }
    const std::string& method() const noexcept { return method_; }

    double operator()(double y) const { return apply(y); }

    double apply(double y) const {
        const double v = std::visit(
            [y](const auto& f) -> double {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, IdentityForm>) {
                    return y;
                } else if constexpr (std::is_same_v<F, ConstantForm>) {
                    return f.value;
                } else if constexpr (std::is_same_v<F, SigmoidForm>) {
                    return sigmoid(f.a * y + f.b);
                } else if constexpr (std::is_same_v<F, AffineForm>) {
                    const double z = y * f.beta + f.gamma;
                    return f.sigmoid ? sigmoid(z) : z;
                } else if constexpr (std::is_same_v<F, CalibrationMap>) {
                    return f.interpolate(y);
                } else {
                    const double c = std::clamp(y, kEmqClamp, 1.0 - kEmqClamp);
                    return reweight_posterior(c, f.train_prior, f.test_prior);
                }
            },
            form_);
        return clip01(v);
    }

    std::vector<double> apply(std::span<const double> ys) const {
        std::vector<double> out(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i) out[i] = apply(ys[i]);
        return out;
    }

private:
    Form form_;
    std::string method_;
};

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Calibrator& c) {
    nlohmann::json j;
    j["method"] = c.method();
    std::visit(
        [&j](const auto& f) {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, IdentityForm>) {
                j["form"] = "identity";
            } else if constexpr (std::is_same_v<F, ConstantForm>) {
                j["form"] = "constant";
                j["value"] = f.value;
            } else if constexpr (std::is_same_v<F, SigmoidForm>) {
                j["form"] = "sigmoid";
                j["a"] = f.a;
                j["b"] = f.b;
            } else if constexpr (std::is_same_v<F, AffineForm>) {
                j["form"] = "affine";
                j["beta"] = f.beta;
                j["gamma"] = f.gamma;
                j["sigmoid"] = f.sigmoid;
            } else if constexpr (std::is_same_v<F, CalibrationMap>) {
                j["form"] = "map";
                auto& knots = j["knots"] = nlohmann::json::array();
                for (const auto& k : f.knots()) knots.push_back({k.input, k.output});
            } else {
                j["form"] = "emq";
                j["train_prior"] = f.train_prior;
                j["test_prior"] = f.test_prior;
            }
        },
        c.form());
    return j;
}

inline Calibrator calibrator_from_json(const nlohmann::json& j) {
    try {
        const std::string form = j.at("form").get<std::string>();
        const std::string method = j.value("method", form);
        if (form == "identity") return {IdentityForm{}, method};
        if (form == "constant") return {ConstantForm{j.at("value").get<double>()}, method};
        if (form == "sigmoid") return {SigmoidForm{j.at("a").get<double>(), j.at("b").get<double>(), 0}, method};
        if (form == "affine")
            return {AffineForm{j.at("beta").get<double>(), j.at("gamma").get<double>(), j.at("sigmoid").get<bool>()},
                    method};
        if (form == "map") {
            std::vector<CalibrationMap::Knot> knots;
            for (const auto& k : j.at("knots")) knots.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
            return {CalibrationMap(std::move(knots)), method};
        }
        if (form == "emq") return {EmqForm{j.at("train_prior").get<double>(), j.at("test_prior").get<double>()}, method};
        throw DataError("calibrator JSON: unknown form '" + form + "'");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("calibrator JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Platt scaling
// ---------------------------------------------------------------------------

/// Fits sigma(a*y + b) to validation labels by gradient descent on the mean
/// log-loss, starting from a = 1, b = 0.
inline Calibrator platt_fit(const ScoredSet& val, double grad_tol = 1e-8, std::size_t max_iter = 5000) {
    if (val.empty() || !val.has_both_classes()) throw DegenerateError("platt_fit: validation set must contain both classes");
    const auto& y = val.posteriors();
    const auto& t = val.labels();
    const double n = static_cast<double>(val.size());

    // Step 1/L with L the exact Lipschitz constant bound 0.25 * lambda_max(E[[y,1][y,1]^T]).
    double syy = 0.0, sy = 0.0;
    for (double v : y) {
        syy += v * v / n;
        sy += v / n;
    }
    const double tr = syy + 1.0, det = syy - sy * sy;
    const double lmax = 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
    const double step = 1.0 / (0.25 * lmax);

    double a = 1.0, b = 0.0;
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        double ga = 0.0, gb = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = sigmoid(a * y[i] + b) - t[i];
            ga += r * y[i];
            gb += r;
        }
        ga /= n;
        gb /= n;
        if (std::sqrt(ga * ga + gb * gb) < grad_tol) break;
        a -= step * ga;
        b -= step * gb;
    }
    return {SigmoidForm{a, b, it}, "Platt"};
}

// ---------------------------------------------------------------------------
// PacCal
// ---------------------------------------------------------------------------

/// Affine calibrator beta = 1/(tpr - fpr), gamma = -fpr/(tpr - fpr) with soft
/// rates. If any test posterior maps outside [0,1], every output is passed
/// through a sigmoid.
inline Calibrator paccal_fit(const ScoredSet& val, std::span<const double> test_posteriors) {
    const auto rates = estimate_rates(val, true);
    const double denom = rates.tpr - rates.fpr;
    if (std::abs(denom) < 1e-8) throw DegenerateError("paccal_fit: unadjustable, tpr and fpr coincide");
    AffineForm f{1.0 / denom, -rates.fpr / denom, false};
    for (double y : test_posteriors) {
        const double z = y * f.beta + f.gamma;
        if (z < 0.0 || z > 1.0) {
            f.sigmoid = true;
            break;
        }
    }
    return {f, "PacCal"};
}

inline Calibrator paccal_fit(const ProbModel& model, const LabeledSet& val, std::span<const double> test_posteriors) {
    return paccal_fit(model.score(val), test_posteriors);
}

// ---------------------------------------------------------------------------
// DMCal
// ---------------------------------------------------------------------------

/// Per-bin positive share of the mixture p*H+ + (1-p)*H-; empty bins get their center.
inline std::vector<double> mixture_bin_values(const Histogram& pos, const Histogram& neg, double p) {
    detail::require(pos.bins() == neg.bins(), "mixture_bin_values: bin count mismatch");
    const std::size_t b = pos.bins();
    std::vector<double> v(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double num = p * pos[i];
        const double den = num + (1.0 - p) * neg[i];
        v[i] = den > 0.0 ? num / den : bin_center(i, b);
    }
    return v;
}

inline Calibrator dmcal_fit(const ScoredSet& val, std::span<const double> test_posteriors, std::size_t bins = 8) {
    const auto h = class_histograms(val, bins);
    const double p = hdy_from_histograms(h.pos, h.neg, build_histogram(test_posteriors, bins)).p;
    const auto raw = mixture_bin_values(h.pos, h.neg, p);
    return {CalibrationMap::from_bin_values(raw), "DMCal"};
}

// ---------------------------------------------------------------------------
// EMQ as a calibrator
// ---------------------------------------------------------------------------

inline std::vector<double> emq_calibrate(std::span<const double> test_posteriors, double train_prior) {
    return emq(test_posteriors, train_prior).posteriors;
}

/// Reusable form of the EMQ posterior update: applying it to the test
/// posteriors reproduces emq_calibrate exactly.
inline Calibrator emq_fit(std::span<const double> test_posteriors, double train_prior) {
    const auto r = emq(test_posteriors, train_prior);
    return {EmqForm{train_prior, r.posterior_prior}, "EMQ"};
}

}  // namespace shiftkit
