#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shiftkit/core.hpp"
#include "shiftkit/error.hpp"

namespace shiftkit {

enum class ModelKind { LogisticRegression, GaussianNaiveBayes, KNearestNeighbor };

inline std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::LogisticRegression: return "logistic-regression";
        case ModelKind::GaussianNaiveBayes: return "gaussian-naive-bayes";
        case ModelKind::KNearestNeighbor: return "k-nearest-neighbor";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "logistic-regression" || s == "lr" || s == "logistic") return ModelKind::LogisticRegression;
    if (s == "gaussian-naive-bayes" || s == "nb" || s == "naive-bayes") return ModelKind::GaussianNaiveBayes;
    if (s == "k-nearest-neighbor" || s == "knn") return ModelKind::KNearestNeighbor;
    throw DataError("unknown classifier kind '" + std::string(s) +
                    "' (expected logistic-regression, gaussian-naive-bayes or k-nearest-neighbor)");
}

struct Hyperparams {
    std::size_t k = 10;             // kNN neighbourhood size
    std::size_t max_iter = 10000;   // logistic regression
    double grad_tol = 1e-6;         // logistic regression stopping rule on ||grad||
    double l2 = 0.0;                // logistic regression ridge penalty (weights only)
    double var_floor = 1e-9;        // naive Bayes
};

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

/// Parameters laid out as [w_0 .. w_{d-1}, bias].
struct LogisticModel {
    std::vector<double> params;
    std::size_t iterations = 0;

    double score(std::span<const double> x) const {
        double z = params.back();
        for (std::size_t j = 0; j < x.size(); ++j) z += params[j] * x[j];
        return z;
    }
    double posterior(std::span<const double> x) const { return sigmoid(score(x)); }
};

/// Mean log-loss plus l2/2 * ||w||^2.
inline double logistic_loss(std::span<const double> params, const LabeledSet& data, double l2 = 0.0) {
    const std::size_t d = data.dim();
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        double z = params[d];
        for (std::size_t j = 0; j < d; ++j) z += params[j] * x[j];
        // -[y log s(z) + (1-y) log(1 - s(z))] = softplus(z) - y z
        total += softplus(z) - (data.label(i) == 1 ? z : 0.0);
    }
    double reg = 0.0;
    for (std::size_t j = 0; j < d; ++j) reg += params[j] * params[j];
    return total / static_cast<double>(data.size()) + 0.5 * l2 * reg;
}

inline std::vector<double> logistic_gradient(std::span<const double> params, const LabeledSet& data, double l2 = 0.0) {
    const std::size_t d = data.dim();
    std::vector<double> g(d + 1, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        double z = params[d];
        for (std::size_t j = 0; j < d; ++j) z += params[j] * x[j];
        const double r = sigmoid(z) - data.label(i);
        for (std::size_t j = 0; j < d; ++j) g[j] += r * x[j];
        g[d] += r;
    }
    const double n = static_cast<double>(data.size());
    for (double& v : g) v /= n;
    for (std::size_t j = 0; j < d; ++j) g[j] += l2 * params[j];
    return g;
}

/// Full-batch gradient descent with Armijo backtracking.
inline LogisticModel fit_logistic(const LabeledSet& train, const Hyperparams& hp) {
    const std::size_t d = train.dim();
    std::vector<double> w(d + 1, 0.0);

    double trace = 1.0;
    for (double v : train.features()) trace += v * v / static_cast<double>(train.size());
    double step = 4.0 / trace;

    double loss = logistic_loss(w, train, hp.l2);
    std::size_t it = 0;
    std::vector<double> trial(d + 1);
    for (; it < hp.max_iter; ++it) {
        const auto g = logistic_gradient(w, train, hp.l2);
        double gnorm2 = 0.0;
        for (double v : g) gnorm2 += v * v;
        if (std::sqrt(gnorm2) < hp.grad_tol) break;
        for (;;) {
            for (std::size_t j = 0; j <= d; ++j) trial[j] = w[j] - step * g[j];
            const double trial_loss = logistic_loss(trial, train, hp.l2);
            if (trial_loss <= loss - 0.5 * step * gnorm2 || step < 1e-12) {
                w.swap(trial);
                loss = trial_loss;
                break;
            }
            step *= 0.5;
        }
        step = std::min(step * 1.5, 1e6);
    }
    return LogisticModel{std::move(w), it};
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

struct GaussianNBModel {
    std::array<std::vector<double>, 2> means;
    std::array<std::vector<double>, 2> variances;
    std::array<double, 2> log_priors{};

    double posterior(std::span<const double> x) const {
        std::array<double, 2> lp{};
        for (int c = 0; c < 2; ++c) {
            double s = log_priors[c];
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double v = variances[c][j];
                const double dx = x[j] - means[c][j];
                s += -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * dx * dx / v;
            }
            lp[c] = s;
        }
        // P(1|x) = 1 / (1 + exp(lp0 - lp1))
        return sigmoid(lp[1] - lp[0]);
    }
};

inline GaussianNBModel fit_gaussian_nb(const LabeledSet& train, const Hyperparams& hp) {
    const std::size_t d = train.dim();
    GaussianNBModel m;
    for (int c = 0; c < 2; ++c) {
        const auto rows = train.rows_with_label(c);
        const double nc = static_cast<double>(rows.size());
        m.means[c].assign(d, 0.0);
        m.variances[c].assign(d, 0.0);
        for (std::size_t i : rows) {
            auto x = train.row(i);
            for (std::size_t j = 0; j < d; ++j) m.means[c][j] += x[j] / nc;
        }
        for (std::size_t i : rows) {
            auto x = train.row(i);
            for (std::size_t j = 0; j < d; ++j) {
                const double dx = x[j] - m.means[c][j];
                m.variances[c][j] += dx * dx / nc;
            }
        }
        for (double& v : m.variances[c]) v = std::max(v, hp.var_floor);
        m.log_priors[c] = std::log(nc / static_cast<double>(train.size()));
    }
    return m;
}

// ---------------------------------------------------------------------------
// k nearest neighbours (uniform weights)
// ---------------------------------------------------------------------------

struct KnnModel {
    LabeledSet train;
    std::size_t k = 10;

    double posterior(std::span<const double> x) const {
        const std::size_t n = train.size();
        const std::size_t kk = std::min(k, n);
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = train.row(i);
            double s = 0.0;
            for (std::size_t j = 0; j < r.size(); ++j) {
                const double dx = r[j] - x[j];
                s += dx * dx;
            }
            dist[i] = {s, i};  // pair ordering breaks distance ties by lower row index
        }
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk - 1), dist.end());
        std::size_t pos = 0;
        for (std::size_t i = 0; i < kk; ++i) pos += train.label(dist[i].second) == 1;
        return static_cast<double>(pos) / static_cast<double>(kk);
    }
};

// ---------------------------------------------------------------------------
// ProbModel
// ---------------------------------------------------------------------------

/// A fitted binary probabilistic classifier.
class ProbModel {
public:
    using Impl = std::variant<LogisticModel, GaussianNBModel, KnnModel>;

    ProbModel(ModelKind kind, std::size_t dim, Impl impl) : kind_(kind), dim_(dim), impl_(std::move(impl)) {}

    ModelKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    const Impl& impl() const noexcept { return impl_; }

    double predict_posterior(std::span<const double> x) const {
        if (x.size() != dim_)
            throw DataError("predict_posterior: expected " + std::to_string(dim_) + " features, got " +
                            std::to_string(x.size()));
        const double p = std::visit([&](const auto& m) { return m.posterior(x); }, impl_);
        return clip01(p);
    }

    std::vector<double> predict(const LabeledSet& data) const {
        std::vector<double> out(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out[i] = predict_posterior(data.row(i));
        return out;
    }

    /// Posteriors together with the true labels of `data`.
    ScoredSet score(const LabeledSet& data) const { return ScoredSet(predict(data), data.labels()); }

private:
    ModelKind kind_;
    std::size_t dim_;
    Impl impl_;
};

inline ProbModel fit(ModelKind kind, const LabeledSet& train, const Hyperparams& hp = {}) {
    if (train.empty()) throw DataError("fit: empty training set");
    const auto pos = train.positives();
    if (kind != ModelKind::KNearestNeighbor && (pos == 0 || pos == train.size()))
        throw DegenerateError("fit: training set contains a single class");
    switch (kind) {
        case ModelKind::LogisticRegression:
            return ProbModel(kind, train.dim(), fit_logistic(train, hp));
        case ModelKind::GaussianNaiveBayes:
            return ProbModel(kind, train.dim(), fit_gaussian_nb(train, hp));
        case ModelKind::KNearestNeighbor:
            detail::require(hp.k >= 1, "fit: k must be >= 1");
            return ProbModel(kind, train.dim(), KnnModel{train, hp.k});
    }
    throw DataError("fit: unknown model kind");
}

}  // namespace shiftkit
