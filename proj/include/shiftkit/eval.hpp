#pragma once

// Shift-simulation protocols and evaluation metrics.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shiftkit/core.hpp"
#include "shiftkit/error.hpp"
#include "shiftkit/random.hpp"

namespace shiftkit {

enum class ProtocolKind { APP, CSMixture, UniformRandom };

struct SampleProtocol {
    ProtocolKind kind = ProtocolKind::APP;
    std::size_t n_samples = 100;
    std::size_t size = 250;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(n_samples >= 1, "SampleProtocol: n_samples must be >= 1");
        detail::require(size >= 1, "SampleProtocol: size must be >= 1");
    }
};

/// One generated sample, as row indices into its pool(s).
struct SampleDraw {
    std::vector<std::size_t> rows;    // APP / uniform: rows of the pool; CS: rows of pool A
    std::vector<std::size_t> rows_b;  // CS only: rows of pool B
    double target = 0.0;              // APP: drawn prevalence; CS: fraction from B; uniform: 0
    bool with_replacement = false;
};

// ---------------------------------------------------------------------------
// Artificial prevalence protocol
// ---------------------------------------------------------------------------

/// Positives = ceil(p * size), the rest negatives, each drawn uniformly from its class pool.
inline SampleDraw app_draw(std::span<const std::size_t> positives, std::span<const std::size_t> negatives, double p,
                           std::size_t size, Rng& rng) {
    const auto npos = std::min(size, static_cast<std::size_t>(std::ceil(p * static_cast<double>(size))));
    const std::size_t nneg = size - npos;
    bool rep_pos = false, rep_neg = false;
    SampleDraw d;
    d.rows = draw(positives, npos, rng, &rep_pos);
    auto neg = draw(negatives, nneg, rng, &rep_neg);
    d.rows.insert(d.rows.end(), neg.begin(), neg.end());
    d.target = p;
    d.with_replacement = rep_pos || rep_neg;
    return d;
}

inline std::vector<SampleDraw> app_draws(std::span<const Label> labels, const SampleProtocol& proto) {
    proto.validate();
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw DegenerateError(std::string("app_samples: pool has no instances of class ") + (pos.empty() ? "1" : "0"));
    auto rng = make_rng(proto.seed, 0xA77);
    std::vector<SampleDraw> out;
    out.reserve(proto.n_samples);
    for (std::size_t i = 0; i < proto.n_samples; ++i) {
        const double p = uniform01(rng);
        out.push_back(app_draw(pos, neg, p, proto.size, rng));
    }
    return out;
}

inline std::vector<LabeledSet> app_samples(const LabeledSet& pool, const SampleProtocol& proto) {
    std::vector<LabeledSet> out;
    for (const auto& d : app_draws(pool.labels(), proto)) out.push_back(pool.subset(d.rows));
    return out;
}

// ---------------------------------------------------------------------------
// Covariate-shift mixtures
// ---------------------------------------------------------------------------

/// ceil(size * (1 - (i-1)/(n-1))) for the 1-based sample i, in exact integer arithmetic.
inline std::size_t cs_source_count(std::size_t i, std::size_t n_samples, std::size_t size) {
    detail::require(i >= 1 && i <= n_samples, "cs_source_count: sample index out of range");
    if (n_samples == 1) return size;
    const std::size_t den = n_samples - 1;
    return (size * (n_samples - i) + den - 1) / den;
}

inline std::vector<SampleDraw> cs_mixture_draws(std::size_t pool_a, std::size_t pool_b, const SampleProtocol& proto) {
    proto.validate();
    if (pool_a == 0 || pool_b == 0) throw DataError("cs_mixture_samples: empty pool");
    std::vector<std::size_t> a(pool_a), b(pool_b);
    for (std::size_t i = 0; i < pool_a; ++i) a[i] = i;
    for (std::size_t i = 0; i < pool_b; ++i) b[i] = i;
    auto rng = make_rng(proto.seed, 0xC5);
    std::vector<SampleDraw> out;
    out.reserve(proto.n_samples);
    for (std::size_t i = 1; i <= proto.n_samples; ++i) {
        const std::size_t na = cs_source_count(i, proto.n_samples, proto.size);
        bool ra = false, rb = false;
        SampleDraw d;
        d.rows = draw(a, na, rng, &ra);
        d.rows_b = draw(b, proto.size - na, rng, &rb);
        d.target = static_cast<double>(proto.size - na) / static_cast<double>(proto.size);
        d.with_replacement = ra || rb;
        out.push_back(std::move(d));
    }
    return out;
}

inline LabeledSet concat(const LabeledSet& a, const LabeledSet& b) {
    detail::require(a.dim() == b.dim(), "concat: feature dimension mismatch");
    std::vector<double> f = a.features();
    f.insert(f.end(), b.features().begin(), b.features().end());
    std::vector<Label> y = a.labels();
    y.insert(y.end(), b.labels().begin(), b.labels().end());
    return LabeledSet(std::move(f), a.dim(), std::move(y));
}

inline std::vector<LabeledSet> cs_mixture_samples(const LabeledSet& a, const LabeledSet& b, const SampleProtocol& proto) {
    std::vector<LabeledSet> out;
    for (const auto& d : cs_mixture_draws(a.size(), b.size(), proto)) {
        if (d.rows.empty()) {
            out.push_back(b.subset(d.rows_b));
        } else if (d.rows_b.empty()) {
            out.push_back(a.subset(d.rows));
        } else {
            out.push_back(concat(a.subset(d.rows), b.subset(d.rows_b)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uniform random subsamples
// ---------------------------------------------------------------------------

inline std::vector<SampleDraw> uniform_draws(std::size_t pool_size, const SampleProtocol& proto) {
    proto.validate();
    if (pool_size == 0) throw DataError("uniform_samples: empty pool");
    std::vector<std::size_t> all(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) all[i] = i;
    auto rng = make_rng(proto.seed, 0x0F);
    std::vector<SampleDraw> out;
    for (std::size_t i = 0; i < proto.n_samples; ++i) {
        SampleDraw d;
        d.rows = draw(all, proto.size, rng, &d.with_replacement);
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// L2 expected calibration error over b equal-width bins (raw scale, not x100).
inline double ece_l2(std::span<const double> posteriors, std::span<const Label> labels, std::size_t bins = 15) {
    if (posteriors.size() != labels.size()) throw DataError("ece_l2: posteriors/labels length mismatch");
    detail::require(!posteriors.empty(), "ece_l2: empty input");
    detail::require(bins >= 1, "ece_l2: need at least one bin");
    std::vector<double> conf(bins, 0.0), pos(bins, 0.0), count(bins, 0.0);
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
        const std::size_t k = bins == 1 ? 0 : bin_index(posteriors[i], bins);
        conf[k] += posteriors[i];
        pos[k] += labels[i];
        count[k] += 1.0;
    }
    const double n = static_cast<double>(posteriors.size());
    double ece = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
        if (count[k] == 0.0) continue;
        const double gap = pos[k] / count[k] - conf[k] / count[k];
        ece += count[k] / n * gap * gap;
    }
    return ece;
}

inline double brier(std::span<const double> posteriors, std::span<const Label> labels) {
    if (posteriors.size() != labels.size()) throw DataError("brier: posteriors/labels length mismatch");
    detail::require(!posteriors.empty(), "brier: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
        const double r = labels[i] - posteriors[i];
        s += r * r;
    }
    return s / static_cast<double>(posteriors.size());
}

inline double ae(double truth, double estimate) { return std::abs(truth - estimate); }

enum class ShiftKind { LS, CS };

inline ShiftKind parse_shift_kind(std::string_view s) {
    if (s == "LS" || s == "ls") return ShiftKind::LS;
    if (s == "CS" || s == "cs") return ShiftKind::CS;
    throw DataError("unknown shift kind '" + std::string(s) + "' (expected LS or CS)");
}

/// LS: |sample prevalence - training prevalence|. CS: the fraction drawn from the target pool.
inline double shift_intensity(ShiftKind kind, double train_prev, double sample_value) {
    return kind == ShiftKind::LS ? std::abs(sample_value - train_prev) : sample_value;
}

}  // namespace shiftkit
