#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "shiftkit/error.hpp"
#include "shiftkit/random.hpp"

namespace shiftkit {

using Label = int;

// ---------------------------------------------------------------------------
// LabeledSet
// ---------------------------------------------------------------------------

/// Dense feature rows with binary labels. Rows are stored row-major.
class LabeledSet {
public:
    LabeledSet() = default;

    LabeledSet(std::vector<double> features, std::size_t dim, std::vector<Label> labels)
        : features_(std::move(features)), labels_(std::move(labels)), dim_(dim) {
        detail::require(dim_ >= 1, "LabeledSet: feature dimension must be >= 1");
        detail::require(!labels_.empty(), "LabeledSet: at least one row is required");
        detail::require(features_.size() == labels_.size() * dim_,
                        "LabeledSet: feature matrix does not match label count");
        for (Label y : labels_) detail::require(y == 0 || y == 1, "LabeledSet: labels must be 0 or 1");
    }

    static LabeledSet from_rows(const std::vector<std::vector<double>>& rows, std::vector<Label> labels) {
        detail::require(!rows.empty(), "LabeledSet: at least one row is required");
        const std::size_t d = rows.front().size();
        std::vector<double> flat;
        flat.reserve(rows.size() * d);
        for (const auto& r : rows) {
            detail::require(r.size() == d, "LabeledSet: ragged feature rows");
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return LabeledSet(std::move(flat), d, std::move(labels));
    }

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return labels_.empty(); }

    std::span<const double> row(std::size_t i) const { return {features_.data() + i * dim_, dim_}; }
    Label label(std::size_t i) const { return labels_[i]; }
    const std::vector<Label>& labels() const noexcept { return labels_; }
    const std::vector<double>& features() const noexcept { return features_; }

    std::size_t positives() const { return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), 1)); }
    double prevalence() const { return static_cast<double>(positives()) / static_cast<double>(size()); }

    LabeledSet subset(std::span<const std::size_t> rows) const {
        std::vector<double> f;
        std::vector<Label> y;
        f.reserve(rows.size() * dim_);
        y.reserve(rows.size());
        for (std::size_t i : rows) {
            detail::require(i < size(), "LabeledSet::subset: row index out of range");
            auto r = row(i);
            f.insert(f.end(), r.begin(), r.end());
            y.push_back(labels_[i]);
        }
        return LabeledSet(std::move(f), dim_, std::move(y));
    }

    /// Row indices carrying the given label.
    std::vector<std::size_t> rows_with_label(Label c) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < size(); ++i)
            if (labels_[i] == c) out.push_back(i);
        return out;
    }

private:
    std::vector<double> features_;
    std::vector<Label> labels_;
    std::size_t dim_ = 0;
};

// ---------------------------------------------------------------------------
// ScoredSet
// ---------------------------------------------------------------------------

/// Posterior probabilities of the positive class, optionally with true labels.
class ScoredSet {
public:
    ScoredSet() = default;

    explicit ScoredSet(std::vector<double> posteriors, std::optional<std::vector<Label>> labels = std::nullopt)
        : posteriors_(std::move(posteriors)), labels_(std::move(labels)) {
        for (double p : posteriors_)
            detail::require(p >= 0.0 && p <= 1.0, "ScoredSet: posterior outside [0,1]");
        if (labels_) {
            detail::require(labels_->size() == posteriors_.size(), "ScoredSet: label count mismatch");
            for (Label y : *labels_) detail::require(y == 0 || y == 1, "ScoredSet: labels must be 0 or 1");
        }
    }

    std::size_t size() const noexcept { return posteriors_.size(); }
    bool empty() const noexcept { return posteriors_.empty(); }
    bool has_labels() const noexcept { return labels_.has_value(); }

    const std::vector<double>& posteriors() const noexcept { return posteriors_; }
    const std::vector<Label>& labels() const {
        if (!labels_) throw DataError("ScoredSet: labels required but absent");
        return *labels_;
    }

    ScoredSet subset(std::span<const std::size_t> rows) const {
        std::vector<double> p;
        p.reserve(rows.size());
        for (std::size_t i : rows) p.push_back(posteriors_.at(i));
        if (!labels_) return ScoredSet(std::move(p));
        std::vector<Label> y;
        y.reserve(rows.size());
        for (std::size_t i : rows) y.push_back((*labels_)[i]);
        return ScoredSet(std::move(p), std::move(y));
    }

    /// Posteriors of the rows carrying label c.
    std::vector<double> posteriors_of(Label c) const {
        const auto& y = labels();
        std::vector<double> out;
        for (std::size_t i = 0; i < size(); ++i)
            if (y[i] == c) out.push_back(posteriors_[i]);
        return out;
    }

    bool has_both_classes() const {
        const auto& y = labels();
        const auto pos = std::count(y.begin(), y.end(), 1);
        return pos > 0 && static_cast<std::size_t>(pos) < y.size();
    }

private:
    std::vector<double> posteriors_;
    std::optional<std::vector<Label>> labels_;
};

inline double mean(std::span<const double> v) {
    detail::require(!v.empty(), "mean of an empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

/// Crisp prediction: positive iff posterior strictly exceeds the threshold.
inline Label crisp(double posterior, double threshold = 0.5) { return posterior > threshold ? 1 : 0; }

/// Accuracy of thresholded posteriors against labels.
inline double crisp_accuracy(std::span<const double> posteriors, std::span<const Label> labels, double threshold = 0.5) {
    detail::require(posteriors.size() == labels.size() && !labels.empty(), "crisp_accuracy: size mismatch or empty");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += crisp(posteriors[i], threshold) == labels[i];
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------
// CSV ingestion: header row f0..f{d-1},label
// ---------------------------------------------------------------------------

inline LabeledSet parse_csv(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty file");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            header.push_back(cell);
        }
    }
    if (header.size() < 2 || header.back() != "label")
        throw DataError(source + ": header must be f0..f{d-1},label");
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j)
        if (header[j] != "f" + std::to_string(j))
            throw DataError(source + ": unexpected column '" + header[j] + "', expected f" + std::to_string(j));

    std::vector<double> feats;
    std::vector<Label> labels;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || !std::isfinite(v))
                throw DataError(source + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            if (col < d) {
                feats.push_back(v);
            } else if (col == d) {
                if (v != 0.0 && v != 1.0)
                    throw DataError(source + ":" + std::to_string(lineno) + ": label must be 0 or 1");
                labels.push_back(static_cast<Label>(v));
            }
            ++col;
        }
        if (col != d + 1)
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(d + 1) + " columns");
    }
    if (labels.empty()) throw DataError(source + ": no data rows");
    return LabeledSet(std::move(feats), d, std::move(labels));
}

inline LabeledSet read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    return parse_csv(in, path);
}

inline void write_csv(std::ostream& out, const LabeledSet& data) {
    for (std::size_t j = 0; j < data.dim(); ++j) out << 'f' << j << ',';
    out << "label\n";
    char buf[32];
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.row(i)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        out << data.label(i) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Stratified splitting
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train_fraction = 0.35;
    double val_fraction = 0.35;
    double test_fraction = 0.30;
    std::uint64_t seed = 0;

    void validate() const {
        detail::require(train_fraction > 0 && val_fraction > 0 && test_fraction > 0,
                        "SplitSpec: every fraction must be > 0");
        detail::require(std::abs(train_fraction + val_fraction + test_fraction - 1.0) <= 1e-9,
                        "SplitSpec: fractions must sum to 1");
    }
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

namespace detail {

/// Largest-remainder apportionment of `total` over `weights` (summing to 1).
inline std::array<std::size_t, 3> apportion(std::size_t total, const std::array<double, 3>& w) {
    std::array<std::size_t, 3> out{};
    std::array<double, 3> rem{};
    std::size_t used = 0;
    for (int s = 0; s < 3; ++s) {
        const double exact = w[s] * static_cast<double>(total);
        out[s] = static_cast<std::size_t>(std::floor(exact));
        rem[s] = exact - static_cast<double>(out[s]);
        used += out[s];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (int k = 0; used < total; ++k, ++used) ++out[order[k % 3]];
    return out;
}

}  // namespace detail

/// Index-level stratified split. Split sizes follow the fractions over the
/// whole pool; the per-class cell counts are floor/ceil of their exact share
/// (controlled rounding), so each split's class counts are within one row of
/// the pool proportions.
inline SplitIndices split_stratified_indices(std::span<const Label> labels, const SplitSpec& spec) {
    spec.validate();
    const std::array<double, 3> w{spec.train_fraction, spec.val_fraction, spec.test_fraction};

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    const auto totals = detail::apportion(labels.size(), w);

    // cell[c][s]: floor of exact share, then hand out the leftover units by
    // largest fractional part subject to both row and column residuals.
    std::array<std::array<std::size_t, 3>, 2> cell{};
    std::array<std::size_t, 2> row_left{};
    std::array<std::size_t, 3> col_left = totals;
    struct Frac {
        double f;
        int c, s;
    };
    std::vector<Frac> fracs;
    for (int c = 0; c < 2; ++c) {
        std::size_t used = 0;
        for (int s = 0; s < 3; ++s) {
            const double exact = w[s] * static_cast<double>(by_class[c].size());
            cell[c][s] = static_cast<std::size_t>(std::floor(exact));
            used += cell[c][s];
            col_left[s] -= std::min(col_left[s], cell[c][s]);
            fracs.push_back({exact - std::floor(exact), c, s});
        }
        row_left[c] = by_class[c].size() - used;
    }
    std::stable_sort(fracs.begin(), fracs.end(), [](const Frac& a, const Frac& b) { return a.f > b.f; });
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& fr : fracs) {
            if (row_left[fr.c] == 0) continue;
            if (pass == 0 && col_left[fr.s] == 0) continue;
            ++cell[fr.c][fr.s];
            --row_left[fr.c];
            if (col_left[fr.s] > 0) --col_left[fr.s];
        }
    }

    for (int c = 0; c < 2; ++c)
        for (int s = 0; s < 3; ++s)
            if (cell[c][s] == 0)
                throw DataError("split_stratified: cannot stratify class " + std::to_string(c) + " (" +
                                std::to_string(by_class[c].size()) + " rows)");

    SplitIndices out;
    std::array<std::vector<std::size_t>*, 3> dst{&out.train, &out.val, &out.test};
    for (int c = 0; c < 2; ++c) {
        auto rng = make_rng(spec.seed, static_cast<std::uint64_t>(c) + 1);
        auto& idx = by_class[c];
        shuffle(std::span<std::size_t>(idx), rng);
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            dst[s]->insert(dst[s]->end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                           idx.begin() + static_cast<std::ptrdiff_t>(pos + cell[c][s]));
            pos += cell[c][s];
        }
    }
    for (auto* d : dst) std::sort(d->begin(), d->end());
    return out;
}

inline std::tuple<LabeledSet, LabeledSet, LabeledSet> split_stratified(const LabeledSet& data, const SplitSpec& spec) {
    const auto idx = split_stratified_indices(data.labels(), spec);
    return {data.subset(idx.train), data.subset(idx.val), data.subset(idx.test)};
}

// ---------------------------------------------------------------------------
// Histograms over [0,1]
// ---------------------------------------------------------------------------

/// Bin of y among b equal-width bins on [0,1]; y = 1 falls in the last bin.
inline std::size_t bin_index(double y, std::size_t b) {
    const auto i = static_cast<std::size_t>(std::max(0.0, std::floor(y * static_cast<double>(b))));
    return std::min(i, b - 1);
}

inline double bin_center(std::size_t i, std::size_t b) {
    return (static_cast<double>(i) + 0.5) / static_cast<double>(b);
}

class Histogram {
public:
    Histogram(std::vector<double> densities) : densities_(std::move(densities)) {
        detail::require(densities_.size() >= 2, "Histogram: at least 2 bins");
    }

    std::size_t bins() const noexcept { return densities_.size(); }
    const std::vector<double>& densities() const noexcept { return densities_; }
    double operator[](std::size_t i) const { return densities_[i]; }

private:
    std::vector<double> densities_;
};

inline Histogram build_histogram(std::span<const double> posteriors, std::size_t b) {
    detail::require(b >= 2, "build_histogram: need at least 2 bins");
    detail::require(!posteriors.empty(), "build_histogram: empty input");
    std::vector<double> counts(b, 0.0);
    for (double y : posteriors) {
        detail::require(y >= 0.0 && y <= 1.0, "build_histogram: value outside [0,1]");
        counts[bin_index(y, b)] += 1.0;
    }
    const double n = static_cast<double>(posteriors.size());
    for (double& c : counts) c /= n;
    return Histogram(std::move(counts));
}

// ---------------------------------------------------------------------------
// Calibration-map post-processing
// ---------------------------------------------------------------------------

/// Running maximum: out[i] = max(out[i-1], in[i]).
inline std::vector<double> enforce_monotone(std::span<const double> values) {
    detail::require(!values.empty(), "enforce_monotone: empty input");
    std::vector<double> out(values.begin(), values.end());
    for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::max(out[i - 1], out[i]);
    return out;
}

/// Three-point moving average with the sequence padded by 0 on the left and 1 on the right.
inline std::vector<double> smooth_window1(std::span<const double> values) {
    detail::require(!values.empty(), "smooth_window1: empty input");
    const std::size_t b = values.size();
    std::vector<double> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double left = i == 0 ? 0.0 : values[i - 1];
        const double right = i + 1 == b ? 1.0 : values[i + 1];
        out[i] = (left + values[i] + right) / 3.0;
    }
    return out;
}

/// Monotone piecewise-linear map [0,1] -> [0,1] pinned at (0,0) and (1,1).
class CalibrationMap {
public:
    struct Knot {
        double input;
        double output;
    };

    explicit CalibrationMap(std::vector<Knot> knots) : knots_(std::move(knots)) {
        detail::require(knots_.size() >= 2, "CalibrationMap: at least two knots");
        detail::require(knots_.front().input == 0.0 && knots_.front().output == 0.0 && knots_.back().input == 1.0 &&
                            knots_.back().output == 1.0,
                        "CalibrationMap: endpoints must be (0,0) and (1,1)");
        for (std::size_t i = 1; i < knots_.size(); ++i) {
            detail::require(knots_[i].input > knots_[i - 1].input, "CalibrationMap: inputs must strictly increase");
            detail::require(knots_[i].output >= knots_[i - 1].output, "CalibrationMap: outputs must not decrease");
        }
    }

    /// Map through knots [(0,0), (c_1,v_1), ..., (c_b,v_b), (1,1)].
    static CalibrationMap from_bins(std::span<const double> centers, std::span<const double> values) {
        detail::require(centers.size() == values.size(), "CalibrationMap: centers/values mismatch");
        std::vector<Knot> k;
        k.reserve(values.size() + 2);
        k.push_back({0.0, 0.0});
        for (std::size_t i = 0; i < values.size(); ++i) k.push_back({centers[i], values[i]});
        k.push_back({1.0, 1.0});
        return CalibrationMap(std::move(k));
    }

    /// Map over equal-width bin centers, after monotone enforcement and smoothing.
    static CalibrationMap from_bin_values(std::span<const double> raw) {
        auto smoothed = smooth_window1(enforce_monotone(raw));
        // exact arithmetic keeps this monotone in [0,1]; absorb rounding
        for (std::size_t i = 0; i < smoothed.size(); ++i) {
            smoothed[i] = clip01(smoothed[i]);
            if (i > 0) smoothed[i] = std::max(smoothed[i], smoothed[i - 1]);
        }
        std::vector<double> centers(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) centers[i] = bin_center(i, raw.size());
        return from_bins(centers, smoothed);
    }

    const std::vector<Knot>& knots() const noexcept { return knots_; }

    double operator()(double y) const { return interpolate(y); }

    double interpolate(double y) const {
        y = clip01(y);
        auto it = std::upper_bound(knots_.begin(), knots_.end(), y,
                                   [](double v, const Knot& k) { return v < k.input; });
        if (it == knots_.end()) return knots_.back().output;
        const Knot& hi = *it;
        const Knot& lo = *(it - 1);
        const double t = (y - lo.input) / (hi.input - lo.input);
        return lo.output + t * (hi.output - lo.output);
    }

private:
    std::vector<Knot> knots_;
};

inline double interpolate(const CalibrationMap& map, double y_raw) { return map.interpolate(y_raw); }

}  // namespace shiftkit
