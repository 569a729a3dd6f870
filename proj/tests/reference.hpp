#pragma once

// Brute-force reference implementations used as oracles by the tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "shiftkit/shiftkit.hpp"

namespace reference {

// Counts per equal-width bin, value 1.0 in the top bin.
inline std::vector<double> count_histogram(const std::vector<double>& v, std::size_t b) {
    std::vector<double> h(b, 0.0);
    for (double x : v) h[std::min<std::size_t>(b - 1, static_cast<std::size_t>(x * b))] += 1.0;
    for (auto& c : h) c /= static_cast<double>(v.size());
    return h;
}

inline double hellinger(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::sqrt(a[i] * b[i]);
    return std::sqrt(std::max(0.0, 1 - s));
}

// Exhaustive search over the 101 grid points, first minimum wins.
inline double hdy_argmin(const shiftkit::ScoredSet& val, const std::vector<double>& test, std::size_t b) {
    const auto hp = count_histogram(val.posteriors_of(1), b);
    const auto hn = count_histogram(val.posteriors_of(0), b);
    const auto ht = count_histogram(test, b);
    double best = 2, best_p = -1;
    for (int k = 0; k <= 100; ++k) {
        const double p = k / 100.0;
        std::vector<double> m(b);
        for (std::size_t i = 0; i < b; ++i) m[i] = p * hp[i] + (1 - p) * hn[i];
        const double d = hellinger(m, ht);
        if (d < best) {
            best = d;
            best_p = p;
        }
    }
    return best_p;
}

inline double kde(double y, const std::vector<double>& s, double h) {
    double acc = 0;
    for (double c : s) acc += std::exp(-0.5 * std::pow((y - c) / h, 2)) / (h * std::sqrt(2 * M_PI));
    return acc / static_cast<double>(s.size());
}

// Mixture log-likelihood maximised over the 0.001 grid.
inline double kdey_grid(const shiftkit::ScoredSet& val, const std::vector<double>& test, double h) {
    const auto pos = val.posteriors_of(1), neg = val.posteriors_of(0);
    std::vector<double> fp, fn;
    for (double y : test) {
        fp.push_back(kde(y, pos, h));
        fn.push_back(kde(y, neg, h));
    }
    double best = -1e300, best_p = 0;
    for (int k = 0; k <= 1000; ++k) {
        const double p = k / 1000.0;
        double ll = 0;
        for (std::size_t i = 0; i < test.size(); ++i) ll += std::log(p * fp[i] + (1 - p) * fn[i] + 1e-12);
        if (ll > best) {
            best = ll;
            best_p = p;
        }
    }
    return best_p;
}

// Central differences of the logistic loss, h = 1e-5.
inline std::vector<double> numeric_gradient(const std::vector<double>& params, const shiftkit::LabeledSet& data,
                                            double l2) {
    const double h = 1e-5;
    std::vector<double> g(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) {
        auto up = params, down = params;
        up[j] += h;
        down[j] -= h;
        g[j] = (shiftkit::logistic_loss(up, data, l2) - shiftkit::logistic_loss(down, data, l2)) / (2 * h);
    }
    return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Per-bin double loop.
inline double ece(const std::vector<double>& p, const std::vector<shiftkit::Label>& y, std::size_t b) {
    double total = 0;
    for (std::size_t k = 0; k < b; ++k) {
        double conf = 0, pos = 0, cnt = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            std::size_t bin = static_cast<std::size_t>(std::floor(p[i] * b));
            if (bin == b) bin = b - 1;
            if (bin != k) continue;
            conf += p[i];
            pos += y[i];
            cnt += 1;
        }
        if (cnt > 0) total += cnt / p.size() * std::pow(conf / cnt - pos / cnt, 2);
    }
    return total;
}

}  // namespace reference
