#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "shiftkit/shiftkit.hpp"

namespace fixtures {

// Test-side randomness, deliberately independent of the library's Rng helpers.
inline std::vector<double> uniform_posteriors(std::size_t n, std::uint32_t seed) {
    std::mt19937 g(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(g);
    return v;
}

inline std::vector<shiftkit::Label> bernoulli_labels(std::size_t n, double p, std::uint32_t seed) {
    std::mt19937 g(seed);
    std::bernoulli_distribution b(p);
    std::vector<shiftkit::Label> v(n);
    for (auto& y : v) y = b(g) ? 1 : 0;
    return v;
}

// Labels drawn as Bernoulli(posterior): the scores are calibrated by construction.
inline shiftkit::ScoredSet calibrated_scores(std::size_t n, std::uint32_t seed) {
    std::mt19937 g(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    std::vector<shiftkit::Label> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = u(g);
        y[i] = u(g) < p[i] ? 1 : 0;
    }
    return shiftkit::ScoredSet(p, y);
}

// Posterior of the positive class for 1-D Gaussians at -1 / +1, unit variance, prior 0.5.
inline double gaussian_posterior(double x) { return 1.0 / (1.0 + std::exp(-2.0 * x)); }

// Scores of a 1-D two-Gaussian sample with `npos` positives and `nneg` negatives.
inline shiftkit::ScoredSet gaussian_scores(std::size_t npos, std::size_t nneg, std::uint32_t seed) {
    std::mt19937 g(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> p;
    std::vector<shiftkit::Label> y;
    for (std::size_t i = 0; i < npos; ++i) {
        p.push_back(gaussian_posterior(1.0 + z(g)));
        y.push_back(1);
    }
    for (std::size_t i = 0; i < nneg; ++i) {
        p.push_back(gaussian_posterior(-1.0 + z(g)));
        y.push_back(0);
    }
    return shiftkit::ScoredSet(p, y);
}

inline double positive_fraction(const std::vector<shiftkit::Label>& y) {
    double s = 0;
    for (auto v : y) s += v;
    return s / static_cast<double>(y.size());
}

}  // namespace fixtures
