#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "shiftkit/core.hpp"
#include "shiftkit/random.hpp"

namespace shiftkit {

/// Two isotropic Gaussian classes: negatives centred at -separation/2, positives
/// at +separation/2 along every axis, unit variance. Exactly round(prior * n)
/// rows are positive; row order is shuffled.
inline LabeledSet gaussian_classes(std::size_t n, double prior, std::uint64_t seed, std::size_t dim = 1,
                                   double separation = 2.0) {
    auto rng = make_rng(seed, 0x6A);
    const auto npos = static_cast<std::size_t>(std::llround(prior * static_cast<double>(n)));
    std::vector<Label> y(n, 0);
    for (std::size_t i = 0; i < npos && i < n; ++i) y[i] = 1;
    shuffle(std::span<Label>(y), rng);
    std::vector<double> f(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const double mu = (y[i] == 1 ? 0.5 : -0.5) * separation;
        for (std::size_t j = 0; j < dim; ++j) f[i * dim + j] = mu + standard_normal(rng);
    }
    return LabeledSet(std::move(f), dim, std::move(y));
}

}  // namespace shiftkit
