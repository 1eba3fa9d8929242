#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "isodyn/grid.hpp"
#include "isodyn/rng.hpp"

namespace isodyn::folded_normal {

/// |X| for X ~ N(mean, sd^2).
inline double sample(double mean, double sd, Rng& rng) { return std::abs(mean + sd * rng.normal()); }

/// log density of |X| at x >= 0; sd == 0 is treated as a point mass and gives 0.
inline double log_pdf(double x, double mean, double sd) {
    if (x < 0.0) return -std::numeric_limits<double>::infinity();
    if (!(sd > 0.0)) return 0.0;
    const double a = -0.5 * ((x - mean) / sd) * ((x - mean) / sd);
    const double b = -0.5 * ((x + mean) / sd) * ((x + mean) / sd);
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m)) - std::log(sd) - 0.5 * std::log(2.0 * kPi);
}

/// E|X| for X ~ N(mean, sd^2).
inline double mean(double mu, double sd) {
    if (!(sd > 0.0)) return std::abs(mu);
    return sd * std::sqrt(2.0 / kPi) * std::exp(-0.5 * mu * mu / (sd * sd)) + mu * std::erf(mu / (sd * std::sqrt(2.0)));
}

/// Var|X| for X ~ N(mean, sd^2).
inline double variance(double mu, double sd) {
    const double m = mean(mu, sd);
    return mu * mu + sd * sd - m * m;
}

}  // namespace isodyn::folded_normal
