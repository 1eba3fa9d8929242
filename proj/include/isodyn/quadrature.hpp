#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "isodyn/grid.hpp"

namespace isodyn {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/**
 * Gauss-Hermite rule for int exp(-x^2) g(x) dx (physicists' weight),
 * nodes by Newton iteration on the orthonormal Hermite recurrence.
 */
inline QuadratureRule gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
    const double pim4 = 0.7511255444649425;  // pi^(-1/4)
    QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
    const int m = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0) z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2) z = 1.86 * z - 0.86 * rule.nodes[0];
        else if (i == 3) z = 1.91 * z - 0.91 * rule.nodes[1];
        else z = 2.0 * z - rule.nodes[i - 2];
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        rule.nodes[i] = z;
        rule.nodes[n - 1 - i] = -z;
        rule.weights[i] = 2.0 / (pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    return rule;
}

/// 20-point Gauss-Legendre rule mapped to [-1, 1] (full node set).
inline const QuadratureRule& gauss_legendre_20() {
    static const QuadratureRule rule = [] {
        using G = boost::math::quadrature::gauss<double, 20>;
        QuadratureRule r;
        const auto& x = G::abscissa();
        const auto& w = G::weights();
        for (std::size_t i = 0; i < x.size(); ++i) {
            r.nodes.push_back(x[i]);
            r.weights.push_back(w[i]);
            r.nodes.push_back(-x[i]);
            r.weights.push_back(w[i]);
        }
        return r;
    }();
    return rule;
}

/// Pairwise summation in index order; deterministic for a given input.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace isodyn
