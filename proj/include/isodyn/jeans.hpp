#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "isodyn/grid.hpp"

namespace isodyn {

/// A positive profile tabulated on increasing radii (intended: uniform in log r).
struct TabulatedProfile {
    std::vector<double> r;
    std::vector<double> value;
};

namespace detail {

inline void check_profile(const TabulatedProfile& p, const char* name, bool positive) {
    if (p.r.size() < 3 || p.r.size() != p.value.size())
        throw std::invalid_argument(std::string("jeans_mass: profile '") + name + "' needs >= 3 matching points");
    for (std::size_t i = 0; i < p.r.size(); ++i) {
        if (!(p.r[i] > 0.0) || (i > 0 && !(p.r[i] > p.r[i - 1])))
            throw std::invalid_argument(std::string("jeans_mass: radii of '") + name + "' must be positive and increasing");
        if (positive && !(p.value[i] > 0.0))
            throw std::invalid_argument(std::string("jeans_mass: profile '") + name + "' must be positive");
    }
}

/// Log-log slope at each node: 3-point central differences inside, one-sided at the ends.
inline std::vector<double> log_slopes(const TabulatedProfile& p) {
    const std::size_t n = p.r.size();
    std::vector<double> x(n), y(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::log(p.r[i]);
        y[i] = std::log(p.value[i]);
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
        d[i] = (-h1 / (h0 * (h0 + h1))) * y[i - 1] + ((h1 - h0) / (h0 * h1)) * y[i] + (h0 / (h1 * (h0 + h1))) * y[i + 1];
    }
    {
        const double h0 = x[1] - x[0], h1 = x[2] - x[1];
        d[0] = (-(2 * h0 + h1) / (h0 * (h0 + h1))) * y[0] + ((h0 + h1) / (h0 * h1)) * y[1] - (h0 / (h1 * (h0 + h1))) * y[2];
    }
    {
        const std::size_t m = n - 1;
        const double h0 = x[m - 1] - x[m - 2], h1 = x[m] - x[m - 1];
        d[m] = (h1 / (h0 * (h0 + h1))) * y[m - 2] - ((h0 + h1) / (h0 * h1)) * y[m - 1] + ((2 * h1 + h0) / (h1 * (h0 + h1))) * y[m];
    }
    return d;
}

/// Linear interpolation in log r of node values.
inline double interp(const std::vector<double>& r, const std::vector<double>& v, double at) {
    if (at < r.front() || at > r.back()) throw DomainError("jeans_mass: radius outside tabulated range");
    std::size_t i = 1;
    while (i < r.size() - 1 && r[i] < at) ++i;
    const double t = (std::log(at) - std::log(r[i - 1])) / (std::log(r[i]) - std::log(r[i - 1]));
    return v[i - 1] + t * (v[i] - v[i - 1]);
}

}  // namespace detail

/**
 * Enclosed mass from the spherical Jeans equation,
 *   M(r) = -(r sigma3^2 / G) [dln nu/dln r + dln sigma3^2/dln r + beta(r)].
 * Useful as a diagnostic against the non-parametric fit.
 */
inline double jeans_mass(const TabulatedProfile& nu, const TabulatedProfile& sigma3, const TabulatedProfile& beta,
                         double r) {
    detail::check_profile(nu, "nu", true);
    detail::check_profile(sigma3, "sigma3", true);
    detail::check_profile(beta, "beta", false);

    TabulatedProfile sigma_sq = sigma3;
    for (double& s : sigma_sq.value) s *= s;

    const double dln_nu = detail::interp(nu.r, detail::log_slopes(nu), r);
    const double dln_s2 = detail::interp(sigma_sq.r, detail::log_slopes(sigma_sq), r);
    const double s2 = std::exp(detail::interp(sigma_sq.r, [&] {
        std::vector<double> l;
        for (double v : sigma_sq.value) l.push_back(std::log(v));
        return l;
    }(), r));
    const double b = detail::interp(beta.r, beta.value, r);
    return -(r * s2 / kGravity) * (dln_nu + dln_s2 + b);
}

}  // namespace isodyn
