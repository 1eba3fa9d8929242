#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "isodyn/grid.hpp"
#include "isodyn/potential.hpp"
#include "isodyn/rng.hpp"
#include "isodyn/seed.hpp"
#include "isodyn/state.hpp"

namespace isodyn {

/// Plummer sphere with an exponential-in-energy distribution function.
struct PlummerSpec {
    double m0 = 4.0e11;   // M_sun
    double rc = 8.0;      // kpc
    double sigma = 220.0; // km/s
    double ra = std::numeric_limits<double>::infinity(); // kpc; infinite means isotropic

    void validate() const {
        if (!(m0 > 0.0) || !(rc > 0.0) || !(sigma > 0.0) || !(ra > 0.0))
            throw std::invalid_argument("PlummerSpec: m0, rc, sigma and ra must be positive");
    }
    bool anisotropic() const { return std::isfinite(ra); }
};

struct NoiseSpec {
    double sigma_v3 = 20.0; // km/s
};

inline double plummer_potential(const PlummerSpec& spec, double r) {
    if (!(r >= 0.0)) throw DomainError("plummer_potential: negative radius");
    return -kGravity * spec.m0 / std::sqrt(spec.rc * spec.rc + r * r);
}

inline double plummer_mass(const PlummerSpec& spec, double r) {
    const double x2 = r * r / (spec.rc * spec.rc);
    return spec.m0 * x2 * std::sqrt(x2) / std::pow(1.0 + x2, 1.5);
}

inline double plummer_density(const PlummerSpec& spec, double r) {
    return 3.0 * spec.m0 / (4.0 * kPi * std::pow(spec.rc, 3)) * std::pow(1.0 + r * r / (spec.rc * spec.rc), -2.5);
}

/// Mean Plummer density over each radial bin (shell-volume weighted).
inline std::vector<double> binned_plummer_density(const PlummerSpec& spec, const RadialGrid& grid) {
    std::vector<double> out;
    for (int h = 0; h < grid.n_x(); ++h) {
        const double a = grid.edge(h), b = grid.edge(h + 1);
        out.push_back((plummer_mass(spec, b) - plummer_mass(spec, a)) / ((4.0 * kPi / 3.0) * (b * b * b - a * a * a)));
    }
    return out;
}

/// f relative to its maximum (the most bound orbit at the centre); zero for unbound points.
inline double plummer_df_ratio(const PlummerSpec& spec, const Vec3& x, const Vec3& v) {
    const double r = norm(x);
    const double v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    const double binding = -plummer_potential(spec, r) - 0.5 * v2;
    if (!(binding > 0.0)) return 0.0;
    const double top = -plummer_potential(spec, 0.0);
    double log_ratio = (binding - top) / (2.0 * spec.sigma * spec.sigma);
    if (spec.anisotropic()) {
        const Vec3 l{x[1] * v[2] - x[2] * v[1], x[2] * v[0] - x[0] * v[2], x[0] * v[1] - x[1] * v[0]};
        const double l2 = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
        log_ratio -= l2 / (spec.ra * spec.ra * spec.sigma * spec.sigma);
    }
    return std::exp(log_ratio);
}

struct PhasePoint {
    Vec3 x;
    Vec3 v;
};

inline Vec3 uniform_in_ball(double radius, Rng& rng) {
    for (;;) {
        const Vec3 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0) return {radius * p[0], radius * p[1], radius * p[2]};
    }
}

inline Vec3 uniform_direction(Rng& rng) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = 2.0 * kPi * rng.uniform();
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

/**
 * Rejection sampler for the Plummer distribution functions inside r <= r_max.
 * Envelope: uniform over the position ball and the velocity ball of the
 * central escape speed.
 */
inline std::vector<PhasePoint> sample_plummer_phase_space(const PlummerSpec& spec, long n, double r_max, Rng& rng,
                                                          long max_attempts = 2'000'000'000L) {
    spec.validate();
    if (n <= 0) throw DomainError("sample: n must be positive");
    if (!(r_max > 0.0)) throw DomainError("sample: r_max must be positive");
    const double v_top = std::sqrt(-2.0 * plummer_potential(spec, 0.0));
    std::vector<PhasePoint> out;
    out.reserve(n);
    for (long attempts = 0; static_cast<long>(out.size()) < n; ++attempts) {
        if (attempts >= max_attempts) throw std::runtime_error("sample: rejection sampler stalled");
        const Vec3 x = uniform_in_ball(r_max, rng);
        const Vec3 v = uniform_in_ball(v_top, rng);
        if (rng.uniform() < plummer_df_ratio(spec, x, v)) out.push_back({x, v});
    }
    return out;
}

inline Dataset project(const std::vector<PhasePoint>& pts, const NoiseSpec& noise, Rng& rng) {
    if (!(noise.sigma_v3 >= 0.0)) throw DomainError("NoiseSpec: negative sigma_v3");
    Dataset d;
    d.reserve(pts.size());
    for (const auto& p : pts) d.push_back({p.x[0], p.x[1], p.v[2] + noise.sigma_v3 * rng.normal(), noise.sigma_v3});
    return d;
}

/// Isotropic catalogue: x and v drawn from f ~ exp(E_bind / 2 sigma^2), then projected with v3 noise.
inline Dataset sample_iso(PlummerSpec spec, long n, const NoiseSpec& noise, std::uint64_t seed, double r_max = 25.0) {
    spec.ra = std::numeric_limits<double>::infinity();
    Rng phase(seed, 11), err(seed, 12);
    return project(sample_plummer_phase_space(spec, n, r_max, phase), noise, err);
}

/// As sample_iso with the extra factor exp(-|x ^ v|^2 / (ra^2 sigma^2)).
inline Dataset sample_aniso(const PlummerSpec& spec, long n, const NoiseSpec& noise, std::uint64_t seed,
                            double r_max = 25.0) {
    if (!spec.anisotropic()) throw std::invalid_argument("sample_aniso: ra must be finite");
    Rng phase(seed, 11), err(seed, 12);
    return project(sample_plummer_phase_space(spec, n, r_max, phase), noise, err);
}

struct NullSample {
    Vec3 x;
    Vec3 v;
    double eps;
};

/**
 * How null points are accepted.
 *  density_of_states: eps ~ U[0,1] and x uniform in the grid sphere are drawn
 *    together; the attempt survives with probability f(eps) sqrt(psi - eps) / 1.05.
 *    The square root is the volume of velocity space at fixed (r, eps), so the
 *    draws follow f(eps) itself.
 *  literal: eps is kept while x is redrawn until psi(r) > eps, then accepted
 *    with probability f(eps) / 1.05. Accepted eps follows f alone, so the
 *    spatial distribution is not that of the model.
 */
enum class NullScheme { density_of_states, literal };

inline std::vector<NullSample> sample_null_phase_space(const ModelState& modal, long n, Rng& rng,
                                                       NullScheme scheme = NullScheme::density_of_states,
                                                       long max_attempts = 10'000'000L) {
    if (n <= 0) throw DomainError("generate_null_data: n must be positive");
    const auto fv = modal.f.values();
    if (std::all_of(fv.begin(), fv.end(), [](double x) { return x == 0.0; }))
        throw DegenerateModelError("generate_null_data: f vanishes identically");
    const Potential pot(modal.rho, modal.rgrid);
    if (pot.degenerate()) throw DegenerateModelError("generate_null_data: rho vanishes identically");
    const double r_max = modal.rgrid.r_max();
    const double abs_phi0 = std::abs(pot.phi0());
    constexpr double envelope = 1.05;

    std::vector<NullSample> out;
    out.reserve(n);
    long attempts = 0;
    auto stall = [&] {
        return std::runtime_error("generate_null_data: " + std::to_string(out.size()) + " of " + std::to_string(n) +
                                  " points accepted after " + std::to_string(max_attempts) + " attempts");
    };
    auto draw_x = [&] {
        return Vec3{rng.uniform(-r_max, r_max), rng.uniform(-r_max, r_max), rng.uniform(-r_max, r_max)};
    };
    while (static_cast<long>(out.size()) < n) {
        if (++attempts > max_attempts) throw stall();
        const double eps = rng.uniform();
        Vec3 x = draw_x();
        double psi = 0.0;
        if (scheme == NullScheme::literal) {
            for (long redraws = 0;; ++redraws) {
                if (redraws > max_attempts) throw stall();
                const double r = norm(x);
                if (r <= r_max && (psi = pot.psi(r)) > eps) break;
                x = draw_x();
            }
        } else {
            const double r = norm(x);
            if (r > r_max) continue;
            psi = pot.psi(r);
            if (!(psi > eps)) continue;
        }
        const double speed = std::sqrt(2.0 * abs_phi0 * (psi - eps));
        const Vec3 dir = uniform_direction(rng);
        const double ft = fv[*energy_bin(eps, modal.egrid)];
        const double weight = scheme == NullScheme::literal ? ft : ft * std::sqrt(psi - eps);
        if (envelope * rng.uniform() < weight)
            out.push_back({x, {speed * dir[0], speed * dir[1], speed * dir[2]}, eps});
    }
    return out;
}

/// Null-hypothesis catalogue of size n drawn from a fitted isotropic state, with v3 noise of sigma_err.
inline Dataset generate_null_data(const ModelState& modal, long n, double sigma_err, std::uint64_t seed,
                                  NullScheme scheme = NullScheme::density_of_states) {
    Rng phase(seed, 21), err(seed, 22);
    const auto pts = sample_null_phase_space(modal, n, phase, scheme);
    Dataset d;
    d.reserve(pts.size());
    for (const auto& p : pts) {
        d.push_back({p.x[0], p.x[1], p.v[2] + sigma_err * err.normal(), sigma_err});
    }
    return d;
}

}  // namespace isodyn
