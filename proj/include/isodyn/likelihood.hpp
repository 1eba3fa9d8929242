#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "isodyn/grid.hpp"
#include "isodyn/potential.hpp"
#include "isodyn/quadrature.hpp"
#include "isodyn/state.hpp"

namespace isodyn {

inline constexpr int kDefaultHermiteOrder = 20;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/**
 * Adds scale * w_j to out[j], where the projected density is
 * nu(x1, x2, v3) = sum_j f_j w_j.
 *
 * The (v1, v2) integral collapses to 2 pi |Phi0| F(psi - w) with F the
 * cumulative of the piecewise-constant f, so each energy bin contributes
 * 4 pi |Phi0| [Q(w + a_j) - Q(w + b_j)] with Q the sight-line excess integral.
 */
inline void accumulate_projection_weights(const SightLine& line, double abs_phi0, const EnergyGrid& egrid, double v3,
                                          double scale, std::span<double> out) {
    const double w = v3 * v3 / (2.0 * abs_phi0);
    const double psi_r = line.psi_at_projected_radius();
    if (w >= psi_r) return;
    const int n = egrid.n_e();
    const double pref = 4.0 * kPi * abs_phi0 * scale;
    double q_lo = line.excess_integral(w);
    for (int j = 0; j < n; ++j) {
        const double t_hi = w + egrid.upper(j);
        const double q_hi = t_hi >= psi_r ? 0.0 : line.excess_integral(t_hi);
        out[j] += pref * (q_lo - q_hi);
        if (q_hi == 0.0) break;
        q_lo = q_hi;
    }
}

/// Visits the Gauss-Hermite nodes of int g(u) N(v3 - u; 0, sigma^2) du as fn(u, weight).
template <class Fn>
void for_each_hermite_node(double v3, double sigma, const QuadratureRule& hermite, Fn&& fn) {
    const double inv_sqrt_pi = 1.0 / std::sqrt(kPi);
    for (std::size_t i = 0; i < hermite.nodes.size(); ++i)
        fn(v3 + std::sqrt(2.0) * sigma * hermite.nodes[i], hermite.weights[i] * inv_sqrt_pi);
}

/// Gaussian smoothing of a scalar function of velocity; sigma == 0 returns g(v3).
template <class Fn>
double gaussian_convolve(Fn&& g, double v3, double sigma, const QuadratureRule& hermite) {
    if (sigma == 0.0) return g(v3);
    double s = 0.0;
    for_each_hermite_node(v3, sigma, hermite, [&](double u, double w) { s += w * g(u); });
    return s;
}

/// Per-bin weights of the Gaussian-error-convolved projected density.
inline void accumulate_convolved_weights(const SightLine& line, double abs_phi0, const EnergyGrid& egrid, double v3,
                                         double sigma_err, const QuadratureRule& hermite, std::span<double> out) {
    if (sigma_err == 0.0) {
        accumulate_projection_weights(line, abs_phi0, egrid, v3, 1.0, out);
        return;
    }
    for_each_hermite_node(v3, sigma_err, hermite, [&](double u, double w) {
        accumulate_projection_weights(line, abs_phi0, egrid, u, w, out);
    });
}

/**
 * Z_j such that the normalization over the observable window is sum_j f_j Z_j.
 * Z_j = int_0^{R_max} 4 pi r^2 dr int d^3v [eps in bin j], done with 20-point
 * Gauss-Legendre on pieces split at radial edges and at energy-edge crossings.
 */
inline std::vector<double> energy_bin_normalizations(const Potential& pot, const EnergyGrid& egrid) {
    const RadialGrid& g = pot.grid();
    const int n_e = egrid.n_e();
    std::vector<double> breaks;
    for (int h = 0; h <= g.n_x(); ++h) breaks.push_back(g.edge(h));
    const double psi_out = pot.psi_edge(g.n_x());
    for (int j = 1; j < n_e; ++j) {
        const double a = egrid.lower(j);
        if (a > psi_out && a < 1.0) breaks.push_back(pot.psi_inverse(a).r);
    }
    std::sort(breaks.begin(), breaks.end());

    const double abs_phi0 = std::abs(pot.phi0());
    const double pref = 4.0 * kPi * std::sqrt(2.0) * abs_phi0 * std::sqrt(abs_phi0) * (2.0 / 3.0) * 4.0 * kPi;
    const auto& gl = gauss_legendre_20();
    std::vector<double> z(n_e, 0.0);
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double lo = breaks[k], hi = breaks[k + 1];
        if (!(hi > lo)) continue;
        const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double r = mid + half * gl.nodes[i];
            const double psi = pot.psi(r);
            const double wr = gl.weights[i] * half * r * r * pref;
            for (int j = 0; j < n_e; ++j) {
                const double a = egrid.lower(j), b = egrid.upper(j);
                if (psi <= a) break;
                const double da = psi - a;
                const double db = std::max(0.0, psi - b);
                z[j] += wr * (da * std::sqrt(da) - db * std::sqrt(db));
            }
        }
    }
    return z;
}

inline double dot(std::span<const double> f, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += f[j] * w[j];
    return s;
}

/// Per-bin weights w_j with nu(x1, x2, v3) = sum_j f_j w_j (sigma_err > 0 convolves in v3).
inline std::vector<double> projection_weights(const Potential& pot, const EnergyGrid& egrid, double x1, double x2,
                                              double v3, double sigma_err = 0.0,
                                              int hermite_order = kDefaultHermiteOrder) {
    if (!(sigma_err >= 0.0)) throw DomainError("convolve_error: negative sigma_err");
    const double R = std::hypot(x1, x2);
    if (!(R <= pot.grid().r_max())) throw DomainError("projected pdf: point outside radial grid");
    std::vector<double> w(egrid.n_e(), 0.0);
    if (pot.degenerate()) return w;
    const SightLine line(pot, R);
    if (sigma_err == 0.0)
        accumulate_projection_weights(line, std::abs(pot.phi0()), egrid, v3, 1.0, w);
    else
        accumulate_convolved_weights(line, std::abs(pot.phi0()), egrid, v3, sigma_err, gauss_hermite(hermite_order), w);
    return w;
}

/// nu(x1, x2, v3): f(eps) integrated over x3, v1, v2 with |x| <= R_max.
inline double projected_pdf(const ModelState& state, double x1, double x2, double v3) {
    const Potential pot(state.rho, state.rgrid);
    return dot(state.f.values(), projection_weights(pot, state.egrid, x1, x2, v3));
}

/// Projected pdf convolved with N(0, sigma_err^2) in v3.
inline double convolve_error(const ModelState& state, double x1, double x2, double v3, double sigma_err,
                             int hermite_order = kDefaultHermiteOrder) {
    const Potential pot(state.rho, state.rgrid);
    return dot(state.f.values(), projection_weights(pot, state.egrid, x1, x2, v3, sigma_err, hermite_order));
}

/// Z = sum_j f_j Z_j; f may be any non-negative vector here.
inline double normalization(std::span<const double> f, const Potential& pot, const EnergyGrid& egrid) {
    if (std::all_of(f.begin(), f.end(), [](double x) { return x == 0.0; }))
        throw DegenerateModelError("normalization: f vanishes identically");
    if (pot.degenerate()) throw DegenerateModelError("normalization: rho vanishes identically");
    return dot(f, energy_bin_normalizations(pot, egrid));
}

/// Z = integral of nu over the disc R <= R_max and |v3| <= sqrt(2|Phi0|).
inline double normalization(const ModelState& state) {
    return normalization(state.f.values(), Potential(state.rho, state.rgrid), state.egrid);
}

/**
 * Everything the posterior needs from rho alone: per-datum convolved
 * per-bin weights and the per-bin normalizations. f enters linearly, so an
 * f-only update reuses this.
 */
struct DensityContext {
    bool valid = false;
    int n_e = 0;
    std::vector<double> weights;        // n_data x n_e, row-major
    std::vector<double> normalizations; // n_e
};

/**
 * Log-posterior of (f, rho) given a dataset under flat box priors.
 */
class PosteriorModel {
public:
    PosteriorModel(Dataset data, PriorSpec prior, RadialGrid rgrid, EnergyGrid egrid,
                   int hermite_order = kDefaultHermiteOrder)
        : data_(std::move(data)), prior_(std::move(prior)), rgrid_(rgrid), egrid_(egrid),
          hermite_(gauss_hermite(hermite_order)) {
        if (data_.empty()) throw DomainError("log_likelihood: empty dataset");
        if (static_cast<int>(prior_.rho_lo.size()) != rgrid_.n_x())
            throw std::invalid_argument("PosteriorModel: prior size does not match radial grid");
        for (std::size_t k = 0; k < data_.size(); ++k) check_in_grid(data_[k], rgrid_, k);
        prior_constant_ = prior_.log_density_constant();
    }

    const Dataset& data() const { return data_; }
    const PriorSpec& prior() const { return prior_; }
    const RadialGrid& rgrid() const { return rgrid_; }
    const EnergyGrid& egrid() const { return egrid_; }

    DensityContext prepare(const MassDensityVector& rho) const {
        DensityContext ctx;
        ctx.n_e = egrid_.n_e();
        const Potential pot(rho, rgrid_);
        if (pot.degenerate()) return ctx;
        const double abs_phi0 = std::abs(pot.phi0());
        ctx.weights.assign(data_.size() * ctx.n_e, 0.0);
        for (std::size_t k = 0; k < data_.size(); ++k) {
            const auto& d = data_[k];
            const SightLine line(pot, d.projected_radius());
            accumulate_convolved_weights(line, abs_phi0, egrid_, d.v3, d.sigma_err, hermite_,
                                         std::span<double>(ctx.weights).subspan(k * ctx.n_e, ctx.n_e));
        }
        ctx.normalizations = energy_bin_normalizations(pot, egrid_);
        ctx.valid = true;
        return ctx;
    }

    double log_likelihood(const PhaseDensityVector& f, const DensityContext& ctx) const {
        if (!ctx.valid) return kNegInf;
        const double z = dot(f.values(), ctx.normalizations);
        if (!(z > 0.0)) return kNegInf;
        std::vector<double> terms(data_.size());
        const std::span<const double> w(ctx.weights);
        for (std::size_t k = 0; k < data_.size(); ++k) {
            const double nu = dot(f.values(), w.subspan(k * ctx.n_e, ctx.n_e));
            if (!(nu > 0.0)) return kNegInf;
            terms[k] = std::log(nu);
        }
        return pairwise_sum(terms) - static_cast<double>(data_.size()) * std::log(z);
    }

    double log_prior(const MassDensityVector& rho) const {
        return prior_.contains(rho) ? prior_constant_ : kNegInf;
    }

    double log_posterior(const PhaseDensityVector& f, const MassDensityVector& rho, const DensityContext& ctx) const {
        const double lp = log_prior(rho);
        if (lp == kNegInf) return kNegInf;
        return lp + log_likelihood(f, ctx);
    }

    double log_likelihood(const ModelState& s) const { return log_likelihood(s.f, prepare(s.rho)); }

    double log_posterior(const ModelState& s) const {
        if (log_prior(s.rho) == kNegInf) return kNegInf;
        return log_posterior(s.f, s.rho, prepare(s.rho));
    }

private:
    Dataset data_;
    PriorSpec prior_;
    RadialGrid rgrid_;
    EnergyGrid egrid_;
    QuadratureRule hermite_;
    double prior_constant_ = 0.0;
};

/// Sum of log error-convolved densities minus N log Z.
inline double log_likelihood(const ModelState& state, const Dataset& data) {
    if (data.empty()) throw DomainError("log_likelihood: empty dataset");
    std::vector<double> lo(state.rgrid.n_x(), 0.0), hi(state.rgrid.n_x(), std::numeric_limits<double>::max());
    const PosteriorModel model(data, PriorSpec(std::move(lo), std::move(hi)), state.rgrid, state.egrid);
    return model.log_likelihood(state);
}

inline double log_posterior(const ModelState& state, const Dataset& data, const PriorSpec& prior) {
    const PosteriorModel model(data, prior, state.rgrid, state.egrid);
    return model.log_posterior(state);
}

}  // namespace isodyn
