#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "isodyn/grid.hpp"

namespace isodyn {

/// Binned gravitational mass density [M_sun kpc^-3]: non-negative, non-increasing in radius.
class MassDensityVector {
public:
    explicit MassDensityVector(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw std::invalid_argument("MassDensityVector: empty");
        for (std::size_t h = 0; h < values_.size(); ++h) {
            if (!(values_[h] >= 0.0) || !std::isfinite(values_[h]))
                throw std::invalid_argument("MassDensityVector: rho[" + std::to_string(h) + "] is negative or not finite");
            if (h > 0 && values_[h] > values_[h - 1])
                throw std::invalid_argument("MassDensityVector: not non-increasing at bin " + std::to_string(h));
        }
    }

    std::span<const double> values() const { return values_; }
    double operator[](std::size_t h) const { return values_[h]; }
    std::size_t size() const { return values_.size(); }

    friend bool operator==(const MassDensityVector&, const MassDensityVector&) = default;

private:
    std::vector<double> values_;
};

/// Binned isotropic phase-space density over normalized energy: in [0, 1],
/// non-decreasing, most-bound bin pinned to 1.
class PhaseDensityVector {
public:
    explicit PhaseDensityVector(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw std::invalid_argument("PhaseDensityVector: empty");
        if (values_.back() != 1.0) throw std::invalid_argument("PhaseDensityVector: last bin must equal 1");
        for (std::size_t j = 0; j < values_.size(); ++j) {
            if (!(values_[j] >= 0.0) || values_[j] > 1.0)
                throw std::invalid_argument("PhaseDensityVector: f[" + std::to_string(j) + "] outside [0,1]");
            if (j > 0 && values_[j] < values_[j - 1])
                throw std::invalid_argument("PhaseDensityVector: not non-decreasing at bin " + std::to_string(j));
        }
    }

    std::span<const double> values() const { return values_; }
    double operator[](std::size_t j) const { return values_[j]; }
    std::size_t size() const { return values_.size(); }

    friend bool operator==(const PhaseDensityVector&, const PhaseDensityVector&) = default;

private:
    std::vector<double> values_;
};

/// One observed tracer: projected position, line-of-sight velocity and its error scale.
struct ParticleDatum {
    double x1 = 0.0;         // kpc
    double x2 = 0.0;         // kpc
    double v3 = 0.0;         // km/s
    double sigma_err = 0.0;  // km/s

    double projected_radius() const { return std::hypot(x1, x2); }
    friend bool operator==(const ParticleDatum&, const ParticleDatum&) = default;
};

using Dataset = std::vector<ParticleDatum>;

inline void check_in_grid(const ParticleDatum& d, const RadialGrid& grid, std::size_t index) {
    if (!(d.sigma_err >= 0.0))
        throw DomainError("datum " + std::to_string(index) + ": negative sigma_err");
    if (!(d.projected_radius() <= grid.r_max()))
        throw DomainError("datum " + std::to_string(index) + " at R=" + std::to_string(d.projected_radius()) +
                          " kpc lies outside the radial grid (R_max=" + std::to_string(grid.r_max()) + ")");
}

/// theta = (f, rho) together with the grids it lives on.
struct ModelState {
    PhaseDensityVector f;
    MassDensityVector rho;
    RadialGrid rgrid;
    EnergyGrid egrid;

    ModelState(PhaseDensityVector f_, MassDensityVector rho_, RadialGrid rgrid_, EnergyGrid egrid_)
        : f(std::move(f_)), rho(std::move(rho_)), rgrid(rgrid_), egrid(egrid_) {
        if (static_cast<int>(rho.size()) != rgrid.n_x())
            throw std::invalid_argument("ModelState: rho size does not match radial grid");
        if (static_cast<int>(f.size()) != egrid.n_e())
            throw std::invalid_argument("ModelState: f size does not match energy grid");
    }

    friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// Per-bin uniform prior boxes on rho; f carries U[0,1] priors.
struct PriorSpec {
    std::vector<double> rho_lo;
    std::vector<double> rho_hi;

    PriorSpec(std::vector<double> lo, std::vector<double> hi) : rho_lo(std::move(lo)), rho_hi(std::move(hi)) {
        if (rho_lo.size() != rho_hi.size()) throw std::invalid_argument("PriorSpec: bound sizes differ");
        for (std::size_t h = 0; h < rho_lo.size(); ++h)
            if (!(rho_lo[h] >= 0.0 && rho_lo[h] < rho_hi[h]))
                throw std::invalid_argument("PriorSpec: need 0 <= lo < hi in bin " + std::to_string(h));
    }

    /// Box [lo_factor * seed_h, hi_factor * seed_h] around a seed profile.
    static PriorSpec around(std::span<const double> seed, double lo_factor, double hi_factor) {
        std::vector<double> lo, hi;
        for (double s : seed) {
            lo.push_back(lo_factor * s);
            hi.push_back(hi_factor * s);
        }
        return {std::move(lo), std::move(hi)};
    }

    bool contains(const MassDensityVector& rho) const {
        if (rho.size() != rho_lo.size()) return false;
        for (std::size_t h = 0; h < rho.size(); ++h)
            if (rho[h] < rho_lo[h] || rho[h] > rho_hi[h]) return false;
        return true;
    }

    /// Sum of log uniform densities over the rho boxes (f boxes contribute log 1 = 0).
    double log_density_constant() const {
        double s = 0.0;
        for (std::size_t h = 0; h < rho_lo.size(); ++h) s -= std::log(rho_hi[h] - rho_lo[h]);
        return s;
    }
};

}  // namespace isodyn
