#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isodyn/grid.hpp"
#include "isodyn/state.hpp"

namespace isodyn {

enum class FSeedForm { exponential, power };

/// Chain starting point: rho0 / ((r/rc)^alpha1 (1 + r/rc)^alpha2) and f from exp(eps) or eps^beta.
struct SeedProfile {
    double rho0 = 1.0e8;
    double rc = 10.0;
    double alpha1 = 1.0;
    double alpha2 = 2.0;
    FSeedForm f_form = FSeedForm::exponential;
    double beta = 1.0;

    void validate() const {
        if (!(rho0 > 0.0) || !(rc > 0.0) || !(alpha1 >= 0.0) || !(alpha2 >= 0.0))
            throw std::invalid_argument("SeedProfile: rho0, rc must be positive and alpha1, alpha2 non-negative");
        if (f_form == FSeedForm::power && !(beta >= 0.0))
            throw std::invalid_argument("SeedProfile: beta must be non-negative");
    }
};

/// Named starting points used for the catalogue runs.
struct SeedPreset {
    const char* name;
    SeedProfile profile;
};

inline const std::vector<SeedPreset>& seed_presets() {
    static const std::vector<SeedPreset> presets{
        {"pne-run-1", {1.0e3, 30.0, 2.8, 1.0, FSeedForm::exponential, 1.0}},
        {"pne-run-2", {1.0e10, 20.0, 3.8, 2.0, FSeedForm::power, 3.0}},
        {"pne-run-3", {1.0e14, 10.0, 1.8, 3.0, FSeedForm::power, 5.0}},
        {"gc-run-1", {1.0e5, 30.0, 2.8, 1.0, FSeedForm::exponential, 1.0}},
        {"gc-run-2", {1.0e8, 5.0, 3.6, 2.0, FSeedForm::power, 5.0}},
        {"gc-run-3", {1.0e10, 10.0, 3.2, 3.0, FSeedForm::power, 2.0}},
        {"synthetic", {}},
    };
    return presets;
}

inline const SeedProfile& seed_preset(const std::string& name) {
    for (const auto& p : seed_presets())
        if (name == p.name) return p.profile;
    throw std::invalid_argument("unknown seed preset '" + name + "'");
}

/// Bin-centre evaluation, made non-increasing by a running max from the outermost bin inward.
inline MassDensityVector seed_profile(double rho0, double rc, double alpha1, double alpha2, const RadialGrid& grid,
                                      const std::optional<PriorSpec>& prior = std::nullopt) {
    SeedProfile{rho0, rc, alpha1, alpha2}.validate();
    const int n = grid.n_x();
    std::vector<double> rho(n);
    for (int h = 0; h < n; ++h) {
        const double x = grid.center(h) / rc;
        rho[h] = rho0 / (std::pow(x, alpha1) * std::pow(1.0 + x, alpha2));
    }
    auto monotonize = [&] {
        for (int h = n - 2; h >= 0; --h) rho[h] = std::max(rho[h], rho[h + 1]);
    };
    monotonize();
    if (prior) {
        if (static_cast<int>(prior->rho_lo.size()) != n) throw std::invalid_argument("seed_profile: prior size mismatch");
        for (int h = 0; h < n; ++h) rho[h] = std::clamp(rho[h], prior->rho_lo[h], prior->rho_hi[h]);
        monotonize();
        if (!prior->contains(MassDensityVector(rho)))
            throw std::invalid_argument("seed_profile: prior boxes admit no monotone clipped seed");
    }
    return MassDensityVector(std::move(rho));
}

inline MassDensityVector seed_profile(const SeedProfile& s, const RadialGrid& grid,
                                      const std::optional<PriorSpec>& prior = std::nullopt) {
    return seed_profile(s.rho0, s.rc, s.alpha1, s.alpha2, grid, prior);
}

/// f seed at energy-bin centres, scaled so the most-bound bin is 1.
inline PhaseDensityVector seed_phase_density(const SeedProfile& s, const EnergyGrid& egrid) {
    s.validate();
    const int n = egrid.n_e();
    std::vector<double> f(n);
    for (int j = 0; j < n; ++j) {
        const double e = egrid.center(j);
        f[j] = s.f_form == FSeedForm::exponential ? std::exp(e) : std::pow(e, s.beta);
    }
    const double top = f.back();
    for (double& x : f) x = std::min(1.0, x / top);
    f.back() = 1.0;
    return PhaseDensityVector(std::move(f));
}

}  // namespace isodyn
