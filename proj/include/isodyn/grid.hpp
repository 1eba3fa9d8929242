#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace isodyn {

/// Gravitational constant in kpc (km/s)^2 / M_sun.
inline constexpr double kGravity = 4.300917e-6;

inline constexpr double kPi = 3.14159265358979323846;

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a model state cannot define a normalizable density (f == 0 or rho == 0).
class DegenerateModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Uniform radial binning. Bin h (0-based) covers r in [h*delta, (h+1)*delta).
 */
class RadialGrid {
public:
    RadialGrid(double delta, int n_x) : delta_(delta), n_x_(n_x) {
        if (!(delta > 0.0) || !std::isfinite(delta))
            throw std::invalid_argument("RadialGrid: delta must be positive and finite");
        if (n_x < 1)
            throw std::invalid_argument("RadialGrid: n_x must be >= 1");
    }

    double delta() const { return delta_; }
    int n_x() const { return n_x_; }
    double r_max() const { return delta_ * n_x_; }
    double edge(int h) const { return delta_ * h; }
    double center(int h) const { return delta_ * (h + 0.5); }

    /// 0-based bin of r, clamped into [0, n_x-1].
    int bin_of(double r) const {
        if (r <= 0.0) return 0;
        const int h = static_cast<int>(std::floor(r / delta_));
        return h >= n_x_ ? n_x_ - 1 : h;
    }

    friend bool operator==(const RadialGrid&, const RadialGrid&) = default;

private:
    double delta_;
    int n_x_;
};

/**
 * Uniform binning of normalized binding energy over [0, 1]. Bin j (0-based)
 * covers [j/n_e, (j+1)/n_e); the last bin is closed at 1.
 */
class EnergyGrid {
public:
    explicit EnergyGrid(int n_e) : n_e_(n_e) {
        if (n_e < 1) throw std::invalid_argument("EnergyGrid: n_e must be >= 1");
    }

    int n_e() const { return n_e_; }
    double delta_e() const { return 1.0 / n_e_; }
    double lower(int j) const { return static_cast<double>(j) / n_e_; }
    double upper(int j) const { return static_cast<double>(j + 1) / n_e_; }
    double center(int j) const { return (j + 0.5) / n_e_; }

    friend bool operator==(const EnergyGrid&, const EnergyGrid&) = default;

private:
    int n_e_;
};

/// 0-based energy bin of eps; std::nullopt marks an unbound orbit (eps < 0).
/// Values on an interior edge go to the higher bin; eps >= 1 maps to the last bin.
inline std::optional<int> energy_bin(double eps, const EnergyGrid& egrid) {
    if (!(eps >= 0.0)) return std::nullopt;
    const int n = egrid.n_e();
    const double scaled = eps * n;
    if (scaled >= n) return n - 1;
    return static_cast<int>(std::floor(scaled));
}

}  // namespace isodyn
