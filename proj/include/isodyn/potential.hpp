#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "isodyn/grid.hpp"
#include "isodyn/state.hpp"

namespace isodyn {

/**
 * Gravitational potential of a binned spherical mass density.
 *
 * Uses the full shell solution of Poisson's equation,
 *   Phi(r) = -G [ M(r)/r + int_r^{R_max} 4 pi rho(s) s ds ],
 * so Phi(0) is finite and |Phi| peaks at the centre. Outside the grid the
 * potential is Keplerian, -G M_tot / r. Inside bin b it has the closed form
 *   Phi(r) = -G [ A_b / r + B_b r^2 + C_b ],
 * which the line-of-sight integrals below exploit.
 */
class Potential {
public:
    struct BinCoefficients {
        double a;  // kpc^-0 * M_sun
        double b;  // M_sun kpc^-3
        double c;  // M_sun kpc^-1
    };

    Potential(const MassDensityVector& rho, const RadialGrid& grid) : grid_(grid) {
        const int n = grid.n_x();
        if (static_cast<int>(rho.size()) != n) throw std::invalid_argument("Potential: rho/grid size mismatch");
        const double d = grid.delta();
        rho_.assign(rho.values().begin(), rho.values().end());

        mass_below_.assign(n + 1, 0.0);
        for (int q = 0; q < n; ++q) {
            const double shell = (4.0 * kPi / 3.0) * d * d * d * (cube(q + 1.0) - cube(q));
            mass_below_[q + 1] = mass_below_[q] + shell * rho_[q];
        }
        outer_from_.assign(n + 1, 0.0);
        for (int q = n - 1; q >= 0; --q)
            outer_from_[q] = outer_from_[q + 1] + 2.0 * kPi * rho_[q] * d * d * ((q + 1.0) * (q + 1.0) - q * q);

        coeffs_.resize(n);
        for (int b = 0; b < n; ++b) {
            double a = 0.0;
            for (int q = 0; q < b; ++q)
                a += (4.0 * kPi / 3.0) * d * d * d * (cube(q + 1.0) - cube(q)) * (rho_[q] - rho_[b]);
            coeffs_[b] = {a, -(2.0 * kPi / 3.0) * rho_[b],
                          2.0 * kPi * rho_[b] * d * d * (b + 1.0) * (b + 1.0) + outer_from_[b + 1]};
        }
        central_integral_ = coeffs_[0].c;
        phi0_ = -kGravity * central_integral_;

        if (central_integral_ > 0.0) {
            psi_edges_.resize(n + 1);
            psi_edges_[0] = 1.0;
            for (int h = 1; h <= n; ++h) psi_edges_[h] = bin_form(h - 1, grid.edge(h)) / central_integral_;
        }
    }

    const RadialGrid& grid() const { return grid_; }
    double phi0() const { return phi0_; }
    bool degenerate() const { return !(central_integral_ > 0.0); }
    double total_mass() const { return mass_below_.back(); }
    const BinCoefficients& coefficients(int b) const { return coeffs_[b]; }
    /// int_0^{R_max} 4 pi rho s ds, i.e. -Phi(0)/G.
    double central_integral() const { return central_integral_; }

    double mass(double r) const {
        if (!(r >= 0.0)) throw DomainError("cumulative mass: negative radius");
        if (r >= grid_.r_max()) return total_mass();
        const int b = grid_.bin_of(r);
        return mass_below_[b] + (4.0 * kPi / 3.0) * rho_[b] * (r * r * r - cube(grid_.edge(b)));
    }

    double phi(double r) const {
        if (!(r >= 0.0)) throw DomainError("potential: negative radius");
        if (r >= grid_.r_max()) return -kGravity * total_mass() / r;
        return -kGravity * bin_form(grid_.bin_of(r), r);
    }

    std::vector<double> phi_at_bin_edges() const {
        std::vector<double> out;
        for (int h = 0; h <= grid_.n_x(); ++h) out.push_back(phi(grid_.edge(h)));
        return out;
    }

    /// Phi(r)/Phi(0), in (0, 1] and non-increasing.
    double psi(double r) const {
        require_bound();
        if (r >= grid_.r_max()) return total_mass() / (r * central_integral_);
        return bin_form(grid_.bin_of(r), r) / central_integral_;
    }

    double psi_edge(int h) const { return psi_edges_[h]; }

    struct Inverse {
        double r;
        int bin;
    };

    /// Radius inside the grid where psi equals t, for psi(R_max) < t < 1.
    Inverse psi_inverse(double t) const {
        require_bound();
        const int n = grid_.n_x();
        if (t >= 1.0) return {0.0, 0};
        if (t <= psi_edges_[n]) return {grid_.r_max(), n - 1};
        // psi_edges_ is non-increasing; find b with psi_edges_[b+1] < t <= psi_edges_[b].
        int lo = 0, hi = n;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (psi_edges_[mid] >= t) lo = mid; else hi = mid;
        }
        const int b = lo;
        const auto& k = coeffs_[b];
        const double target = t * central_integral_;
        double r_lo = grid_.edge(b), r_hi = grid_.edge(b + 1);
        const double g_lo = psi_edges_[b] - t, g_hi = psi_edges_[b + 1] - t;
        double r = (g_lo - g_hi) > 0.0 ? r_lo + (r_hi - r_lo) * g_lo / (g_lo - g_hi) : r_lo;
        for (int it = 0; it < 60; ++it) {
            const double g = (r > 0.0 ? k.a / r : 0.0) + k.b * r * r + k.c - target;
            if (g > 0.0) r_lo = r; else r_hi = r;
            const double dg = (r > 0.0 ? -k.a / (r * r) : 0.0) + 2.0 * k.b * r;
            double next = dg < 0.0 ? r - g / dg : 0.5 * (r_lo + r_hi);
            if (!(next > r_lo && next < r_hi)) next = 0.5 * (r_lo + r_hi);
            if (std::abs(next - r) <= 1e-14 * grid_.delta()) { r = next; break; }
            r = next;
        }
        return {r, b};
    }

private:
    static double cube(double x) { return x * x * x; }

    double bin_form(int b, double r) const {
        const auto& k = coeffs_[b];
        return (r > 0.0 ? k.a / r : 0.0) + k.b * r * r + k.c;
    }

    void require_bound() const {
        if (degenerate()) throw DegenerateModelError("potential vanishes identically (rho == 0)");
    }

    RadialGrid grid_;
    std::vector<double> rho_;
    std::vector<double> mass_below_;
    std::vector<double> outer_from_;
    std::vector<BinCoefficients> coeffs_;
    std::vector<double> psi_edges_;
    double central_integral_ = 0.0;
    double phi0_ = 0.0;
};

/// Discretized enclosed mass M(r) [M_sun].
inline double cumulative_mass(const MassDensityVector& rho, const RadialGrid& grid, double r) {
    return Potential(rho, grid).mass(r);
}

/// Phi(r) [(km/s)^2] of the binned density.
inline double potential(const MassDensityVector& rho, const RadialGrid& grid, double r) {
    return Potential(rho, grid).phi(r);
}

using Vec3 = std::array<double, 3>;

inline double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

/// Normalized binding energy psi(|x|) - |v|^2 / (2|Phi0|); 1 is most bound, 0 the escape threshold.
inline double normalized_energy(const Potential& pot, const Vec3& x, const Vec3& v) {
    const double v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    return pot.psi(norm(x)) - v2 / (2.0 * std::abs(pot.phi0()));
}

/**
 * The potential seen along one line of sight at projected radius R, for
 * 0 <= x3 <= sqrt(R_max^2 - R^2). Provides the excess integral
 *   Q(t) = int (psi(sqrt(R^2 + s^2)) - t)_+ ds
 * in closed form per radial bin.
 */
class SightLine {
public:
    SightLine(const Potential& pot, double projected_radius) : pot_(&pot), r_proj_(projected_radius) {
        const RadialGrid& g = pot.grid();
        if (!(r_proj_ >= 0.0) || r_proj_ > g.r_max()) throw DomainError("sight line outside radial grid");
        first_bin_ = g.bin_of(r_proj_);
        if (r_proj_ >= g.r_max()) {
            first_bin_ = g.n_x();
            length_ = 0.0;
            psi_at_r_ = pot.psi(g.r_max());
            return;
        }
        psi_at_r_ = pot.psi(r_proj_);
        double s_prev = 0.0, acc = 0.0;
        for (int b = first_bin_; b < g.n_x(); ++b) {
            const double e = g.edge(b + 1);
            const double s = std::sqrt(std::max(0.0, e * e - r_proj_ * r_proj_));
            cum_before_.push_back(acc);
            seg_start_.push_back(s_prev);
            acc += segment(b, s_prev, s);
            s_prev = s;
        }
        length_ = s_prev;
        total_ = acc;
    }

    double length() const { return length_; }
    double psi_at_projected_radius() const { return psi_at_r_; }

    /// Q(t) [kpc], non-increasing and convex in t, zero for t >= psi(R).
    double excess_integral(double t) const {
        if (t >= psi_at_r_ || length_ <= 0.0) return 0.0;
        const int n = pot_->grid().n_x();
        if (t <= pot_->psi_edge(n)) return total_ - t * length_;
        const auto inv = pot_->psi_inverse(t);
        const int b = std::max(inv.bin, first_bin_);
        const double x = std::sqrt(std::max(0.0, inv.r * inv.r - r_proj_ * r_proj_));
        const int k = b - first_bin_;
        const double lo = seg_start_[k];
        const double p = cum_before_[k] + (x > lo ? segment(b, lo, x) : 0.0);
        return std::max(0.0, p - t * x);
    }

private:
    double segment(int b, double s_lo, double s_hi) const {
        const auto& k = pot_->coefficients(b);
        const double r2 = r_proj_ * r_proj_;
        double v = k.b * (r2 * (s_hi - s_lo) + (s_hi * s_hi * s_hi - s_lo * s_lo * s_lo) / 3.0) + k.c * (s_hi - s_lo);
        if (k.a != 0.0) {
            const double up = s_hi + std::sqrt(r2 + s_hi * s_hi);
            const double dn = s_lo + std::sqrt(r2 + s_lo * s_lo);
            v += k.a * std::log(up / dn);
        }
        return v / pot_->central_integral();
    }

    const Potential* pot_;
    double r_proj_;
    int first_bin_ = 0;
    double psi_at_r_ = 0.0;
    double length_ = 0.0;
    double total_ = 0.0;
    std::vector<double> cum_before_;
    std::vector<double> seg_start_;
};

}  // namespace isodyn
