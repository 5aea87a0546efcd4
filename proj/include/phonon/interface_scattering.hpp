#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "phonon/lattice_dispersion.hpp"
#include "phonon/memory_kernel.hpp"
#include "phonon/numerics.hpp"

namespace phonon {

// Points closer than this to the singular set are rejected by nu_pv.
inline constexpr double singular_zone_floor = 1e-7;

// G(u) = int_0^{1/2} dl / (u + omega(l))
double resolvent_G(const DispersionRelation& disp, double u);
// H(u) = PV int_0^{1/2} dl / (u - omega(l)) - i pi / |omega'(omega_+(u))|
cplx resolvent_H(const DispersionRelation& disp, double u);

// nu(k) = 1 / (1 + i gamma (G + H)(omega(k))), principal value route.
cplx nu_pv(const DispersionRelation& disp, double gamma, double k);

// g~(eps - i omega(k)) for each eps, extrapolated to eps = 0. eps must decrease strictly.
cplx nu_laplace_limit(const MemoryKernel& mk, double k, std::span<const double> eps_list);

// Per-k damping list used for the Laplace route: eps = s (1, 0.1, 0.01) with
// s = min(1e-2, 0.1 * distance of omega(k) to the band edges).
std::vector<double> default_eps_list(const DispersionRelation& disp, double k);

struct Coefficients {
    cplx nu;
    cplx wp;          // reflection amplitude gamma nu / (2 |v|)
    double absorb;    // gamma |nu|^2 / |v|
    double p_plus;    // |1 - wp|^2
    double p_minus;   // |wp|^2
};

Coefficients coefficients(const DispersionRelation& disp, double gamma, double k, cplx nu);
// nu_pv followed by coefficients.
Coefficients scattering_at(const DispersionRelation& disp, double gamma, double k);

// |p+ + p- + g - 1|
double identity_residual(const Coefficients& c);
// |Re nu - (1 + pi gamma / |omega'|) |nu|^2|
double re_nu_residual(const DispersionRelation& disp, double gamma, double k, cplx nu);

struct ScatteringTable {
    double gamma = 0.0;
    double delta_excl = 0.0;
    std::vector<double> k;
    std::vector<Coefficients> rows;
    std::vector<double> identity_residual;
    std::vector<double> re_nu_residual;
    double max_identity_residual = 0.0;
    double max_re_nu_residual = 0.0;

    std::size_t size() const { return k.size(); }
    // columns k, Re nu, Im nu, g, p+, p-, identity_residual
    void write_csv(std::ostream& os) const;
};

// Uniform n_k grid on the torus minus the delta_excl neighbourhood of the
// singular set. Throws InvariantError naming k if an identity fails.
ScatteringTable build_table(const DispersionRelation& disp, double gamma, std::size_t n_k,
                            double delta_excl, unsigned threads = 1);

struct CrossCheck {
    double max_abs_diff = 0.0;
    double worst_k = 0.0;
    std::vector<double> diff;
};

// |nu_pv - nu_laplace_limit| over the table grid.
CrossCheck cross_check_laplace(const ScatteringTable& table, const MemoryKernel& mk, unsigned threads = 1);

}  // namespace phonon
