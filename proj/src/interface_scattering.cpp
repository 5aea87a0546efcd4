#include "phonon/interface_scattering.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "phonon/errors.hpp"

namespace phonon {
namespace {

// Roundoff in the paired PV integrand sits near 1e-12 relative; asking for
// more only drives the adaptive split to its depth limit.
constexpr double quad_tol = 1e-10;
constexpr unsigned quad_depth = 8;

std::string num(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

// u^2 - omega(l)^2 with u = omega(lp), written as a product of sines so that it
// keeps full relative accuracy near the pole.
double symbol_gap(const CouplingKernel& kernel, double lp, double l) {
    double s = 0.0;
    for (int y = 1; y <= kernel.radius(); ++y) {
        const double yy = static_cast<double>(y);
        s += 4.0 * kernel.coefficient(y) * std::sin(pi * yy * (l - lp)) * std::sin(pi * yy * (l + lp));
    }
    return s;
}

double G_impl(const DispersionRelation& disp, double u) {
    auto f = [&](double l) { return 1.0 / (u + disp.omega(l)); };
    std::vector<double> breaks;
    if (disp.kind() == DispersionKind::acoustic) {
        const double scale = u / disp.omega_prime(0.0);
        for (double m : {1.0, 10.0, 100.0}) breaks.push_back(m * scale);
    }
    return integrate_piecewise(f, 0.0, 0.5, breaks, quad_tol, quad_depth);
}

// PV part of H with the pole at lp in (0, 1/2).
double pv_impl(const DispersionRelation& disp, double lp) {
    const double u = disp.omega(lp);
    auto F = [&](double l) { return (u + disp.omega(l)) / symbol_gap(disp.kernel(), lp, l); };
    const double h = std::min({4.0 / 512.0, 0.5 * lp, 0.5 * (0.5 - lp)});
    // symmetric pairs cancel the simple pole inside the window
    auto paired = [&](double s) { return F(lp + s) + F(lp - s); };
    double total = integrate(paired, 0.0, h, quad_tol, quad_depth);
    std::vector<double> left, right;
    for (double m = 2.0; m < 1e6; m *= 2.0) {
        if (lp - m * h > 0.0) left.push_back(lp - m * h);
        if (lp + m * h < 0.5) right.push_back(lp + m * h);
    }
    if (disp.kind() == DispersionKind::acoustic) {
        const double scale = u / disp.omega_prime(0.0);
        for (double m : {1.0, 10.0, 100.0})
            if (m * scale < lp - h) left.push_back(m * scale);
    }
    total += integrate_piecewise(F, 0.0, lp - h, left, quad_tol, quad_depth);
    total += integrate_piecewise(F, lp + h, 0.5, right, quad_tol, quad_depth);
    return total;
}

void check_zone(const DispersionRelation& disp, double k, const char* what) {
    const double d = disp.distance_to_singular_set(k);
    if (d < singular_zone_floor)
        throw SingularZoneError(std::string(what) + ": k = " + num(k) + " lies within " + num(d) +
                                " of the singular set");
}

}  // namespace

double resolvent_G(const DispersionRelation& disp, double u) {
    if (!(u > 0.0)) throw DomainError("resolvent_G: u must be positive");
    return G_impl(disp, u);
}

cplx resolvent_H(const DispersionRelation& disp, double u) {
    const double lp = disp.inverse_branch(u);
    check_zone(disp, lp, "resolvent_H");
    return {pv_impl(disp, lp), -pi / std::abs(disp.omega_prime(lp))};
}

cplx nu_pv(const DispersionRelation& disp, double gamma, double k) {
    if (!(gamma >= 0.0)) throw ParameterError("nu_pv: gamma must be >= 0");
    if (gamma == 0.0) return 1.0;
    check_zone(disp, k, "nu_pv");
    const double lp = std::abs(wrap_torus(k));
    const double u = disp.omega(lp);
    const cplx H{pv_impl(disp, lp), -pi / std::abs(disp.omega_prime(lp))};
    const cplx iunit{0.0, 1.0};
    return 1.0 / (1.0 + iunit * gamma * (G_impl(disp, u) + H));
}

std::vector<double> default_eps_list(const DispersionRelation& disp, double k) {
    const double w = disp.omega(k);
    const double edge = std::min(w - disp.omega_min(), disp.omega_max() - w);
    const double s = std::min(1e-2, 0.1 * edge);
    return {s, 0.1 * s, 0.01 * s};
}

cplx nu_laplace_limit(const MemoryKernel& mk, double k, std::span<const double> eps_list) {
    if (eps_list.empty()) throw ParameterError("nu_laplace_limit: empty eps list");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] > 0.0)) throw ParameterError("nu_laplace_limit: eps must be positive");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
            throw ParameterError("nu_laplace_limit: eps list must be strictly decreasing");
    }
    const double w = mk.dispersion().omega(k);
    std::vector<cplx> values;
    values.reserve(eps_list.size());
    for (double e : eps_list) values.push_back(mk.g_tilde(cplx{e, -w}));
    return extrapolate_to_zero(eps_list, values);
}

Coefficients coefficients(const DispersionRelation& disp, double gamma, double k, cplx nu) {
    if (gamma == 0.0) return {nu, 0.0, 0.0, 1.0, 0.0};
    const double v = std::abs(disp.group_velocity(k));
    if (v == 0.0 || disp.distance_to_singular_set(k) < singular_zone_floor)
        throw SingularZoneError("coefficients: zero group velocity at k = " + num(k));
    Coefficients c;
    c.nu = nu;
    c.wp = gamma * nu / (2.0 * v);
    c.absorb = gamma * std::norm(nu) / v;
    c.p_plus = std::norm(1.0 - c.wp);
    c.p_minus = std::norm(c.wp);
    return c;
}

Coefficients scattering_at(const DispersionRelation& disp, double gamma, double k) {
    return coefficients(disp, gamma, k, nu_pv(disp, gamma, k));
}

double identity_residual(const Coefficients& c) { return std::abs(c.p_plus + c.p_minus + c.absorb - 1.0); }

double re_nu_residual(const DispersionRelation& disp, double gamma, double k, cplx nu) {
    const double wp = std::abs(disp.omega_prime(k));
    const double factor = gamma == 0.0 ? 1.0 : 1.0 + pi * gamma / wp;
    return std::abs(nu.real() - factor * std::norm(nu));
}

void ScatteringTable::write_csv(std::ostream& os) const {
    os << "k,re_nu,im_nu,g,p_plus,p_minus,identity_residual\n";
    os.precision(17);
    for (std::size_t i = 0; i < k.size(); ++i) {
        const auto& r = rows[i];
        os << k[i] << ',' << r.nu.real() << ',' << r.nu.imag() << ',' << r.absorb << ',' << r.p_plus << ','
           << r.p_minus << ',' << identity_residual[i] << '\n';
    }
}

ScatteringTable build_table(const DispersionRelation& disp, double gamma, std::size_t n_k, double delta_excl,
                            unsigned threads) {
    if (n_k < 64) throw ParameterError("build_table: n_k must be >= 64, got " + std::to_string(n_k));
    if (!(delta_excl > 0.0 && delta_excl < 0.25))
        throw ParameterError("build_table: delta_excl must lie in (0, 1/4), got " + num(delta_excl));
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ParameterError("build_table: gamma must be >= 0");

    ScatteringTable t;
    t.gamma = gamma;
    t.delta_excl = delta_excl;
    for (double k : DispersionRelation::uniform_grid(n_k))
        if (disp.distance_to_singular_set(k) >= delta_excl) t.k.push_back(k);
    const std::size_t n = t.k.size();
    t.rows.resize(n);
    t.identity_residual.resize(n);
    t.re_nu_residual.resize(n);

    parallel_for(n, threads, [&](std::size_t i) {
        const double k = t.k[i];
        t.rows[i] = scattering_at(disp, gamma, k);
        t.identity_residual[i] = identity_residual(t.rows[i]);
        t.re_nu_residual[i] = re_nu_residual(disp, gamma, k, t.rows[i].nu);
    });

    for (std::size_t i = 0; i < n; ++i) {
        const double k = t.k[i];
        const auto& r = t.rows[i];
        if (t.identity_residual[i] >= 1e-8)
            throw InvariantError("scattering table: |p+ + p- + g - 1| = " + num(t.identity_residual[i]) +
                                 " at k = " + num(k));
        if (r.absorb < -1e-12 || r.absorb > 1.0 + 1e-12)
            throw InvariantError("scattering table: g = " + num(r.absorb) + " outside [0, 1] at k = " + num(k));
        if (t.re_nu_residual[i] >= 1e-6)
            throw InvariantError("scattering table: Re nu identity residual " + num(t.re_nu_residual[i]) +
                                 " at k = " + num(k));
        t.max_identity_residual = std::max(t.max_identity_residual, t.identity_residual[i]);
        t.max_re_nu_residual = std::max(t.max_re_nu_residual, t.re_nu_residual[i]);
    }
    return t;
}

CrossCheck cross_check_laplace(const ScatteringTable& table, const MemoryKernel& mk, unsigned threads) {
    if (mk.gamma() != table.gamma) throw ParameterError("cross_check_laplace: kernel and table differ in gamma");
    CrossCheck out;
    out.diff.resize(table.size());
    parallel_for(table.size(), threads, [&](std::size_t i) {
        const double k = table.k[i];
        const auto eps = default_eps_list(mk.dispersion(), k);
        out.diff[i] = std::abs(table.rows[i].nu - nu_laplace_limit(mk, k, eps));
    });
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (out.diff[i] > out.max_abs_diff) {
            out.max_abs_diff = out.diff[i];
            out.worst_k = table.k[i];
        }
    }
    return out;
}

}  // namespace phonon
