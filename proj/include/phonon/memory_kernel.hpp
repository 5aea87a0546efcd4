#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "phonon/lattice_dispersion.hpp"
#include "phonon/numerics.hpp"

namespace phonon {

// Equispaced trapezoid node count on the torus used to evaluate J(t).
std::size_t j_node_count(const DispersionRelation& disp, double t);

// J(n dt) for n = 0 .. count-1. Nodes rotate by a fixed phase per step and are
// resynchronised with exact sines and cosines every 1024 steps; the node count
// follows the time reached by each block.
std::vector<double> sample_J(const DispersionRelation& disp, std::size_t count, double dt);

// Product-trapezoid march of g + gamma (J * g) = -gamma J on the grid of J.
// Divide and conquer with FFT products, O(n log^2 n).
std::vector<double> march_volterra(std::span<const double> J, double gamma, double dt);

// c_n = int_0^{n dt} a(n dt - s) b(s) ds for every n, composite Simpson
// (3/8 rule on the last three cells for odd n, trapezoid at n = 1).
std::vector<double> convolve_simpson(std::span<const double> a, std::span<const double> b, double dt);

struct SeriesValue {
    double value = 0.0;
    double truncation_bound = 0.0;
};

// Thermostat memory objects of one dispersion relation and friction gamma:
// J(t), its Laplace transform, the resolvent g~, and the density g* of the
// resolvent measure g(ds) = delta_0(ds) + g*(s) ds, sampled on [0, horizon].
class MemoryKernel {
public:
    MemoryKernel(DispersionRelation disp, double gamma, double horizon, double dt_kernel = 1e-3);

    const DispersionRelation& dispersion() const { return disp_; }
    double gamma() const { return gamma_; }
    double horizon() const { return horizon_; }
    double dt() const { return dt_; }
    std::size_t sample_count() const { return j_.size(); }

    const std::vector<double>& j_samples() const { return j_; }
    const std::vector<double>& gstar_samples() const { return gstar_; }

    double J_eval(double t) const;
    cplx J_laplace(cplx lambda) const;
    cplx g_tilde(cplx lambda) const;

    // Fresh march on its own grid (J resampled with step dt).
    std::vector<double> g_star_volterra(double t_end, double dt) const;

    // sum_{n=1}^{n_max} (-gamma)^n J^{*n}(t) on the stored grid; t must be a grid point.
    SeriesValue g_star_series(double t, int n_max) const;
    // The same partial sum at every grid point up to t_end.
    std::vector<double> g_star_series_samples(double t_end, int n_max) const;

    // phi(t, k) = exp(-i omega t) (1 + int_0^t exp(i omega s) g*(s) ds)
    cplx phi_eval(double t, double k) const;
    // phi(n dt, k) for n = 0 .. count-1
    std::vector<cplx> phi_samples(double k, std::size_t count) const;

    // int_{[0, t]} exp(i omega(k) s) g(ds), atom included.
    cplx boundary_transform(double k, double t) const;

    // max_n |g*_n + gamma (J * g*)_n + gamma J_n| with the convolution evaluated by Simpson.
    double volterra_residual() const;

private:
    std::size_t index_of(double t, const char* what) const;

    DispersionRelation disp_;
    double gamma_;
    double horizon_;
    double dt_;
    std::vector<double> j_;
    std::vector<double> gstar_;
};

}  // namespace phonon
