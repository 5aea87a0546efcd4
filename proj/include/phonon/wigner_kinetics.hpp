#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "phonon/interface_scattering.hpp"
#include "phonon/lattice_dispersion.hpp"
#include "phonon/microdynamics.hpp"
#include "phonon/numerics.hpp"

namespace phonon {

// ---------------------------------------------------------------- packets

enum class Envelope { cosine_bump, smooth_bump };

Envelope envelope_from_string(const std::string& name);
std::string to_string(Envelope e);

// Profile of half-width w, supported in |x| < w.
double envelope_value(Envelope e, double x, double width);
// int |envelope|^2 dx
double envelope_energy(Envelope e, double width);

struct WavePacketSpec {
    double eps = 0.0;  // 0 means 1/N
    double x_center = -0.25;
    double k_center = 0.25;
    Envelope envelope = Envelope::cosine_bump;
    double width = 0.1;
    double amplitude = 1.0;
    bool phase_random = true;
    double delta_excl = 0.02;
};

// Macroscopic scale of a lattice of N sites: spec.eps, or 1/N when unset.
double packet_eps(const WavePacketSpec& spec, std::size_t N);

// psi_y = A envelope(eps y - x_center) exp(2 pi i k_center y + i Theta); Theta
// uniform when phase_random. The state is recovered from psi.
std::vector<cplx> packet_wave_field(const WavePacketSpec& spec, std::size_t N, double theta);
ChainState sample_initial(const WavePacketSpec& spec, std::size_t N, const DispersionRelation& disp,
                          std::uint64_t seed, std::uint64_t stream = 2);
// Draws Theta from the given stream.
double sample_phase(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------- estimator

// W^(eta, k) = (eps/2) mean_samples conj(psi^(k - m/N)) psi^(k + m/N), eta = 2m/(eps N).
struct WignerEstimate {
    double eps = 0.0;
    std::size_t N = 0;
    int m_max = 0;
    std::size_t M = 0;
    double t_macro = 0.0;
    std::vector<double> eta;      // 2 m_max + 1 entries, m = -m_max .. m_max
    std::vector<double> k;        // j / N wrapped to [-1/2, 1/2)
    std::vector<cplx> values;     // row-major (m, j)
    std::vector<double> std_error;  // per entry

    cplx at(int m, std::size_t j) const { return values[index(m, j)]; }
    double standard_error(int m, std::size_t j) const { return std_error[index(m, j)]; }
    std::size_t index(int m, std::size_t j) const {
        return static_cast<std::size_t>(m + m_max) * N + j;
    }
    double eta_step() const { return 2.0 / (eps * static_cast<double>(N)); }
};

// spectra: one lattice spectrum psi^ per sample. eta_max must be a multiple of
// the shift grid 2/(eps N) and at most N/4 shifts.
WignerEstimate wigner_estimate(std::span<const std::vector<cplx>> spectra, double eps, double eta_max,
                               unsigned threads = 1);

// sum W^(eta, k) conj(G^(eta, k)) d eta dk, the lattice surrogate of <G, W>.
cplx pair_test_function(const WignerEstimate& w, const std::function<cplx(double eta, double k)>& g_hat);

// max over entries of |W^(eta, k)| (1 + eta^2)^{3/2 + kappa} divided by the
// same at eta = 0; bounded growth documents the decay exponent kappa.
double decay_constant(const WignerEstimate& w, double kappa);

// ---------------------------------------------------------------- limit

// Initial macroscopic distribution W0(x, k) with its Fourier transform in x,
// W0^(eta, k) = int exp(-2 pi i eta x) W0(x, k) dx, when that is a function.
struct InitialWigner {
    std::string name;
    std::function<double(double x, double k)> W;
    std::function<cplx(double eta, double k)> W_hat;  // empty for W0 = const != 0
    double support_center = 0.0;                     // spatial extent, for quadrature
    double support_halfwidth = 0.0;

    static InitialWigner equilibrium(double T);
    static InitialWigner zero();
    // A exp(-(x - xc)^2 / (2 sx^2)) b(k), b a torus Gaussian of width sk around kc
    static InitialWigner gaussian_packet(double xc, double sx, double kc, double sk, double A = 1.0);
};

class LimitSolution {
public:
    LimitSolution(InitialWigner W0, DispersionRelation disp, double gamma, double temperature,
                  double delta_excl = 0.02);

    const InitialWigner& initial() const { return W0_; }
    const DispersionRelation& dispersion() const { return disp_; }
    double gamma() const { return gamma_; }
    double temperature() const { return temperature_; }
    double delta_excl() const { return delta_excl_; }

    Coefficients coefficients_at(double k) const;
    // side = 0 uses the sign of x; side = +1 / -1 evaluates the one-sided limit at x.
    double W(double t, double x, double k, int side = 0) const;

private:
    InitialWigner W0_;
    DispersionRelation disp_;
    double gamma_;
    double temperature_;
    double delta_excl_;
    mutable std::mutex cache_mutex_;
    mutable std::map<double, Coefficients> cache_;
};

double limit_wigner(const LimitSolution& sol, double t, double x, double k);

struct BoundaryResiduals {
    double incoming_side = 0.0;  // relation for the outgoing wave at 0+ (k with v > 0)
    double mirrored = 0.0;       // relation for -k at 0-
};
BoundaryResiduals boundary_residual(const LimitSolution& sol, double t, double k);

// Finite-difference residual of d_t W + v d_x W at (t, x, k), away from x = 0 and the wedge front.
double transport_residual(const LimitSolution& sol, double t, double x, double k, double h = 1e-4);

// Closed-form Laplace-in-t, Fourier-in-x transform of the limit.
cplx laplace_fourier_limit(const LimitSolution& sol, double lambda, double eta, double k);
// The same transform computed by quadrature of limit_wigner over t in [0, t_max] and x.
cplx laplace_fourier_numeric(const LimitSolution& sol, double lambda, double eta, double k, double t_max = 40.0);

// ---------------------------------------------------------------- scattering run

struct ScatteringFractions {
    double transmitted = 0.0;
    double reflected = 0.0;
    double absorbed = 0.0;
    double interface_residual = 0.0;  // energy fraction in |x| < window
    double seam_fraction = 0.0;
};

// Energy bookkeeping of a T = 0 packet run. initial_energy is eps sum |psi_y(0)|^2.
ScatteringFractions scattering_fractions(std::span<const cplx> psi, const WavePacketSpec& spec,
                                         double initial_energy, double window_halfwidth = 0.1);

// ---------------------------------------------------------------- production

struct ProductionBin {
    double k_lo = 0.0, k_hi = 0.0;
    double plateau = 0.0;
    double standard_error = 0.0;
    double predicted = 0.0;  // mean of g(k) T over the bin
    double ratio = 0.0;
    double outside = 0.0;    // density beyond the wedge front
    std::size_t points = 0;
};

struct ProductionSpec {
    double eps = 0.0;
    double t_macro = 0.0;
    double temperature = 1.0;
    double gamma = 1.0;
    std::vector<std::pair<double, double>> bins;
    double wedge_lo = 0.1, wedge_hi = 0.9;
};

// Wedge-averaged Wigner k-density from Hann-windowed spectra of each path, for
// k and -k (mirror wedge), against g(k) T.
std::vector<ProductionBin> production_profile(std::span<const std::vector<cplx>> fields,
                                              const DispersionRelation& disp, const ProductionSpec& spec);

// ---------------------------------------------------------------- thermal series

// Exact ensemble mean of W^_eps(t, eta, k) for zero initial data, from the
// scheme's response to the scalar noise at site 0. Returns one series per shift m
// in ms, sampled every `stride` steps (macroscopic times in `times`).
struct ThermalSeries {
    std::vector<double> times;
    std::vector<std::vector<cplx>> values;  // [shift][sample]
    std::vector<double> eta;
};

ThermalSeries thermal_wigner_series(const DispersionRelation& disp, const ThermostatParams& params,
                                    std::size_t N, double eps, double dt, double t_macro_end, double k,
                                    std::span<const int> ms, std::size_t stride = 1);

// int_0^{t_end} exp(-lambda t) f(t) dt by the trapezoid rule on the samples.
cplx laplace_trapezoid(std::span<const double> times, std::span<const cplx> values, double lambda);

}  // namespace phonon
