#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "phonon/lattice_dispersion.hpp"
#include "phonon/memory_kernel.hpp"
#include "phonon/numerics.hpp"

namespace phonon {

struct ThermostatParams {
    double gamma = 0.0;
    double temperature = 0.0;

    void validate() const;
};

// Periodic chain of N sites (N a power of two). Array index i holds site
// y = i for i < N/2 and y = i - N otherwise, so the thermostat sits at index 0.
struct ChainState {
    std::size_t N = 0;
    std::vector<double> p;
    std::vector<double> q;
    double t_micro = 0.0;

    static ChainState zero(std::size_t N);
};

// Site label of array index i.
long site_of_index(std::size_t i, std::size_t N);
std::size_t index_of_site(long y, std::size_t N);

// Brownian increments of variance dt from a counter-based stream. A path with
// coarsen = c draws c increments of variance dt/c per call and returns their
// sum, so it follows the same Brownian path as the fine path of step dt/c.
class NoisePath {
public:
    NoisePath(std::uint64_t seed, double dt, std::uint64_t stream = 0, unsigned coarsen = 1);

    double next();
    std::uint64_t seed() const { return seed_; }
    double dt() const { return dt_; }

private:
    std::uint64_t seed_;
    double dt_;
    unsigned coarsen_;
    double fine_scale_;
    NormalSource normal_;
};

// What a step saw at the thermostat: p0 just before the Ornstein-Uhlenbeck
// substep and the Brownian increment used there.
struct StepRecord {
    double p0_mid = 0.0;
    double increment = 0.0;
};

struct Trajectory {
    double energy_start = 0.0;  // shadow energy, scaled like sum |psi_y|^2
    double energy_end = 0.0;
    double dt = 0.0;
    std::vector<StepRecord> steps;
};

// Symmetric splitting for the chain with a Langevin thermostat at site 0:
// half kick, half drift, exact Ornstein-Uhlenbeck update of p0, half drift,
// half kick. With gamma = 0 this is velocity Verlet.
class DirectSolver {
public:
    DirectSolver(DispersionRelation disp, std::size_t N, ThermostatParams params, double dt);

    void step(ChainState& s, NoisePath& noise, StepRecord* record = nullptr) const;
    void advance(ChainState& s, NoisePath& noise, std::size_t steps, Trajectory* trajectory = nullptr) const;

    // out = alpha * q (periodic)
    void coupling_force(std::span<const double> q, std::span<double> out) const;
    // H = 1/2 sum p^2 + 1/2 sum q (alpha * q)
    double energy(const ChainState& s) const;
    // sum p^2 + q.f - (dt^2/4) sum f^2 with f = alpha * q. Conserved exactly by
    // the scheme when gamma = 0; equals 2H up to O(dt^2).
    double shadow_energy(const ChainState& s) const;

    const DispersionRelation& dispersion() const { return disp_; }
    const ThermostatParams& params() const { return params_; }
    double dt() const { return dt_; }
    std::size_t size() const { return N_; }

private:
    void kick(ChainState& s, double h, std::vector<double>& f) const;

    DispersionRelation disp_;
    std::size_t N_;
    ThermostatParams params_;
    double dt_;
    std::vector<double> stencil_;  // alpha_0 .. alpha_R for short kernels
    double ou_decay_ = 1.0;
    double ou_scale_ = 0.0;
};

// Stable step bound dt * omega_max < 0.5.
double max_stable_dt(const DispersionRelation& disp);

// psi^_j = omega(j/N) q^_j + i p^_j with the transform sum_y f_y exp(-2 pi i j y / N).
std::vector<cplx> wave_spectrum(const ChainState& s, const DispersionRelation& disp);
// psi_y = (omega~ * q)_y + i p_y
std::vector<cplx> wave_field(const ChainState& s, const DispersionRelation& disp);
std::vector<cplx> wave_field_from_spectrum(std::span<const cplx> spectrum);
// Inverse of wave_field: p = Im psi, q^ = DFT(Re psi) / omega (zero mode of an acoustic chain set to 0).
ChainState state_from_wave_field(std::span<const cplx> psi, const DispersionRelation& disp);

// Independent Gibbs draw at temperature T: p iid N(0, T), q = sqrt(T) alpha^{-1/2} xi.
ChainState sample_gibbs(std::size_t N, const DispersionRelation& disp, double temperature, std::uint64_t seed,
                        std::uint64_t stream);

// sum |psi_y|^2 over sites within N/8 of the seam at y = -N/2, as a fraction of the total.
double seam_energy_fraction(std::span<const cplx> psi);

// Free momentum at site 0: (1/N) sum_j Im(psi^_j exp(-i omega_j t)) at t = n dt, n < count.
std::vector<double> free_momentum(std::span<const cplx> spectrum0, const DispersionRelation& disp,
                                  std::size_t count, double dt);

// p0(t) = int_{[0,t]} p0_free(t - s) g(ds) on the kernel grid up to t_end (deterministic branch).
std::vector<double> p0_volterra(std::span<const cplx> spectrum0, const MemoryKernel& mk, double t_end,
                                double temperature = 0.0);

// psi^(t, k_j) = exp(-i omega t) psi^(0, k_j) - i gamma int_0^t phi(t - s, k_j) p0_free(s) ds on the
// lattice grid k_j = j/N; t must lie on the kernel grid.
std::vector<cplx> psi_spectral_mild(std::span<const cplx> spectrum0, const MemoryKernel& mk, double t,
                                    double temperature = 0.0, unsigned threads = 1);

// |E_end - E_start - sum[(-2 gamma p0^2 + 2 gamma T) dt + 2 sqrt(2 gamma T) p0 dw]| / E_start
double energy_balance_residual(const Trajectory& trajectory, const ThermostatParams& params);

// Raw snapshot: N pairs (p_y, q_y) as little-endian 64-bit floats.
void write_snapshot(std::ostream& os, const ChainState& s);

}  // namespace phonon
