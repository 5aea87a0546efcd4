#include "phonon/microdynamics.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>

#include "phonon/errors.hpp"
#include "phonon/fft.hpp"

namespace phonon {
namespace {

constexpr int max_stencil_radius = 16;

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

void check_size(std::size_t N) {
    if (N == 0 || !std::has_single_bit(N))
        throw ParameterError("lattice size N must be a power of two, got " + std::to_string(N));
}

// Generic periodic convolution through the spectrum (long kernels).
void spectral_force(const DispersionRelation& disp, std::span<const double> q, std::span<double> out) {
    const std::size_t N = q.size();
    auto spec = fft::forward_real(q);
    for (std::size_t j = 0; j < N; ++j)
        spec[j] *= disp.kernel().symbol(static_cast<double>(j) / static_cast<double>(N));
    const auto back = fft::backward(spec);
    for (std::size_t i = 0; i < N; ++i) out[i] = back[i].real() / static_cast<double>(N);
}

}  // namespace

void ThermostatParams::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ParameterError("thermostat: gamma must be >= 0");
    if (!(temperature >= 0.0) || !std::isfinite(temperature))
        throw ParameterError("thermostat: temperature must be >= 0");
}

ChainState ChainState::zero(std::size_t N) {
    check_size(N);
    return {N, std::vector<double>(N, 0.0), std::vector<double>(N, 0.0), 0.0};
}

long site_of_index(std::size_t i, std::size_t N) {
    return i < N / 2 || N == 1 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(N);
}

std::size_t index_of_site(long y, std::size_t N) {
    const long n = static_cast<long>(N);
    return static_cast<std::size_t>(((y % n) + n) % n);
}

NoisePath::NoisePath(std::uint64_t seed, double dt, std::uint64_t stream, unsigned coarsen)
    : seed_(seed), dt_(dt), coarsen_(coarsen), normal_(seed, stream) {
    if (!(dt > 0.0)) throw ParameterError("noise path: dt must be positive");
    if (coarsen == 0) throw ParameterError("noise path: coarsen must be >= 1");
    fine_scale_ = std::sqrt(dt / static_cast<double>(coarsen));
}

double NoisePath::next() {
    double s = 0.0;
    for (unsigned c = 0; c < coarsen_; ++c) s += fine_scale_ * normal_();
    return s;
}

double max_stable_dt(const DispersionRelation& disp) { return 0.5 / disp.omega_max(); }

DirectSolver::DirectSolver(DispersionRelation disp, std::size_t N, ThermostatParams params, double dt)
    : disp_(std::move(disp)), N_(N), params_(params), dt_(dt) {
    check_size(N);
    params_.validate();
    if (!(dt > 0.0) || !(dt * disp_.omega_max() < 0.5))
        throw ParameterError("direct solver: dt = " + num(dt) + " violates dt * omega_max < 0.5 (omega_max = " +
                             num(disp_.omega_max()) + ")");
    if (disp_.kernel().radius() <= max_stencil_radius) {
        stencil_.resize(static_cast<std::size_t>(disp_.kernel().radius()) + 1);
        for (std::size_t y = 0; y < stencil_.size(); ++y) stencil_[y] = disp_.kernel().coefficient(static_cast<int>(y));
    }
    ou_decay_ = std::exp(-params_.gamma * dt_);
    ou_scale_ = std::sqrt(params_.temperature * (1.0 - ou_decay_ * ou_decay_) / dt_);
}

void DirectSolver::coupling_force(std::span<const double> q, std::span<double> out) const {
    if (q.size() != N_ || out.size() != N_) throw ParameterError("coupling_force: size mismatch");
    if (stencil_.empty()) {
        spectral_force(disp_, q, out);
        return;
    }
    const long n = static_cast<long>(N_);
    const long R = static_cast<long>(stencil_.size()) - 1;
    if (n > 2 * R) {
        for (long i = R; i < n - R; ++i) {
            double s = stencil_[0] * q[i];
            for (long y = 1; y <= R; ++y) s += stencil_[y] * (q[i - y] + q[i + y]);
            out[i] = s;
        }
        auto wrapped = [&](long i) {
            double s = stencil_[0] * q[i];
            for (long y = 1; y <= R; ++y) s += stencil_[y] * (q[(i - y + n) % n] + q[(i + y) % n]);
            out[i] = s;
        };
        for (long i = 0; i < R; ++i) wrapped(i);
        for (long i = n - R; i < n; ++i) wrapped(i);
        return;
    }
    // tiny rings: several coefficients fold onto the same site
    for (long i = 0; i < n; ++i) {
        double s = stencil_[0] * q[i];
        for (long y = 1; y <= R; ++y)
            s += stencil_[y] * (q[static_cast<std::size_t>(((i - y) % n + n) % n)] +
                                q[static_cast<std::size_t>((i + y) % n)]);
        out[i] = s;
    }
}

double DirectSolver::energy(const ChainState& s) const {
    std::vector<double> f(N_);
    coupling_force(s.q, f);
    double e = 0.0;
    for (std::size_t i = 0; i < N_; ++i) e += s.p[i] * s.p[i] + s.q[i] * f[i];
    return 0.5 * e;
}

double DirectSolver::shadow_energy(const ChainState& s) const {
    std::vector<double> f(N_);
    coupling_force(s.q, f);
    double e = 0.0;
    const double c = 0.25 * dt_ * dt_;
    for (std::size_t i = 0; i < N_; ++i) e += s.p[i] * s.p[i] + s.q[i] * f[i] - c * f[i] * f[i];
    return e;
}

void DirectSolver::kick(ChainState& s, double h, std::vector<double>& f) const {
    for (std::size_t i = 0; i < N_; ++i) s.p[i] -= h * f[i];
}

void DirectSolver::step(ChainState& s, NoisePath& noise, StepRecord* record) const {
    if (s.N != N_ || s.p.size() != N_ || s.q.size() != N_) throw ParameterError("step: state size mismatch");
    ChainState& st = s;
    std::vector<double> f(N_);
    coupling_force(st.q, f);
    const double h = 0.5 * dt_;
    kick(st, h, f);
    for (std::size_t i = 0; i < N_; ++i) st.q[i] += h * st.p[i];
    const double p0 = st.p[0];
    const double dw = noise.next();
    st.p[0] = ou_decay_ * p0 + ou_scale_ * dw;
    for (std::size_t i = 0; i < N_; ++i) st.q[i] += h * st.p[i];
    coupling_force(st.q, f);
    kick(st, h, f);
    st.t_micro += dt_;
    if (record) *record = {p0, dw};
}

void DirectSolver::advance(ChainState& s, NoisePath& noise, std::size_t steps, Trajectory* trajectory) const {
    if (s.N != N_ || s.p.size() != N_ || s.q.size() != N_) throw ParameterError("advance: state size mismatch");
    if (std::abs(noise.dt() - dt_) > 1e-15 * dt_) throw ParameterError("advance: noise path dt differs from solver dt");
    if (trajectory) {
        trajectory->dt = dt_;
        trajectory->energy_start = shadow_energy(s);
        trajectory->steps.clear();
        trajectory->steps.reserve(steps);
    }
    std::vector<double> f(N_);
    coupling_force(s.q, f);
    const double h = 0.5 * dt_;
    double* p = s.p.data();
    double* q = s.q.data();
    for (std::size_t n = 0; n < steps; ++n) {
        for (std::size_t i = 0; i < N_; ++i) {
            p[i] -= h * f[i];
            q[i] += h * p[i];
        }
        const double p0 = p[0];
        const double dw = noise.next();
        p[0] = ou_decay_ * p0 + ou_scale_ * dw;
        for (std::size_t i = 0; i < N_; ++i) q[i] += h * p[i];
        coupling_force(s.q, f);
        for (std::size_t i = 0; i < N_; ++i) p[i] -= h * f[i];
        if (trajectory) trajectory->steps.push_back({p0, dw});
    }
    s.t_micro += static_cast<double>(steps) * dt_;
    if (trajectory) trajectory->energy_end = shadow_energy(s);
}

std::vector<cplx> wave_spectrum(const ChainState& s, const DispersionRelation& disp) {
    check_size(s.N);
    const auto qh = fft::forward_real(s.q);
    const auto ph = fft::forward_real(s.p);
    std::vector<cplx> out(s.N);
    const cplx iunit{0.0, 1.0};
    for (std::size_t j = 0; j < s.N; ++j)
        out[j] = disp.omega(static_cast<double>(j) / static_cast<double>(s.N)) * qh[j] + iunit * ph[j];
    return out;
}

std::vector<cplx> wave_field_from_spectrum(std::span<const cplx> spectrum) {
    auto psi = fft::backward(spectrum);
    const double scale = 1.0 / static_cast<double>(spectrum.size());
    for (auto& v : psi) v *= scale;
    return psi;
}

std::vector<cplx> wave_field(const ChainState& s, const DispersionRelation& disp) {
    return wave_field_from_spectrum(wave_spectrum(s, disp));
}

ChainState state_from_wave_field(std::span<const cplx> psi, const DispersionRelation& disp) {
    const std::size_t N = psi.size();
    ChainState s = ChainState::zero(N);
    std::vector<double> re(N);
    for (std::size_t i = 0; i < N; ++i) {
        re[i] = psi[i].real();
        s.p[i] = psi[i].imag();
    }
    auto spec = fft::forward_real(re);
    for (std::size_t j = 0; j < N; ++j) {
        const double w = disp.omega(static_cast<double>(j) / static_cast<double>(N));
        spec[j] = w > 0.0 ? spec[j] / w : cplx{};
    }
    const auto back = fft::backward(spec);
    for (std::size_t i = 0; i < N; ++i) s.q[i] = back[i].real() / static_cast<double>(N);
    return s;
}

ChainState sample_gibbs(std::size_t N, const DispersionRelation& disp, double temperature, std::uint64_t seed,
                        std::uint64_t stream) {
    if (!(temperature >= 0.0)) throw ParameterError("sample_gibbs: temperature must be >= 0");
    ChainState s = ChainState::zero(N);
    NormalSource normal(seed, stream);
    const double root_t = std::sqrt(temperature);
    for (std::size_t i = 0; i < N; ++i) s.p[i] = root_t * normal();
    std::vector<double> xi(N);
    for (std::size_t i = 0; i < N; ++i) xi[i] = normal();
    auto spec = fft::forward_real(xi);
    for (std::size_t j = 0; j < N; ++j) {
        const double w = disp.omega(static_cast<double>(j) / static_cast<double>(N));
        spec[j] = w > 0.0 ? spec[j] / w : cplx{};
    }
    const auto back = fft::backward(spec);
    for (std::size_t i = 0; i < N; ++i) s.q[i] = root_t * back[i].real() / static_cast<double>(N);
    return s;
}

double seam_energy_fraction(std::span<const cplx> psi) {
    const std::size_t N = psi.size();
    const long edge = static_cast<long>(N / 2) - static_cast<long>(N / 8);
    double seam = 0.0, total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double e = std::norm(psi[i]);
        total += e;
        if (std::abs(site_of_index(i, N)) >= edge) seam += e;
    }
    return total > 0.0 ? seam / total : 0.0;
}

std::vector<double> free_momentum(std::span<const cplx> spectrum0, const DispersionRelation& disp,
                                  std::size_t count, double dt) {
    const std::size_t N = spectrum0.size();
    std::vector<double> omega(N);
    for (std::size_t j = 0; j < N; ++j) omega[j] = disp.omega(static_cast<double>(j) / static_cast<double>(N));
    std::vector<double> out(count);
    std::vector<double> terms(N);
    for (std::size_t n = 0; n < count; ++n) {
        const double t = static_cast<double>(n) * dt;
        for (std::size_t j = 0; j < N; ++j) terms[j] = (spectrum0[j] * std::polar(1.0, -omega[j] * t)).imag();
        out[n] = pairwise_sum(terms) / static_cast<double>(N);
    }
    return out;
}

namespace {

void require_deterministic(double temperature, const char* what) {
    if (temperature != 0.0)
        throw UnsupportedBranchError(std::string(what) +
                                     ": only the T = 0 branch is available; use the direct solver for T > 0");
}

std::size_t grid_steps(const MemoryKernel& mk, double t, const char* what) {
    if (!(t >= 0.0)) throw DomainError(std::string(what) + ": t must be >= 0");
    if (t > mk.horizon() * (1.0 + 1e-12))
        throw RangeError(std::string(what) + ": t = " + num(t) + " is beyond the kernel horizon " +
                         num(mk.horizon()) + "; rebuild the kernel with a longer horizon");
    const double x = t / mk.dt();
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9 * std::max(1.0, x))
        throw ParameterError(std::string(what) + ": t = " + num(t) + " is not a multiple of dt_kernel");
    return static_cast<std::size_t>(r);
}

}  // namespace

std::vector<double> p0_volterra(std::span<const cplx> spectrum0, const MemoryKernel& mk, double t_end,
                                double temperature) {
    require_deterministic(temperature, "p0_volterra");
    const std::size_t n = grid_steps(mk, t_end, "p0_volterra") + 1;
    const auto free = free_momentum(spectrum0, mk.dispersion(), n, mk.dt());
    if (mk.gamma() == 0.0) return free;
    const std::span<const double> g(mk.gstar_samples().data(), n);
    const auto c = fft::linear_convolve(free, g);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double trap = i == 0 ? 0.0 : c[i] - 0.5 * (free[i] * g[0] + free[0] * g[i]);
        out[i] = free[i] + mk.dt() * trap;
    }
    return out;
}

std::vector<cplx> psi_spectral_mild(std::span<const cplx> spectrum0, const MemoryKernel& mk, double t,
                                    double temperature, unsigned threads) {
    require_deterministic(temperature, "psi_spectral_mild");
    const std::size_t steps = grid_steps(mk, t, "psi_spectral_mild");
    const std::size_t N = spectrum0.size();
    const auto& disp = mk.dispersion();
    std::vector<cplx> out(N);
    const auto free = free_momentum(spectrum0, disp, steps + 1, mk.dt());
    const double gamma = mk.gamma();
    const cplx iunit{0.0, 1.0};
    parallel_for(N, threads, [&](std::size_t j) {
        const double k = static_cast<double>(j) / static_cast<double>(N);
        cplx v = std::polar(1.0, -disp.omega(k) * t) * spectrum0[j];
        if (gamma != 0.0 && steps > 0) {
            const auto phi = mk.phi_samples(k, steps + 1);
            cplx acc = 0.5 * (phi[steps] * free[0] + phi[0] * free[steps]);
            for (std::size_t m = 1; m < steps; ++m) acc += phi[steps - m] * free[m];
            v -= iunit * gamma * mk.dt() * acc;
        }
        out[j] = v;
    });
    return out;
}

double energy_balance_residual(const Trajectory& trajectory, const ThermostatParams& params) {
    params.validate();
    if (trajectory.steps.empty()) throw ParameterError("energy_balance_residual: trajectory has no recorded steps");
    if (!(trajectory.energy_start > 0.0)) throw ParameterError("energy_balance_residual: initial energy must be positive");
    const double dt = trajectory.dt;
    const double g = params.gamma, T = params.temperature;
    const double noise_coef = 2.0 * std::sqrt(2.0 * g * T);
    std::vector<double> terms(trajectory.steps.size());
    for (std::size_t n = 0; n < terms.size(); ++n) {
        const auto& r = trajectory.steps[n];
        terms[n] = (-2.0 * g * r.p0_mid * r.p0_mid + 2.0 * g * T) * dt + noise_coef * r.p0_mid * r.increment;
    }
    const double model = pairwise_sum(terms);
    return std::abs(trajectory.energy_end - trajectory.energy_start - model) / trajectory.energy_start;
}

void write_snapshot(std::ostream& os, const ChainState& s) {
    static_assert(sizeof(double) == 8);
    auto put = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        os.write(reinterpret_cast<const char*>(&bits), 8);
    };
    for (std::size_t i = 0; i < s.N; ++i) {
        put(s.p[i]);
        put(s.q[i]);
    }
}

}  // namespace phonon
