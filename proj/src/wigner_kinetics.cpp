#include "phonon/wigner_kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "phonon/errors.hpp"
#include "phonon/fft.hpp"

namespace phonon {
namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

constexpr double limit_quad_tol = 1e-10;
constexpr unsigned limit_quad_depth = 10;

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

// Standard error of the mean.
double sem_of(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - mean) * (v[i] - mean);
    return std::sqrt(pairwise_sum(d) / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double hann(double x, double a, double b) {
    if (x <= a || x >= b) return 0.0;
    const double s = std::sin(pi * (x - a) / (b - a));
    return s * s;
}

// 0 below a, 1 above b, raised cosine in between.
double ramp(double x, double a, double b) {
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    const double s = std::sin(0.5 * pi * (x - a) / (b - a));
    return s * s;
}

}  // namespace

// ---------------------------------------------------------------- packets

Envelope envelope_from_string(const std::string& name) {
    if (name == "cosine_bump") return Envelope::cosine_bump;
    if (name == "smooth_bump") return Envelope::smooth_bump;
    throw ConfigError("unknown envelope '" + name + "' (expected cosine_bump or smooth_bump)");
}

std::string to_string(Envelope e) { return e == Envelope::cosine_bump ? "cosine_bump" : "smooth_bump"; }

double envelope_value(Envelope e, double x, double width) {
    const double r = x / width;
    if (!(std::abs(r) < 1.0)) return 0.0;
    if (e == Envelope::cosine_bump) {
        const double c = std::cos(0.5 * pi * r);
        return c * c;
    }
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

double envelope_energy(Envelope e, double width) {
    if (!(width > 0.0)) throw ParameterError("envelope width must be positive");
    if (e == Envelope::cosine_bump) return 0.75 * width;
    auto f = [&](double x) {
        const double v = envelope_value(e, x, width);
        return v * v;
    };
    return 2.0 * integrate(f, 0.0, width, 1e-14, 15);
}

double packet_eps(const WavePacketSpec& spec, std::size_t N) {
    if (spec.eps < 0.0) throw ParameterError("packet: eps must be >= 0");
    return spec.eps > 0.0 ? spec.eps : 1.0 / static_cast<double>(N);
}

std::vector<cplx> packet_wave_field(const WavePacketSpec& spec, std::size_t N, double theta) {
    const double eps = packet_eps(spec, N);
    std::vector<cplx> psi(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double y = static_cast<double>(site_of_index(i, N));
        const double a = spec.amplitude * envelope_value(spec.envelope, eps * y - spec.x_center, spec.width);
        psi[i] = a == 0.0 ? cplx{} : std::polar(a, two_pi * spec.k_center * y + theta);
    }
    return psi;
}

double sample_phase(std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    return two_pi * rng.uniform();
}

ChainState sample_initial(const WavePacketSpec& spec, std::size_t N, const DispersionRelation& disp,
                          std::uint64_t seed, std::uint64_t stream) {
    ChainState probe = ChainState::zero(N);  // validates N
    (void)probe;
    if (!(spec.width > 0.0)) throw ParameterError("packet: width must be positive");
    if (!(spec.amplitude >= 0.0)) throw ParameterError("packet: amplitude must be >= 0");
    const double eps = packet_eps(spec, N);
    const double L = eps * static_cast<double>(N);
    const double d = disp.distance_to_singular_set(spec.k_center);
    if (d < spec.delta_excl)
        throw ParameterError("packet: k_center = " + num(spec.k_center) + " lies within " + num(d) +
                             " of the singular set (delta_excl = " + num(spec.delta_excl) + ")");
    if (std::abs(spec.x_center) + spec.width >= 0.375 * L)
        throw ParameterError("packet: support [" + num(spec.x_center - spec.width) + ", " +
                             num(spec.x_center + spec.width) + "] does not fit in |x| < 3L/8 = " +
                             num(0.375 * L));
    if (spec.width < 4.0 * eps)
        throw ParameterError("packet: width spans fewer than 4 lattice sites");
    const double theta = spec.phase_random ? sample_phase(seed, stream) : 0.0;
    const auto psi = packet_wave_field(spec, N, theta);
    double e = 0.0;
    for (const auto& v : psi) e += std::norm(v);
    e *= eps;
    const double expect = spec.amplitude * spec.amplitude * envelope_energy(spec.envelope, spec.width);
    if (std::abs(e - expect) > 1e-6 * std::max(expect, 1e-300))
        throw InvariantError("packet: eps sum |psi|^2 = " + num(e) + " differs from int |envelope|^2 = " +
                             num(expect));
    return state_from_wave_field(psi, disp);
}

// ---------------------------------------------------------------- estimator

WignerEstimate wigner_estimate(std::span<const std::vector<cplx>> spectra, double eps, double eta_max,
                               unsigned threads) {
    if (spectra.empty()) throw ParameterError("wigner_estimate: no samples");
    const std::size_t N = spectra[0].size();
    for (const auto& s : spectra)
        if (s.size() != N) throw ParameterError("wigner_estimate: spectra differ in size");
    if (!(eps > 0.0)) throw ParameterError("wigner_estimate: eps must be positive");
    if (!(eta_max >= 0.0)) throw ParameterError("wigner_estimate: eta_max must be >= 0");
    WignerEstimate w;
    w.eps = eps;
    w.N = N;
    w.M = spectra.size();
    const double step = w.eta_step();
    const double mf = eta_max / step;
    if (std::abs(mf - std::round(mf)) > 1e-9 * std::max(1.0, mf))
        throw ParameterError("wigner_estimate: eta_max = " + num(eta_max) + " is not a multiple of 2/(eps N) = " +
                             num(step));
    w.m_max = static_cast<int>(std::round(mf));
    if (static_cast<std::size_t>(w.m_max) > N / 4)
        throw ParameterError("wigner_estimate: eta_max needs more than N/4 shifts");
    for (int m = -w.m_max; m <= w.m_max; ++m) w.eta.push_back(step * m);
    for (std::size_t j = 0; j < N; ++j) w.k.push_back(wrap_torus(static_cast<double>(j) / static_cast<double>(N)));
    const std::size_t rows = 2 * static_cast<std::size_t>(w.m_max) + 1;
    w.values.assign(rows * N, cplx{});
    w.std_error.assign(rows * N, 0.0);
    const long n = static_cast<long>(N);
    parallel_for(rows, resolve_threads(threads), [&](std::size_t r) {
        const int m = static_cast<int>(r) - w.m_max;
        std::vector<cplx> s(w.M);
        std::vector<double> d(w.M);
        for (std::size_t j = 0; j < N; ++j) {
            const auto a = static_cast<std::size_t>(((static_cast<long>(j) - m) % n + n) % n);
            const auto b = static_cast<std::size_t>(((static_cast<long>(j) + m) % n + n) % n);
            for (std::size_t i = 0; i < w.M; ++i) s[i] = 0.5 * eps * std::conj(spectra[i][a]) * spectra[i][b];
            const cplx mean = pairwise_sum(s) / static_cast<double>(w.M);
            double se = 0.0;
            if (w.M > 1) {
                for (std::size_t i = 0; i < w.M; ++i) d[i] = std::norm(s[i] - mean);
                se = std::sqrt(pairwise_sum(d) / static_cast<double>(w.M - 1) / static_cast<double>(w.M));
            }
            w.values[r * N + j] = mean;
            w.std_error[r * N + j] = se;
        }
    });
    return w;
}

cplx pair_test_function(const WignerEstimate& w, const std::function<cplx(double eta, double k)>& g_hat) {
    std::vector<cplx> terms(w.values.size());
    for (int m = -w.m_max; m <= w.m_max; ++m)
        for (std::size_t j = 0; j < w.N; ++j)
            terms[w.index(m, j)] = w.at(m, j) * std::conj(g_hat(w.eta[m + w.m_max], w.k[j]));
    return pairwise_sum(terms) * w.eta_step() / static_cast<double>(w.N);
}

double decay_constant(const WignerEstimate& w, double kappa) {
    double base = 0.0, top = 0.0;
    for (int m = -w.m_max; m <= w.m_max; ++m) {
        const double e = w.eta[m + w.m_max];
        const double weight = std::pow(1.0 + e * e, 1.5 + kappa);
        for (std::size_t j = 0; j < w.N; ++j) {
            const double a = std::abs(w.at(m, j));
            top = std::max(top, a * weight);
            if (m == 0) base = std::max(base, a);
        }
    }
    return base > 0.0 ? top / base : 0.0;
}

// ---------------------------------------------------------------- limit

InitialWigner InitialWigner::equilibrium(double T) {
    InitialWigner w;
    w.name = "equilibrium";
    w.W = [T](double, double) { return T; };
    if (T == 0.0) w.W_hat = [](double, double) { return cplx{}; };
    w.support_halfwidth = std::numeric_limits<double>::infinity();
    return w;
}

InitialWigner InitialWigner::zero() {
    InitialWigner w;
    w.name = "zero";
    w.W = [](double, double) { return 0.0; };
    w.W_hat = [](double, double) { return cplx{}; };
    return w;
}

InitialWigner InitialWigner::gaussian_packet(double xc, double sx, double kc, double sk, double A) {
    if (!(sx > 0.0) || !(sk > 0.0)) throw ParameterError("gaussian_packet: widths must be positive");
    InitialWigner w;
    w.name = "gaussian_packet";
    auto bk = [kc, sk](double k) {
        const double d = wrap_torus(k - kc);
        return std::exp(-d * d / (2.0 * sk * sk));
    };
    w.W = [=](double x, double k) {
        const double d = x - xc;
        return A * std::exp(-d * d / (2.0 * sx * sx)) * bk(k);
    };
    w.W_hat = [=](double eta, double k) {
        const double mag = A * sx * std::sqrt(two_pi) * std::exp(-2.0 * pi * pi * sx * sx * eta * eta) * bk(k);
        return std::polar(mag, -two_pi * eta * xc);
    };
    w.support_center = xc;
    w.support_halfwidth = 12.0 * sx;
    return w;
}

LimitSolution::LimitSolution(InitialWigner W0, DispersionRelation disp, double gamma, double temperature,
                             double delta_excl)
    : W0_(std::move(W0)), disp_(std::move(disp)), gamma_(gamma), temperature_(temperature), delta_excl_(delta_excl) {
    if (!(gamma >= 0.0)) throw ParameterError("limit: gamma must be >= 0");
    if (!(temperature >= 0.0)) throw ParameterError("limit: temperature must be >= 0");
    if (!(delta_excl > 0.0 && delta_excl < 0.25)) throw ParameterError("limit: delta_excl must lie in (0, 1/4)");
    if (!W0_.W) throw ParameterError("limit: initial distribution has no W");
}

Coefficients LimitSolution::coefficients_at(double k) const {
    const double d = disp_.distance_to_singular_set(k);
    if (d < delta_excl_)
        throw SingularZoneError("limit: k = " + num(k) + " lies within " + num(d) +
                                " of the singular set (delta_excl = " + num(delta_excl_) + ")");
    const double key = wrap_torus(k);
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const auto c = scattering_at(disp_, gamma_, key);
    std::lock_guard lock(cache_mutex_);
    cache_.emplace(key, c);
    return c;
}

double LimitSolution::W(double t, double x, double k, int side) const {
    if (!(t >= 0.0)) throw DomainError("limit: t must be >= 0");
    const auto c = coefficients_at(k);
    const double v = disp_.group_velocity(k);
    const double vt = v * t;
    const int s = side != 0 ? (side > 0 ? 1 : -1) : (x > 0.0 ? 1 : (x < 0.0 ? -1 : 0));
    bool inside = false;
    if (t > 0.0) inside = v > 0.0 ? (s > 0 && x <= vt) : (s < 0 && x >= vt);
    if (!inside) return W0_.W(x - vt, k);
    return c.absorb * temperature_ + c.p_plus * W0_.W(x - vt, k) + c.p_minus * W0_.W(vt - x, -k);
}

double limit_wigner(const LimitSolution& sol, double t, double x, double k) { return sol.W(t, x, k); }

BoundaryResiduals boundary_residual(const LimitSolution& sol, double t, double k) {
    const double kk = sol.dispersion().group_velocity(k) > 0.0 ? k : -k;
    const auto c = sol.coefficients_at(kk);
    const double gT = c.absorb * sol.temperature();
    BoundaryResiduals r;
    r.incoming_side = std::abs(sol.W(t, 0.0, kk, +1) - c.p_minus * sol.W(t, 0.0, -kk, +1) -
                               c.p_plus * sol.W(t, 0.0, kk, -1) - gT);
    const auto cm = sol.coefficients_at(-kk);
    r.mirrored = std::abs(sol.W(t, 0.0, -kk, -1) - cm.p_minus * sol.W(t, 0.0, kk, -1) -
                          cm.p_plus * sol.W(t, 0.0, -kk, +1) - cm.absorb * sol.temperature());
    return r;
}

double transport_residual(const LimitSolution& sol, double t, double x, double k, double h) {
    if (!(h > 0.0) || !(t > h)) throw ParameterError("transport_residual: need 0 < h < t");
    const double v = sol.dispersion().group_velocity(k);
    const double dt = (sol.W(t + h, x, k) - sol.W(t - h, x, k)) / (2.0 * h);
    const double dx = (sol.W(t, x + h, k) - sol.W(t, x - h, k)) / (2.0 * h);
    return std::abs(dt + v * dx);
}

cplx laplace_fourier_limit(const LimitSolution& sol, double lambda, double eta, double k) {
    if (!(lambda > 0.0)) throw DomainError("laplace_fourier_limit: lambda must be positive");
    const auto& W0 = sol.initial();
    if (!W0.W_hat)
        throw UnsupportedBranchError("laplace_fourier_limit: the initial distribution " + W0.name +
                                     " has no Fourier transform");
    const auto c = sol.coefficients_at(k);
    const double wp = sol.dispersion().omega_prime(k);
    const double v = std::abs(sol.dispersion().group_velocity(k));
    const cplx iunit{0.0, 1.0};
    const cplx den = lambda + iunit * wp * eta;
    cplx out = c.absorb * sol.temperature() * v / (lambda * den) + W0.W_hat(eta, k) / den;
    if (W0.support_halfwidth > 0.0) {
        const double H = 36.0 / W0.support_halfwidth;
        auto f_plus = [&](double e) { return W0.W_hat(e, k) / (lambda + iunit * wp * e); };
        auto f_minus = [&](double e) { return W0.W_hat(e, -k) / (lambda - iunit * wp * e); };
        const cplx Ip = integrate_piecewise(f_plus, -H, H, {0.0}, 1e-12, 12);
        const cplx Im = integrate_piecewise(f_minus, -H, H, {0.0}, 1e-12, 12);
        out += v * (c.p_plus - 1.0) / den * Ip + v * c.p_minus / den * Im;
    }
    return out;
}

cplx laplace_fourier_numeric(const LimitSolution& sol, double lambda, double eta, double k, double t_max) {
    if (!(lambda > 0.0)) throw DomainError("laplace_fourier_numeric: lambda must be positive");
    if (!(t_max > 0.0)) throw ParameterError("laplace_fourier_numeric: t_max must be positive");
    const auto& W0 = sol.initial();
    if (!std::isfinite(W0.support_halfwidth))
        throw UnsupportedBranchError("laplace_fourier_numeric: the initial distribution " + W0.name +
                                     " is not localised in x");
    (void)sol.coefficients_at(k);
    const double v = sol.dispersion().group_velocity(k);
    const double c0 = W0.support_center, hw = W0.support_halfwidth;
    auto fourier_x = [&](double t) {
        const double vt = v * t;
        double lo = std::min(0.0, vt), hi = std::max(0.0, vt);
        std::vector<double> breaks{0.0, vt};
        if (hw > 0.0) {
            for (double centre : {c0 + vt, vt - c0}) {
                lo = std::min(lo, centre - hw);
                hi = std::max(hi, centre + hw);
                breaks.push_back(centre);
            }
        }
        if (!(hi > lo)) return cplx{};
        auto g = [&](double x) { return std::polar(sol.W(t, x, k), -two_pi * eta * x); };
        return integrate_piecewise(g, lo, hi, breaks, limit_quad_tol, limit_quad_depth);
    };
    auto h = [&](double t) { return std::exp(-lambda * t) * fourier_x(t); };
    std::vector<double> tb;
    if (v != 0.0 && hw > 0.0)
        for (double m : {-1.0, 0.0, 1.0}) {
            const double tc = (std::abs(c0) + m * hw) / std::abs(v);
            if (tc > 0.0 && tc < t_max) tb.push_back(tc);
        }
    for (double t = 1.0; t < t_max; t *= 2.0) tb.push_back(t);
    return integrate_piecewise(h, 0.0, t_max, tb, 1e-9, limit_quad_depth);
}

// ---------------------------------------------------------------- scattering run

ScatteringFractions scattering_fractions(std::span<const cplx> psi, const WavePacketSpec& spec,
                                         double initial_energy, double window_halfwidth) {
    const std::size_t N = psi.size();
    if (N == 0) throw ParameterError("scattering_fractions: empty field");
    if (!(initial_energy > 0.0)) throw ParameterError("scattering_fractions: initial energy must be positive");
    if (!(window_halfwidth > 0.0)) throw ParameterError("scattering_fractions: window must be positive");
    const double eps = packet_eps(spec, N);
    const double nd = static_cast<double>(N);
    ScatteringFractions out;

    double centre = 0.0;
    std::vector<cplx> right(N), left(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double x = eps * static_cast<double>(site_of_index(i, N));
        if (std::abs(x) < window_halfwidth) centre += std::norm(psi[i]);
        right[i] = psi[i] * ramp(x, 0.5 * window_halfwidth, window_halfwidth);
        left[i] = psi[i] * ramp(-x, 0.5 * window_halfwidth, window_halfwidth);
    }
    out.interface_residual = eps * centre / initial_energy;
    out.seam_fraction = seam_energy_fraction(psi);

    const double flat = 16.0 / nd, edge = 32.0 / nd;
    auto mask = [&](double k, double kc) {
        const double d = std::abs(wrap_torus(k - kc));
        return 1.0 - ramp(d, flat, edge);
    };
    const auto R = fft::forward(right);
    const auto Lf = fft::forward(left);
    std::vector<double> et(N), er(N);
    for (std::size_t j = 0; j < N; ++j) {
        const double k = static_cast<double>(j) / nd;
        et[j] = mask(k, spec.k_center) * std::norm(R[j]);
        er[j] = mask(k, -spec.k_center) * std::norm(Lf[j]);
    }
    out.transmitted = eps * pairwise_sum(et) / nd / initial_energy;
    out.reflected = eps * pairwise_sum(er) / nd / initial_energy;
    out.absorbed = 1.0 - out.transmitted - out.reflected;

    if (out.interface_residual >= 0.01)
        throw InvalidRunError("scattering run: " + num(100.0 * out.interface_residual) +
                              "% of the energy is still within the interface window; run longer");
    if (out.seam_fraction > 1e-6)
        throw InvalidRunError("scattering run: energy fraction " + num(out.seam_fraction) +
                              " reached the lattice seam; use a larger N");
    return out;
}

// ---------------------------------------------------------------- production

std::vector<ProductionBin> production_profile(std::span<const std::vector<cplx>> fields,
                                              const DispersionRelation& disp, const ProductionSpec& spec) {
    if (fields.empty()) throw ParameterError("production: no paths");
    const std::size_t N = fields[0].size();
    for (const auto& f : fields)
        if (f.size() != N) throw ParameterError("production: paths differ in size");
    if (!(spec.t_macro > 0.0)) throw ParameterError("production: t_macro must be positive");
    if (!(spec.wedge_lo >= 0.0 && spec.wedge_lo < spec.wedge_hi && spec.wedge_hi <= 1.0))
        throw ParameterError("production: need 0 <= wedge_lo < wedge_hi <= 1");
    if (spec.bins.empty()) throw ParameterError("production: no k bins");
    const double eps = spec.eps > 0.0 ? spec.eps : 1.0 / static_cast<double>(N);
    const double nd = static_cast<double>(N);
    const double L = eps * nd;

    // grid points per bin; the slowest speed overall sets the common wedge window
    std::vector<std::vector<std::size_t>> points(spec.bins.size());
    std::vector<double> bin_fast(spec.bins.size(), 0.0);
    double v_slow = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < spec.bins.size(); ++b) {
        const auto [lo, hi] = spec.bins[b];
        if (!(lo < hi)) throw ParameterError("production: empty k bin [" + num(lo) + ", " + num(hi) + "]");
        for (std::size_t j = 0; j < N; ++j) {
            const double k = wrap_torus(static_cast<double>(j) / nd);
            if (k >= lo && k <= hi) {
                points[b].push_back(j);
                const double v = std::abs(disp.group_velocity(k));
                if (v == 0.0) throw ParameterError("production: bin contains a point with zero group velocity");
                v_slow = std::min(v_slow, v);
                bin_fast[b] = std::max(bin_fast[b], v);
            }
        }
        if (points[b].empty())
            throw ParameterError("production: k bin [" + num(lo) + ", " + num(hi) + "] has no lattice points");
    }
    const double a = spec.wedge_lo * v_slow * spec.t_macro, bnd = spec.wedge_hi * v_slow * spec.t_macro;
    if (bnd >= 0.375 * L) throw ParameterError("production: wedge window reaches the seam zone; use a larger N");

    auto windowed = [&](const std::vector<cplx>& psi, double lo, double hi, int side, double& norm) {
        std::vector<cplx> buf(N);
        norm = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double x = side * eps * static_cast<double>(site_of_index(i, N));
            const double c = hann(x, lo, hi);
            buf[i] = c * psi[i];
            norm += c * c;
        }
        return fft::forward(buf);
    };

    std::vector<ProductionBin> out(spec.bins.size());
    for (std::size_t b = 0; b < spec.bins.size(); ++b) {
        auto& bin = out[b];
        bin.k_lo = spec.bins[b].first;
        bin.k_hi = spec.bins[b].second;
        bin.points = points[b].size();
        const double kmid = wrap_torus(static_cast<double>(points[b][points[b].size() / 2]) / nd);
        const int side = disp.group_velocity(kmid) > 0.0 ? 1 : -1;
        std::vector<double> pred;
        for (std::size_t j : points[b]) {
            const double k = wrap_torus(static_cast<double>(j) / nd);
            pred.push_back(scattering_at(disp, spec.gamma, k).absorb * spec.temperature);
        }
        bin.predicted = mean_of(pred);

        // beyond the front of the fastest point in the bin
        const double oa = 1.1 * bin_fast[b] * spec.t_macro;
        const double ob = std::min(oa + (bnd - a), 0.375 * L);
        const bool have_outside = ob - oa >= 0.5 * (bnd - a);  // a narrow window would smear k
        std::vector<double> per_path(fields.size()), per_path_out(fields.size());
        for (std::size_t p = 0; p < fields.size(); ++p) {
            double acc = 0.0, acc_out = 0.0;
            for (int mirror : {1, -1}) {
                double nrm = 0.0;
                const auto spec_w = windowed(fields[p], a, bnd, mirror * side, nrm);
                double nrm_o = 0.0;
                std::vector<cplx> spec_o;
                if (have_outside) spec_o = windowed(fields[p], oa, ob, mirror * side, nrm_o);
                for (std::size_t j : points[b]) {
                    const std::size_t jj = mirror > 0 ? j : (N - j) % N;
                    acc += std::norm(spec_w[jj]) / (2.0 * nrm);
                    if (have_outside) acc_out += std::norm(spec_o[jj]) / (2.0 * nrm_o);
                }
            }
            const double cnt = 2.0 * static_cast<double>(points[b].size());
            per_path[p] = acc / cnt;
            per_path_out[p] = acc_out / cnt;
        }
        bin.plateau = mean_of(per_path);
        bin.standard_error = sem_of(per_path, bin.plateau);
        bin.outside = have_outside ? mean_of(per_path_out) : std::numeric_limits<double>::quiet_NaN();
        bin.ratio = bin.predicted != 0.0 ? bin.plateau / bin.predicted : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

// ---------------------------------------------------------------- thermal series

ThermalSeries thermal_wigner_series(const DispersionRelation& disp, const ThermostatParams& params, std::size_t N,
                                    double eps, double dt, double t_macro_end, double k, std::span<const int> ms,
                                    std::size_t stride) {
    params.validate();
    if (!(eps > 0.0)) throw ParameterError("thermal series: eps must be positive");
    if (!(t_macro_end > 0.0)) throw ParameterError("thermal series: t_macro_end must be positive");
    if (stride == 0) throw ParameterError("thermal series: stride must be >= 1");
    if (ms.empty()) throw ParameterError("thermal series: no shifts");
    // response of the noiseless scheme; the noise enters only through p0
    const DirectSolver solver(disp, N, {params.gamma, 0.0}, dt);
    const double decay = std::exp(-params.gamma * dt);
    const double var = params.temperature * (1.0 - decay * decay);
    const auto steps = static_cast<std::size_t>(std::llround(t_macro_end / (eps * dt)));
    const long n = static_cast<long>(N);
    const long j0 = std::lround(k * static_cast<double>(N));

    ThermalSeries out;
    for (int m : ms) out.eta.push_back(2.0 * m / (eps * static_cast<double>(N)));
    out.values.assign(ms.size(), {});
    std::vector<std::pair<std::size_t, std::size_t>> idx;
    for (int m : ms)
        idx.emplace_back(static_cast<std::size_t>(((j0 - m) % n + n) % n),
                         static_cast<std::size_t>(((j0 + m) % n + n) % n));

    // state right after a unit p0 kick at the mid-step point
    ChainState y = ChainState::zero(N);
    const double h = 0.5 * dt;
    y.p[0] = 1.0;
    y.q[0] += h;
    {
        std::vector<double> f(N);
        solver.coupling_force(y.q, f);
        for (std::size_t i = 0; i < N; ++i) y.p[i] -= h * f[i];
    }
    NoisePath silent(0, dt);
    std::vector<cplx> acc(ms.size());
    auto record = [&](std::size_t step) {
        out.times.push_back(eps * dt * static_cast<double>(step));
        for (std::size_t s = 0; s < ms.size(); ++s) out.values[s].push_back(0.5 * eps * var * acc[s]);
    };
    record(0);
    for (std::size_t r = 0; r < steps; ++r) {
        const auto spec = wave_spectrum(y, disp);
        for (std::size_t s = 0; s < ms.size(); ++s) acc[s] += std::conj(spec[idx[s].first]) * spec[idx[s].second];
        if ((r + 1) % stride == 0) record(r + 1);
        if (r + 1 < steps) solver.step(y, silent);
    }
    return out;
}

cplx laplace_trapezoid(std::span<const double> times, std::span<const cplx> values, double lambda) {
    if (times.size() != values.size() || times.size() < 2)
        throw ParameterError("laplace_trapezoid: need at least two matching samples");
    cplx s{};
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double a = times[i - 1], b = times[i];
        s += 0.5 * (b - a) * (std::exp(-lambda * a) * values[i - 1] + std::exp(-lambda * b) * values[i]);
    }
    return s;
}

}  // namespace phonon
