#include "phonon/memory_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "phonon/errors.hpp"
#include "phonon/fft.hpp"

namespace phonon {
namespace {

constexpr std::size_t resync_block = 1024;

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

std::size_t j_node_count(const DispersionRelation& disp, double t) {
    const double phase = std::ceil(std::max(0.0, t) * disp.omega_max());
    std::size_t n = std::max<std::size_t>(2048, 64 * static_cast<std::size_t>(phase));
    return n + (n & 1u);
}

std::vector<double> sample_J(const DispersionRelation& disp, std::size_t count, double dt) {
    std::vector<double> out(count, 0.0);
    std::vector<double> zr, zi, rr, ri, w;
    for (std::size_t s0 = 0; s0 < count; s0 += resync_block) {
        const std::size_t s1 = std::min(count, s0 + resync_block);
        const std::size_t n = j_node_count(disp, static_cast<double>(s1 - 1) * dt);
        const std::size_t half = n / 2 + 1;
        zr.resize(half);
        zi.resize(half);
        rr.resize(half);
        ri.resize(half);
        w.resize(half);
        const double t0 = static_cast<double>(s0) * dt;
        for (std::size_t j = 0; j < half; ++j) {
            const double om = disp.omega(static_cast<double>(j) / static_cast<double>(n));
            zr[j] = std::cos(om * t0);
            zi[j] = std::sin(om * t0);
            rr[j] = std::cos(om * dt);
            ri[j] = std::sin(om * dt);
            // evenness folds the torus onto [0, 1/2]
            w[j] = (j == 0 || j == half - 1 ? 1.0 : 2.0) / static_cast<double>(n);
        }
        for (std::size_t s = s0; s < s1; ++s) {
            double acc[4] = {0.0, 0.0, 0.0, 0.0};
            std::size_t j = 0;
            for (; j + 4 <= half; j += 4) {
                for (std::size_t l = 0; l < 4; ++l) {
                    const std::size_t i = j + l;
                    acc[l] += w[i] * zr[i];
                    const double nr = zr[i] * rr[i] - zi[i] * ri[i];
                    zi[i] = zr[i] * ri[i] + zi[i] * rr[i];
                    zr[i] = nr;
                }
            }
            for (; j < half; ++j) {
                acc[0] += w[j] * zr[j];
                const double nr = zr[j] * rr[j] - zi[j] * ri[j];
                zi[j] = zr[j] * ri[j] + zi[j] * rr[j];
                zr[j] = nr;
            }
            out[s] = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        }
    }
    return out;
}

std::vector<double> march_volterra(std::span<const double> J, double gamma, double dt) {
    const std::size_t n = J.size();
    std::vector<double> g(n, 0.0), h(n, 0.0), conv(n, 0.0);
    if (n == 0 || gamma == 0.0) return g;
    const double denom = 1.0 + 0.5 * gamma * dt * J[0];
    auto finish = [&](std::size_t i) {
        // the convolution over [0, 0] is empty, so g_0 = -gamma J_0 exactly
        g[i] = i == 0 ? -gamma * J[0] : (-gamma * J[i] - gamma * dt * conv[i]) / denom;
        h[i] = i == 0 ? 0.5 * g[i] : g[i];
    };
    std::function<void(std::size_t, std::size_t)> solve = [&](std::size_t l, std::size_t r) {
        if (r - l <= 64) {
            for (std::size_t i = l; i < r; ++i) {
                double s = 0.0;
                for (std::size_t m = l; m < i; ++m) s += J[i - m] * h[m];
                conv[i] += s;
                finish(i);
            }
            return;
        }
        const std::size_t mid = l + (r - l) / 2;
        solve(l, mid);
        const auto part = fft::linear_convolve(std::span<const double>(h).subspan(l, mid - l),
                                               J.subspan(0, r - l));
        for (std::size_t i = mid; i < r; ++i) conv[i] += part[i - l];
        solve(mid, r);
    };
    solve(0, n);
    return g;
}

std::vector<double> convolve_simpson(std::span<const double> a, std::span<const double> b, double dt) {
    const std::size_t n = std::min(a.size(), b.size());
    std::vector<double> c(n, 0.0);
    if (n < 2) return c;
    std::vector<double> b_odd(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t m = 0; m < n; m += 2) b_odd[m] = 0.0;
    const auto s_all = fft::linear_convolve(a.first(n), b.first(n));
    const auto s_odd = fft::linear_convolve(a.first(n), b_odd);
    auto simpson_weight = [](std::size_t m) { return m % 2 ? 4.0 : 2.0; };
    c[1] = 0.5 * dt * (a[1] * b[0] + a[0] * b[1]);
    for (std::size_t i = 2; i < n; ++i) {
        double s = 2.0 * s_all[i] + 2.0 * s_odd[i];
        if (i % 2 == 0) {
            s -= a[i] * b[0] + a[0] * b[i];
            c[i] = dt / 3.0 * s;
        } else {
            for (std::size_t m = i - 2; m <= i; ++m) s -= simpson_weight(m) * a[i - m] * b[m];
            s -= a[i] * b[0] + a[3] * b[i - 3];
            c[i] = dt / 3.0 * s +
                   3.0 * dt / 8.0 *
                       (a[3] * b[i - 3] + 3.0 * a[2] * b[i - 2] + 3.0 * a[1] * b[i - 1] + a[0] * b[i]);
        }
    }
    return c;
}

MemoryKernel::MemoryKernel(DispersionRelation disp, double gamma, double horizon, double dt_kernel)
    : disp_(std::move(disp)), gamma_(gamma), horizon_(horizon), dt_(dt_kernel) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ParameterError("memory kernel: gamma must be >= 0");
    if (!(dt_kernel > 0.0) || !std::isfinite(dt_kernel))
        throw ParameterError("memory kernel: dt_kernel must be positive");
    if (!(horizon >= dt_kernel) || !std::isfinite(horizon))
        throw ParameterError("memory kernel: horizon must be at least dt_kernel");
    const auto count = static_cast<std::size_t>(std::ceil(horizon / dt_kernel - 1e-9)) + 1;
    horizon_ = static_cast<double>(count - 1) * dt_;
    j_ = sample_J(disp_, count, dt_);
    gstar_ = march_volterra(j_, gamma_, dt_);

    for (std::size_t i = 0; i < count; ++i) {
        if (std::abs(j_[i]) > 1.0 + 1e-12)
            throw InvariantError("memory kernel: |J| > 1 at t = " + num(static_cast<double>(i) * dt_));
        // the convolution series gives |g*(t)| <= gamma exp(gamma t)
        const double bound = gamma_ * std::exp(gamma_ * static_cast<double>(i) * dt_);
        if (std::abs(gstar_[i]) > bound * (1.0 + 1e-9))
            throw InvariantError("memory kernel: |g*| exceeds gamma exp(gamma t) at t = " +
                                 num(static_cast<double>(i) * dt_));
    }
}

double MemoryKernel::J_eval(double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("J_eval: t must be >= 0, got " + num(t));
    const std::size_t n = j_node_count(disp_, t);
    const std::size_t half = n / 2;
    std::vector<double> terms(half + 1);
    for (std::size_t j = 0; j <= half; ++j) {
        const double w = (j == 0 || j == half) ? 1.0 : 2.0;
        terms[j] = w * std::cos(disp_.omega(static_cast<double>(j) / static_cast<double>(n)) * t);
    }
    return pairwise_sum(terms) / static_cast<double>(n);
}

cplx MemoryKernel::J_laplace(cplx lambda) const {
    if (!(lambda.real() > 0.0))
        throw DomainError("J_laplace: Re lambda must be positive, got " + num(lambda.real()));
    const cplx l2 = lambda * lambda;
    auto f = [&](double k) { return lambda / (l2 + disp_.kernel().symbol(k)); };
    std::vector<double> breaks;
    const double s = lambda.real();
    const double w = std::abs(lambda.imag());
    if (w > disp_.omega_min() && w < disp_.omega_max()) {
        const double kp = disp_.inverse_branch(w);
        const double slope = std::max(std::abs(disp_.omega_prime(kp)), std::sqrt(s));
        breaks.push_back(kp);
        for (double m : {1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0}) {
            breaks.push_back(kp - m * s / slope);
            breaks.push_back(kp + m * s / slope);
        }
    }
    return 2.0 * integrate_piecewise(f, 0.0, 0.5, breaks, 1e-10, 8);
}

cplx MemoryKernel::g_tilde(cplx lambda) const {
    if (gamma_ == 0.0) {
        if (!(lambda.real() > 0.0)) throw DomainError("g_tilde: Re lambda must be positive");
        return 1.0;
    }
    return 1.0 / (1.0 + gamma_ * J_laplace(lambda));
}

std::vector<double> MemoryKernel::g_star_volterra(double t_end, double dt) const {
    if (!(dt > 0.0) || !(t_end >= dt)) throw ParameterError("g_star_volterra: need dt > 0 and t_end >= dt");
    const auto count = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9)) + 1;
    return march_volterra(sample_J(disp_, count, dt), gamma_, dt);
}

std::size_t MemoryKernel::index_of(double t, const char* what) const {
    if (!(t >= 0.0)) throw DomainError(std::string(what) + ": t must be >= 0");
    if (t > horizon_ * (1.0 + 1e-12))
        throw RangeError(std::string(what) + ": t = " + num(t) + " is beyond the kernel horizon " +
                         num(horizon_) + "; rebuild the kernel with a longer horizon");
    const double x = t / dt_;
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9 * std::max(1.0, x))
        throw ParameterError(std::string(what) + ": t = " + num(t) + " is not on the kernel grid");
    return static_cast<std::size_t>(r);
}

std::vector<double> MemoryKernel::g_star_series_samples(double t_end, int n_max) const {
    if (n_max < 1) throw ParameterError("g_star_series: n_max must be >= 1");
    const std::size_t count = index_of(t_end, "g_star_series") + 1;
    std::span<const double> J(j_.data(), count);
    std::vector<double> sum(count, 0.0);
    if (gamma_ == 0.0) return sum;
    std::vector<double> power(J.begin(), J.end());
    double coef = -gamma_;
    for (std::size_t i = 0; i < count; ++i) sum[i] = coef * power[i];
    for (int n = 2; n <= n_max; ++n) {
        power = convolve_simpson(J, power, dt_);
        coef *= -gamma_;
        for (std::size_t i = 0; i < count; ++i) sum[i] += coef * power[i];
    }
    return sum;
}

SeriesValue MemoryKernel::g_star_series(double t, int n_max) const {
    const auto s = g_star_series_samples(t, n_max);
    const double gt = gamma_ * t;
    const double log_bound = static_cast<double>(n_max + 1) * std::log(std::max(gt, 1e-300)) + gt -
                             std::lgamma(static_cast<double>(n_max) + 2.0);
    return {s.back(), gt == 0.0 ? 0.0 : std::exp(log_bound)};
}

std::vector<cplx> MemoryKernel::phi_samples(double k, std::size_t count) const {
    if (count > j_.size())
        throw RangeError("phi_samples: " + std::to_string(count) + " samples requested beyond the kernel horizon " +
                         num(horizon_) + "; rebuild the kernel with a longer horizon");
    const double om = disp_.omega(k);
    std::vector<cplx> out(count);
    cplx integral = 0.0;
    cplx prev = gstar_.empty() ? cplx{} : gstar_[0];
    for (std::size_t n = 0; n < count; ++n) {
        const double t = static_cast<double>(n) * dt_;
        if (n > 0) {
            const cplx cur = std::polar(1.0, om * t) * gstar_[n];
            integral += 0.5 * dt_ * (prev + cur);
            prev = cur;
        }
        out[n] = std::polar(1.0, -om * t) * (1.0 + integral);
    }
    return out;
}

cplx MemoryKernel::boundary_transform(double k, double t) const {
    const std::size_t n = index_of(t, "boundary_transform");
    const auto phi = phi_samples(k, n + 1);
    return std::polar(1.0, disp_.omega(k) * t) * phi.back();
}

cplx MemoryKernel::phi_eval(double t, double k) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("phi_eval: t must be >= 0");
    if (t > horizon_ * (1.0 + 1e-12))
        throw RangeError("phi_eval: t = " + num(t) + " is beyond the kernel horizon " + num(horizon_) +
                         "; rebuild the kernel with a longer horizon");
    const double x = std::min(t / dt_, static_cast<double>(j_.size() - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(x));
    const auto phi = phi_samples(k, i0 + 1);
    const double om = disp_.omega(k);
    const double frac = x - static_cast<double>(i0);
    if (frac <= 0.0 || i0 + 1 >= j_.size()) return phi[i0];
    // trapezoid on the partial cell with linearly interpolated g*
    const double t0 = static_cast<double>(i0) * dt_;
    const double h = frac * dt_;
    const double g_end = gstar_[i0] + frac * (gstar_[i0 + 1] - gstar_[i0]);
    const cplx base = std::polar(1.0, om * t0) * phi[i0];
    const cplx inc = 0.5 * h * (std::polar(1.0, om * t0) * gstar_[i0] + std::polar(1.0, om * t) * g_end);
    return std::polar(1.0, -om * t) * (base + inc);
}

double MemoryKernel::volterra_residual() const {
    const auto c = convolve_simpson(j_, gstar_, dt_);
    double worst = 0.0;
    for (std::size_t i = 0; i < j_.size(); ++i)
        worst = std::max(worst, std::abs(gstar_[i] + gamma_ * c[i] + gamma_ * j_[i]));
    return worst;
}

}  // namespace phonon
