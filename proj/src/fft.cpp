#include "phonon/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "phonon/errors.hpp"

namespace phonon::fft {
namespace {

enum class PlanKind { forward_c2c, backward_c2c, r2c, c2r };

// FFTW planning is not thread-safe, execution with the new-array interface is.
// Plans live for the whole process.
fftw_plan cached_plan(std::size_t n, PlanKind kind) {
    static std::mutex mutex;
    static std::map<std::tuple<std::size_t, int>, fftw_plan> plans;
    std::lock_guard lock(mutex);
    const auto key = std::make_tuple(n, static_cast<int>(kind));
    if (auto it = plans.find(key); it != plans.end()) return it->second;

    const int len = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    // Planning with FFTW_ESTIMATE does not touch the arrays, but it needs
    // distinct pointers to produce an out-of-place plan.
    std::vector<cplx> a(n), b(n);
    std::vector<double> r(n);
    auto* ca = reinterpret_cast<fftw_complex*>(a.data());
    auto* cb = reinterpret_cast<fftw_complex*>(b.data());
    switch (kind) {
    case PlanKind::forward_c2c:
        plan = fftw_plan_dft_1d(len, ca, cb, FFTW_FORWARD, flags);
        break;
    case PlanKind::backward_c2c:
        plan = fftw_plan_dft_1d(len, ca, cb, FFTW_BACKWARD, flags);
        break;
    case PlanKind::r2c:
        plan = fftw_plan_dft_r2c_1d(len, r.data(), ca, flags);
        break;
    case PlanKind::c2r:
        plan = fftw_plan_dft_c2r_1d(len, ca, r.data(), flags);
        break;
    }
    if (plan == nullptr) throw std::runtime_error("fftw planning failed");
    plans.emplace(key, plan);
    return plan;
}

void check_sizes(std::size_t in, std::size_t out) {
    if (in != out || in == 0) throw ParameterError("fft: mismatched or empty buffers");
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

void forward(std::span<const cplx> in, std::span<cplx> out) {
    check_sizes(in.size(), out.size());
    auto plan = cached_plan(in.size(), PlanKind::forward_c2c);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

void backward(std::span<const cplx> in, std::span<cplx> out) {
    check_sizes(in.size(), out.size());
    auto plan = cached_plan(in.size(), PlanKind::backward_c2c);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

std::vector<cplx> forward(std::span<const cplx> in) {
    std::vector<cplx> out(in.size());
    forward(in, out);
    return out;
}

std::vector<cplx> backward(std::span<const cplx> in) {
    std::vector<cplx> out(in.size());
    backward(in, out);
    return out;
}

std::vector<cplx> forward_real(std::span<const double> in) {
    const std::size_t n = in.size();
    if (n == 0) throw ParameterError("fft: empty input");
    std::vector<cplx> out(n);
    auto plan = cached_plan(n, PlanKind::r2c);
    fftw_execute_dft_r2c(plan, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
    for (std::size_t j = n / 2 + 1; j < n; ++j) out[j] = std::conj(out[n - j]);
    return out;
}

std::vector<double> linear_convolve(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    const std::size_t len = a.size() + b.size() - 1;
    std::vector<double> out(len, 0.0);
    if (a.size() * b.size() <= 8192 || a.size() < 16 || b.size() < 16) {
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
        return out;
    }
    const std::size_t n = next_pow2(len);
    std::vector<double> pa(n, 0.0), pb(n, 0.0);
    std::copy(a.begin(), a.end(), pa.begin());
    std::copy(b.begin(), b.end(), pb.begin());
    std::vector<cplx> fa(n / 2 + 1), fb(n / 2 + 1);
    auto r2c = cached_plan(n, PlanKind::r2c);
    fftw_execute_dft_r2c(r2c, pa.data(), reinterpret_cast<fftw_complex*>(fa.data()));
    fftw_execute_dft_r2c(r2c, pb.data(), reinterpret_cast<fftw_complex*>(fb.data()));
    for (std::size_t j = 0; j < fa.size(); ++j) fa[j] *= fb[j];
    auto c2r = cached_plan(n, PlanKind::c2r);
    fftw_execute_dft_c2r(c2r, reinterpret_cast<fftw_complex*>(fa.data()), pa.data());
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < len; ++i) out[i] = pa[i] * scale;
    return out;
}

RealCirculant::RealCirculant(std::size_t n, std::vector<double> half_symbol)
    : n_(n), symbol_(std::move(half_symbol)), real_scratch_(n), spectrum_(n / 2 + 1) {
    if (n == 0 || symbol_.size() != n / 2 + 1)
        throw ParameterError("RealCirculant: symbol must have n/2+1 entries");
    cached_plan(n_, PlanKind::r2c);
    cached_plan(n_, PlanKind::c2r);
}

RealCirculant::RealCirculant(const RealCirculant& other)
    : n_(other.n_), symbol_(other.symbol_), real_scratch_(other.n_), spectrum_(other.n_ / 2 + 1) {}

RealCirculant& RealCirculant::operator=(const RealCirculant& other) {
    if (this != &other) {
        n_ = other.n_;
        symbol_ = other.symbol_;
        real_scratch_.assign(n_, 0.0);
        spectrum_.assign(n_ / 2 + 1, cplx{});
    }
    return *this;
}

void RealCirculant::apply(std::span<const double> in, std::span<double> out) {
    if (in.size() != n_ || out.size() != n_) throw ParameterError("RealCirculant: size mismatch");
    std::copy(in.begin(), in.end(), real_scratch_.begin());
    fftw_execute_dft_r2c(cached_plan(n_, PlanKind::r2c), real_scratch_.data(),
                         reinterpret_cast<fftw_complex*>(spectrum_.data()));
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t j = 0; j < spectrum_.size(); ++j) spectrum_[j] *= symbol_[j] * scale;
    fftw_execute_dft_c2r(cached_plan(n_, PlanKind::c2r),
                         reinterpret_cast<fftw_complex*>(spectrum_.data()), out.data());
}

}  // namespace phonon::fft
