#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace phonon {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Order-independent reductions: the result depends only on the sequence, not
// on how the sequence was produced (used for ensemble means).
double pairwise_sum(std::span<const double> values);
cplx pairwise_sum(std::span<const cplx> values);

// Adaptive 61-point Gauss-Kronrod over [a, b]. Works for real and complex integrands.
template <class F>
auto integrate(F&& f, double a, double b, double rel_tol = 1e-12, unsigned max_depth = 12) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(std::forward<F>(f), a, b, max_depth, rel_tol);
}

// Same, split at the given interior points (duplicates and points outside
// (a, b) are ignored). Integrands with near-singular features should pass the
// feature locations here.
template <class F>
auto integrate_piecewise(F&& f, double a, double b, std::vector<double> breaks,
                         double rel_tol = 1e-12, unsigned max_depth = 12) {
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    using R = decltype(f(a));
    R total{};
    double prev = a;
    for (double x : breaks) {
        if (x <= prev || x > b) continue;
        total += integrate(f, prev, x, rel_tol, max_depth);
        prev = x;
    }
    return total;
}

// Polynomial (Neville) extrapolation of samples y(h_i) to h = 0.
cplx extrapolate_to_zero(std::span<const double> h, std::span<const cplx> y);

// Thread count: an explicit request wins, then PHONON_SCATTER_THREADS, then the hardware.
unsigned resolve_threads(unsigned requested);

// Runs body(i) for i in [0, n) on up to `threads` workers. Exceptions from the
// body are rethrown on the calling thread (the first one wins).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

// Counter-based generator: output i is a SplitMix64 hash of (key, i), so a
// stream is reproducible bit-for-bit from its seed and can be split per path
// without shared state. Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    std::uint64_t counter() const { return counter_; }
    double uniform();  // in [0, 1)

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Standard normal draws from a CounterRng via the Marsaglia polar method.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed, std::uint64_t stream = 0) : rng_(seed, stream) {}
    double operator()();

private:
    CounterRng rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace phonon
