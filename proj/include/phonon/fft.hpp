#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace phonon::fft {

using cplx = std::complex<double>;

// Discrete Fourier transforms with the lattice sign convention
//   forward:  out_j = sum_y in_y exp(-2 pi i j y / n)
//   backward: out_y = sum_j in_j exp(+2 pi i j y / n)   (unnormalised)
// Plans are cached per size and shared between threads; execution is reentrant.
void forward(std::span<const cplx> in, std::span<cplx> out);
void backward(std::span<const cplx> in, std::span<cplx> out);

std::vector<cplx> forward(std::span<const cplx> in);
std::vector<cplx> backward(std::span<const cplx> in);

// Full length-n spectrum of a real sequence.
std::vector<cplx> forward_real(std::span<const double> in);

// Full linear convolution (length a.size() + b.size() - 1). Small inputs are
// convolved directly, larger ones through a zero-padded FFT.
std::vector<double> linear_convolve(std::span<const double> a, std::span<const double> b);

// Periodic convolution with a fixed real, even symbol: out = IDFT(symbol * DFT(in)).
// Owns its scratch buffers, so one instance must not be shared between threads.
class RealCirculant {
public:
    // symbol[j] for j = 0 .. n/2 (the symbol is even, the rest is implied)
    RealCirculant(std::size_t n, std::vector<double> half_symbol);
    RealCirculant(const RealCirculant& other);
    RealCirculant& operator=(const RealCirculant& other);
    RealCirculant(RealCirculant&&) noexcept = default;
    RealCirculant& operator=(RealCirculant&&) noexcept = default;
    ~RealCirculant() = default;

    void apply(std::span<const double> in, std::span<double> out);
    std::size_t size() const { return n_; }

private:
    std::size_t n_ = 0;
    std::vector<double> symbol_;
    std::vector<double> real_scratch_;
    std::vector<cplx> spectrum_;
};

}  // namespace phonon::fft
