#pragma once

#include <string>
#include <utility>
#include <vector>

namespace phonon {

enum class DispersionKind { acoustic, optical };

std::string to_string(DispersionKind kind);

// Real, even, finitely supported coupling coefficients alpha_y of the harmonic
// chain. Construction validates evenness, positivity of the symbol away from
// k = 0 and the pinning dichotomy; an invalid kernel never exists.
class CouplingKernel {
public:
    // alpha_0 = 2, alpha_{+-1} = -1: acoustic, omega(k) = 2|sin(pi k)|
    static CouplingKernel nn_unpinned();
    // alpha_0 = 2 + m^2, alpha_{+-1} = -1: optical with gap m
    static CouplingKernel nn_pinned(double mass);
    // Pairs (y, alpha_y). Pairs with y >= 0 define the even extension; a pair
    // with y < 0 must agree with its mirror.
    static CouplingKernel from_pairs(const std::vector<std::pair<int, double>>& pairs);
    // "nn_unpinned" or "nn_pinned(m)"
    static CouplingKernel from_preset(const std::string& name);

    int radius() const { return static_cast<int>(half_.size()) - 1; }
    double coefficient(int y) const;
    // Smallest C >= 1 with |alpha_y| <= C exp(-|y|/C) on the support.
    double decay_constant() const { return decay_constant_; }
    const std::string& label() const { return label_; }

    // alpha-hat(k) = sum_y alpha_y exp(-2 pi i k y); the imaginary part is
    // checked to vanish before it is discarded.
    double hat_alpha(double k) const;
    double hat_alpha_prime(double k) const;
    double hat_alpha_second(double k) const;

    // Cancellation-free form alpha-hat(0) - 4 sum_{y>0} alpha_y sin^2(pi k y).
    double symbol(double k) const;

    DispersionKind kind() const { return kind_; }

private:
    CouplingKernel(std::vector<double> half, std::string label);
    void validate();

    std::vector<double> half_;  // alpha_0 .. alpha_R
    std::string label_;
    double symbol_at_zero_ = 0.0;
    double decay_constant_ = 1.0;
    DispersionKind kind_ = DispersionKind::optical;
};

// omega(k) = sqrt(alpha-hat(k)) on the torus [-1/2, 1/2) with its derivative,
// the inverse branches and the stationary points. Immutable, cheap to copy.
class DispersionRelation {
public:
    explicit DispersionRelation(CouplingKernel kernel);

    const CouplingKernel& kernel() const { return kernel_; }
    DispersionKind kind() const { return kernel_.kind(); }

    double omega(double k) const;
    // At k = 0 the acoustic branch returns the right-sided slope.
    double omega_prime(double k) const;
    // omega'(k) / (2 pi)
    double group_velocity(double k) const;
    double omega_min() const { return omega_min_; }
    double omega_max() const { return omega_max_; }

    // omega_+ : [omega_min, omega_max] -> [0, 1/2]; omega_- = -omega_+.
    double inverse_branch(double w) const;
    // d omega_+ / dw = 1 / omega'(omega_+(w)); infinite where omega' vanishes.
    double inverse_branch_derivative(double w) const;

    // Points of the torus where omega' = 0 (a subset of {0, 1/2}).
    const std::vector<double>& stationary_set() const { return stationary_; }
    // Stationary points plus the kink at k = 0 of an acoustic branch. The
    // scattering coefficients are only tabulated away from this set.
    std::vector<double> singular_set() const;
    double distance_to_singular_set(double k) const;

    // Uniform grid of n points on [-1/2, 1/2).
    static std::vector<double> uniform_grid(std::size_t n);

private:
    CouplingKernel kernel_;
    double omega_min_ = 0.0;
    double omega_max_ = 0.0;
    double acoustic_slope_ = 0.0;
    std::vector<double> stationary_;
};

// Wraps k onto [-1/2, 1/2).
double wrap_torus(double k);

}  // namespace phonon
