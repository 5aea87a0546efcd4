#include "phonon/lattice_dispersion.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <sstream>

#include "phonon/errors.hpp"
#include "phonon/numerics.hpp"

namespace phonon {
namespace {

constexpr std::size_t validation_points = 10000;
constexpr double validation_tol = 1e-12;

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

// Smallest C >= 1 with a <= C exp(-y / C). C exp(-y/C) is increasing in C.
double decay_bound(double a, int y) {
    auto ok = [&](double c) { return a <= c * std::exp(-static_cast<double>(y) / c); };
    if (ok(1.0)) return 1.0;
    double lo = 1.0, hi = 2.0;
    while (!ok(hi)) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace

std::string to_string(DispersionKind kind) {
    return kind == DispersionKind::acoustic ? "acoustic" : "optical";
}

double wrap_torus(double k) {
    double r = k - std::floor(k + 0.5);
    if (r >= 0.5) r -= 1.0;
    return r;
}

CouplingKernel::CouplingKernel(std::vector<double> half, std::string label)
    : half_(std::move(half)), label_(std::move(label)) {
    while (half_.size() > 1 && half_.back() == 0.0) half_.pop_back();
    validate();
}

CouplingKernel CouplingKernel::nn_unpinned() { return CouplingKernel({2.0, -1.0}, "nn_unpinned"); }

CouplingKernel CouplingKernel::nn_pinned(double mass) {
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw ParameterError("nn_pinned: mass must be positive, got " + format_double(mass));
    return CouplingKernel({2.0 + mass * mass, -1.0}, "nn_pinned(" + format_double(mass) + ")");
}

CouplingKernel CouplingKernel::from_pairs(const std::vector<std::pair<int, double>>& pairs) {
    if (pairs.empty()) throw ParameterError("coupling kernel: no coefficients given");
    std::map<int, double> given;
    for (const auto& [y, a] : pairs) {
        if (!std::isfinite(a)) throw ParameterError("coupling kernel: non-finite alpha_" + std::to_string(y));
        if (given.count(y)) throw ParameterError("coupling kernel: duplicate alpha_" + std::to_string(y));
        given[y] = a;
    }
    int radius = 0;
    for (const auto& [y, a] : given) radius = std::max(radius, std::abs(y));
    std::vector<double> half(static_cast<std::size_t>(radius) + 1, 0.0);
    for (const auto& [y, a] : given)
        if (y >= 0) half[static_cast<std::size_t>(y)] = a;
    for (const auto& [y, a] : given) {
        if (y >= 0) continue;
        const double mirror = half[static_cast<std::size_t>(-y)];
        if (given.count(-y) == 0) {
            half[static_cast<std::size_t>(-y)] = a;
        } else if (std::abs(mirror - a) > 1e-14 * std::max(1.0, std::abs(a))) {
            throw ParameterError("coupling kernel is not even: alpha_" + std::to_string(y) + " = " +
                                 format_double(a) + " but alpha_" + std::to_string(-y) + " = " +
                                 format_double(mirror));
        }
    }
    std::ostringstream label;
    label << "pairs{";
    for (std::size_t y = 0; y < half.size(); ++y) label << (y ? "," : "") << format_double(half[y]);
    label << "}";
    return CouplingKernel(std::move(half), label.str());
}

CouplingKernel CouplingKernel::from_preset(const std::string& name) {
    if (name == "nn_unpinned") return nn_unpinned();
    const std::string prefix = "nn_pinned(";
    if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size() + 1 && name.back() == ')') {
        const std::string arg = name.substr(prefix.size(), name.size() - prefix.size() - 1);
        std::size_t used = 0;
        double m = 0.0;
        try {
            m = std::stod(arg, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == arg.size() && used > 0) return nn_pinned(m);
    }
    throw ConfigError("unknown kernel preset '" + name + "'");
}

double CouplingKernel::coefficient(int y) const {
    const auto a = static_cast<std::size_t>(std::abs(y));
    return a < half_.size() ? half_[a] : 0.0;
}

double CouplingKernel::hat_alpha(double k) const {
    cplx s = half_[0];
    for (std::size_t y = 1; y < half_.size(); ++y) {
        const double arg = -two_pi * k * static_cast<double>(y);
        s += half_[y] * std::polar(1.0, arg);
        s += half_[y] * std::polar(1.0, -arg);
    }
    double scale = 0.0;
    for (double a : half_) scale += std::abs(a);
    if (std::abs(s.imag()) >= 1e-12 * std::max(1.0, scale))
        throw InvariantError("hat_alpha: imaginary part " + format_double(s.imag()) + " at k = " +
                             format_double(k));
    return s.real();
}

double CouplingKernel::symbol(double k) const {
    double s = symbol_at_zero_;
    for (std::size_t y = 1; y < half_.size(); ++y) {
        const double sn = std::sin(pi * k * static_cast<double>(y));
        s -= 4.0 * half_[y] * sn * sn;
    }
    return s;
}

double CouplingKernel::hat_alpha_prime(double k) const {
    double s = 0.0;
    for (std::size_t y = 1; y < half_.size(); ++y) {
        const double yy = static_cast<double>(y);
        s -= 4.0 * pi * half_[y] * yy * std::sin(two_pi * k * yy);
    }
    return s;
}

double CouplingKernel::hat_alpha_second(double k) const {
    double s = 0.0;
    for (std::size_t y = 1; y < half_.size(); ++y) {
        const double yy = static_cast<double>(y);
        s -= 8.0 * pi * pi * half_[y] * yy * yy * std::cos(two_pi * k * yy);
    }
    return s;
}

void CouplingKernel::validate() {
    if (half_.empty()) throw ParameterError("coupling kernel: empty");
    double scale = 0.0;
    for (double a : half_) scale += std::abs(a);
    if (scale == 0.0) throw ParameterError("coupling kernel: all coefficients vanish");

    double s0 = half_[0];
    for (std::size_t y = 1; y < half_.size(); ++y) s0 += 2.0 * half_[y];
    if (std::abs(s0) <= validation_tol * scale) s0 = 0.0;
    symbol_at_zero_ = s0;

    if (s0 < 0.0)
        throw ParameterError("coupling kernel " + label_ + ": alpha-hat(0) = " + format_double(s0) + " < 0");
    if (s0 == 0.0) {
        if (!(hat_alpha_second(0.0) > validation_tol * scale))
            throw ParameterError("coupling kernel " + label_ +
                                 ": alpha-hat(0) = 0 but alpha-hat''(0) is not positive");
        kind_ = DispersionKind::acoustic;
    } else {
        kind_ = DispersionKind::optical;
    }

    // positivity away from 0 and strict growth of the symbol on (0, 1/2)
    double prev = symbol(0.0);
    for (std::size_t i = 1; i <= validation_points; ++i) {
        const double k = 0.5 * static_cast<double>(i) / static_cast<double>(validation_points);
        const double s = symbol(k);
        if (!(s > 0.0))
            throw ParameterError("coupling kernel " + label_ + ": alpha-hat(" + format_double(k) +
                                 ") = " + format_double(s) + " is not positive");
        if (s < prev - validation_tol * scale)
            throw ParameterError("coupling kernel " + label_ + ": omega is not increasing on [0, 1/2] near k = " +
                                 format_double(k));
        if (i < validation_points && !(hat_alpha_prime(k) > validation_tol * scale))
            throw ParameterError("coupling kernel " + label_ + ": omega' vanishes inside (0, 1/2) near k = " +
                                 format_double(k));
        prev = s;
    }

    decay_constant_ = 1.0;
    for (std::size_t y = 0; y < half_.size(); ++y)
        decay_constant_ = std::max(decay_constant_, decay_bound(std::abs(half_[y]), static_cast<int>(y)));
}

DispersionRelation::DispersionRelation(CouplingKernel kernel) : kernel_(std::move(kernel)) {
    omega_min_ = std::sqrt(std::max(0.0, kernel_.symbol(0.0)));
    omega_max_ = std::sqrt(kernel_.symbol(0.5));
    if (kind() == DispersionKind::acoustic) {
        // alpha-hat(k) ~ alpha-hat''(0) k^2 / 2, so omega ~ sqrt(alpha-hat''(0)/2) |k|
        acoustic_slope_ = std::sqrt(0.5 * kernel_.hat_alpha_second(0.0));
        stationary_ = {0.5};
    } else {
        stationary_ = {0.0, 0.5};
    }
}

double DispersionRelation::omega(double k) const {
    return std::sqrt(std::max(0.0, kernel_.symbol(wrap_torus(k))));
}

double DispersionRelation::omega_prime(double k) const {
    const double kk = wrap_torus(k);
    if (kk == -0.5) return 0.0;
    if (kind() == DispersionKind::acoustic) {
        if (kk == 0.0) return acoustic_slope_;
        if (std::abs(kk) < 1e-7) {
            // second order expansion avoids 0/0 in alpha-hat' / (2 omega)
            const double w = omega(kk);
            if (w == 0.0) return kk > 0 ? acoustic_slope_ : -acoustic_slope_;
        }
    } else if (kk == 0.0) {
        return 0.0;
    }
    return kernel_.hat_alpha_prime(kk) / (2.0 * omega(kk));
}

double DispersionRelation::group_velocity(double k) const { return omega_prime(k) / two_pi; }

double DispersionRelation::inverse_branch(double w) const {
    const double slack = 1e-12 * std::max(1.0, omega_max_);
    if (!std::isfinite(w) || w < omega_min_ - slack || w > omega_max_ + slack)
        throw DomainError("inverse_branch: w = " + format_double(w) + " outside the band [" +
                          format_double(omega_min_) + ", " + format_double(omega_max_) + "]");
    if (w <= omega_min_) return 0.0;
    if (w >= omega_max_) return 0.5;
    double lo = 0.0, hi = 0.5;
    while (true) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (omega(mid) < w ? lo : hi) = mid;
    }
    return std::abs(omega(lo) - w) <= std::abs(omega(hi) - w) ? lo : hi;
}

double DispersionRelation::inverse_branch_derivative(double w) const {
    const double k = inverse_branch(w);
    const double d = omega_prime(k);
    if (d == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / d;
}

std::vector<double> DispersionRelation::singular_set() const {
    std::vector<double> s = stationary_;
    if (kind() == DispersionKind::acoustic) s.insert(s.begin(), 0.0);
    return s;
}

double DispersionRelation::distance_to_singular_set(double k) const {
    const double kk = wrap_torus(k);
    double d = std::numeric_limits<double>::infinity();
    for (double p : singular_set()) d = std::min(d, std::abs(wrap_torus(kk - p)));
    return d;
}

std::vector<double> DispersionRelation::uniform_grid(std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = -0.5 + static_cast<double>(i) / static_cast<double>(n);
    return g;
}

}  // namespace phonon
