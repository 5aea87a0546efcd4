#include <doctest.h>

#include <cmath>

#include "phonon/errors.hpp"
#include "phonon/lattice_dispersion.hpp"
#include "phonon/numerics.hpp"

using namespace phonon;

TEST_CASE("nearest-neighbour unpinned chain") {
    const DispersionRelation d(CouplingKernel::nn_unpinned());
    CHECK(d.kind() == DispersionKind::acoustic);
    for (double k : {-0.45, -0.2, 0.0, 0.1, 0.25, 0.37, 0.5})
        CHECK(d.omega(k) == doctest::Approx(2.0 * std::abs(std::sin(pi * k))).epsilon(1e-14));
    CHECK(d.omega(0.25) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(d.omega_prime(0.25) == doctest::Approx(pi * std::sqrt(2.0)).epsilon(1e-14));
    CHECK(d.omega_prime(0.0) == doctest::Approx(two_pi).epsilon(1e-14));
    CHECK(d.omega_prime(0.5) == 0.0);
    CHECK(d.group_velocity(0.25) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    CHECK(d.omega_min() == 0.0);
    CHECK(d.omega_max() == doctest::Approx(2.0).epsilon(1e-15));
    REQUIRE(d.stationary_set().size() == 1);
    CHECK(d.stationary_set()[0] == 0.5);
    const auto s = d.singular_set();
    CHECK(s.size() == 2);
    CHECK(d.distance_to_singular_set(0.03) == doctest::Approx(0.03));
    CHECK(d.distance_to_singular_set(-0.48) == doctest::Approx(0.02));
}

TEST_CASE("pinned chain is optical with a gap") {
    const DispersionRelation d(CouplingKernel::nn_pinned(1.0));
    CHECK(d.kind() == DispersionKind::optical);
    for (double k : {0.0, 0.1, 0.3, 0.5})
        CHECK(d.omega(k) == doctest::Approx(std::sqrt(1.0 + 4.0 * std::pow(std::sin(pi * k), 2))).epsilon(1e-14));
    CHECK(d.omega_min() == doctest::Approx(1.0));
    CHECK(d.omega_prime(0.0) == 0.0);
    CHECK(d.stationary_set().size() == 2);
    CHECK(d.distance_to_singular_set(0.01) == doctest::Approx(0.01));
}

TEST_CASE("symbol derivatives agree with finite differences") {
    const auto kern = CouplingKernel::from_pairs({{0, 2.5}, {1, -1.0}, {2, -0.25}});
    const double h = 1e-5;
    for (double k : {0.05, 0.2, 0.33, 0.45}) {
        const double fd1 = (kern.symbol(k + h) - kern.symbol(k - h)) / (2 * h);
        const double fd2 = (kern.symbol(k + h) - 2 * kern.symbol(k) + kern.symbol(k - h)) / (h * h);
        CHECK(kern.hat_alpha_prime(k) == doctest::Approx(fd1).epsilon(1e-8));
        CHECK(kern.hat_alpha_second(k) == doctest::Approx(fd2).epsilon(1e-4));
        CHECK(kern.hat_alpha(k) == doctest::Approx(kern.symbol(k)).epsilon(1e-13));
    }
}

TEST_CASE("inverse branch") {
    for (const auto& kern : {CouplingKernel::nn_unpinned(), CouplingKernel::nn_pinned(0.5),
                             CouplingKernel::from_pairs({{0, 2.5}, {1, -1.0}, {2, -0.25}})}) {
        const DispersionRelation d(kern);
        for (double k : {0.01, 0.1, 0.25, 0.4, 0.49}) {
            CHECK(d.inverse_branch(d.omega(k)) == doctest::Approx(k).epsilon(1e-12));
            const double w = d.omega(k);
            CHECK(d.inverse_branch_derivative(w) == doctest::Approx(1.0 / d.omega_prime(k)).epsilon(1e-9));
        }
        CHECK_THROWS_AS(d.inverse_branch(d.omega_max() + 0.1), DomainError);
    }
    const DispersionRelation d(CouplingKernel::nn_unpinned());
    CHECK(d.inverse_branch(std::sqrt(2.0)) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("kernel construction errors") {
    CHECK_THROWS_AS(CouplingKernel::nn_pinned(0.0), ParameterError);
    CHECK_THROWS_AS(CouplingKernel::nn_pinned(-1.0), ParameterError);
    CHECK_THROWS_AS(CouplingKernel::from_pairs({{0, 2.0}, {1, -1.0}, {-1, -0.5}}), ParameterError);
    CHECK_NOTHROW(CouplingKernel::from_pairs({{0, 2.0}, {1, -1.0}, {-1, -1.0}}));
    CHECK_THROWS_AS(CouplingKernel::from_pairs({{0, 1.0}, {1, -1.0}}), ParameterError);  // negative at k = 0
    CHECK_THROWS_AS(CouplingKernel::from_pairs({{0, 2.0}, {1, 1.0}}), ParameterError);   // decreasing
    CHECK_THROWS_AS(CouplingKernel::from_preset("nn_weird"), ConfigError);
    CHECK_THROWS_AS(CouplingKernel::from_preset("nn_pinned(x)"), ConfigError);
    CHECK(CouplingKernel::from_preset("nn_pinned(2)").coefficient(0) == doctest::Approx(6.0));
    CHECK(CouplingKernel::from_pairs({{1, -1.0}, {0, 2.0}}).kind() == DispersionKind::acoustic);
}

TEST_CASE("decay constant") {
    CHECK(CouplingKernel::nn_unpinned().decay_constant() >= 1.0);
    const auto k = CouplingKernel::nn_unpinned();
    const double C = k.decay_constant();
    for (int y = 0; y <= k.radius(); ++y) CHECK(std::abs(k.coefficient(y)) <= C * std::exp(-std::abs(y) / C) * (1 + 1e-12));
}

TEST_CASE("torus helpers") {
    CHECK(wrap_torus(0.75) == doctest::Approx(-0.25));
    CHECK(wrap_torus(0.5) == -0.5);
    CHECK(wrap_torus(-0.5) == -0.5);
    const auto g = DispersionRelation::uniform_grid(8);
    REQUIRE(g.size() == 8);
    CHECK(g.front() == -0.5);
    CHECK(g[4] == 0.0);
}
