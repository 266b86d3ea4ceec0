#include <limits>

#include "covmeas/error.hpp"
#include "covmeas/fock_engine.hpp"
#include "covmeas/gaussian_analytic.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace covmeas;

TEST_SUITE("gaussian_analytic") {
  TEST_CASE("kernel identity B^2 - A^2 = omega^2") {
    for (double omega : {0.3, 1.0, 2.7}) {
      for (double t : {0.1, 0.9, 2.3, 5.0}) {
        const KernelPair k = kernels(omega, t);
        CHECK(k.b * k.b - k.a * k.a == doctest::Approx(omega * omega).epsilon(1e-10));
        CHECK(k.c_abs * k.c_abs == doctest::Approx(omega / (2.0 * std::numbers::pi * std::abs(std::sin(omega * t)))));
      }
    }
  }

  TEST_CASE("kernels reject caustics and non-positive frequencies") {
    try {
      kernels(1.0, std::numbers::pi);
      FAIL("expected CausticSingularity");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CausticSingularity);
    }
    CHECK_THROWS_AS(kernels(2.0, 0.0), Error);
    CHECK_THROWS_AS(kernels(0.0, 1.0), Error);
    CHECK_THROWS_AS(kernels(-1.0, 1.0), Error);
  }

  TEST_CASE("evolved vacuum amplitude has the stationary ground-state density") {
    for (double omega : {0.5, 1.3}) {
      for (double t : {0.4, 1.9}) {
        for (double x : {-1.2, 0.0, 0.7}) {
          const double p = std::norm(evolved_vacuum_amplitude(omega, t, x));
          CHECK(p == doctest::Approx(std::sqrt(omega / std::numbers::pi) * std::exp(-omega * x * x)).epsilon(1e-10));
        }
      }
    }
  }

  TEST_CASE("Gaussian bin mass matches quadrature") {
    const double var = 0.37;
    const double inf = std::numeric_limits<double>::infinity();
    for (auto [lo, hi] : {std::pair{-0.5, 0.1}, std::pair{0.2, 1.4}, std::pair{-3.0, -2.0}}) {
      const double expect = oracle::simpson([&](double x) { return oracle::normal_density(x, var); }, lo, hi);
      CHECK(gaussian_mass(var, lo, hi) == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(gaussian_mass(var, -inf, inf) == doctest::Approx(1.0));
    CHECK(gaussian_mass(var, 0.0, inf) == doctest::Approx(0.5));
    CHECK(gaussian_mass(var, 1.0, 1.0) == 0.0);
    CHECK_THROWS_AS(gaussian_mass(0.0, 0.0, 1.0), Error);
  }

  TEST_CASE("vacuum expectation uses the smeared vacuum variance") {
    const LatticeSpec spec{32, 0.5, 1.0};
    const ModeTable modes = build_mode_table(spec).restrict_to(std::vector<int>{-1, 0, 1});
    const auto f = bump_profile(spec, "A", 0.0, 3.0);
    const double var = oracle::vacuum_variance(f.samples, 32, 0.5, 1.0, {-1, 0, 1});
    CHECK(vacuum_projector_expectation(spec, f, -0.1, 0.2, modes) ==
          doctest::Approx(oracle::simpson([&](double x) { return oracle::normal_density(x, var); }, -0.1, 0.2))
              .epsilon(1e-10));
  }

  TEST_CASE("one-particle density matches the convolution oracle") {
    const LatticeSpec spec{32, 0.5, 1.0};
    const ModeTable modes = build_mode_table(spec).restrict_to(std::vector<int>{-1, 0, 1});
    const auto f = bump_profile(spec, "A", 0.5, 3.0);
    const OneParticleDensity d = one_particle_density(spec, f, 1, modes);
    const double sigma2 = vacuum_variance(spec, f, modes);
    const double v = d.mode_weight;
    REQUIRE(v > 0.0);
    REQUIRE(v < sigma2);
    for (double x : {-0.4, -0.1, 0.0, 0.05, 0.3}) {
      CHECK(d.density(x) == doctest::Approx(oracle::one_particle_density(x, sigma2 - v, v)).epsilon(1e-8));
    }
    const double span = 12.0 * std::sqrt(sigma2);
    const double norm = oracle::simpson([&](double x) { return d.density(x); }, -span, span);
    const double second = oracle::simpson([&](double x) { return x * x * d.density(x); }, -span, span);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(second == doctest::Approx(sigma2 + 2.0 * v).epsilon(1e-8));
    CHECK(d.mass(-0.2, 0.15) ==
          doctest::Approx(oracle::simpson([&](double x) { return d.density(x); }, -0.2, 0.15)).epsilon(1e-10));
  }

  TEST_CASE("one-particle bin probabilities match the Fock engine for a single mode") {
    const LatticeSpec spec{32, 0.5, 1.0};
    const ModeTable full = build_mode_table(spec);
    const auto f = bump_profile(spec, "A", 0.5, 3.0);
    const FockBasis basis = build_basis(full, std::vector<int>{1}, 40);
    const ModeTable& modes = basis.modes();
    const OperatorMatrix phi = field_operator(spec, full, basis, f, 0.3, {1.0});
    const Matrix rho = pure_density(excited_vector(basis, std::vector<int>{1}));
    const double sigma = std::sqrt(vacuum_variance(spec, f, modes));
    const Matrix p = interval_projector(phi, -std::numeric_limits<double>::infinity(), 0.0);
    CHECK((p * rho).trace().real() == doctest::Approx(0.5).epsilon(1e-9));
    const Matrix q = interval_projector(phi, -0.5 * sigma, 0.5 * sigma);
    CHECK((q * rho).trace().real() ==
          doctest::Approx(one_particle_projector_expectation(spec, f, -0.5 * sigma, 0.5 * sigma, 1, modes)).epsilon(0.05));
  }
}
