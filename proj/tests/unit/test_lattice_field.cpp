#include <numeric>

#include "covmeas/error.hpp"
#include "covmeas/lattice_field.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace covmeas;

namespace {

std::vector<int> all_modes(int n_sites) {
  std::vector<int> out;
  for (int n = -n_sites / 2; n < n_sites / 2; ++n) out.push_back(n);
  return out;
}

}  // namespace

TEST_SUITE("lattice_field") {
  TEST_CASE("sites and modes follow the periodic box conventions") {
    const LatticeSpec spec{16, 0.5, 1.0};
    CHECK(spec.box_length() == doctest::Approx(8.0));
    CHECK(spec.site_position(0) == doctest::Approx(-4.0));
    CHECK(spec.site_position(8) == doctest::Approx(0.0));
    const ModeTable modes = build_mode_table(spec);
    REQUIRE(modes.size() == 16);
    const Mode& m = modes[modes.index_of(3)];
    CHECK(m.k == doctest::Approx(2.0 * std::numbers::pi * 3 / 8.0));
    CHECK(m.omega == doctest::Approx(std::sqrt(m.k * m.k + 1.0)));
    CHECK(modes.closed_under_negation(16));
    CHECK_FALSE(modes.restrict_to(std::vector<int>{1, 2}).closed_under_negation(16));
    CHECK_THROWS_AS(modes.index_of(8), Error);
  }

  TEST_CASE("lattice validation") {
    CHECK_THROWS_AS((LatticeSpec{15, 1.0, 1.0}.validate()), Error);
    CHECK_THROWS_AS((LatticeSpec{16, 0.0, 1.0}.validate()), Error);
    CHECK_THROWS_AS((LatticeSpec{16, 1.0, -1.0}.validate()), Error);
    CHECK_NOTHROW((LatticeSpec{16, 1.0, 0.0}.validate()));
  }

  TEST_CASE("massless zero mode must be excluded") {
    const LatticeSpec spec{16, 1.0, 0.0};
    try {
      build_mode_table(spec);
      FAIL("expected MasslessZeroMode");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MasslessZeroMode);
    }
    const ModeTable modes = build_mode_table(spec, ZeroModePolicy::Exclude);
    CHECK(modes.size() == 15);
    CHECK_FALSE(modes.has(0));
  }

  TEST_CASE("profiles are normalised and supported on their interval") {
    const LatticeSpec spec{64, 0.25, 1.0};
    for (const auto& f : {bump_profile(spec, "A", 0.0, 2.0), uniform_profile(spec, "A", -1.0, 1.0)}) {
      const double total = spec.spacing * std::accumulate(f.samples.begin(), f.samples.end(), 0.0);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      const auto [begin, end] = f.support();
      CHECK(spec.site_position(begin) >= -1.0 - 1e-12);
      CHECK(spec.site_position(end - 1) <= 1.0 + 1e-12);
    }
    CHECK_THROWS_AS(sites_in(spec, 7.9, 9.0), Error);
  }

  TEST_CASE("Parseval weight over the full table equals the site-space norm") {
    const LatticeSpec spec{32, 0.5, 1.0};
    const auto f = bump_profile(spec, "A", 1.0, 3.0);
    const double site_norm =
        spec.spacing * std::inner_product(f.samples.begin(), f.samples.end(), f.samples.begin(), 0.0);
    CHECK(parseval_weight(spec, f, build_mode_table(spec)) == doctest::Approx(site_norm).epsilon(1e-12));
  }

  TEST_CASE("Pauli-Jordan commutator matches the site-space oracle") {
    const LatticeSpec spec{32, 0.5, 0.7};
    const ModeTable full = build_mode_table(spec);
    const auto f = bump_profile(spec, "A", -2.0, 2.0);
    const auto g = bump_profile(spec, "B", 1.5, 3.0);
    for (const auto& active : {all_modes(32), std::vector<int>{-2, -1, 0, 1, 2}, std::vector<int>{1, 3}}) {
      const ModeTable modes = full.restrict_to(active);
      for (double dt : {0.0, 0.4, 1.3, 2.9}) {
        const double expect = oracle::pauli_jordan(f.samples, dt, g.samples, 0.0, 32, 0.5, 0.7, active);
        CHECK(std::abs(pauli_jordan(spec, f, dt, g, 0.0, modes) - expect) <= 1e-15 + 1e-10 * std::abs(expect));
      }
    }
  }

  TEST_CASE("Pauli-Jordan commutator is antisymmetric and vanishes for a field with itself at equal time") {
    const LatticeSpec spec{32, 0.5, 1.0};
    const ModeTable modes = build_mode_table(spec);
    const auto f = bump_profile(spec, "A", -2.0, 2.0);
    const auto g = bump_profile(spec, "B", 3.0, 2.0);
    CHECK(pauli_jordan(spec, f, 0.3, g, 1.1, modes) ==
          doctest::Approx(-pauli_jordan(spec, g, 1.1, f, 0.3, modes)).epsilon(1e-12));
    CHECK(std::abs(pauli_jordan(spec, f, 0.5, f, 0.5, modes)) < 1e-15);
    CHECK(std::abs(pauli_jordan(spec, f, 0.0, g, 0.0, modes)) < 1e-14);
  }

  TEST_CASE("vacuum variance matches the site-space two-point function") {
    const LatticeSpec spec{32, 0.5, 1.0};
    const ModeTable full = build_mode_table(spec);
    const auto f = bump_profile(spec, "A", 0.0, 2.5);
    for (const auto& active : {all_modes(32), std::vector<int>{-1, 0, 1}}) {
      CHECK(vacuum_variance(spec, f, full.restrict_to(active)) ==
            doctest::Approx(oracle::vacuum_variance(f.samples, 32, 0.5, 1.0, active)).epsilon(1e-11));
    }
  }

  TEST_CASE("microcausality improves under lattice refinement") {
    double previous = 1e300;
    for (int n : {32, 64, 128}) {
      const LatticeSpec spec{n, 16.0 / n, 1.0};
      const ModeTable modes = build_mode_table(spec);
      const auto f = bump_profile(spec, "A", -2.0, 1.0);
      const auto g = bump_profile(spec, "B", 2.0, 1.0);
      const double c = std::abs(pauli_jordan(spec, f, 0.0, g, 1.5, modes));
      CHECK(c < previous);
      previous = c;
    }
  }

  TEST_CASE("restriction to a part keeps the samples owned by that part") {
    const LatticeSpec spec{64, 0.25, 1.0};
    const auto f = bump_profile(spec, "B", 0.0, 4.0);
    DevicePart lower{"B2", "B", 2.0, -2.0, -1.0, true, true, {"A"}};
    DevicePart upper{"B1", "B", 2.0, -1.0, 2.0, false, true, {}};
    const auto lo = restrict_to_part(spec, f, lower);
    const auto hi = restrict_to_part(spec, f, upper);
    for (std::size_t j = 0; j < f.samples.size(); ++j) CHECK(lo.samples[j] + hi.samples[j] == f.samples[j]);
    const int cut = 64 / 2 - 4;
    CHECK(spec.site_position(cut) == doctest::Approx(-1.0));
    CHECK(lo.samples[cut] == f.samples[cut]);
    CHECK(hi.samples[cut] == 0.0);
  }

  TEST_CASE("decoupling zeroes the commutator inside the active modes") {
    const LatticeSpec spec{64, 0.25, 1.0};
    const ModeTable modes = build_mode_table(spec).restrict_to(std::vector<int>{-1, 0, 1});
    const auto f = bump_profile(spec, "A", -3.0, 2.0);
    const auto g = bump_profile(spec, "C", 3.0, 2.0);
    REQUIRE(std::abs(pauli_jordan(spec, f, 0.0, g, 1.0, modes)) > 1e-6);
    const CommutatorConstraint con{&g, 1.0};
    const auto h = decouple_smearing(spec, f, 0.0, std::span(&con, 1), modes);
    CHECK(std::abs(pauli_jordan(spec, h, 0.0, g, 1.0, modes)) < 1e-14);
    CHECK(h.support().first >= f.support().first);
    CHECK(h.support().second <= f.support().second);
  }

  TEST_CASE("high-frequency fraction separates smooth and rough smearings") {
    const LatticeSpec spec{64, 0.25, 1.0};
    const ModeTable modes = build_mode_table(spec);
    CHECK(high_frequency_fraction(spec, bump_profile(spec, "A", 0.0, 6.0), modes) < 1e-3);
    std::vector<double> rough(64, 0.0);
    for (int j = 20; j < 40; ++j) rough[j] = (j % 2) ? 1.0 : -1.0;
    CHECK(high_frequency_fraction(spec, {"R", rough}, modes) > 0.5);
  }
}
