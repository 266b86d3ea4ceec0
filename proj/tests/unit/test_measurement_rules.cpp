#include <limits>

#include "covmeas/error.hpp"
#include "covmeas/measurement_rules.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace covmeas;

namespace {

DeviceSpec device(const LatticeSpec& spec, const std::string& id, double t, double lo, double hi, BinPartition bins,
                  Composition c = Composition::Linear) {
  DeviceSpec d;
  d.region = {id, t, lo, hi};
  d.smearing = bump_profile(spec, id, 0.5 * (lo + hi), hi - lo);
  d.bins = std::move(bins);
  d.composition = c;
  return d;
}

MeasurementPlan small_plan() {
  MeasurementPlan plan;
  plan.lattice = {64, 0.25, 1.0};
  plan.active_modes = {-1, 0, 1};
  plan.n_max = 3;
  plan.tolerances.leakage_threshold = 1.0;
  return plan;
}

MeasurementPlan sorkin_plan(Composition c) {
  MeasurementPlan plan = small_plan();
  const auto& s = plan.lattice;
  plan.devices = {device(s, "A", 0.0, -4.0, -3.0, BinPartition::symmetric(0.02, 2)),
                  device(s, "B", 2.0, -2.0, 2.0, BinPartition::symmetric(0.05, 4), c),
                  device(s, "C", 3.0, 2.5, 3.5, BinPartition::symmetric(0.3, 4), c)};
  if (c != Composition::Linear) {
    plan.devices[1].bins = BinPartition::uniform(0.0, 0.005, 4);
    plan.devices[2].bins = BinPartition::uniform(0.0, 0.15, 4);
  }
  for (auto& d : plan.devices) d.part_bins = {3.0, 3};
  return plan;
}

MeasurementPlan chain_plan() {
  MeasurementPlan plan = small_plan();
  const auto& s = plan.lattice;
  plan.devices = {device(s, "A", 0.0, -1.0, 1.0, BinPartition::symmetric(0.3, 4)),
                  device(s, "C", 0.5, 5.0, 7.0, BinPartition::symmetric(0.3, 4)),
                  device(s, "B", 2.0, -0.5, 0.5, BinPartition::uniform(0.0, 0.05, 4), Composition::SumOfSquares)};
  return plan;
}

double max_difference(const OutcomeTable& a, const OutcomeTable& b) {
  double d = 0.0;
  for (const auto& [k, p] : a.probabilities) d = std::max(d, std::abs(p - (b.probabilities.count(k) ? b.probabilities.at(k) : 0.0)));
  for (const auto& [k, p] : b.probabilities) {
    if (!a.probabilities.count(k)) d = std::max(d, std::abs(p));
  }
  return d;
}

}  // namespace

TEST_SUITE("measurement_rules") {
  TEST_CASE("composition rules and names") {
    const std::vector<double> v{1.5, -2.0, 0.5};
    CHECK(compose(Composition::Linear, v) == doctest::Approx(0.0));
    CHECK(compose(Composition::Product, v) == doctest::Approx(-1.5));
    CHECK(compose(Composition::SumOfSquares, v) == doctest::Approx(6.5));
    CHECK(parse_composition("sum_of_squares") == Composition::SumOfSquares);
    CHECK_FALSE(parse_composition("cubic").has_value());
    CHECK(parse_rule("standard") == Rule::Standard);
    CHECK(std::string(to_string(Rule::Intrinsic)) == "intrinsic");
  }

  TEST_CASE("total variation distance") {
    const std::vector<double> p{0.5, 0.5, 0.0};
    const std::vector<double> q{0.25, 0.5, 0.25};
    CHECK(total_variation(p, q) == doctest::Approx(0.25));
    CHECK(total_variation(p, p) == 0.0);
  }

  TEST_CASE("Wigner probability and projector validation") {
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0) = 1.0;
    Matrix p = Matrix::Zero(2, 2);
    p(0, 0) = 1.0;
    Matrix q = Matrix::Constant(2, 2, 0.5);
    const std::vector<Matrix> seq{q, p};
    CHECK(wigner_probability(rho, seq) == doctest::Approx(0.25));
    const std::vector<Matrix> bad{2.0 * p};
    try {
      wigner_probability(rho, bad);
      FAIL("expected NotAProjector");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotAProjector);
    }
  }

  TEST_CASE("sequence engine matches explicit Wigner products, in pure and mixed form") {
    const Arrangement arr(sorkin_plan(Composition::Linear));
    std::vector<SequenceStep> steps;
    std::vector<const PartData*> parts;
    for (const auto& layer : arr.layers().layers) {
      for (const auto& id : layer) parts.push_back(&arr.part(id));
    }
    for (const auto* p : parts) steps.push_back({p->spectrum.get(), &p->labels, p->bins.size(), true});
    const Matrix& rho = arr.initial_density();
    const auto joint = run_sequence(rho, steps);
    double total = 0.0;
    int checked = 0;
    for (const auto& [key, prob] : joint) {
      total += prob;
      if (prob < 1e-3 || checked >= 6) continue;
      std::vector<Matrix> ps;
      for (std::size_t s = 0; s < parts.size(); ++s) ps.push_back(parts[s]->spectrum->projector(parts[s]->bins, key[s]));
      CHECK(prob == doctest::Approx(wigner_probability(rho, ps)).epsilon(1e-9));
      ++checked;
    }
    CHECK(checked > 0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const Eigen::VectorXcd psi1 = excited_vector(arr.basis(), std::vector<int>{1});
    const Eigen::VectorXcd psi0 = vacuum_vector(arr.basis());
    const Matrix mixed = 0.3 * pure_density(psi0) + 0.7 * pure_density(psi1);
    const auto from_mixed = run_sequence(mixed, steps);
    const auto from0 = run_sequence(pure_density(psi0), steps);
    const auto from1 = run_sequence(pure_density(psi1), steps);
    for (const auto& [key, prob] : from_mixed) {
      const double expect = 0.3 * (from0.count(key) ? from0.at(key) : 0.0) + 0.7 * (from1.count(key) ? from1.at(key) : 0.0);
      CHECK(prob == doctest::Approx(expect).epsilon(1e-9).scale(1e-12));
    }
  }

  TEST_CASE("non-selective channel equals the explicit sum over outcomes") {
    const Arrangement arr(sorkin_plan(Composition::SumOfSquares));
    TableOptions channel;
    channel.selective_devices = std::vector<std::string>{"C"};
    TableOptions summed = channel;
    summed.sequence.nonselective = NonselectiveMode::ExplicitSum;
    for (Rule r : {Rule::Standard, Rule::Intrinsic}) {
      CHECK(max_difference(rule_table(arr, r, channel), rule_table(arr, r, summed)) < 1e-12);
    }
  }

  TEST_CASE("tables are normalised and non-negative under both rules") {
    for (Composition c : {Composition::Linear, Composition::SumOfSquares, Composition::Product}) {
      const Arrangement arr(sorkin_plan(c));
      for (Rule r : {Rule::Standard, Rule::Intrinsic}) {
        const OutcomeTable t = rule_table(arr, r);
        CHECK(t.total() == doctest::Approx(1.0).epsilon(1e-10));
        for (const auto& [key, p] : t.probabilities) CHECK(p >= -1e-12);
        CHECK(t.devices == std::vector<std::string>{"A", "B", "C"});
      }
    }
  }

  TEST_CASE("pairwise Full/None devices give identical tables under both rules") {
    const Arrangement arr(chain_plan());
    for (std::size_t d = 0; d < 3; ++d) CHECK_FALSE(arr.is_split(d));
    CHECK(max_difference(standard_rule_table(arr), intrinsic_rule_table(arr)) <= 1e-12);
  }

  TEST_CASE("thread count does not change any table entry") {
    const Arrangement arr(sorkin_plan(Composition::SumOfSquares));
    TableOptions one;
    TableOptions many;
    many.sequence.threads = 4;
    const auto a = intrinsic_rule_table(arr, one);
    const auto b = intrinsic_rule_table(arr, many);
    REQUIRE(a.probabilities.size() == b.probabilities.size());
    for (const auto& [k, p] : a.probabilities) CHECK(p == b.probabilities.at(k));
  }

  TEST_CASE("equal-time devices must commute under the standard rule") {
    MeasurementPlan plan = small_plan();
    plan.active_modes = {1, 2};
    const auto& s = plan.lattice;
    plan.devices = {device(s, "A", 0.0, -3.0, -1.0, BinPartition::symmetric(0.2, 2)),
                    device(s, "B", 0.0, 0.5, 2.5, BinPartition::symmetric(0.2, 2))};
    const Arrangement arr(plan);
    try {
      standard_rule_table(arr);
      FAIL("expected TieGroupNotCommuting");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TieGroupNotCommuting);
    }
  }

  TEST_CASE("layer commutation guard") {
    MeasurementPlan plan = sorkin_plan(Composition::Linear);
    plan.tolerances.layer_commutator_max = 1e-6;
    const Arrangement arr(plan);
    REQUIRE(arr.layer_residual() > 1e-6);
    try {
      intrinsic_rule_table(arr);
      FAIL("expected LayerCommutationViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::LayerCommutationViolation);
    }
  }

  TEST_CASE("layer order overrides must be permutations") {
    const Arrangement arr(sorkin_plan(Composition::Linear));
    TableOptions o;
    o.layer_orders[0] = {"C1", "B1", "A"};
    CHECK(intrinsic_rule_table(arr, o).layer_order == std::vector<std::string>{"C1", "B1", "A", "B2", "C2"});
    o.layer_orders[0] = {"C1", "A"};
    CHECK_THROWS_AS(intrinsic_rule_table(arr, o), Error);
  }

  TEST_CASE("signaling audit requires spacelike devices and reports a distance") {
    const Arrangement arr(sorkin_plan(Composition::SumOfSquares));
    try {
      signaling_audit(arr, "A", "B", Rule::Intrinsic);
      FAIL("expected NotSpacelike");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotSpacelike);
    }
    const SignalingReport r = signaling_audit(arr, "A", "C", Rule::Standard);
    CHECK(r.with_source.size() == 6);
    CHECK(r.tv == doctest::Approx(total_variation(r.with_source, r.without_source)));
    CHECK(r.eps_trunc == doctest::Approx(arr.eps_trunc()));
  }

  TEST_CASE("decoupled spacelike parts have vanishing c-number commutators") {
    MeasurementPlan plan = sorkin_plan(Composition::Linear);
    plan.lattice = {128, 0.125, 1.0};
    plan.active_modes = {-1, 0, 1, 2};
    plan.n_max = 1;
    for (auto& d : plan.devices) d.smearing = bump_profile(plan.lattice, d.region.device_id,
                                                           0.5 * (d.region.x_lo + d.region.x_hi),
                                                           d.region.x_hi - d.region.x_lo);
    plan.decouple_spacelike = true;
    const Arrangement arr(plan);
    CHECK(arr.max_spacelike_cnumber() < 1e-14);
    CHECK(arr.decoupling_change() > 0.0);
  }

  TEST_CASE("composed part outcomes use bin representatives") {
    const BinPartition a = BinPartition::symmetric(1.0, 2);
    const BinPartition b = BinPartition::symmetric(1.0, 2);
    const BinPartition device = BinPartition::symmetric(2.0, 4);
    const std::vector<const BinPartition*> parts{&a, &b};
    CHECK(compose_outcomes(Composition::Linear, parts, std::vector<std::size_t>{2, 2}, device) == 4);
    CHECK(compose_outcomes(Composition::Linear, parts, std::vector<std::size_t>{0, 0}, device) == 0);
    CHECK(compose_outcomes(Composition::SumOfSquares, parts, std::vector<std::size_t>{1, 2}, device) == 3);
  }

  TEST_CASE("part factorisation of commuting diagonal parts") {
    const int n = 3;
    Matrix x = Matrix::Zero(n, n);
    x.diagonal() << -0.75, 0.25, 0.75;
    const Matrix one = Matrix::Identity(n, n);
    const Matrix a = oracle::kron(x, one);
    const Matrix b = oracle::kron(one, x);
    const Spectrum sa(a);
    const Spectrum sb(b);
    const Spectrum sd(a + b);
    const BinPartition part_bins = BinPartition::from_edges({-0.5, 0.0, 0.5, 1.0});
    const BinPartition device_bins = BinPartition::from_edges({-1.0, 0.0, 1.0});
    const std::vector<const Spectrum*> ps{&sa, &sb};
    const std::vector<const BinPartition*> pb{&part_bins, &part_bins};
    CHECK(part_factorization_residual(sd, device_bins, ps, pb) < 1e-12);
  }

  TEST_CASE("binning bound vanishes for unsplit devices and is a probability otherwise") {
    const Arrangement chain(chain_plan());
    CHECK(linear_binning_bound(chain, 0) == 0.0);
    const Arrangement sorkin(sorkin_plan(Composition::Linear));
    const double bound = linear_binning_bound(sorkin, 1);
    CHECK(bound > 0.0);
    CHECK(bound <= 2.0);
  }

  TEST_CASE("truncation diagnostics") {
    const Arrangement arr(sorkin_plan(Composition::Linear));
    CHECK(arr.eps_trunc() >= 0.0);
    CHECK(arr.layer_residual() <= 0.5 + 1e-12);
    for (double l : arr.leakage()) {
      CHECK(l >= 0.0);
      CHECK(l <= 1.0);
    }
    CHECK(arr.part_field(0).hermitian);
  }
}
