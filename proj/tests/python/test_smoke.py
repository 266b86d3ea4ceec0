import math
import os
from pathlib import Path

import pytest

import covmeas

SCENARIOS = Path(os.environ.get("COVMEAS_SCENARIO_DIR", Path(__file__).resolve().parents[2] / "scenarios"))


def scenario(name):
    return SCENARIOS / f"{name}.json"


def test_sorkin_layers():
    regions = [("A", 0.0, -4.0, -3.0), ("B", 2.0, -2.0, 2.0), ("C", 3.0, 2.5, 3.5)]
    assert covmeas.layers(regions) == [["A", "B1", "C1"], ["B2", "C2"]]
    assert covmeas.order(scenario("sorkin")) == [["A", "B1", "C1"], ["B2", "C2"]]


def test_kernel_identity():
    for omega, t in [(0.7, 0.4), (1.3, 2.0), (2.5, 0.9)]:
        a, b, c = covmeas.kernels(omega, t)
        assert b * b - a * a == pytest.approx(omega * omega, rel=1e-12)
        assert c >= 0.0


def test_caustic_raises_with_code():
    with pytest.raises(covmeas.CovmeasError) as info:
        covmeas.kernels(1.0, math.pi)
    assert info.value.code == "CausticSingularity"


def test_lattice_and_commutator():
    spec = covmeas.LatticeSpec(64, 0.25, 1.0)
    assert spec.box_length == pytest.approx(16.0)
    f = covmeas.bump_profile(spec, "A", -2.0, 1.0)
    g = covmeas.bump_profile(spec, "B", 2.0, 1.0)
    assert abs(covmeas.pauli_jordan(spec, f, 0.0, g, 1.5)) < 1e-5
    assert abs(covmeas.pauli_jordan(spec, f, 0.0, f, 0.0)) < 1e-14
    assert covmeas.vacuum_variance(spec, f, [-1, 0, 1]) > 0.0


def test_simulate_single_device():
    table = covmeas.simulate(scenario("single_device"))
    assert table["rule"] == "intrinsic"
    assert table["total"] == pytest.approx(1.0, abs=1e-9)
    assert sum(table["probabilities"].values()) == pytest.approx(1.0, abs=1e-9)
    standard = covmeas.simulate(scenario("single_device"), rule="standard", threads=2)
    assert standard["probabilities"].keys() == table["probabilities"].keys()


def test_audit_and_validate():
    report = covmeas.audit(scenario("chain"), "A", "C")
    assert 0.0 <= report["tv"] <= 5.0 * report["eps_trunc"]
    checks = covmeas.validate(scenario("chain"))
    assert checks and all(c["passed"] for c in checks)


def test_scenario_hash_is_stable():
    h = covmeas.scenario_hash(scenario("sorkin"))
    assert len(h) == 64
    assert covmeas.scenario_hash(scenario("sorkin")) == h
    assert covmeas.scenario_hash(scenario("chain")) != h
    assert '"schema_version": 1' in covmeas.canonical_scenario(scenario("sorkin"))
