"""Smeared-field measurement sequences under the standard and intrinsic ordering rules."""

from ._core import (
    CovmeasError,
    LatticeSpec,
    SmearingFunction,
    audit,
    bump_profile,
    canonical_scenario,
    gaussian_mass,
    kernels,
    layers,
    order,
    pauli_jordan,
    scenario_hash,
    simulate,
    uniform_profile,
    vacuum_variance,
    validate,
)

__all__ = [
    "CovmeasError",
    "LatticeSpec",
    "SmearingFunction",
    "audit",
    "bump_profile",
    "canonical_scenario",
    "gaussian_mass",
    "kernels",
    "layers",
    "order",
    "pauli_jordan",
    "scenario_hash",
    "simulate",
    "uniform_profile",
    "vacuum_variance",
    "validate",
]
