# asymptotica/tests/test_choi_effros.py

import numpy as np
import pytest

from asymptotica.services import choi_effros
from asymptotica.services.analysis_service import analysis_service
from asymptotica.services.choi_effros import (
    attractor_membership,
    build_star_algebra,
    dfa_definition_check,
    dfa_nstar,
    idempotent_cp_consistency,
    isomorphism_checks,
    kernel_ideal,
    peripherally_automorphic,
    power_growth,
    star_decoherence_defect,
    star_product,
    verify_cstar,
)
from asymptotica.services.spectral import ProjectionKind, ProjectionMap
from asymptotica.services.unfolder import BlockShape, UnfoldSpec, unfold
from asymptotica.tests.conftest import unit
from asymptotica.utils.config import DEFAULT_TOLERANCES
from asymptotica.utils.errors import DerivationViolationError, DomainError
from asymptotica.utils.matcore import superop_from_action, vec


@pytest.fixture
def damping_structure(damping):
    return analysis_service.analyze_structure(damping)


@pytest.fixture
def non_automorphic_structure(non_automorphic_spec):
    return analysis_service.analyze_structure(unfold(non_automorphic_spec))


def test_star_product_on_damping_attractor(damping_structure):
    projection = damping_structure.projection
    eye = np.eye(2)
    assert attractor_membership(projection, eye) < 1e-12
    assert np.allclose(star_product(projection, eye, eye), eye)


def test_star_product_rejects_operands_outside_attractor(damping_structure):
    with pytest.raises(DomainError, match="left"):
        star_product(damping_structure.projection, unit(2, 0, 1), np.eye(2))
    with pytest.raises(DomainError, match="right"):
        star_product(damping_structure.projection, np.eye(2), unit(2, 1, 1))


def test_star_algebra_structure_constants(damping_structure):
    algebra = build_star_algebra(damping_structure.attractor)
    assert algebra.dim == 1
    assert np.allclose(algebra.star(np.eye(2), np.eye(2)), np.eye(2))
    assert verify_cstar(algebra, trials=16).passed


def test_identity_channel_star_is_ordinary_product(qubit_identity):
    result = analysis_service.analyze_structure(qubit_identity)
    algebra = build_star_algebra(result.attractor)
    assert algebra.dim == 4
    x = np.array([[1, 2j], [0, -1]])
    y = np.array([[0, 1], [1, 3]])
    assert np.allclose(algebra.star(x, y), x @ y)
    report = verify_cstar(algebra, trials=16, seed=5)
    assert report.passed
    assert {c.name for c in report.checks} >= {"cstar.associativity", "cstar.cstar_identity"}


def test_damping_is_peripherally_automorphic(damping_structure):
    result = peripherally_automorphic(damping_structure.attractor)
    assert result.peripherally_automorphic
    assert result.witness is None
    checks = isomorphism_checks(damping_structure.channel, damping_structure.attractor, trials=8)
    assert all(c.passed for c in checks)
    assert all(c.passed for c in idempotent_cp_consistency(damping_structure.attractor, True))


def test_non_automorphic_attractor(non_automorphic_structure):
    """P₁₁(x) = tr(xρ)·I is unital CP but not multiplicative: ⋆ differs from the product."""
    attr = non_automorphic_structure.attractor
    result = peripherally_automorphic(attr)
    assert not result.peripherally_automorphic
    assert result.star_defect > 1e-3
    assert result.p11_defect == pytest.approx(result.star_defect, rel=1e-6)
    assert result.witness is not None
    # ⋆ still makes the attractor a C*-algebra
    assert verify_cstar(build_star_algebra(attr), trials=16).passed
    assert all(c.passed for c in isomorphism_checks(non_automorphic_structure.channel, attr, trials=8))


def test_kernel_ideal_of_damping(damping_structure):
    ideal = kernel_ideal(damping_structure.projection, damping_structure.split)
    assert len(ideal) == 1
    assert np.allclose(ideal[0], unit(2, 1, 1))


def test_nstar_of_damping(damping_structure):
    """N⋆ is the diagonal algebra: attractor span{I} plus the ideal span{E₁₁}."""
    dfa = dfa_nstar(damping_structure.attractor)
    assert dfa.nstar_dim == 2
    assert (len(dfa.attr_part), len(dfa.ideal_part)) == (1, 1)
    assert dfa.transient_full
    assert all(c.passed for c in dfa.checks)
    for b in dfa.nstar_basis:
        assert np.allclose(b, np.diag(np.diag(b)))


def test_nstar_of_faithful_channel_is_attractor(qubit_identity):
    result = analysis_service.analyze_structure(qubit_identity)
    dfa = dfa_nstar(result.attractor)
    assert dfa.ideal_part == ()
    assert dfa.nstar_dim == 4
    assert not dfa.transient_full
    report = dfa_definition_check(qubit_identity, dfa, result.projection, n_max=3, trials=4)
    assert report.passed
    assert report.outside_trials == 0


def test_nstar_with_large_transient_block():
    spec = UnfoldSpec(
        blocks=(BlockShape(1, 1),),
        h1_dim=3,
        perm=(0,),
        unitaries=(np.eye(1),),
        transient_map=vec(np.eye(3)).reshape(9, 1),
    )
    result = analysis_service.analyze_structure(unfold(spec))
    assert len(kernel_ideal(result.projection, result.split)) == 9
    assert dfa_nstar(result.attractor).nstar_dim == 10


def test_star_decoherence_on_damping(damping, damping_structure):
    projection = damping_structure.projection
    y = np.ones((2, 2), dtype=complex)
    assert star_decoherence_defect(damping, projection, unit(2, 1, 1), y, 3) < 1e-10
    assert star_decoherence_defect(damping, projection, np.eye(2), y, 2) < 1e-10
    assert star_decoherence_defect(damping, projection, unit(2, 0, 1), y, 1) > 0.1


def test_dfa_definition_check_on_damping(damping, damping_structure):
    dfa = dfa_nstar(damping_structure.attractor)
    report = dfa_definition_check(damping, dfa, damping_structure.projection, n_max=4, trials=8, seed=2)
    assert report.passed
    assert report.outside_trials == 8
    assert report.outside_violations > 0


def test_power_growth():
    assert power_growth(1) == 2
    assert power_growth(2) == 3
    assert power_growth(8) == 5


def test_dfa_definition_check_tolerances_per_power(damping, damping_structure):
    dfa = dfa_nstar(damping_structure.attractor)
    report = dfa_definition_check(damping, dfa, damping_structure.projection, n_max=3, trials=4, seed=1)
    assert [ch.name for ch in report.checks] == ["nstar.definition.n1", "nstar.definition.n2", "nstar.definition.n3"]
    assert [ch.tolerance for ch in report.checks] == [DEFAULT_TOLERANCES.eps_alg * power_growth(n) for n in (1, 2, 3)]


def test_dfa_definition_check_compares_the_raw_defect(monkeypatch, damping, damping_structure):
    """A defect growing linearly in n breaks the logarithmic allowance at n = 5."""
    eps = DEFAULT_TOLERANCES.eps_alg
    monkeypatch.setattr(choi_effros, "star_decoherence_defect", lambda c, p, x, y, n: 0.9 * eps * n)
    dfa = dfa_nstar(damping_structure.attractor)
    with pytest.raises(DerivationViolationError) as excinfo:
        dfa_definition_check(damping, dfa, damping_structure.projection, n_max=6, trials=2)
    assert excinfo.value.invariant == "nstar.definition.n5"


def test_kernel_ideal_rejects_leak_into_off_diagonal_block(damping_structure):
    """P_P(E₁₁) landing in the 01 block is not annihilation."""
    leaky = superop_from_action(lambda x: x[1, 1] * unit(2, 0, 1), (2, 2), (2, 2))
    projection = ProjectionMap(leaky, ProjectionKind.PERIPHERAL, 2)
    with pytest.raises(DerivationViolationError, match="annihilated"):
        kernel_ideal(projection, damping_structure.split)
