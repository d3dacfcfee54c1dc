# asymptotica/tests/test_unfolder.py

import os

import numpy as np
import pytest

from asymptotica.services.analysis_service import analysis_service
from asymptotica.services.channel import apply
from asymptotica.services.spectral import peripheral_projection, spectrum
from asymptotica.services.unfolder import (
    BlockShape,
    UnfoldSpec,
    block_automorphism,
    declared_algebra_basis,
    haar_unitary,
    lambda_embed,
    pinch_map,
    random_ucp,
    random_unfold_spec,
    require_valid,
    unfold,
    validate_spec,
)
from asymptotica.utils.errors import ValidationError
from asymptotica.utils.matcore import multiset_distance, superop_from_action, unvec, vec

# acceptance-scale counts when ASYMPTOTICA_FULL_SUITE=1
FULL_SUITE = os.getenv("ASYMPTOTICA_FULL_SUITE") == "1"
RANDOM_SPECS = 1000 if FULL_SUITE else 100
RANDOM_DMAX = 8


def single_block(d1, d2, **kwargs):
    return UnfoldSpec(blocks=(BlockShape(d1, d2),), h1_dim=0, perm=(0,), unitaries=(np.eye(d1),), **kwargs)


def test_spec_geometry():
    spec = UnfoldSpec(
        blocks=(BlockShape(2, 1), BlockShape(1, 3)),
        h1_dim=2,
        perm=(0, 1),
        unitaries=(np.eye(2), np.eye(1)),
        transient_map=np.zeros((4, 25)),
    )
    assert spec.n_blocks == 2
    assert spec.h0_dim == 5
    assert spec.dim == 7
    assert spec.offsets == [0, 2]
    assert np.allclose(spec.rho_k(1), np.eye(3) / 3)
    iso = spec.block_isometry(1)
    assert iso.shape == (5, 3)
    assert np.allclose(iso[2:, :], np.eye(3))


def test_pinch_of_single_block_traces_out_multiplicity():
    """One block with d1=1, d2=2: Z ↦ tr(Z)·I/2."""
    pinch = pinch_map(single_block(1, 2))
    z = np.array([[1.0, 5.0], [7.0, 3.0]])
    assert np.allclose(apply(pinch, z), 2.0 * np.eye(2))


def test_pinch_without_multiplicity_is_identity():
    pinch = pinch_map(single_block(3, 1))
    assert np.allclose(pinch.superop, np.eye(9))


def test_pinch_uses_declared_rho():
    spec = single_block(1, 2, rho=(np.diag([0.9, 0.1]),))
    z = np.diag([1.0, 0.0])
    assert np.allclose(apply(pinch_map(spec), z), 0.9 * np.eye(2))


def test_block_automorphism_swaps_blocks(swap_spec):
    automorphism = block_automorphism(swap_spec)
    assert np.allclose(apply(automorphism, np.diag([2.0, 5.0])), np.diag([5.0, 2.0]))


def test_block_automorphism_spectrum_of_rotation():
    spec = UnfoldSpec(blocks=(BlockShape(2, 1),), h1_dim=0, perm=(0,), unitaries=(np.diag([1.0, 1j]),))
    automorphism = block_automorphism(spec)
    assert multiset_distance([1, 1, 1j, -1j], np.linalg.eigvals(automorphism.superop)) < 1e-10


def test_lambda_embed_appends_transient_image():
    spec = UnfoldSpec(
        blocks=(BlockShape(1, 1),), h1_dim=1, perm=(0,), unitaries=(np.eye(1),), transient_map=np.ones((1, 1))
    )
    lam = lambda_embed(spec)
    assert lam.shape == (4, 1)
    assert np.allclose(unvec(lam @ vec(np.array([[3.0]])), (2, 2)), 3.0 * np.eye(2))


def test_declared_algebra_basis_counts_matrix_units():
    spec = UnfoldSpec(
        blocks=(BlockShape(2, 2), BlockShape(1, 1)), h1_dim=0, perm=(0, 1), unitaries=(np.eye(2), np.eye(1))
    )
    basis = declared_algebra_basis(spec)
    assert len(basis) == 5
    assert np.allclose(basis[0][:4, :4], np.kron(np.diag([1.0, 0.0]), np.eye(2)))


def test_unfold_damping_asymptotics(damping):
    """One recurrent level that feeds one transient level reproduces the damping projection."""
    spec = UnfoldSpec(
        blocks=(BlockShape(1, 1),), h1_dim=1, perm=(0,), unitaries=(np.eye(1),), transient_map=np.ones((1, 1))
    )
    channel = unfold(spec)
    expected = superop_from_action(lambda x: x[0, 0] * np.eye(2), (2, 2), (2, 2))
    assert np.allclose(channel.superop, expected)
    assert np.allclose(peripheral_projection(channel).superop, peripheral_projection(damping).superop, atol=1e-10)
    assert channel.flags.unital and channel.flags.cp


def test_unfold_swap_has_period_two_spectrum(swap_spec):
    channel = unfold(swap_spec)
    assert multiset_distance([1.0, -1.0], spectrum(channel).peripheral_eigenvalues) < 1e-10
    assert np.allclose(apply(channel, np.diag([1.0, 0.0])), np.diag([0.0, 1.0]))


def test_validate_spec_reports_every_problem():
    spec = UnfoldSpec(
        blocks=(BlockShape(2, 1), BlockShape(1, 1)),
        h1_dim=0,
        perm=(1, 0),
        unitaries=(np.ones((2, 2)), np.eye(1)),
    )
    problems = validate_spec(spec)
    assert any("perm maps block" in p for p in problems)
    assert any("not unitary" in p for p in problems)
    with pytest.raises(ValidationError, match="Invalid unfold spec"):
        require_valid(spec)


def test_validate_spec_transient_map_shapes():
    base = dict(blocks=(BlockShape(1, 1),), perm=(0,), unitaries=(np.eye(1),))
    assert validate_spec(UnfoldSpec(h1_dim=1, **base)) == ["transient_map must be 1x1, got None"]
    assert validate_spec(UnfoldSpec(h1_dim=0, transient_map=np.ones((1, 1)), **base)) == [
        "transient_map given but h1_dim is 0"
    ]
    problems = validate_spec(UnfoldSpec(h1_dim=1, transient_map=2 * np.ones((1, 1)), **base))
    assert len(problems) == 1 and "not unital" in problems[0]
    assert validate_spec(UnfoldSpec(blocks=(), h1_dim=0, perm=(), unitaries=())) == ["at least one block is required"]


def test_validate_spec_rejects_singular_rho():
    problems = validate_spec(single_block(1, 2, rho=(np.diag([1.0, 0.0]),)))
    assert problems == ["rho_0 is not full rank"]


def test_haar_unitary_is_unitary():
    rng = np.random.default_rng(0)
    for n in (1, 2, 5):
        u = haar_unitary(n, rng)
        assert np.allclose(u.conj().T @ u, np.eye(n))


def test_random_ucp_rank_one_is_unitary():
    c = random_ucp(2, 1, seed=4)
    assert c.flags.unital and c.flags.cp and c.flags.trace_preserving
    assert np.allclose(np.abs(np.linalg.eigvals(c.superop)), 1.0)
    result = analysis_service.analyze_structure(c)
    assert result.split.faithful
    assert result.attractor.dim == 4


def test_random_ucp_is_deterministic_and_ucp():
    first, second = random_ucp(3, 2, seed=11), random_ucp(3, 2, seed=11)
    assert np.allclose(first.superop, second.superop)
    assert first.flags.unital and first.flags.cp
    assert not np.allclose(random_ucp(3, 2, seed=12).superop, first.superop)
    with pytest.raises(ValidationError):
        random_ucp(2, 0)


def test_random_unfold_spec_is_valid():
    for seed in range(30):
        spec = random_unfold_spec(6, seed)
        assert validate_spec(spec) == []
        assert 1 <= spec.dim <= 6
        assert spec.seed == seed
    with pytest.raises(ValidationError):
        random_unfold_spec(1)


@pytest.mark.parametrize("fixture_name", ["swap_spec", "non_automorphic_spec"])
def test_roundtrip_named_specs(fixture_name, request):
    report = analysis_service.roundtrip(request.getfixturevalue(fixture_name))
    assert report.passed, report.mismatches


def test_roundtrip_rotated_block_with_weighted_multiplicity():
    rng = np.random.default_rng(9)
    spec = UnfoldSpec(
        blocks=(BlockShape(2, 2), BlockShape(2, 1), BlockShape(1, 1)),
        h1_dim=0,
        perm=(1, 0, 2),
        unitaries=(haar_unitary(2, rng), haar_unitary(2, rng), np.eye(1)),
        rho=(np.diag([0.6, 0.4]), np.eye(1), np.eye(1)),
    )
    report = analysis_service.roundtrip(spec)
    assert report.passed, report.mismatches
    assert {c.name for c in report.checks} >= {"roundtrip.unitaries", "roundtrip.rho", "roundtrip.p11"}


def test_roundtrip_random_specs():
    failures = []
    for seed in range(RANDOM_SPECS):
        report = analysis_service.roundtrip(random_unfold_spec(RANDOM_DMAX, seed))
        if not report.passed:
            failures.append((seed, report.mismatches))
    assert failures == []


def test_compare_flags_wrong_permutation(swap_spec):
    """Comparing the swap channel against a declaration without the swap fails on cycle type."""
    result = analysis_service.analyze_structure(unfold(swap_spec))
    truth = UnfoldSpec(blocks=swap_spec.blocks, h1_dim=0, perm=(0, 1), unitaries=swap_spec.unitaries)
    report = analysis_service.compare(truth, result)
    assert not report.passed
    assert any("cycle type" in m for m in report.mismatches)
