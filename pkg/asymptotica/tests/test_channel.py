# asymptotica/tests/test_channel.py

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asymptotica.services.channel import (
    Channel,
    Picture,
    adjoint_channel,
    apply,
    block_maps,
    check_properties,
    compose,
    from_kraus,
    power,
    schwarz_falsify,
    to_kraus,
    transpose_map,
    unitary_channel,
    with_schwarz_flag,
)
from asymptotica.services.unfolder import random_ucp
from asymptotica.tests.conftest import amplitude_damping_kraus, unit
from asymptotica.utils.errors import DimensionError, StructuralError, ValidationError
from asymptotica.utils.matcore import HilbertSplit, hs_inner

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_amplitude_damping_flags(damping, damping_schrodinger):
    """Schrödinger form is trace preserving, Heisenberg form is unital, both CP."""
    assert damping_schrodinger.flags.trace_preserving
    assert not damping_schrodinger.flags.unital
    assert damping_schrodinger.flags.cp
    assert damping.flags.unital
    assert not damping.flags.trace_preserving
    assert damping.flags.schwarz_unfalsified is True


def test_heisenberg_action_on_matrix_units(damping, damping_schrodinger):
    assert np.allclose(apply(damping, unit(2, 0, 0)), np.diag([1.0, 0.75]))
    assert np.allclose(apply(damping, unit(2, 1, 1)), np.diag([0.0, 0.25]))
    assert np.allclose(apply(damping_schrodinger, unit(2, 1, 1)), np.diag([0.75, 0.25]))


def test_adjoint_toggles_picture(damping_schrodinger, damping):
    adjoint = adjoint_channel(damping_schrodinger)
    assert adjoint.picture is Picture.HEISENBERG
    assert np.allclose(adjoint.superop, damping.superop)


def test_from_kraus_rejects_empty_and_mismatched():
    with pytest.raises(ValidationError, match="empty"):
        from_kraus([])
    with pytest.raises(DimensionError):
        from_kraus([np.eye(2), np.eye(3)])


def test_from_superop_rejects_non_square_dimension():
    with pytest.raises(DimensionError):
        Channel.from_superop(np.eye(5))


def test_unitary_channel_heisenberg_action():
    u = np.array([[0, 1], [1j, 0]])
    c = unitary_channel(u)
    x = np.array([[1, 2], [3, 4]], dtype=complex)
    assert np.allclose(apply(c, x), u.conj().T @ x @ u)
    assert c.flags.unital and c.flags.trace_preserving and c.flags.cp


def test_compose_and_power(damping):
    squared = power(damping, 2)
    assert np.allclose(squared.superop, damping.superop @ damping.superop)
    assert np.allclose(compose(damping, damping).superop, squared.superop)
    assert np.allclose(power(damping, 0).superop, np.eye(4))
    with pytest.raises(ValidationError):
        power(damping, -1)


def test_compose_rejects_mixed_pictures(damping, damping_schrodinger):
    with pytest.raises(ValidationError, match="compose"):
        compose(damping, damping_schrodinger)


def test_to_kraus_reproduces_superop(damping):
    ops = to_kraus(damping)
    assert len(ops) == 2
    rebuilt = from_kraus(ops, Picture.HEISENBERG)
    assert np.allclose(rebuilt.superop, damping.superop)


def test_to_kraus_rejects_transpose():
    with pytest.raises(ValidationError, match="completely positive"):
        to_kraus(transpose_map(2))


def test_transpose_is_unital_but_not_cp():
    t = transpose_map(2)
    assert t.flags.unital
    assert not t.flags.cp
    assert t.flags.schwarz_unfalsified is None


def test_schwarz_falsifier_catches_transpose():
    """The transpose violates the operator Schwarz inequality but satisfies the Kadison form."""
    t = transpose_map(2)
    full = schwarz_falsify(t, trials=50, seed=3)
    assert not full.passed
    assert full.worst_min_eigenvalue < -1e-3
    assert full.witness is not None
    assert not full.to_check().passed

    kadison = schwarz_falsify(t, trials=50, seed=3, hermitian_only=True)
    assert kadison.passed
    assert kadison.to_check().name == "kadison_schwarz"

    flagged = with_schwarz_flag(t, full)
    assert flagged.flags.schwarz_unfalsified is False
    assert check_properties(flagged).schwarz_unfalsified is False


def test_schwarz_falsifier_passes_cp_unital(damping):
    report = schwarz_falsify(damping, trials=30, seed=1)
    assert report.passed
    assert with_schwarz_flag(damping, report) is damping


def test_block_maps_of_amplitude_damping(damping):
    split = HilbertSplit.from_isometry(np.array([[1.0], [0.0]]))
    maps = block_maps(damping, split)
    assert (maps.d0, maps.d1) == (1, 1)
    assert np.allclose(maps.apply_phi00(np.eye(1)), [[1.0]])
    assert np.allclose(maps.apply_phi11(np.eye(1)), [[0.75]])
    assert np.allclose(maps.apply_psi11(np.eye(1)), [[0.25]])
    assert np.allclose(maps.phi01, 0)


def test_block_maps_rejects_non_invariant_split(damping):
    """H₀ = span{|1⟩} is not recurrent: the transient block leaks."""
    split = HilbertSplit.from_isometry(np.array([[0.0], [1.0]]))
    with pytest.raises(StructuralError) as excinfo:
        block_maps(damping, split)
    assert excinfo.value.invariant.startswith("block_maps")


def test_block_maps_needs_heisenberg(damping_schrodinger):
    with pytest.raises(ValidationError):
        block_maps(damping_schrodinger, HilbertSplit.trivial(2))


def test_amplitude_damping_kraus_completeness():
    ops = amplitude_damping_kraus(0.3)
    total = sum(k.conj().T @ k for k in ops)
    assert np.allclose(total, np.eye(2))


def test_from_superop_rejects_kraus_of_another_map(damping):
    """A Kraus list that does not reproduce the superoperator is refused."""
    wrong = amplitude_damping_kraus(0.3)
    with pytest.raises(ValidationError, match="do not reproduce"):
        Channel.from_superop(damping.superop, Picture.HEISENBERG, kraus=wrong)
    with pytest.raises(DimensionError):
        Channel.from_superop(damping.superop, Picture.HEISENBERG, kraus=[np.eye(3)])


def test_from_superop_accepts_matching_kraus(damping):
    ops = amplitude_damping_kraus()
    rebuilt = Channel.from_superop(damping.superop, Picture.HEISENBERG, kraus=ops)
    assert len(rebuilt.kraus) == 2
    with pytest.raises(ValidationError):
        # the same superoperator read as a Schrödinger map
        Channel.from_superop(damping.superop, Picture.SCHRODINGER, kraus=ops)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(min_value=1, max_value=4), rank=st.integers(min_value=1, max_value=3))
def test_adjoint_duality_on_random_channels(seed, d, rank):
    """⟨Φ(A), B⟩ = ⟨A, Φ†(B)⟩."""
    c = random_ucp(d, rank, seed)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    assert np.isclose(hs_inner(apply(c, a), b), hs_inner(a, apply(adjoint_channel(c), b)))


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(min_value=1, max_value=4), rank=st.integers(min_value=1, max_value=3))
def test_kraus_form_of_random_channels_rebuilds_them(seed, d, rank):
    c = random_ucp(d, rank, seed)
    assert c.flags.unital and c.flags.cp
    ops = to_kraus(c)
    assert len(ops) <= rank
    assert np.allclose(from_kraus(ops, Picture.HEISENBERG).superop, c.superop, atol=1e-9)
