# asymptotica/tests/conftest.py

import numpy as np
import pytest

from asymptotica.services.channel import Picture, from_kraus, identity_channel
from asymptotica.services.unfolder import BlockShape, UnfoldSpec


def amplitude_damping_kraus(gamma: float = 0.75):
    """Schrödinger Kraus operators of amplitude damping with decay probability gamma."""
    return [
        np.array([[1.0, 0.0], [0.0, np.sqrt(1 - gamma)]]),
        np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]]),
    ]


def unit(d: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((d, d), dtype=complex)
    e[i, j] = 1.0
    return e


@pytest.fixture
def damping():
    """Heisenberg amplitude damping: X ↦ K₀†XK₀ + K₁†XK₁."""
    return from_kraus(amplitude_damping_kraus(), Picture.HEISENBERG)


@pytest.fixture
def damping_schrodinger():
    return from_kraus(amplitude_damping_kraus(), Picture.SCHRODINGER)


@pytest.fixture
def qubit_identity():
    return identity_channel(2)


@pytest.fixture
def swap_spec():
    """Two one-dimensional blocks exchanged every step."""
    return UnfoldSpec(
        blocks=(BlockShape(1, 1), BlockShape(1, 1)),
        h1_dim=0,
        perm=(1, 0),
        unitaries=(np.eye(1), np.eye(1)),
    )


@pytest.fixture
def non_automorphic_spec():
    """One qubit block, one transient dimension, P₁₁(x) = tr(xρ)·I."""
    rho = np.diag([0.7, 0.3])
    transient = np.array([[rho[0, 0], 0.0, 0.0, rho[1, 1]]], dtype=complex)
    return UnfoldSpec(
        blocks=(BlockShape(2, 1),),
        h1_dim=1,
        perm=(0,),
        unitaries=(np.eye(2),),
        transient_map=transient,
    )


def ket_bra(d: int, i: int, j: int, weight: float = 1.0) -> np.ndarray:
    return np.sqrt(weight) * unit(d, i, j)


@pytest.fixture
def damping_cascade():
    """Heisenberg form of |2⟩ → |1⟩ → |0⟩ decay; two transient levels coupled to each other."""
    gamma1, gamma2 = 0.5, 0.3
    kraus = [
        np.diag([1.0, np.sqrt(1 - gamma1), np.sqrt(1 - gamma2)]),
        ket_bra(3, 0, 1, gamma1),
        ket_bra(3, 1, 2, gamma2),
    ]
    return from_kraus(kraus, Picture.HEISENBERG)


@pytest.fixture
def swap_cascade():
    """|0⟩ ↔ |1⟩ exchanged every step; |2⟩ leaks into them with weights 0.8 and 0.2."""
    gamma, p = 0.5, 0.8
    kraus = [
        ket_bra(3, 1, 0),
        ket_bra(3, 0, 1),
        ket_bra(3, 2, 2, 1 - gamma),
        ket_bra(3, 0, 2, gamma * p),
        ket_bra(3, 1, 2, gamma * (1 - p)),
    ]
    return from_kraus(kraus, Picture.HEISENBERG)
