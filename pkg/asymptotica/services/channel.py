# asymptotica/services/channel.py

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from asymptotica.utils.checks import Check, check
from asymptotica.utils.config import DEFAULT_TOLERANCES, Tolerances
from asymptotica.utils.errors import DimensionError, StructuralError, ValidationError
from asymptotica.utils.matcore import (
    HilbertSplit,
    apply_superop,
    as_matrix,
    choi_from_superop,
    min_eigenvalue,
    psd_check,
    superop_from_action,
    superop_from_choi,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)


class Picture(str, Enum):
    HEISENBERG = "heisenberg"
    SCHRODINGER = "schrodinger"

    def toggled(self) -> "Picture":
        return Picture.SCHRODINGER if self is Picture.HEISENBERG else Picture.HEISENBERG


@dataclass(frozen=True)
class ChannelFlags:
    """Verified properties; ``schwarz_unfalsified`` is None until decided.

    CP unital maps are certified Schwarz, so the flag is set eagerly for them.
    """

    unital: bool
    trace_preserving: bool
    cp: bool
    schwarz_unfalsified: Optional[bool]
    eps_mat: float
    eps_eig: float


@dataclass(frozen=True, eq=False)
class Channel:
    """A linear map on B(ℂ^d) with its superoperator, Choi matrix and flags.

    Stored Kraus operators always describe the Schrödinger action ρ ↦ Σ KρK†,
    whatever the picture of the channel itself.
    """

    dim: int
    superop: np.ndarray
    picture: Picture
    flags: ChannelFlags
    choi: np.ndarray
    kraus: Optional[Tuple[np.ndarray, ...]] = None

    @classmethod
    def from_superop(
        cls,
        superop: np.ndarray,
        picture: Picture = Picture.HEISENBERG,
        kraus: Optional[Sequence[np.ndarray]] = None,
        tol: Tolerances = DEFAULT_TOLERANCES,
    ) -> "Channel":
        superop = as_matrix(superop)
        if superop.ndim != 2 or superop.shape[0] != superop.shape[1]:
            raise DimensionError(f"Superoperator must be square, got {superop.shape}")
        d = int(round(np.sqrt(superop.shape[0])))
        if d * d != superop.shape[0]:
            raise DimensionError(f"Superoperator size {superop.shape[0]} is not a perfect square")
        if kraus is not None:
            kraus = tuple(as_matrix(k) for k in kraus)
            _require_kraus_match(superop, kraus, Picture(picture), d, tol)
        choi = choi_from_superop(superop, d, d)
        flags = _compute_flags(superop, choi, d, tol)
        return cls(
            dim=d,
            superop=superop,
            picture=Picture(picture),
            flags=flags,
            choi=choi,
            kraus=kraus,
        )

    @classmethod
    def from_choi(
        cls, choi: np.ndarray, picture: Picture = Picture.HEISENBERG, tol: Tolerances = DEFAULT_TOLERANCES
    ) -> "Channel":
        choi = as_matrix(choi)
        d = int(round(np.sqrt(choi.shape[0])))
        superop = superop_from_choi(choi, d, d)
        return cls.from_superop(superop, picture, tol=tol)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply(self, x)


def _compute_flags(superop: np.ndarray, choi: np.ndarray, d: int, tol: Tolerances) -> ChannelFlags:
    identity = vec(np.eye(d))
    scale = max(1.0, np.linalg.norm(superop))
    unital = bool(np.linalg.norm(superop @ identity - identity) <= tol.eps_mat * scale * d)
    tp = bool(np.linalg.norm(superop.conj().T @ identity - identity) <= tol.eps_mat * scale * d)
    cp = bool(psd_check(choi, tol.eps_eig))
    return ChannelFlags(
        unital=unital,
        trace_preserving=tp,
        cp=cp,
        schwarz_unfalsified=True if (cp and unital) else None,
        eps_mat=tol.eps_mat,
        eps_eig=tol.eps_eig,
    )


def schrodinger_superop_from_kraus(ops: Sequence[np.ndarray]) -> np.ndarray:
    return sum(np.kron(k.conj(), k) for k in ops)


def _require_kraus_match(
    superop: np.ndarray, kraus: Sequence[np.ndarray], picture: Picture, d: int, tol: Tolerances
) -> None:
    if len(kraus) == 0 or any(k.shape != (d, d) for k in kraus):
        raise DimensionError(f"Kraus operators must all be {d}x{d} for a superoperator of size {d * d}")
    expected = schrodinger_superop_from_kraus(kraus)
    if picture is Picture.HEISENBERG:
        expected = expected.conj().T
    mismatch = float(np.linalg.norm(expected - superop))
    if mismatch > tol.eps_mat * max(1.0, float(np.linalg.norm(superop))):
        raise ValidationError(f"Kraus operators do not reproduce the superoperator (mismatch {mismatch:.3e})")


def from_kraus(
    ops: Sequence[np.ndarray], picture: Picture = Picture.SCHRODINGER, tol: Tolerances = DEFAULT_TOLERANCES
) -> Channel:
    """Channel from Schrödinger-convention Kraus operators.

    With ``picture=HEISENBERG`` the channel is the adjoint map X ↦ Σ K†XK.
    """
    if ops is None or len(ops) == 0:
        raise ValidationError("Kraus list is empty")
    ops = [as_matrix(k) for k in ops]
    d = ops[0].shape[0]
    for k in ops:
        if k.ndim != 2 or k.shape != (d, d):
            raise DimensionError(f"Kraus operators must all be {d}x{d}, got {k.shape}")
    superop = schrodinger_superop_from_kraus(ops)
    if Picture(picture) is Picture.HEISENBERG:
        superop = superop.conj().T
    return Channel.from_superop(superop, picture, kraus=ops, tol=tol)


def identity_channel(d: int, picture: Picture = Picture.HEISENBERG, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    return from_kraus([np.eye(d)], picture, tol)


def unitary_channel(u: np.ndarray, picture: Picture = Picture.HEISENBERG, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Schrödinger ρ ↦ UρU†; in the Heisenberg picture X ↦ U†XU."""
    return from_kraus([as_matrix(u)], picture, tol)


def transpose_map(d: int, picture: Picture = Picture.HEISENBERG, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    superop = superop_from_action(lambda x: x.T, (d, d), (d, d))
    return Channel.from_superop(superop, picture, tol=tol)


def adjoint_channel(c: Channel, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Hilbert-Schmidt adjoint; toggles the picture and keeps the Kraus list."""
    return Channel.from_superop(c.superop.conj().T, c.picture.toggled(), kraus=c.kraus, tol=tol)


def apply(c: Channel, x: np.ndarray) -> np.ndarray:
    x = as_matrix(x)
    if x.shape != (c.dim, c.dim):
        raise DimensionError(f"Channel on {c.dim}x{c.dim} operators applied to {x.shape}")
    return apply_superop(c.superop, x, (c.dim, c.dim))


def _require_compatible(a: Channel, b: Channel) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"Cannot compose channels of dimension {a.dim} and {b.dim}")
    if a.picture is not b.picture:
        raise ValidationError(f"Cannot compose {a.picture.value} and {b.picture.value} maps")


def compose(a: Channel, b: Channel, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """a ∘ b (b acts first)."""
    _require_compatible(a, b)
    return Channel.from_superop(a.superop @ b.superop, a.picture, tol=tol)


def power(c: Channel, n: int, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    if n < 0:
        raise ValidationError("Channel power must be non-negative")
    return Channel.from_superop(superop_power(c.superop, n), c.picture, tol=tol)


def superop_power(superop: np.ndarray, n: int) -> np.ndarray:
    """Repeated squaring."""
    result = np.eye(superop.shape[0], dtype=complex)
    base = as_matrix(superop)
    while n > 0:
        if n & 1:
            result = base @ result
        base = base @ base
        n >>= 1
    return result


def check_properties(c: Channel, tol: Tolerances = DEFAULT_TOLERANCES) -> ChannelFlags:
    """Recompute unital / TP / CP; keeps a previously decided Schwarz flag."""
    flags = _compute_flags(c.superop, c.choi, c.dim, tol)
    if c.flags.schwarz_unfalsified is not None and flags.schwarz_unfalsified is None:
        flags = replace(flags, schwarz_unfalsified=c.flags.schwarz_unfalsified)
    return flags


def with_flags(c: Channel, flags: ChannelFlags) -> Channel:
    return replace(c, flags=flags)


def to_kraus(c: Channel, tol: Tolerances = DEFAULT_TOLERANCES) -> List[np.ndarray]:
    """Schrödinger-convention Kraus operators from the Choi matrix.

    Keeps eigenpairs with eigenvalue above eps_eig·tr(J).
    """
    schrodinger = c.superop if c.picture is Picture.SCHRODINGER else c.superop.conj().T
    choi = choi_from_superop(schrodinger, c.dim, c.dim)
    if not psd_check(choi, tol.eps_eig):
        raise ValidationError("Map is not completely positive; no Kraus form exists")
    w, v = linalg.eigh((choi + choi.conj().T) / 2)
    threshold = tol.eps_eig * max(float(np.real(np.trace(choi))), 1e-300)
    ops = [np.sqrt(lam) * unvec(v[:, i], (c.dim, c.dim)) for i, lam in enumerate(w) if lam > threshold]
    logger.debug(f"Recovered {len(ops)} Kraus operators for a d={c.dim} channel")
    return ops


@dataclass(frozen=True, eq=False)
class FalsificationReport:
    """Result of sampling the operator Schwarz inequality Φ(X†X) ≥ Φ(X)†Φ(X)."""

    passed: bool
    trials: int
    worst_min_eigenvalue: float
    tolerance: float
    hermitian_only: bool
    witness: Optional[np.ndarray] = None

    def to_check(self) -> Check:
        name = "kadison_schwarz" if self.hermitian_only else "operator_schwarz"
        return check(name, max(0.0, -self.worst_min_eigenvalue), self.tolerance)


def _schwarz_gap(c: Channel, x: np.ndarray) -> Tuple[float, np.ndarray]:
    fx = apply(c, x)
    gap = apply(c, x.conj().T @ x) - fx.conj().T @ fx
    gap = (gap + gap.conj().T) / 2
    w, v = linalg.eigh(gap)
    return float(w[0]), v[:, 0]


def schwarz_falsify(
    c: Channel,
    trials: int = 200,
    seed: int = 0,
    hermitian_only: bool = False,
    refinements: int = 5,
    step: float = 0.5,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> FalsificationReport:
    """Search for X with λ_min(Φ(X†X) − Φ(X)†Φ(X)) < −eps_eig.

    Each Gaussian sample (normalized, Hermitian when ``hermitian_only``) is
    refined by descent along the worst eigenvector direction. Never raises.
    """
    if not c.flags.unital:
        logger.warning("Schwarz falsifier run on a non-unital map; the inequality is not expected to hold")
    rng = np.random.default_rng(seed)
    adjoint = c.superop.conj().T
    d = c.dim
    worst = np.inf
    witness = None

    for _ in range(trials):
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        if hermitian_only:
            x = (x + x.conj().T) / 2
        x /= np.linalg.norm(x)
        value, v = _schwarz_gap(c, x)

        for _ in range(refinements):
            vv = np.outer(v, v.conj())
            b = apply_superop(adjoint, vv, (d, d))
            grad = x @ b - apply_superop(adjoint, apply(c, x) @ vv, (d, d))
            if hermitian_only:
                grad = (grad + grad.conj().T) / 2
            candidate = x - step * grad
            norm = np.linalg.norm(candidate)
            if norm == 0:
                break
            candidate /= norm
            cand_value, cand_v = _schwarz_gap(c, candidate)
            if cand_value >= value:
                break
            x, value, v = candidate, cand_value, cand_v

        if value < worst:
            worst, witness = value, x

    passed = bool(worst >= -tol.eps_eig)
    if not passed:
        logger.info(f"Schwarz inequality falsified: min eigenvalue {worst:.3e}")
    return FalsificationReport(
        passed=passed,
        trials=trials,
        worst_min_eigenvalue=float(worst),
        tolerance=tol.eps_eig,
        hermitian_only=hermitian_only,
        witness=witness,
    )


def with_schwarz_flag(c: Channel, report: FalsificationReport) -> Channel:
    if c.flags.cp and c.flags.unital:
        return c
    return replace(c, flags=replace(c.flags, schwarz_unfalsified=report.passed))


@dataclass(frozen=True, eq=False)
class BlockMaps:
    """Block components of a Heisenberg map relative to H = H₀ ⊕ H₁.

    ``phi_ij`` sends x₀₀ ∈ B(H₀) to the (i, j) block of Φ(x₀₀ ⊕ 0);
    ``psi11`` sends x₁₁ ∈ B(H₁) to the (1, 1) block of Φ(0 ⊕ x₁₁).
    """

    d0: int
    d1: int
    phi00: np.ndarray
    phi01: np.ndarray
    phi10: np.ndarray
    phi11: np.ndarray
    psi11: np.ndarray

    def apply_phi00(self, x00: np.ndarray) -> np.ndarray:
        return apply_superop(self.phi00, x00, (self.d0, self.d0))

    def apply_phi11(self, x00: np.ndarray) -> np.ndarray:
        return apply_superop(self.phi11, x00, (self.d1, self.d1))

    def apply_psi11(self, x11: np.ndarray) -> np.ndarray:
        return apply_superop(self.psi11, x11, (self.d1, self.d1))


def block_maps(c: Channel, split: HilbertSplit, tol: Tolerances = DEFAULT_TOLERANCES) -> BlockMaps:
    if c.picture is not Picture.HEISENBERG:
        raise ValidationError("block_maps expects a Heisenberg-picture channel")
    if split.dim_total != c.dim:
        raise DimensionError(f"Split of dimension {split.dim_total} does not match channel dimension {c.dim}")
    d0, d1 = split.h0_dim, split.h1_dim

    def from_h0(i: int, j: int):
        rows = d0 if i == 0 else d1
        cols = d0 if j == 0 else d1
        return superop_from_action(
            lambda x: split.block(apply(c, split.embed(x00=x)), i, j), (d0, d0), (rows, cols)
        )

    def from_h1(i: int, j: int):
        rows = d0 if i == 0 else d1
        cols = d0 if j == 0 else d1
        return superop_from_action(
            lambda x: split.block(apply(c, split.embed(x11=x)), i, j), (d1, d1), (rows, cols)
        )

    maps = BlockMaps(
        d0=d0,
        d1=d1,
        phi00=from_h0(0, 0),
        phi01=from_h0(0, 1),
        phi10=from_h0(1, 0),
        phi11=from_h0(1, 1),
        psi11=from_h1(1, 1),
    )

    if d1 == 0:
        return maps

    psi_leak = max(np.linalg.norm(from_h1(0, 0)), np.linalg.norm(from_h1(0, 1)), np.linalg.norm(from_h1(1, 0)))
    eye0 = vec(np.eye(d0))
    identity_defect = max(
        np.linalg.norm(maps.phi01 @ eye0),
        np.linalg.norm(maps.phi10 @ eye0),
        np.linalg.norm(unvec(maps.phi11 @ eye0, (d1, d1)) + maps.apply_psi11(np.eye(d1)) - np.eye(d1)),
    )
    bound = tol.eps_mat * max(1.0, np.linalg.norm(c.superop))
    if psi_leak > bound:
        logger.error(f"Transient block leaks into the recurrent blocks: {psi_leak:.3e}")
        raise StructuralError(
            "ψ₀₀, ψ₀₁, ψ₁₀ do not vanish; wrong split or non-Schwarz input",
            invariant="block_maps.psi_vanishing",
            margin=float(psi_leak),
        )
    if identity_defect > bound:
        logger.error(f"Block identities violated: {identity_defect:.3e}")
        raise StructuralError(
            "φ₀₁(I₀), φ₁₀(I₀) must vanish and φ₁₁(I₀) + ψ₁₁(I₁) = I₁",
            invariant="block_maps.identity",
            margin=float(identity_defect),
        )
    logger.debug(f"Block maps extracted: d0={d0}, d1={d1}")
    return maps


def choi_min_eigenvalue(c: Channel) -> float:
    return min_eigenvalue(c.choi)
