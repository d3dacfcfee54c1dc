# asymptotica/services/unfolder.py
"""Synthesis of UCP maps with a prescribed attractor and asymptotic action.

Declared coordinates: the blocks of H₀ occupy consecutive ranges in order,
block k holding ℂ^{d1}⊗ℂ^{d2} with index ``offset_k + i*d2 + β``; H₁ is the
last ``h1_dim`` coordinates of H.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from asymptotica.services.channel import Channel, Picture, adjoint_channel, apply, from_kraus
from asymptotica.services.spectral import attractor_basis, spectrum
from asymptotica.services.structure import recurrent_support
from asymptotica.utils.config import DEFAULT_TOLERANCES, Tolerances
from asymptotica.utils.errors import SynthesisError, ValidationError
from asymptotica.utils.matcore import (
    apply_superop,
    choi_from_superop,
    is_state,
    min_eigenvalue,
    orthonormal_span,
    partial_trace_second,
    partial_trace_weighted,
    psd_check,
    span_distance,
    superop_from_action,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlockShape:
    d1: int
    d2: int


@dataclass(frozen=True, eq=False)
class UnfoldSpec:
    """Declared asymptotics: blocks, π, U_k, ρ_k and the transient map P : B(H₀) → B(H₁).

    ``transient_map`` is an h1²×d0² superoperator; the synthesized channel uses
    it precomposed with the pinching, so only its restriction to 𝔄 matters.
    """

    blocks: Tuple[BlockShape, ...]
    h1_dim: int
    perm: Tuple[int, ...]
    unitaries: Tuple[np.ndarray, ...]
    transient_map: Optional[np.ndarray] = None
    rho: Optional[Tuple[np.ndarray, ...]] = None
    seed: Optional[int] = None

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def h0_dim(self) -> int:
        return sum(b.d1 * b.d2 for b in self.blocks)

    @property
    def dim(self) -> int:
        return self.h0_dim + self.h1_dim

    @property
    def offsets(self) -> List[int]:
        out, position = [], 0
        for b in self.blocks:
            out.append(position)
            position += b.d1 * b.d2
        return out

    def rho_k(self, k: int) -> np.ndarray:
        if self.rho is None:
            d2 = self.blocks[k].d2
            return np.eye(d2, dtype=complex) / d2
        return self.rho[k]

    def block_isometry(self, k: int) -> np.ndarray:
        """W_k : ℂ^{d1}⊗ℂ^{d2} → H₀."""
        b = self.blocks[k]
        iso = np.zeros((self.h0_dim, b.d1 * b.d2), dtype=complex)
        offset = self.offsets[k]
        iso[offset:offset + b.d1 * b.d2, :] = np.eye(b.d1 * b.d2)
        return iso


def validate_spec(spec: UnfoldSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> List[str]:
    """Every violated invariant, as a readable message; empty when the spec is valid."""
    problems: List[str] = []
    m = spec.n_blocks
    if m == 0:
        return ["at least one block is required"]
    if any(b.d1 < 1 or b.d2 < 1 for b in spec.blocks):
        problems.append("block dimensions must be positive")
    if spec.h1_dim < 0:
        problems.append("h1_dim must be non-negative")
    if sorted(spec.perm) != list(range(m)):
        problems.append(f"perm {list(spec.perm)} is not a permutation of {m} blocks")
    else:
        for k, j in enumerate(spec.perm):
            if spec.blocks[k].d1 != spec.blocks[j].d1:
                problems.append(f"perm maps block {j} (d1={spec.blocks[j].d1}) to block {k} (d1={spec.blocks[k].d1})")
    if len(spec.unitaries) != m:
        problems.append(f"expected {m} unitaries, got {len(spec.unitaries)}")
    else:
        for k, (b, u) in enumerate(zip(spec.blocks, spec.unitaries)):
            if u.shape != (b.d1, b.d1):
                problems.append(f"U_{k} has shape {u.shape}, expected {(b.d1, b.d1)}")
            elif np.linalg.norm(u.conj().T @ u - np.eye(b.d1)) > tol.eps_mat * b.d1 * 10:
                problems.append(f"U_{k} is not unitary")
    if spec.rho is not None:
        if len(spec.rho) != m:
            problems.append(f"expected {m} states rho, got {len(spec.rho)}")
        else:
            for k, (b, r) in enumerate(zip(spec.blocks, spec.rho)):
                if r.shape != (b.d2, b.d2) or not is_state(r, tol):
                    problems.append(f"rho_{k} is not a {b.d2}x{b.d2} density matrix")
                elif min_eigenvalue(r) <= tol.eps_faith:
                    problems.append(f"rho_{k} is not full rank")
    if problems:
        return problems

    d0, d1 = spec.h0_dim, spec.h1_dim
    if d1 == 0:
        if spec.transient_map is not None and spec.transient_map.size:
            problems.append("transient_map given but h1_dim is 0")
        return problems
    if spec.transient_map is None or spec.transient_map.shape != (d1 * d1, d0 * d0):
        shape = None if spec.transient_map is None else spec.transient_map.shape
        return problems + [f"transient_map must be {d1 * d1}x{d0 * d0}, got {shape}"]
    effective = transient_superop(spec)
    unital = np.linalg.norm(unvec(effective @ vec(np.eye(d0)), (d1, d1)) - np.eye(d1))
    if unital > tol.eps_alg:
        problems.append(f"transient_map is not unital on the recurrent algebra (defect {unital:.2e})")
    if not psd_check(choi_from_superop(effective, d0, d1), tol.eps_eig):
        problems.append("transient_map composed with the pinching is not completely positive")
    return problems


def require_valid(spec: UnfoldSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> UnfoldSpec:
    problems = validate_spec(spec, tol)
    if problems:
        raise ValidationError("Invalid unfold spec: " + "; ".join(problems))
    return spec


def _pinch_action(spec: UnfoldSpec, z: np.ndarray, tol: Tolerances) -> np.ndarray:
    out = np.zeros((spec.h0_dim, spec.h0_dim), dtype=complex)
    for k, b in enumerate(spec.blocks):
        w = spec.block_isometry(k)
        x = partial_trace_weighted(w.conj().T @ z @ w, b.d1, b.d2, spec.rho_k(k), tol)
        out += w @ np.kron(x, np.eye(b.d2)) @ w.conj().T
    return out


def pinch_superop(spec: UnfoldSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    d0 = spec.h0_dim
    return superop_from_action(lambda z: _pinch_action(spec, z, tol), (d0, d0), (d0, d0))


def pinch_map(spec: UnfoldSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Z ↦ ⊕_k tr₂(W_k†ZW_k (I⊗ρ_k)) ⊗ I on B(H₀); ρ_k = I/m_k unless declared."""
    require_valid(spec, tol)
    return Channel.from_superop(pinch_superop(spec, tol), Picture.HEISENBERG, tol=tol)


def _automorphism_action(spec: UnfoldSpec, z: np.ndarray) -> np.ndarray:
    xs = []
    for k, b in enumerate(spec.blocks):
        w = spec.block_isometry(k)
        xs.append(partial_trace_second(w.conj().T @ z @ w, b.d1, b.d2) / b.d2)
    out = np.zeros((spec.h0_dim, spec.h0_dim), dtype=complex)
    for k, b in enumerate(spec.blocks):
        j = spec.perm[k]
        u = spec.unitaries[j]
        w = spec.block_isometry(k)
        out += w @ np.kron(u.conj().T @ xs[j] @ u, np.eye(b.d2)) @ w.conj().T
    return out


def block_automorphism(spec: UnfoldSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Φ₀₀: ⊕x_k⊗I ↦ ⊕U†_{π(k)}x_{π(k)}U_{π(k)}⊗I, extended to B(H₀) by the uniform compression."""
    require_valid(spec, tol)
    d0 = spec.h0_dim
    superop = superop_from_action(lambda z: _automorphism_action(spec, z), (d0, d0), (d0, d0))
    return Channel.from_superop(superop, Picture.HEISENBERG, tol=tol)


def transient_superop(spec: UnfoldSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """P∘Φ_pinch as an h1²×d0² superoperator."""
    d1 = spec.h1_dim
    if d1 == 0:
        return np.zeros((0, spec.h0_dim ** 2), dtype=complex)
    return spec.transient_map @ pinch_superop(spec, tol)


def lambda_embed(spec: UnfoldSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Λ: X ↦ X ⊕ P(X) as a d²×d0² superoperator (P taken after the pinching)."""
    d0, d1, d = spec.h0_dim, spec.h1_dim, spec.dim
    transient = transient_superop(spec, tol)

    def action(x: np.ndarray) -> np.ndarray:
        out = np.zeros((d, d), dtype=complex)
        out[:d0, :d0] = x
        if d1:
            out[d0:, d0:] = unvec(transient @ vec(x), (d1, d1))
        return out

    return superop_from_action(action, (d0, d0), (d, d))


def declared_algebra_basis(spec: UnfoldSpec) -> List[np.ndarray]:
    """Matrix units E_ij ⊗ I of every block, embedded in B(H₀)."""
    basis = []
    for k, b in enumerate(spec.blocks):
        w = spec.block_isometry(k)
        for i in range(b.d1):
            for j in range(b.d1):
                unit = np.zeros((b.d1, b.d1), dtype=complex)
                unit[i, j] = 1.0
                basis.append(w @ np.kron(unit, np.eye(b.d2)) @ w.conj().T)
    return basis


def _verify(channel: Channel, spec: UnfoldSpec, lam: np.ndarray, automorphism: np.ndarray, tol: Tolerances) -> None:
    d0, d = spec.h0_dim, spec.dim
    diff = {}
    if not (channel.flags.unital and channel.flags.cp):
        diff["ucp"] = {"unital": channel.flags.unital, "cp": channel.flags.cp}

    split = recurrent_support(channel, tol)
    if split.h0_dim != d0:
        diff["h0_dim"] = {"declared": d0, "recovered": split.h0_dim}

    declared = [unvec(lam @ vec(a), (d, d)) for a in declared_algebra_basis(spec)]
    distance = span_distance(attractor_basis(channel, tol, spectrum(channel, tol)), orthonormal_span(declared, tol.eps_alg))
    if distance > tol.eps_alg:
        diff["attractor_span"] = distance

    restriction, squared = 0.0, 0.0
    for a in declared_algebra_basis(spec):
        image = apply_superop(automorphism, a, (d0, d0))
        expected = unvec(lam @ vec(image), (d, d))
        once = apply(channel, unvec(lam @ vec(a), (d, d)))
        restriction = max(restriction, float(np.linalg.norm(once - expected)))
        expected2 = unvec(lam @ vec(apply_superop(automorphism, image, (d0, d0))), (d, d))
        squared = max(squared, float(np.linalg.norm(apply(channel, once) - expected2)))
    if restriction > tol.eps_alg:
        diff["restriction"] = restriction
    if squared > tol.eps_alg:
        diff["restriction_squared"] = squared

    if diff:
        logger.error(f"Synthesized channel does not carry the declared asymptotics: {diff}")
        raise SynthesisError("Unfolded channel failed verification", invariant="unfold.verification", details=diff)


def unfold(spec: UnfoldSpec, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Φ_E = Λ∘Φ₀₀∘Φ_pinch∘(compression to H₀), checked against the declared structure."""
    require_valid(spec, tol)
    d0, d = spec.h0_dim, spec.dim
    pinch = pinch_superop(spec, tol)
    automorphism = block_automorphism(spec, tol).superop
    lam = lambda_embed(spec, tol)
    compression = superop_from_action(lambda x: x[:d0, :d0], (d, d), (d0, d0))
    channel = Channel.from_superop(lam @ automorphism @ pinch @ compression, Picture.HEISENBERG, tol=tol)
    _verify(channel, spec, lam, automorphism, tol)
    logger.info(f"Unfolded channel of dimension {d}: blocks {[(b.d1, b.d2) for b in spec.blocks]}, h1={spec.h1_dim}")
    return channel


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """QR of a complex Gaussian with the phases of R's diagonal folded back into Q."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def haar_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return haar_unitary(rows, rng)[:, :cols]


def random_ucp(d: int, kraus_rank: int, seed: int = 0, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Heisenberg UCP map from a Haar isometry ℂ^d → ℂ^d⊗ℂ^r."""
    if kraus_rank < 1:
        raise ValidationError("kraus_rank must be at least 1")
    rng = np.random.default_rng(seed)
    v = haar_isometry(d * kraus_rank, d, rng)
    kraus = [v[i::kraus_rank, :] for i in range(kraus_rank)]
    return adjoint_channel(from_kraus(kraus, Picture.SCHRODINGER, tol), tol)


def _random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    rho = 0.8 * rho + 0.2 * np.eye(n) / n
    return (rho + rho.conj().T) / 2


def random_unfold_spec(d_max: int, seed: int = 0, tol: Tolerances = DEFAULT_TOLERANCES) -> UnfoldSpec:
    """Random valid spec with Σ d1·d2 + h1 ≤ d_max."""
    if d_max < 2:
        raise ValidationError("d_max must be at least 2")
    rng = np.random.default_rng(seed)
    total = int(rng.integers(1, d_max + 1))
    h1 = int(rng.integers(0, total))
    remaining = total - h1
    blocks = []
    while remaining > 0:
        d1 = int(rng.integers(1, remaining + 1))
        d2 = int(rng.integers(1, remaining // d1 + 1))
        blocks.append(BlockShape(d1=d1, d2=d2))
        remaining -= d1 * d2

    m = len(blocks)
    perm = list(range(m))
    for size in {b.d1 for b in blocks}:
        members = [k for k, b in enumerate(blocks) if b.d1 == size]
        shuffled = list(rng.permutation(members))
        for k, j in zip(members, shuffled):
            perm[k] = int(j)

    unitaries = tuple(haar_unitary(b.d1, rng) for b in blocks)
    rho = tuple(_random_state(b.d2, rng) for b in blocks)
    spec = UnfoldSpec(blocks=tuple(blocks), h1_dim=h1, perm=tuple(perm), unitaries=unitaries, rho=rho, seed=seed)

    if h1:
        d0 = spec.h0_dim
        env = max(-(-h1 // d0), int(rng.integers(1, 3)))
        v = haar_isometry(d0 * env, h1, rng)

        def dilated(z: np.ndarray) -> np.ndarray:
            return v.conj().T @ np.kron(z, np.eye(env)) @ v

        transient = superop_from_action(dilated, (d0, d0), (h1, h1)) @ pinch_superop(spec, tol)
        spec = UnfoldSpec(
            blocks=spec.blocks, h1_dim=h1, perm=spec.perm, unitaries=unitaries, transient_map=transient, rho=rho, seed=seed
        )
    return require_valid(spec, tol)
