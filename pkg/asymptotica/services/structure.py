# asymptotica/services/structure.py
"""Recurrent/transient split, reduced dynamics and the attractor structure.

Everything here works in the Heisenberg picture. A Schrödinger-picture channel
is converted with its Hilbert-Schmidt adjoint on entry.

Adapted coordinates of a block k are given by an isometry ``W_k`` from
ℂ^{d1}⊗ℂ^{d2} into H₀ (column ``i*d2 + β``), chosen so that every element a of
the recurrent algebra satisfies ``W_k† a W_k = x_k ⊗ I``.
"""

import logging
from dataclasses import dataclass, replace
from math import lcm
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import linalg

from asymptotica.services.channel import BlockMaps, Channel, Picture, adjoint_channel, apply
from asymptotica.services.spectral import (
    ProjectionMap,
    SpectralData,
    attractor_basis,
    fixed_projection,
    peripheral_projection,
)
from asymptotica.utils.checks import Check, check, check_at_least
from asymptotica.utils.config import DEFAULT_SETTINGS, DEFAULT_TOLERANCES, RunSettings, Tolerances
from asymptotica.utils.errors import (
    DecompositionError,
    FaithfulnessError,
    NotAnAlgebraError,
    PermutationExtractionError,
    StructuralError,
    ValidationError,
)
from asymptotica.utils.matcore import (
    HilbertSplit,
    apply_superop,
    as_matrix,
    choi_from_superop,
    inv_sqrt_on_support,
    matrix_unit,
    min_eigenvalue,
    multiset_distance,
    orthonormal_span,
    partial_trace_first,
    partial_trace_second,
    partial_trace_weighted,
    phase_fixed,
    span_distance,
    span_residual,
    sqrt_psd,
    superop_from_action,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)


def heisenberg(c: Channel, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    return c if c.picture is Picture.HEISENBERG else adjoint_channel(c, tol)


@dataclass(frozen=True, eq=False)
class WolfBlock:
    d1: int
    d2: int
    iso: np.ndarray
    projector: np.ndarray
    rho: Optional[np.ndarray] = None

    def compress(self, a: np.ndarray) -> np.ndarray:
        """x_k with W_k† a W_k ≈ x_k ⊗ I."""
        return partial_trace_second(self.iso.conj().T @ a @ self.iso, self.d1, self.d2) / self.d2

    def embed(self, x: np.ndarray) -> np.ndarray:
        return self.iso @ np.kron(as_matrix(x), np.eye(self.d2)) @ self.iso.conj().T


@dataclass(frozen=True, eq=False)
class WolfDecomposition:
    """H₀ = ⊕_k H_{k,1}⊗H_{k,2} with states ρ_k, permutation π and unitaries U_k.

    The reduced map acts on the recurrent algebra as
    ``x_k ↦ U_{π(k)}† x_{π(k)} U_{π(k)}``; ``unitaries[j]`` is U_j.
    """

    split: HilbertSplit
    blocks: Tuple[WolfBlock, ...]
    algebra_basis: Tuple[np.ndarray, ...]
    permutation: Optional[Tuple[int, ...]] = None
    unitaries: Optional[Tuple[np.ndarray, ...]] = None
    external: Optional[bool] = None

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def h0_dim(self) -> int:
        return self.split.h0_dim

    def assemble(self, xs: Sequence[np.ndarray]) -> np.ndarray:
        out = np.zeros((self.h0_dim, self.h0_dim), dtype=complex)
        for block, x in zip(self.blocks, xs):
            out += block.embed(x)
        return out

    def components(self, a: np.ndarray) -> List[np.ndarray]:
        return [block.compress(a) for block in self.blocks]

    def act(self, a: np.ndarray) -> np.ndarray:
        """Asymptotic action on the recurrent algebra from (π, U)."""
        if self.permutation is None or self.unitaries is None:
            raise ValidationError("Dynamics have not been extracted")
        xs = self.components(a)
        images = []
        for k in range(self.n_blocks):
            j = self.permutation[k]
            u = self.unitaries[j]
            images.append(u.conj().T @ xs[j] @ u)
        return self.assemble(images)

    def fragment(self) -> dict:
        return {
            "blocks": [
                {"d1": b.d1, "d2": b.d2, "rho_k": None if b.rho is None else b.rho}
                for b in self.blocks
            ],
            "permutation": list(self.permutation) if self.permutation is not None else None,
            "unitaries": list(self.unitaries) if self.unitaries is not None else None,
            "external": self.external,
        }


@dataclass(frozen=True, eq=False)
class AttractorStructure:
    """Attr(Φ) = {Λ(a) : a ∈ 𝔄}, Λ(a) = V₀aV₀† + V₁P₁₁(a)V₁†.

    ``p11_extension`` is the superoperator of X₀₀ ↦ V₁†P_P(V₀X₀₀V₀†)V₁ on all
    of B(H₀); ``p11_matrix`` its restriction to the 𝔄 basis (columns vec P₁₁(a_i)).
    """

    split: HilbertSplit
    projection: ProjectionMap
    algebra_basis_00: Tuple[np.ndarray, ...]
    p11_extension: np.ndarray
    p11_matrix: np.ndarray
    attractor_basis: Tuple[np.ndarray, ...]
    asymptotic_action: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return len(self.algebra_basis_00)

    def p11(self, a: np.ndarray) -> np.ndarray:
        d1 = self.split.h1_dim
        return apply_superop(self.p11_extension, a, (d1, d1))

    def lam(self, a: np.ndarray) -> np.ndarray:
        """Λ: B(H₀) ⊃ 𝔄 → Attr(Φ) ⊂ B(H)."""
        if self.split.faithful:
            return self.split.embed(x00=a)
        return self.split.embed(x00=a, x11=self.p11(a))

    def orthonormal_attractor(self, eps: float) -> List[np.ndarray]:
        return orthonormal_span(self.attractor_basis, eps)


def recurrent_support(
    c: Channel,
    tol: Tolerances = DEFAULT_TOLERANCES,
    projection: Optional[ProjectionMap] = None,
) -> HilbertSplit:
    """H₀ = supp P_P†(I), eigenvalues above eps_supp relative to the largest."""
    c = heisenberg(c, tol)
    projection = projection or peripheral_projection(c, tol)
    state = projection.adjoint().apply(np.eye(c.dim))
    w, v = linalg.eigh((state + state.conj().T) / 2)
    threshold = tol.eps_supp * max(w.max(), 1e-300)
    keep = w > threshold
    v0 = v[:, keep][:, ::-1]
    split = HilbertSplit.from_isometry(v0, tol)
    logger.info(f"Recurrent support: dim H0={split.h0_dim}, dim H1={split.h1_dim}")
    return split


def reduce(c: Channel, split: HilbertSplit, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Reduced UCP map φ₀₀(X) = V₀†Φ(V₀XV₀†)V₀ on B(H₀)."""
    c = heisenberg(c, tol)
    d0 = split.h0_dim
    if not split.faithful:
        schrodinger = c.superop.conj().T
        leak = 0.0
        for i in range(d0):
            for j in range(d0):
                image = apply_superop(schrodinger, split.embed(x00=matrix_unit(d0, d0, i, j)), (c.dim, c.dim))
                leak = max(leak, float(np.linalg.norm(image - split.q0 @ image @ split.q0)))
        if leak > tol.eps_alg:
            logger.error(f"B(H0) is not invariant under the Schrödinger map: leak {leak:.3e}")
            raise StructuralError(
                "B(H₀)⊕0 is not invariant under Φ†", invariant="reduce.invariance", margin=leak
            )
    reduced = Channel.from_superop(
        superop_from_action(lambda x: split.block(apply(c, split.embed(x00=x)), 0, 0), (d0, d0), (d0, d0)),
        Picture.HEISENBERG,
        tol=tol,
    )

    sigma = reduced_fixed_state(reduced, tol)
    smallest = min_eigenvalue(sigma)
    if smallest <= tol.eps_faith * max(1.0, np.linalg.norm(sigma, 2)):
        logger.error(f"Reduced map is not faithful: min eigenvalue of fixed state {smallest:.3e}")
        raise FaithfulnessError(
            "Reduced map has no invertible stationary state", invariant="reduce.faithful", margin=smallest
        )
    logger.info(f"Reduced channel built on H0 of dimension {d0}")
    return reduced


def _algebra_closure_defect(basis: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for a in basis:
        worst = max(worst, span_residual(a.conj().T, basis))
    for a in basis:
        for b in basis:
            worst = max(worst, span_residual(a @ b, basis))
    return worst


def _center(basis: Sequence[np.ndarray], tol: Tolerances) -> List[np.ndarray]:
    """Central elements of span(basis), from the null space of the commutator system.

    The threshold is absolute: a commutative algebra has an all-zero system.
    """
    n = len(basis)
    zero = np.zeros_like(basis[0], dtype=complex)
    columns = []
    for a in basis:
        columns.append(np.concatenate([(a @ b - b @ a).reshape(-1) for b in basis]))
    system = np.stack(columns, axis=1)
    _, s, vh = linalg.svd(system)
    scale = max(float(np.linalg.norm(a)) for a in basis)
    singular = np.zeros(n)
    singular[: s.size] = s
    null = vh[singular <= tol.eps_alg * max(1.0, scale)].conj()
    return [sum((null[m, i] * basis[i] for i in range(n)), zero) for m in range(null.shape[0])]


def _group_eigenvalues(w: np.ndarray, scale: float, tol: Tolerances) -> Optional[List[np.ndarray]]:
    """Split sorted eigenvalues into clusters; None when a gap is ambiguous."""
    radius = 10 * tol.eps_alg * scale
    groups = [[0]]
    for i in range(1, w.size):
        gap = w[i] - w[i - 1]
        if gap <= radius:
            groups[-1].append(i)
        elif gap < 100 * radius:
            return None
        else:
            groups.append([i])
    return [np.array(g) for g in groups]


def _central_projections(
    basis: Sequence[np.ndarray], d0: int, rng: np.random.Generator, tol: Tolerances, max_retries: int
) -> List[np.ndarray]:
    center = _center(basis, tol)
    hermitian = []
    for z in center:
        hermitian.append((z + z.conj().T) / 2)
        hermitian.append((z - z.conj().T) / 2j)
    zero = np.zeros((d0, d0), dtype=complex)
    for attempt in range(max_retries):
        h = sum((rng.standard_normal() * z for z in hermitian), zero)
        w, v = linalg.eigh((h + h.conj().T) / 2)
        groups = _group_eigenvalues(w, max(1e-300, float(np.abs(w).max())), tol)
        if groups is not None and len(groups) == len(center):
            return [v[:, g] for g in groups]
        logger.warning(f"Central element sample {attempt + 1} ambiguous; retrying")
    raise DecompositionError(
        "Could not separate minimal central projections",
        invariant="wolf.center",
        details={"center_dim": len(center)},
    )


def _block_isometry(
    restricted: Sequence[np.ndarray], d1: int, d2: int, rng: np.random.Generator, tol: Tolerances, max_retries: int
) -> np.ndarray:
    """Tensor-adapted basis of one simple block given its algebra (restricted to range P_k)."""
    r = d1 * d2
    if d1 == 1:
        return np.eye(r, dtype=complex)
    hermitian = [(b + b.conj().T) / 2 for b in restricted] + [(b - b.conj().T) / 2j for b in restricted]
    for attempt in range(max_retries):
        h = sum(rng.standard_normal() * x for x in hermitian)
        w, v = linalg.eigh((h + h.conj().T) / 2)
        groups = _group_eigenvalues(w, max(1e-300, float(np.abs(w).max())), tol)
        if groups is None or len(groups) != d1 or any(g.size != d2 for g in groups):
            logger.warning(f"Minimal projection sample {attempt + 1} degenerate; retrying")
            continue
        frames = [v[:, g] for g in groups]
        e1 = frames[0] @ frames[0].conj().T
        a = sum((rng.standard_normal() + 1j * rng.standard_normal()) * b for b in restricted)
        columns = []
        ok = True
        for frame in frames:
            ei = frame @ frame.conj().T
            unit = ei @ a @ e1
            norm = np.linalg.norm(unit) / np.sqrt(d2)
            if norm < np.sqrt(tol.eps_alg):
                ok = False
                break
            columns.append(unit / norm @ frames[0])
        if not ok:
            logger.warning(f"Matrix-unit sample {attempt + 1} degenerate; retrying")
            continue
        iso = np.zeros((r, r), dtype=complex)
        for i, block in enumerate(columns):
            iso[:, i * d2:(i + 1) * d2] = block
        return iso
    raise DecompositionError(
        "Could not build matrix units for a simple block", invariant="wolf.matrix_units", details={"d1": d1, "d2": d2}
    )


def wolf_decompose(
    c_reduced: Channel,
    tol: Tolerances = DEFAULT_TOLERANCES,
    settings: RunSettings = DEFAULT_SETTINGS,
    spectral: Optional[SpectralData] = None,
    split: Optional[HilbertSplit] = None,
) -> WolfDecomposition:
    """Decompose the attractor algebra 𝔄 of a faithful UCP map as ⊕_k B(ℂ^{d1_k}) ⊗ I_{d2_k}."""
    c_reduced = heisenberg(c_reduced, tol)
    d0 = c_reduced.dim
    basis = attractor_basis(c_reduced, tol, spectral)
    closure = _algebra_closure_defect(basis)
    if closure > tol.eps_alg:
        logger.error(f"Attractor of the reduced map is not a *-algebra: defect {closure:.3e}")
        raise NotAnAlgebraError(
            "Attractor of the reduced map is not closed under product and adjoint",
            invariant="wolf.algebra_closure",
            margin=closure,
        )

    rng = np.random.default_rng(settings.seed)
    frames = _central_projections(basis, d0, rng, tol, settings.max_retries)
    blocks = []
    for frame in frames:
        rank = frame.shape[1]
        restricted = orthonormal_span([frame.conj().T @ a @ frame for a in basis], tol.eps_alg)
        n_k = len(restricted)
        d1 = int(round(np.sqrt(n_k)))
        if d1 * d1 != n_k or rank % d1 != 0:
            logger.error(f"Block of rank {rank} carries an algebra of dimension {n_k}")
            raise DecompositionError(
                f"Simple block algebra of dimension {n_k} on a rank-{rank} projection does not factorize",
                invariant="wolf.factorization",
                details={"algebra_dim": n_k, "rank": rank},
            )
        d2 = rank // d1
        iso = frame @ _block_isometry(restricted, d1, d2, rng, tol, settings.max_retries)
        blocks.append(WolfBlock(d1=d1, d2=d2, iso=iso, projector=frame @ frame.conj().T))

    wolf = WolfDecomposition(
        split=split or HilbertSplit.trivial(d0),
        blocks=tuple(blocks),
        algebra_basis=tuple(basis),
    )

    total = sum(b.d1 * b.d2 for b in blocks)
    defect = 0.0
    for a in basis:
        defect = max(defect, float(np.linalg.norm(wolf.assemble(wolf.components(a)) - a)))
    if total != d0 or defect > tol.eps_alg:
        logger.error(f"Adapted-basis reconstruction failed: defect {defect:.3e}, Σd1·d2={total}, d0={d0}")
        raise DecompositionError(
            "Recurrent algebra is not block diagonal in the adapted basis",
            invariant="wolf.reconstruction",
            margin=defect,
            details={"sum_d1_d2": total, "h0_dim": d0},
        )
    logger.info(f"Wolf decomposition: {len(blocks)} blocks {[(b.d1, b.d2) for b in blocks]}")
    return wolf


def reduced_fixed_state(
    c_reduced: Channel, tol: Tolerances = DEFAULT_TOLERANCES, spectral: Optional[SpectralData] = None
) -> np.ndarray:
    """σ₀ = P†(I)/d₀ for the reduced map."""
    d0 = c_reduced.dim
    sigma = fixed_projection(c_reduced, tol, spectral).adjoint().apply(np.eye(d0)) / d0
    return (sigma + sigma.conj().T) / 2


def extract_rho(
    c_reduced: Channel,
    w: WolfDecomposition,
    tol: Tolerances = DEFAULT_TOLERANCES,
    spectral: Optional[SpectralData] = None,
) -> WolfDecomposition:
    sigma = reduced_fixed_state(heisenberg(c_reduced, tol), tol, spectral)
    blocks = []
    for k, block in enumerate(w.blocks):
        y = block.iso.conj().T @ sigma @ block.iso
        weight = float(np.real(np.trace(y)))
        if weight <= tol.eps_faith:
            raise FaithfulnessError(
                f"Fixed state has no weight on block {k}", invariant="extract_rho.weight", margin=weight
            )
        rho = partial_trace_first(y, block.d1, block.d2) / weight
        rho = (rho + rho.conj().T) / 2
        x = partial_trace_second(y, block.d1, block.d2)
        product_defect = float(np.linalg.norm(y - np.kron(x, rho)))
        if product_defect > tol.eps_alg:
            logger.error(f"Fixed state is not of product form on block {k}: {product_defect:.3e}")
            raise StructuralError(
                f"Fixed state on block {k} is not x_k ⊗ ρ_k",
                invariant="extract_rho.product_form",
                margin=product_defect,
            )
        smallest = min_eigenvalue(rho)
        if smallest <= tol.eps_faith:
            logger.error(f"ρ_{k} is singular: min eigenvalue {smallest:.3e}")
            raise FaithfulnessError(f"ρ_{k} is not invertible", invariant="extract_rho.invertible", margin=smallest)
        blocks.append(replace(block, rho=rho))
    return replace(w, blocks=tuple(blocks))


def extract_dynamics(
    c_reduced: Channel, w: WolfDecomposition, tol: Tolerances = DEFAULT_TOLERANCES
) -> WolfDecomposition:
    """Recover π from images of block identities and each U_j from images of matrix units."""
    c_reduced = heisenberg(c_reduced, tol)
    m = w.n_blocks
    overlaps = np.zeros((m, m))
    for j, source in enumerate(w.blocks):
        image = apply(c_reduced, source.projector)
        for k, target in enumerate(w.blocks):
            overlaps[k, j] = np.real(np.trace(target.projector @ image)) / (target.d1 * target.d2)
    smear = float(np.max(np.minimum(np.abs(overlaps), np.abs(1.0 - overlaps))))
    permutation = tuple(int(np.argmax(overlaps[k])) for k in range(m))
    if smear > tol.eps_alg or sorted(permutation) != list(range(m)):
        logger.error(f"Block identities smear under the reduced map: {smear:.3e}")
        raise PermutationExtractionError(
            "Images of block identities are not block identities",
            invariant="extract_dynamics.permutation",
            margin=smear,
            details={"overlaps": overlaps.tolist()},
        )
    for k, j in enumerate(permutation):
        if w.blocks[k].d1 != w.blocks[j].d1:
            raise PermutationExtractionError(
                f"Permutation links blocks {j} and {k} of different d1",
                invariant="extract_dynamics.d1_match",
            )

    unitaries: List[Optional[np.ndarray]] = [None] * m
    for k, j in enumerate(permutation):
        source, target = w.blocks[j], w.blocks[k]
        d1 = source.d1

        def unit_image(a: int, b: int) -> np.ndarray:
            unit = np.zeros((d1, d1), dtype=complex)
            unit[a, b] = 1.0
            return target.compress(apply(c_reduced, source.embed(unit)))

        y00 = unit_image(0, 0)
        ev, vecs = linalg.eigh((y00 + y00.conj().T) / 2)
        rank_defect = float(max(abs(ev[-1] - 1.0), np.abs(ev[:-1]).max() if d1 > 1 else 0.0))
        if rank_defect > tol.eps_alg:
            raise StructuralError(
                f"Block {j} → {k} action is not a unitary conjugation",
                invariant="extract_dynamics.rank_one",
                margin=rank_defect,
            )
        w0 = vecs[:, -1]
        columns = [w0] + [unit_image(a, 0) @ w0 for a in range(1, d1)]
        u_dagger = np.stack(columns, axis=1)
        unitaries[j] = phase_fixed(u_dagger.conj().T)

    external = permutation != tuple(range(m))
    result = replace(w, permutation=permutation, unitaries=tuple(unitaries), external=external)

    defect = 0.0
    for a in w.algebra_basis:
        defect = max(defect, float(np.linalg.norm(apply(c_reduced, a) - result.act(a))))
    if defect > tol.eps_alg:
        logger.error(f"Recovered (π, U) do not reproduce the reduced action: {defect:.3e}")
        raise StructuralError(
            "Φ(⊕x_k⊗I) ≠ ⊕U†_{π(k)}x_{π(k)}U_{π(k)}⊗I", invariant="extract_dynamics.action", margin=defect
        )
    if external:
        logger.info(f"Asymptotic action permutes blocks: π={permutation}")
    return result


def p11_extract(
    c: Channel,
    split: HilbertSplit,
    w: WolfDecomposition,
    projection: ProjectionMap,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> AttractorStructure:
    """Read P₁₁ off the peripheral projection and assemble Attr = {a ⊕ P₁₁(a)}."""
    c = heisenberg(c, tol)
    d0, d1 = split.h0_dim, split.h1_dim
    scale = max(1.0, np.linalg.norm(projection.superop))

    off_diagonal = 0.0
    p00_defect = 0.0
    for a in w.algebra_basis:
        image = projection.apply(split.embed(x00=a))
        off_diagonal = max(off_diagonal, float(np.linalg.norm(split.block(image, 0, 1))),
                           float(np.linalg.norm(split.block(image, 1, 0))) if d1 else 0.0)
        p00_defect = max(p00_defect, float(np.linalg.norm(split.block(image, 0, 0) - a)))
    if off_diagonal > tol.eps_mat * scale:
        logger.error(f"Off-diagonal blocks of P_P(a⊕0) do not vanish: {off_diagonal:.3e}")
        raise StructuralError(
            "P₀₁ and P₁₀ must vanish on 𝔄 (Schwarz structure)", invariant="p11.offdiagonal", margin=off_diagonal
        )
    if p00_defect > tol.eps_alg:
        raise StructuralError("P₀₀ is not the identity on 𝔄", invariant="p11.p00_identity", margin=p00_defect)

    extension = superop_from_action(
        lambda x: split.block(projection.apply(split.embed(x00=x)), 1, 1), (d0, d0), (d1, d1)
    )
    if d1:
        unital_defect = float(np.linalg.norm(unvec(extension @ vec(np.eye(d0)), (d1, d1)) - np.eye(d1)))
        cp_defect = max(0.0, -min_eigenvalue(choi_from_superop(extension, d0, d1)))
        if unital_defect > tol.eps_alg or cp_defect > tol.eps_alg:
            logger.error(f"P11 extension unital defect {unital_defect:.3e}, Choi defect {cp_defect:.3e}")
            raise StructuralError(
                "P₁₁ is not unital completely positive",
                invariant="p11.ucp",
                margin=max(unital_defect, cp_defect),
            )

    p11_matrix = np.stack([extension @ vec(a) for a in w.algebra_basis], axis=1) if d1 else np.zeros((0, len(w.algebra_basis)), dtype=complex)
    structure = AttractorStructure(
        split=split,
        projection=projection,
        algebra_basis_00=tuple(w.algebra_basis),
        p11_extension=extension,
        p11_matrix=p11_matrix,
        attractor_basis=(),
    )
    structure = replace(structure, attractor_basis=tuple(structure.lam(a) for a in w.algebra_basis))
    logger.info(f"Attractor assembled: dim {structure.dim}, dim H1={d1}")
    return structure


def asymptotic_action(c: Channel, attr: AttractorStructure, tol: Tolerances = DEFAULT_TOLERANCES) -> AttractorStructure:
    """Matrix M_ji = ⟨a_j, V₀†Φ(Λ(a_i))V₀⟩ of Φ on the attractor, in the 𝔄 basis."""
    c = heisenberg(c, tol)
    basis = attr.algebra_basis_00
    n = len(basis)
    action = np.zeros((n, n), dtype=complex)
    leak = 0.0
    for i, a in enumerate(basis):
        image = apply(c, attr.lam(a))
        image00 = attr.split.block(image, 0, 0)
        leak = max(leak, span_residual(image00, basis), float(np.linalg.norm(image - attr.lam(image00))))
        for j, b in enumerate(basis):
            action[j, i] = np.vdot(b, image00)
    if leak > tol.eps_alg:
        logger.error(f"Φ leaves the attractor: {leak:.3e}")
        raise StructuralError("Φ(Λ(a)) ≠ Λ(φ₀₀(a))", invariant="asymptotic_action.invariance", margin=leak)
    moduli = np.abs(linalg.eigvals(action)) if n else np.zeros(0)
    unimodular = float(np.max(np.abs(moduli - 1.0))) if n else 0.0
    if unimodular > tol.eps_alg:
        raise StructuralError(
            "Asymptotic action has non-unimodular eigenvalues", invariant="asymptotic_action.unimodular", margin=unimodular
        )
    return replace(attr, asymptotic_action=action)


class EigvecEntry(BaseModel):
    eigenvalue: List[float]
    checks: List[Check]


class EigvecReport(BaseModel):
    entries: List[EigvecEntry]
    psi11_nonunital: Optional[Check] = None
    passed: bool


def peripheral_eigvec_check(
    c: Channel,
    split: HilbertSplit,
    blockmaps: BlockMaps,
    spectral: SpectralData,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EigvecReport:
    """Block structure of every peripheral eigenoperator and the resolvent formula for X₁₁."""
    d1 = split.h1_dim
    psi_spectrum = linalg.eigvals(blockmaps.psi11) if d1 else np.zeros(0)
    entries = []
    for i in spectral.peripheral_indices:
        lam = complex(spectral.eigenvalues[i])
        x = unvec(spectral.pairs.right[:, i], (c.dim, c.dim))
        scale = max(1e-300, float(np.linalg.norm(x)))
        x00 = split.block(x, 0, 0)
        checks = [
            check("phi00_eigen_equation", np.linalg.norm(blockmaps.apply_phi00(x00) - lam * x00) / scale, tol.eps_alg),
        ]
        if d1:
            off = max(np.linalg.norm(split.block(x, 0, 1)), np.linalg.norm(split.block(x, 1, 0))) / scale
            checks.append(check("block_diagonal", off, tol.eps_alg))
            margin = float(np.min(np.abs(psi_spectrum - lam)))
            checks.append(check_at_least("lambda_outside_psi11_spectrum", margin, tol.eps_alg))
            rhs = blockmaps.phi11 @ vec(x00)
            x11 = linalg.solve(lam * np.eye(d1 * d1) - blockmaps.psi11, rhs)
            checks.append(check(
                "resolvent_formula", np.linalg.norm(unvec(x11, (d1, d1)) - split.block(x, 1, 1)) / scale, tol.eps_alg
            ))
        entries.append(EigvecEntry(eigenvalue=[float(lam.real), float(lam.imag)], checks=checks))

    psi_check = None
    if d1:
        psi_check = check_at_least(
            "psi11_nonunital", np.linalg.norm(blockmaps.apply_psi11(np.eye(d1)) - np.eye(d1)), tol.eps_alg
        )
    passed = all(ch.passed for e in entries for ch in e.checks) and (psi_check is None or psi_check.passed)
    return EigvecReport(entries=entries, psi11_nonunital=psi_check, passed=passed)


def schrodinger_correspondence(
    c: Channel,
    split: HilbertSplit,
    projection: ProjectionMap,
    spectral: SpectralData,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> List[Check]:
    """Attr(Φ) = Λ(σ₀^{-1/2} Attr(Φ†) σ₀^{-1/2}) as equality of spans.

    Attr(Φ†) is spanned by the peripheral left eigenvectors of Φ.
    """
    c = heisenberg(c, tol)
    d = c.dim
    dual = [unvec(spectral.pairs.left[:, i], (d, d)) for i in spectral.peripheral_indices]
    sigma = fixed_projection(c, tol, spectral).adjoint().apply(np.eye(d)) / d
    sigma = (sigma + sigma.conj().T) / 2
    outside = float(np.linalg.norm(sigma - split.q0 @ sigma @ split.q0))
    try:
        root = inv_sqrt_on_support(sigma, split.v0)
    except ValidationError:
        raise FaithfulnessError("σ₀ is not invertible on H₀", invariant="correspondence.sigma")
    lifted = [projection.apply(root @ y @ root) for y in dual]
    distance = span_distance(orthonormal_span(lifted, tol.eps_alg), attractor_basis(c, tol, spectral))
    return [
        check("correspondence.sigma_support", outside, tol.eps_alg),
        check("correspondence.span_equality", distance, tol.eps_alg),
    ]


def dual_support_checks(
    c: Channel, split: HilbertSplit, spectral: SpectralData, tol: Tolerances = DEFAULT_TOLERANCES
) -> List[Check]:
    """Fix(Φ†) and Attr(Φ†) live in B(H₀)⊕0."""
    d = c.dim
    attr_dual = [unvec(spectral.pairs.left[:, i], (d, d)) for i in spectral.peripheral_indices]
    fixed_cluster = spectral.find_cluster(1.0, tol.eps_cluster)
    fix_dual = (
        [unvec(spectral.pairs.left[:, i], (d, d)) for i in spectral.pairs.members(fixed_cluster)]
        if fixed_cluster is not None else []
    )

    def leak(ops):
        worst = 0.0
        for y in ops:
            worst = max(worst, float(np.linalg.norm(y - split.q0 @ y @ split.q0) / max(1e-300, np.linalg.norm(y))))
        return worst

    return [
        check("dual_fixed_space_support", leak(fix_dual), tol.eps_alg),
        check("dual_attractor_support", leak(attr_dual), tol.eps_alg),
    ]


def p00_superop(projection: ProjectionMap, split: HilbertSplit) -> np.ndarray:
    d0 = split.h0_dim
    return superop_from_action(lambda x: split.block(projection.apply(split.embed(x00=x)), 0, 0), (d0, d0), (d0, d0))


def faithful_projection_superop(w: WolfDecomposition, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Closed form X ↦ ⊕_k tr₂(W_k†XW_k (I⊗ρ_k)) ⊗ I on B(H₀)."""
    d0 = w.h0_dim

    def action(x: np.ndarray) -> np.ndarray:
        out = np.zeros((d0, d0), dtype=complex)
        for b in w.blocks:
            y = b.iso.conj().T @ x @ b.iso
            out += b.embed(partial_trace_weighted(y, b.d1, b.d2, b.rho, tol))
        return out

    return superop_from_action(action, (d0, d0), (d0, d0))


def faithful_projection_sqrt_form(w: WolfDecomposition) -> np.ndarray:
    """X ↦ ⊕_k tr₂((I⊗√ρ_k) W_k†XW_k (I⊗√ρ_k)) ⊗ I."""
    d0 = w.h0_dim

    def action(x: np.ndarray) -> np.ndarray:
        out = np.zeros((d0, d0), dtype=complex)
        for b in w.blocks:
            root = np.kron(np.eye(b.d1), sqrt_psd(b.rho))
            out += b.embed(partial_trace_second(root @ b.iso.conj().T @ x @ b.iso @ root, b.d1, b.d2))
        return out

    return superop_from_action(action, (d0, d0), (d0, d0))


def closed_form_checks(
    projection: ProjectionMap, split: HilbertSplit, w: WolfDecomposition, tol: Tolerances = DEFAULT_TOLERANCES
) -> List[Check]:
    """Spectral P₀₀ against both closed forms assembled from (W_k, ρ_k)."""
    p00 = p00_superop(projection, split)
    weighted = faithful_projection_superop(w, tol)
    rooted = faithful_projection_sqrt_form(w)
    return [
        check("closed_form.weighted_partial_trace", np.linalg.norm(p00 - weighted), tol.eps_alg),
        check("closed_form.sqrt_form", np.linalg.norm(weighted - rooted), tol.eps_alg),
    ]


def block_vanishing_checks(
    attr: AttractorStructure, seed: int = 0, tol: Tolerances = DEFAULT_TOLERANCES
) -> List[Check]:
    """Off-diagonal vanishing on 𝔄 and independence of P_P(X) from X₀₁, X₁₀, X₁₁."""
    split = attr.split
    projection = attr.projection
    off = 0.0
    for a in attr.algebra_basis_00:
        image = projection.apply(split.embed(x00=a))
        if split.h1_dim:
            off = max(off, float(np.linalg.norm(split.q1 @ image @ split.q0)), float(np.linalg.norm(split.q0 @ image @ split.q1)))
    rng = np.random.default_rng(seed)
    d = split.dim_total
    dependence = 0.0
    for _ in range(4):
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        noise = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        noise = noise - split.q0 @ noise @ split.q0
        dependence = max(dependence, float(np.linalg.norm(projection.apply(x + noise) - projection.apply(x))))
    return [
        check("block_vanishing", off, tol.eps_mat * max(1.0, np.linalg.norm(projection.superop))),
        check("pp_depends_on_x00_only", dependence, tol.eps_mat * max(1.0, np.linalg.norm(projection.superop)) * d),
    ]


def idempotent_relation_check(attr: AttractorStructure, tol: Tolerances = DEFAULT_TOLERANCES) -> Check:
    """P₁₁∘P₀₀ = P₁₁ on B(H₀)."""
    if attr.split.faithful:
        return check("p11_after_p00", 0.0, tol.eps_alg)
    p00 = p00_superop(attr.projection, attr.split)
    return check("p11_after_p00", np.linalg.norm(attr.p11_extension @ p00 - attr.p11_extension), tol.eps_alg)


def commutation_identity_check(
    blockmaps: BlockMaps, attr: AttractorStructure, tol: Tolerances = DEFAULT_TOLERANCES
) -> Check:
    """φ₁₁∘P₀₀ + ψ₁₁∘P₁₁ = P₁₁∘φ₀₀ on B(H₀)."""
    if attr.split.faithful:
        return check("block_commutation_identity", 0.0, tol.eps_alg)
    p00 = p00_superop(attr.projection, attr.split)
    e = attr.p11_extension
    lhs = blockmaps.phi11 @ p00 + blockmaps.psi11 @ e
    rhs = e @ blockmaps.phi00
    return check("block_commutation_identity", np.linalg.norm(lhs - rhs), tol.eps_alg)


def cycle_lengths(permutation: Sequence[int]) -> List[int]:
    seen = set()
    lengths = []
    for start in range(len(permutation)):
        if start in seen:
            continue
        length, k = 0, start
        while k not in seen:
            seen.add(k)
            k = permutation[k]
            length += 1
        lengths.append(length)
    return sorted(lengths)


def cycle_spectrum_check(attr: AttractorStructure, w: WolfDecomposition, tol: Tolerances = DEFAULT_TOLERANCES) -> Check:
    """Spectrum of M^L, L = lcm of cycle lengths, against the cycle-product conjugations."""
    if attr.asymptotic_action is None or w.permutation is None:
        raise ValidationError("Asymptotic action and dynamics are required")
    period = lcm(*cycle_lengths(w.permutation)) if w.n_blocks else 1
    actual = linalg.eigvals(np.linalg.matrix_power(attr.asymptotic_action, period))
    expected = []
    for k, block in enumerate(w.blocks):
        product = np.eye(block.d1, dtype=complex)
        j = k
        for _ in range(period):
            j = w.permutation[j]
            product = w.unitaries[j] @ product
        phases = linalg.eigvals(product)
        expected.extend(np.conj(a) * b for a in phases for b in phases)
    return check("cycle_spectrum", multiset_distance(expected, actual), tol.eps_alg)
