# asymptotica/services/spectral.py

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from asymptotica.services.channel import Channel, superop_power
from asymptotica.utils.checks import Check, check
from asymptotica.utils.config import DEFAULT_TOLERANCES, Tolerances
from asymptotica.utils.errors import DefectivenessError, DimensionError, NotAnEigenvalueError
from asymptotica.utils.matcore import (
    SpectralPairs,
    apply_superop,
    as_matrix,
    choi_from_superop,
    eig_general,
    min_eigenvalue,
    numerical_rank,
    orthonormal_span,
    unvec,
    vec,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigen-decomposition of a channel's superoperator.

    ``right_ops[i]`` / ``left_ops[i]`` are the devectorized eigenvectors, with
    hs_inner(left_i, right_j) = δ_ij inside each cluster.
    """

    dim: int
    pairs: SpectralPairs
    peripheral_mask: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.pairs.eigenvalues

    @property
    def cluster_ids(self) -> np.ndarray:
        return self.pairs.cluster_ids

    @property
    def right_ops(self) -> List[np.ndarray]:
        return [unvec(self.pairs.right[:, i], (self.dim, self.dim)) for i in range(self.eigenvalues.size)]

    @property
    def left_ops(self) -> List[np.ndarray]:
        return [unvec(self.pairs.left[:, i], (self.dim, self.dim)) for i in range(self.eigenvalues.size)]

    @property
    def peripheral_indices(self) -> np.ndarray:
        return np.nonzero(self.peripheral_mask)[0]

    @property
    def peripheral_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.peripheral_mask]

    def peripheral_clusters(self) -> List[int]:
        return sorted({int(c) for c in self.cluster_ids[self.peripheral_mask]})

    def find_cluster(self, lam: complex, radius: float) -> Optional[int]:
        best, best_dist = None, np.inf
        for cluster in range(self.pairs.n_clusters):
            dist = abs(self.pairs.cluster_value(cluster) - lam)
            if dist <= radius and dist < best_dist:
                best, best_dist = cluster, dist
        return best

    def fragment(self) -> List[dict]:
        """One entry per cluster: value, modulus, peripheral flag, multiplicity."""
        entries = []
        for cluster in range(self.pairs.n_clusters):
            members = self.pairs.members(cluster)
            lam = self.pairs.cluster_value(cluster)
            entries.append({
                "lambda": [float(lam.real), float(lam.imag)],
                "modulus": float(abs(lam)),
                "peripheral": bool(self.peripheral_mask[members[0]]),
                "multiplicity": int(members.size),
            })
        return entries


class ProjectionKind(str, Enum):
    PERIPHERAL = "peripheral"
    FIXED = "fixed"
    SINGLE_EIGENVALUE = "single_eigenvalue"


@dataclass(frozen=True, eq=False)
class ProjectionMap:
    superop: np.ndarray
    kind: ProjectionKind
    dim: int
    eigenvalue: Optional[complex] = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_superop(self.superop, x, (self.dim, self.dim))

    def adjoint(self) -> "ProjectionMap":
        lam = None if self.eigenvalue is None else complex(np.conj(self.eigenvalue))
        return ProjectionMap(self.superop.conj().T, self.kind, self.dim, lam)

    @property
    def choi(self) -> np.ndarray:
        return choi_from_superop(self.superop, self.dim, self.dim)


def _superop_of(c: Union[Channel, np.ndarray]) -> np.ndarray:
    return c.superop if isinstance(c, Channel) else as_matrix(c)


def spectrum(c: Channel, tol: Tolerances = DEFAULT_TOLERANCES) -> SpectralData:
    pairs = eig_general(c.superop, tol=tol)
    mask = np.zeros(pairs.eigenvalues.size, dtype=bool)
    for cluster in range(pairs.n_clusters):
        if abs(pairs.cluster_value(cluster)) >= 1.0 - tol.eps_per:
            mask[pairs.members(cluster)] = True
    spectral = SpectralData(dim=c.dim, pairs=pairs, peripheral_mask=mask)
    logger.info(f"Spectrum computed: {pairs.eigenvalues.size} eigenvalues, {int(mask.sum())} peripheral")
    return spectral


def _require_semisimple(spectral: SpectralData, cluster: int) -> None:
    if spectral.pairs.defective[cluster]:
        lam = spectral.pairs.cluster_value(cluster)
        logger.error(f"Defective eigenvalue cluster at λ={lam:.6g}")
        raise DefectivenessError(
            f"Eigenvalue {lam:.6g} is defective (non-trivial Jordan structure)",
            invariant="semisimplicity",
            details={"eigenvalue": [lam.real, lam.imag]},
        )


def spectral_projection(
    c: Channel, lam: complex, tol: Tolerances = DEFAULT_TOLERANCES, spectral: Optional[SpectralData] = None
) -> ProjectionMap:
    """P_λ = Σ_{i in cluster} r_i l_i†."""
    spectral = spectral or spectrum(c, tol)
    cluster = spectral.find_cluster(lam, tol.eps_cluster)
    if cluster is None:
        raise NotAnEigenvalueError(f"{lam} is not an eigenvalue within {tol.eps_cluster:.1e}")
    _require_semisimple(spectral, cluster)
    return ProjectionMap(
        superop=spectral.pairs.projector(cluster),
        kind=ProjectionKind.SINGLE_EIGENVALUE,
        dim=c.dim,
        eigenvalue=spectral.pairs.cluster_value(cluster),
    )


def peripheral_projection(
    c: Channel, tol: Tolerances = DEFAULT_TOLERANCES, spectral: Optional[SpectralData] = None
) -> ProjectionMap:
    spectral = spectral or spectrum(c, tol)
    superop = np.zeros_like(c.superop)
    for cluster in spectral.peripheral_clusters():
        _require_semisimple(spectral, cluster)
        superop = superop + spectral.pairs.projector(cluster)
    return ProjectionMap(superop=superop, kind=ProjectionKind.PERIPHERAL, dim=c.dim)


def fixed_projection(
    c: Channel, tol: Tolerances = DEFAULT_TOLERANCES, spectral: Optional[SpectralData] = None
) -> ProjectionMap:
    """Spectral projection onto the λ = 1 eigenspace (zero map when 1 ∉ spect)."""
    spectral = spectral or spectrum(c, tol)
    cluster = spectral.find_cluster(1.0, tol.eps_cluster)
    if cluster is None:
        return ProjectionMap(np.zeros_like(c.superop), ProjectionKind.FIXED, c.dim, 1.0)
    _require_semisimple(spectral, cluster)
    return ProjectionMap(spectral.pairs.projector(cluster), ProjectionKind.FIXED, c.dim, 1.0)


def cesaro_fixed_projection(c: Channel, n_max: int = 10_000) -> ProjectionMap:
    """(1/N) Σ_{n=1}^{N} Sⁿ by binary doubling of (Sᵏ, Σ_{n≤k} Sⁿ)."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    s = c.superop
    power = np.eye(s.shape[0], dtype=complex)
    total = np.zeros_like(s)
    for bit in bin(n_max)[2:]:
        total = total + power @ total
        power = power @ power
        if bit == "1":
            power = power @ s
            total = total + power
    return ProjectionMap(superop=total / n_max, kind=ProjectionKind.FIXED, dim=c.dim, eigenvalue=1.0)


def cesaro_error_bound(c: Channel, spectral: SpectralData, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """C with ‖Cesàro_N − P_1‖_F ≤ C/N + eps_eig.

    Peripheral λ ≠ 1 contributes 2‖r l†‖/|1−λ| per eigenpair, decaying ones
    ‖r l†‖|λ|/(1−|λ|); defective clusters are summed numerically on their
    invariant block.
    """
    pairs = spectral.pairs
    fixed = spectral.find_cluster(1.0, tol.eps_cluster)
    bound = 0.0
    for cluster in range(pairs.n_clusters):
        if cluster == fixed:
            continue
        idx = pairs.members(cluster)
        r, l = pairs.right[:, idx], pairs.left[:, idx]
        if pairs.defective[cluster]:
            block = l.conj().T @ c.superop @ r
            bound += np.linalg.norm(r, 2) * np.linalg.norm(l, 2) * _partial_sum_sup(block)
            continue
        peripheral = spectral.peripheral_mask[idx[0]]
        for k, i in enumerate(idx):
            lam = pairs.eigenvalues[i]
            term = np.linalg.norm(r[:, k]) * np.linalg.norm(l[:, k])
            if peripheral:
                bound += 2.0 * term / max(abs(1.0 - lam), tol.eps_cluster)
            else:
                bound += term * abs(lam) / max(1.0 - abs(lam), tol.eps_per)
    return float(bound)


def _partial_sum_sup(block: np.ndarray, cap: int = 100_000) -> float:
    term = np.eye(block.shape[0], dtype=complex)
    total = np.zeros_like(term)
    sup = 0.0
    for _ in range(cap):
        term = term @ block
        total = total + term
        sup = max(sup, float(np.linalg.norm(total, 2)))
        if np.linalg.norm(term) < 1e-16:
            break
    return sup


def _basis_from_clusters(spectral: SpectralData, clusters: List[int], eps: float) -> List[np.ndarray]:
    if not clusters:
        return []
    idx = np.concatenate([spectral.pairs.members(c) for c in clusters])
    return orthonormal_span(
        [unvec(spectral.pairs.right[:, i], (spectral.dim, spectral.dim)) for i in idx], eps
    )


def attractor_basis(
    c: Channel, tol: Tolerances = DEFAULT_TOLERANCES, spectral: Optional[SpectralData] = None
) -> List[np.ndarray]:
    """HS-orthonormal basis of Attr = span of peripheral eigenoperators."""
    spectral = spectral or spectrum(c, tol)
    for cluster in spectral.peripheral_clusters():
        _require_semisimple(spectral, cluster)
    return _basis_from_clusters(spectral, spectral.peripheral_clusters(), tol.eps_eig)


def fixed_point_basis(
    c: Channel, tol: Tolerances = DEFAULT_TOLERANCES, spectral: Optional[SpectralData] = None
) -> List[np.ndarray]:
    spectral = spectral or spectrum(c, tol)
    cluster = spectral.find_cluster(1.0, tol.eps_cluster)
    if cluster is None:
        return []
    return _basis_from_clusters(spectral, [cluster], tol.eps_eig)


def semisimplicity_check(c: Union[Channel, np.ndarray], lam: complex, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """dim ker(S−λ)² == dim ker(S−λ) at threshold eps_eig."""
    s = _superop_of(c)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"Superoperator must be square, got {s.shape}")
    shifted = s - lam * np.eye(s.shape[0])
    n = s.shape[0]
    kernel = n - numerical_rank(shifted, tol.eps_eig)
    kernel_sq = n - numerical_rank(shifted @ shifted, tol.eps_eig)
    return kernel == kernel_sq


def projection_checks(
    proj: ProjectionMap, c: Channel, tol: Tolerances = DEFAULT_TOLERANCES, label: str = "peripheral_projection"
) -> List[Check]:
    """Idempotence, unitality, commutation with S and (for CP input) Choi positivity."""
    s = c.superop
    p = proj.superop
    scale = max(1.0, np.linalg.norm(p))
    eye = vec(np.eye(c.dim))
    checks = [
        check(f"{label}.idempotent", np.linalg.norm(p @ p - p) / scale, tol.eps_eig),
        check(f"{label}.commutes", np.linalg.norm(p @ s - s @ p) / max(1.0, np.linalg.norm(s)), tol.eps_eig),
    ]
    if c.flags.unital:
        checks.append(check(f"{label}.unital", np.linalg.norm(p @ eye - eye), tol.eps_eig))
    if c.flags.cp:
        checks.append(check(f"{label}.choi_psd", max(0.0, -min_eigenvalue(proj.choi)), tol.eps_alg))
    return checks


def cesaro_agreement_check(
    c: Channel, spectral: SpectralData, n_max: int, tol: Tolerances = DEFAULT_TOLERANCES
) -> Check:
    cesaro = cesaro_fixed_projection(c, n_max)
    fixed = fixed_projection(c, tol, spectral)
    bound = cesaro_error_bound(c, spectral, tol) / n_max + tol.eps_eig
    return check("cesaro_agreement", np.linalg.norm(cesaro.superop - fixed.superop), bound)


def decay_check(
    c: Channel, spectral: SpectralData, proj: ProjectionMap, n: int = 64, tol: Tolerances = DEFAULT_TOLERANCES
) -> Tuple[Check, float]:
    """‖Sⁿ(I − P_P)‖_F against (ρ_np + eps_eig)ⁿ·κ; returns the check and κ."""
    pairs = spectral.pairs
    decaying = np.nonzero(~spectral.peripheral_mask)[0]
    lhs = float(np.linalg.norm(superop_power(c.superop, n) @ (np.eye(c.superop.shape[0]) - proj.superop)))
    if decaying.size == 0:
        return check("non_peripheral_decay", lhs, tol.eps_eig), 0.0
    rho = float(np.max(np.abs(pairs.eigenvalues[decaying])))
    kappa = float(np.linalg.norm(pairs.right[:, decaying]) * np.linalg.norm(pairs.left[:, decaying]))
    largest_defective = max(
        [pairs.members(k).size for k in range(pairs.n_clusters) if pairs.defective[k]] or [1]
    )
    kappa *= float(n) ** (largest_defective - 1)
    bound = (rho + tol.eps_eig) ** n * kappa + tol.eps_eig
    return check("non_peripheral_decay", lhs, bound), kappa
