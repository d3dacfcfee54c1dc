# asymptotica/utils/matcore.py
"""Dense complex linear algebra shared by every analysis stage.

Conventions fixed for the whole code base:

* operators are ``numpy.ndarray`` of ``complex128``;
* vectorization is column stacking, ``vec(X) = X.reshape(-1, order="F")``,
  so for ``E_ij`` the vec index is ``j * rows + i``;
* superoperators act on vectorized operators, ``vec(Φ(X)) = S @ vec(X)``;
* the Choi matrix is ``J = Σ_ij E_ij ⊗ Φ(E_ij)`` (input factor first).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.cluster import hierarchy

from asymptotica.utils.config import DEFAULT_TOLERANCES, Tolerances
from asymptotica.utils.errors import DimensionError, NumericalError, ValidationError

logger = logging.getLogger(__name__)

Shape = Tuple[int, int]


def as_matrix(a) -> np.ndarray:
    return np.asarray(a, dtype=complex)


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt product tr(a† b)."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"hs_inner shape mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, row index i_a * rows_b + i_b."""
    return np.kron(as_matrix(a), as_matrix(b))


def vec(x: np.ndarray) -> np.ndarray:
    return as_matrix(x).reshape(-1, order="F")


def unvec(v: np.ndarray, shape: Optional[Shape] = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    if shape is None:
        dim = int(round(np.sqrt(v.size)))
        if dim * dim != v.size:
            raise DimensionError(f"Cannot unvec a vector of length {v.size} into a square matrix")
        shape = (dim, dim)
    return v.reshape(shape, order="F")


def matrix_unit(rows: int, cols: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((rows, cols), dtype=complex)
    e[i, j] = 1.0
    return e


def superop_from_action(
    action: Callable[[np.ndarray], np.ndarray], in_shape: Shape, out_shape: Shape
) -> np.ndarray:
    """Matrix of a linear map given as a callable, column k = vec(action(unvec(e_k)))."""
    n_in = in_shape[0] * in_shape[1]
    superop = np.zeros((out_shape[0] * out_shape[1], n_in), dtype=complex)
    for k in range(n_in):
        basis = np.zeros(n_in, dtype=complex)
        basis[k] = 1.0
        image = as_matrix(action(unvec(basis, in_shape)))
        if image.shape != tuple(out_shape):
            raise DimensionError(f"Action returned {image.shape}, expected {tuple(out_shape)}")
        superop[:, k] = vec(image)
    return superop


def apply_superop(superop: np.ndarray, x: np.ndarray, out_shape: Optional[Shape] = None) -> np.ndarray:
    x = as_matrix(x)
    if superop.shape[1] != x.size:
        raise DimensionError(f"Superoperator with {superop.shape[1]} columns applied to {x.shape} operator")
    return unvec(superop @ vec(x), out_shape)


def choi_from_superop(superop: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    superop = as_matrix(superop)
    if superop.shape != (d_out * d_out, d_in * d_in):
        raise DimensionError(f"Superoperator shape {superop.shape} does not match {d_in} -> {d_out}")
    s4 = superop.reshape(d_out, d_out, d_in, d_in)
    return s4.transpose(3, 1, 2, 0).reshape(d_in * d_out, d_in * d_out)


def superop_from_choi(choi: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    choi = as_matrix(choi)
    if choi.shape != (d_in * d_out, d_in * d_out):
        raise DimensionError(f"Choi shape {choi.shape} does not match {d_in} -> {d_out}")
    j4 = choi.reshape(d_in, d_out, d_in, d_out)
    return j4.transpose(3, 1, 2, 0).reshape(d_out * d_out, d_in * d_in)


def partial_trace_second(y: np.ndarray, d1: int, d2: int) -> np.ndarray:
    y = as_matrix(y)
    if y.shape != (d1 * d2, d1 * d2):
        raise DimensionError(f"Expected a {(d1 * d2, d1 * d2)} operator, got {y.shape}")
    return np.einsum("ajbj->ab", y.reshape(d1, d2, d1, d2))


def partial_trace_first(y: np.ndarray, d1: int, d2: int) -> np.ndarray:
    y = as_matrix(y)
    if y.shape != (d1 * d2, d1 * d2):
        raise DimensionError(f"Expected a {(d1 * d2, d1 * d2)} operator, got {y.shape}")
    return np.einsum("jajb->ab", y.reshape(d1, d2, d1, d2))


def is_state(rho: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    rho = as_matrix(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    return abs(np.trace(rho) - 1.0) <= tol.eps_mat * max(1, rho.shape[0]) * 10 and psd_check(rho, tol.eps_mat)


def partial_trace_weighted(
    y: np.ndarray, d1: int, d2: int, rho2: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """tr₂(y (I ⊗ ρ₂)), the Hilbert-Schmidt adjoint of x ↦ x ⊗ ρ₂."""
    rho2 = as_matrix(rho2)
    if rho2.shape != (d2, d2):
        raise DimensionError(f"rho2 must be {d2}x{d2}, got {rho2.shape}")
    if not is_state(rho2, tol):
        raise ValidationError("rho2 is not a density matrix (PSD with unit trace)")
    y = as_matrix(y)
    if y.shape != (d1 * d2, d1 * d2):
        raise DimensionError(f"Expected a {(d1 * d2, d1 * d2)} operator, got {y.shape}")
    return partial_trace_second(y @ np.kron(np.eye(d1), rho2), d1, d2)


def psd_check(a: np.ndarray, eps: float) -> bool:
    """Hermitian within eps and min eigenvalue ≥ -eps·‖a‖."""
    a = as_matrix(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"psd_check needs a square matrix, got {a.shape}")
    if a.size == 0:
        return True
    scale = max(np.linalg.norm(a, 2), 1e-300)
    if np.linalg.norm(a - a.conj().T) > eps * max(1.0, scale):
        return False
    return min_eigenvalue(a) >= -eps * scale


def min_eigenvalue(a: np.ndarray) -> float:
    a = as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(linalg.eigvalsh((a + a.conj().T) / 2).min())


def op_norm(x: np.ndarray) -> float:
    """Largest singular value through the Hermitian eigensolver on x† x."""
    x = as_matrix(x)
    if x.size == 0:
        return 0.0
    return float(np.sqrt(max(linalg.eigvalsh(x.conj().T @ x).max(), 0.0)))


def orthonormal_span(vectors: Iterable[np.ndarray], eps: float) -> List[np.ndarray]:
    """HS-orthonormal basis of the span; count is the numerical rank at eps."""
    vectors = [as_matrix(v) for v in vectors]
    if not vectors:
        return []
    shape = vectors[0].shape
    if any(v.shape != shape for v in vectors):
        raise DimensionError("orthonormal_span needs operands of a common shape")
    stacked = np.stack([v.reshape(-1) for v in vectors], axis=1)
    u, s, _ = linalg.svd(stacked, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return []
    rank = int(np.sum(s > eps * max(1.0, s[0])))
    return [u[:, i].reshape(shape) for i in range(rank)]


def basis_matrix(basis: Sequence[np.ndarray]) -> np.ndarray:
    """Columns are the flattened basis elements."""
    if not basis:
        return np.zeros((0, 0), dtype=complex)
    return np.stack([as_matrix(b).reshape(-1) for b in basis], axis=1)


def span_residual(x: np.ndarray, basis: Sequence[np.ndarray]) -> float:
    """Frobenius distance from x to the span of an HS-orthonormal basis."""
    x = as_matrix(x)
    if not basis:
        return float(np.linalg.norm(x))
    b = basis_matrix(basis)
    flat = x.reshape(-1)
    return float(np.linalg.norm(flat - b @ (b.conj().T @ flat)))


def span_distance(first: Sequence[np.ndarray], second: Sequence[np.ndarray]) -> float:
    """Mutual projection residual of two HS-orthonormal bases (0 iff equal spans)."""
    worst = 0.0
    for x in first:
        worst = max(worst, span_residual(x, second))
    for x in second:
        worst = max(worst, span_residual(x, first))
    if len(first) != len(second):
        worst = max(worst, 1.0)
    return worst


def cluster_values(values: np.ndarray, radius: float) -> np.ndarray:
    """Single-linkage grouping of complex values closer than radius; labels in sorted order."""
    values = np.asarray(values, dtype=complex).reshape(-1)
    if values.size < 2:
        return np.zeros(values.size, dtype=int)
    points = np.column_stack([values.real, values.imag])
    raw = hierarchy.fcluster(hierarchy.linkage(points, method="single"), t=radius, criterion="distance")
    # first member of each group stands for it
    firsts = {}
    for i, r in enumerate(raw):
        firsts.setdefault(int(r), i)
    order = sorted(firsts, key=lambda r: (-abs(values[firsts[r]]), np.angle(values[firsts[r]])))
    relabel = {r: label for label, r in enumerate(order)}
    return np.array([relabel[int(r)] for r in raw], dtype=int)


@dataclass(frozen=True)
class SpectralPairs:
    """Eigenvalues with biorthogonal right/left vectors (columns).

    Within every cluster ``left[:, c].conj().T @ right[:, c]`` is the identity.
    Defective clusters keep an invariant-subspace basis instead of eigenvectors.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    cluster_ids: np.ndarray
    defective: Tuple[bool, ...]
    residual: float

    @property
    def n_clusters(self) -> int:
        return len(self.defective)

    def members(self, cluster: int) -> np.ndarray:
        return np.nonzero(self.cluster_ids == cluster)[0]

    def cluster_value(self, cluster: int) -> complex:
        return complex(np.mean(self.eigenvalues[self.members(cluster)]))

    def projector(self, cluster: int) -> np.ndarray:
        idx = self.members(cluster)
        return self.right[:, idx] @ self.left[:, idx].conj().T

    def reconstruct(self) -> np.ndarray:
        return (self.right * self.eigenvalues) @ self.left.conj().T


def _invariant_subspace(m: np.ndarray, center: complex, radius: float, size: int) -> np.ndarray:
    _, z, sdim = linalg.schur(m, output="complex", sort=lambda x: abs(x - center) <= radius)
    if sdim != size:
        raise NumericalError(
            f"Ordered Schur form isolated {sdim} eigenvalues near {center:.6g}, expected {size}"
        )
    return z[:, :size]


def eig_general(m: np.ndarray, eps: Optional[float] = None, tol: Tolerances = DEFAULT_TOLERANCES) -> SpectralPairs:
    """General complex eigensolver with cluster-aware biorthogonal pairs.

    Isolated eigenvalues take their vectors from LAPACK's geev; clusters
    (|λ_i − λ_j| ≤ eps_cluster) take a joint invariant subspace from the ordered
    complex Schur forms of m and m†, biorthogonalized by a small solve.
    """
    m = as_matrix(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"eig_general needs a square matrix, got {m.shape}")
    eps = tol.eps_eig if eps is None else eps
    n = m.shape[0]
    if n == 0:
        empty = np.zeros((0, 0), dtype=complex)
        return SpectralPairs(np.zeros(0, dtype=complex), empty, empty, np.zeros(0, dtype=int), (), 0.0)

    try:
        values, vl, vr = linalg.eig(m, left=True, right=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"Eigensolver did not converge: {e}")

    labels = cluster_values(values, tol.eps_cluster)
    norm = max(np.linalg.norm(m, 2), 1e-300)
    eigenvalues = np.array(values, dtype=complex)
    right = np.zeros((n, n), dtype=complex)
    left = np.zeros((n, n), dtype=complex)
    defective: List[bool] = []

    for cluster in range(labels.max() + 1):
        idx = np.nonzero(labels == cluster)[0]
        if idx.size == 1:
            i = idx[0]
            r = vr[:, i] / np.linalg.norm(vr[:, i])
            l = vl[:, i]
            overlap = np.vdot(l, r)
            if abs(overlap) < 1e-300:
                raise NumericalError(f"Left/right eigenvectors orthogonal at λ={values[i]:.6g}")
            right[:, i] = r
            left[:, i] = l / np.conj(overlap)
            defective.append(False)
            continue

        center = complex(np.mean(values[idx]))
        radius = float(np.max(np.abs(values[idx] - center))) + tol.eps_cluster
        r_basis = _invariant_subspace(m, center, radius, idx.size)
        l_basis = _invariant_subspace(m.conj().T, np.conj(center), radius, idx.size)
        gram = l_basis.conj().T @ r_basis
        try:
            l_basis = l_basis @ linalg.inv(gram).conj().T
        except linalg.LinAlgError:
            raise NumericalError(f"Cluster at λ≈{center:.6g} has singular left/right Gram matrix")
        restricted = l_basis.conj().T @ m @ r_basis

        if np.linalg.norm(restricted - center * np.eye(idx.size)) <= eps * norm:
            right[:, idx] = r_basis
            left[:, idx] = l_basis
            eigenvalues[idx] = center
            defective.append(False)
            continue

        w, v = linalg.eig(restricted)
        if np.linalg.cond(v) > 1.0 / np.sqrt(eps):
            # non-diagonalizable: keep the invariant pair, flag the cluster
            right[:, idx] = r_basis
            left[:, idx] = l_basis
            defective.append(True)
            continue
        r_vecs = r_basis @ v
        l_vecs = l_basis @ linalg.inv(v).conj().T
        scale = np.linalg.norm(r_vecs, axis=0)
        right[:, idx] = r_vecs / scale
        left[:, idx] = l_vecs * scale
        eigenvalues[idx] = w
        defective.append(False)

    residual = 0.0
    for cluster, is_defective in enumerate(defective):
        if is_defective:
            continue
        for i in np.nonzero(labels == cluster)[0]:
            res = np.linalg.norm(m @ right[:, i] - eigenvalues[i] * right[:, i]) / norm
            residual = max(residual, float(res))
    if residual > eps:
        raise NumericalError(f"Eigen-residual {residual:.3e} exceeds tolerance {eps:.1e}", residual=residual)

    logger.debug(f"eig_general: n={n}, clusters={len(defective)}, residual={residual:.2e}")
    return SpectralPairs(eigenvalues, right, left, labels, tuple(defective), residual)


def numerical_rank(m: np.ndarray, eps: float) -> int:
    m = as_matrix(m)
    if m.size == 0:
        return 0
    s = linalg.svdvals(m)
    return int(np.sum(s > eps * max(1.0, s[0])))


def sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, v = linalg.eigh((as_matrix(a) + as_matrix(a).conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def inv_sqrt_on_support(a: np.ndarray, support: np.ndarray) -> np.ndarray:
    """a^{-1/2} computed on the range of the isometry `support`, zero elsewhere."""
    support = as_matrix(support)
    compressed = support.conj().T @ as_matrix(a) @ support
    w, v = linalg.eigh((compressed + compressed.conj().T) / 2)
    if w.size and w.min() <= 0:
        raise ValidationError("Operator is not invertible on the given support")
    inner = (v / np.sqrt(w)) @ v.conj().T
    return support @ inner @ support.conj().T


def phase_fixed(u: np.ndarray) -> np.ndarray:
    """Remove the global phase: the largest-magnitude entry becomes real positive."""
    u = as_matrix(u)
    flat = u.reshape(-1)
    if flat.size == 0:
        return u
    k = int(np.argmax(np.abs(flat)))
    if abs(flat[k]) == 0:
        return u
    return u * (abs(flat[k]) / flat[k])


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """min over θ of ‖a − e^{iθ} b‖_F."""
    a, b = as_matrix(a), as_matrix(b)
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


@dataclass(frozen=True, eq=False)
class HilbertSplit:
    """H = H₀ ⊕ H₁ with ``basis_change = [V₀ V₁]`` unitary, H₀ coordinates first."""

    dim_total: int
    q0: np.ndarray
    q1: np.ndarray
    basis_change: np.ndarray
    h0_dim: int

    @classmethod
    def from_isometry(cls, v0: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> "HilbertSplit":
        v0 = as_matrix(v0)
        d = v0.shape[0]
        if v0.ndim != 2 or v0.shape[1] > d:
            raise DimensionError(f"Expected a d x d0 isometry, got {v0.shape}")
        if np.linalg.norm(v0.conj().T @ v0 - np.eye(v0.shape[1])) > tol.eps_mat * max(1, d) * 10:
            raise ValidationError("Recurrent basis is not an isometry")
        if v0.shape[1] == d:
            v1 = np.zeros((d, 0), dtype=complex)
        else:
            v1 = linalg.null_space(v0.conj().T).astype(complex)
        basis = np.hstack([v0, v1])
        q0 = v0 @ v0.conj().T
        q1 = v1 @ v1.conj().T
        return cls(dim_total=d, q0=q0, q1=q1, basis_change=basis, h0_dim=v0.shape[1])

    @classmethod
    def trivial(cls, d: int) -> "HilbertSplit":
        return cls.from_isometry(np.eye(d, dtype=complex))

    @property
    def h1_dim(self) -> int:
        return self.dim_total - self.h0_dim

    @property
    def faithful(self) -> bool:
        return self.h1_dim == 0

    @property
    def v0(self) -> np.ndarray:
        return self.basis_change[:, :self.h0_dim]

    @property
    def v1(self) -> np.ndarray:
        return self.basis_change[:, self.h0_dim:]

    def isometry(self, i: int) -> np.ndarray:
        return self.v0 if i == 0 else self.v1

    def block(self, x: np.ndarray, i: int, j: int) -> np.ndarray:
        """X_ij = V_i† X V_j."""
        return self.isometry(i).conj().T @ as_matrix(x) @ self.isometry(j)

    def embed(self, x00: Optional[np.ndarray] = None, x11: Optional[np.ndarray] = None) -> np.ndarray:
        """V₀ x₀₀ V₀† + V₁ x₁₁ V₁† (block-diagonal operator on H)."""
        out = np.zeros((self.dim_total, self.dim_total), dtype=complex)
        if x00 is not None:
            out += self.v0 @ as_matrix(x00) @ self.v0.conj().T
        if x11 is not None and self.h1_dim:
            out += self.v1 @ as_matrix(x11) @ self.v1.conj().T
        return out

    def invariant_margin(self) -> float:
        eye = np.eye(self.dim_total)
        return float(max(
            np.linalg.norm(self.q0 + self.q1 - eye),
            np.linalg.norm(self.q0 @ self.q1),
            np.linalg.norm(self.q0 @ self.q0 - self.q0),
            np.linalg.norm(self.q1 @ self.q1 - self.q1),
            np.linalg.norm(self.q0 - self.q0.conj().T),
            np.linalg.norm(self.q1 - self.q1.conj().T),
        ))


def multiset_distance(expected: Sequence[complex], actual: Sequence[complex]) -> float:
    """Greedy nearest matching of two complex multisets; inf when sizes differ."""
    expected = list(np.asarray(expected, dtype=complex))
    remaining = list(np.asarray(actual, dtype=complex))
    if len(expected) != len(remaining):
        return float("inf")
    worst = 0.0
    for value in expected:
        dists = [abs(value - r) for r in remaining]
        k = int(np.argmin(dists))
        worst = max(worst, dists[k])
        remaining.pop(k)
    return float(worst)
