# asymptotica/services/choi_effros.py

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from asymptotica.services.channel import Channel, apply, superop_power
from asymptotica.services.spectral import ProjectionMap
from asymptotica.services.structure import AttractorStructure, heisenberg, p00_superop
from asymptotica.utils.checks import Check, all_passed, check
from asymptotica.utils.config import DEFAULT_TOLERANCES, Tolerances
from asymptotica.utils.errors import ConsistencyError, DerivationViolationError, DomainError
from asymptotica.utils.matcore import (
    HilbertSplit,
    apply_superop,
    basis_matrix,
    choi_from_superop,
    matrix_unit,
    min_eigenvalue,
    op_norm,
    orthonormal_span,
    span_distance,
    span_residual,
)

logger = logging.getLogger(__name__)


def attractor_membership(projection: ProjectionMap, x: np.ndarray) -> float:
    """‖P_P(x) − x‖_F, zero exactly on Attr(Φ)."""
    return float(np.linalg.norm(projection.apply(x) - x))


def star_product(
    projection: ProjectionMap, x: np.ndarray, y: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Choi-Effros product x ⋆ y = P_P(xy) on the attractor."""
    for name, operand in (("left", x), ("right", y)):
        residual = attractor_membership(projection, operand)
        if residual > tol.eps_alg * max(1.0, float(np.linalg.norm(operand))):
            raise DomainError(f"{name} operand is not in the attractor (residual {residual:.3e})")
    return projection.apply(x @ y)


@dataclass(frozen=True, eq=False)
class StarAlgebra:
    """(Attr(Φ), ⋆) with structure constants ``product_table[i, j, k] = ⟨b_k, b_i ⋆ b_j⟩``."""

    basis: Tuple[np.ndarray, ...]
    product_table: np.ndarray
    projection: ProjectionMap
    closure_defect: float

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        return basis_matrix(self.basis).conj().T @ x.reshape(-1)

    def element(self, coefficients: np.ndarray) -> np.ndarray:
        return sum(c * b for c, b in zip(coefficients, self.basis))

    def star(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        cx, cy = self.coordinates(x), self.coordinates(y)
        return self.element(np.einsum("i,j,ijk->k", cx, cy, self.product_table))


def build_star_algebra(
    attr: AttractorStructure, tol: Tolerances = DEFAULT_TOLERANCES
) -> StarAlgebra:
    basis = attr.orthonormal_attractor(tol.eps_alg)
    n = len(basis)
    flat = basis_matrix(basis)
    table = np.zeros((n, n, n), dtype=complex)
    closure = 0.0
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            product = attr.projection.apply(a @ b)
            table[i, j, :] = flat.conj().T @ product.reshape(-1)
            closure = max(closure, span_residual(product, basis))
    logger.debug(f"Star algebra of dimension {n}, closure defect {closure:.2e}")
    return StarAlgebra(basis=tuple(basis), product_table=table, projection=attr.projection, closure_defect=closure)


class CStarReport(BaseModel):
    checks: List[Check]
    passed: bool


def _random_element(algebra: StarAlgebra, rng: np.random.Generator) -> np.ndarray:
    coefficients = rng.standard_normal(algebra.dim) + 1j * rng.standard_normal(algebra.dim)
    x = algebra.element(coefficients / np.linalg.norm(coefficients))
    return x


def verify_cstar(
    algebra: StarAlgebra, trials: int = 64, seed: int = 0, tol: Tolerances = DEFAULT_TOLERANCES
) -> CStarReport:
    """Associativity, unit, involution and ‖X†⋆X‖ = ‖X‖² on random elements."""
    rng = np.random.default_rng(seed)
    p = algebra.projection
    d = p.dim
    eye = np.eye(d)
    worst = {"associativity": 0.0, "unit": 0.0, "involution": 0.0, "cstar_identity": 0.0}
    if algebra.dim:
        for _ in range(trials):
            x, y, z = (_random_element(algebra, rng) for _ in range(3))
            star = lambda a, b: p.apply(a @ b)
            worst["associativity"] = max(
                worst["associativity"], float(np.linalg.norm(star(star(x, y), z) - star(x, star(y, z))))
            )
            worst["unit"] = max(
                worst["unit"], float(np.linalg.norm(star(eye, x) - x)), float(np.linalg.norm(star(x, eye) - x))
            )
            worst["involution"] = max(
                worst["involution"],
                float(np.linalg.norm(star(x, y).conj().T - star(y.conj().T, x.conj().T))),
            )
            norm = op_norm(x)
            worst["cstar_identity"] = max(
                worst["cstar_identity"], abs(op_norm(star(x.conj().T, x)) - norm ** 2) / max(norm ** 2, 1e-300)
            )
    checks = [check("cstar.closure", algebra.closure_defect, tol.eps_alg)]
    checks += [check(f"cstar.{name}", value, tol.eps_alg) for name, value in worst.items()]
    return CStarReport(checks=checks, passed=all(c.passed for c in checks))


class AutomorphyResult(BaseModel):
    peripherally_automorphic: bool
    star_defect: float
    p11_defect: float
    witness: Optional[Tuple[int, int]] = None


def peripherally_automorphic(
    attr: AttractorStructure, tol: Tolerances = DEFAULT_TOLERANCES
) -> AutomorphyResult:
    """X⋆Y = XY on Attr, and independently P₁₁(ab) = P₁₁(a)P₁₁(b) on 𝔄.

    The witness holds indices into the 𝔄 basis.
    """
    basis = attr.algebra_basis_00
    star_defect, p11_defect = 0.0, 0.0
    witness, worst = None, -1.0
    for i, a in enumerate(basis):
        x = attr.lam(a)
        for j, b in enumerate(basis):
            y = attr.lam(b)
            star = float(np.linalg.norm(attr.projection.apply(x @ y) - x @ y))
            multiplicative = (
                float(np.linalg.norm(attr.p11(a @ b) - attr.p11(a) @ attr.p11(b))) if attr.split.h1_dim else 0.0
            )
            star_defect = max(star_defect, star)
            p11_defect = max(p11_defect, multiplicative)
            if star > worst:
                worst, witness = star, (i, j)
    by_star = star_defect <= tol.eps_alg
    by_p11 = p11_defect <= tol.eps_alg
    if by_star != by_p11 and abs(star_defect - p11_defect) > tol.eps_alg:
        logger.error(f"Automorphy tests disagree: ⋆ defect {star_defect:.3e}, P11 defect {p11_defect:.3e}")
        raise ConsistencyError(
            "⋆ = · and multiplicativity of P₁₁ disagree",
            invariant="peripheral_automorphy.consistency",
            margin=abs(star_defect - p11_defect),
        )
    return AutomorphyResult(
        peripherally_automorphic=by_star,
        star_defect=star_defect,
        p11_defect=p11_defect,
        witness=None if by_star else witness,
    )


def isomorphism_checks(
    c: Channel, attr: AttractorStructure, trials: int = 64, seed: int = 0, tol: Tolerances = DEFAULT_TOLERANCES
) -> List[Check]:
    """Λ(a)⋆Λ(b) = Λ(ab) and Φ(X⋆Y) = Φ(X)⋆Φ(Y) on random elements."""
    c = heisenberg(c, tol)
    rng = np.random.default_rng(seed)
    basis = attr.algebra_basis_00
    lam_defect, auto_defect = 0.0, 0.0
    if basis:
        for _ in range(trials):
            ca = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
            cb = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
            a = sum(k * e for k, e in zip(ca / np.linalg.norm(ca), basis))
            b = sum(k * e for k, e in zip(cb / np.linalg.norm(cb), basis))
            x, y = attr.lam(a), attr.lam(b)
            star_xy = attr.projection.apply(x @ y)
            lam_defect = max(lam_defect, float(np.linalg.norm(star_xy - attr.lam(a @ b))))
            fx, fy = apply(c, x), apply(c, y)
            auto_defect = max(
                auto_defect, float(np.linalg.norm(apply(c, star_xy) - attr.projection.apply(fx @ fy)))
            )
    return [
        check("lambda_isomorphism", lam_defect, tol.eps_alg),
        check("star_automorphism", auto_defect, tol.eps_alg),
    ]


def kernel_ideal(
    projection: ProjectionMap, split: HilbertSplit, tol: Tolerances = DEFAULT_TOLERANCES
) -> List[np.ndarray]:
    """Basis {V₁E_ijV₁†} of K_{P_P} = 0 ⊕ B(H₁), verified element by element."""
    d1 = split.h1_dim
    basis = [split.embed(x11=matrix_unit(d1, d1, i, j)) for i in range(d1) for j in range(d1)]
    worst = 0.0
    for x in basis:
        # X₀₀ = X₀₁ = X₁₀ = 0
        for i, j in ((0, 0), (0, 1), (1, 0)):
            worst = max(worst, float(np.linalg.norm(split.block(x, i, j))))
        # P_P(X†X) = P_P(XX†) = 0, block by block
        for y in (x.conj().T @ x, x @ x.conj().T):
            image = projection.apply(y)
            for i in (0, 1):
                for j in (0, 1):
                    worst = max(worst, float(np.linalg.norm(split.block(image, i, j))))
    if worst > tol.eps_alg:
        logger.error(f"Transient matrix unit violates the ideal conditions: {worst:.3e}")
        raise DerivationViolationError(
            "0 ⊕ B(H₁) is not annihilated by P_P", invariant="kernel_ideal.definition", margin=worst
        )
    return basis


@dataclass(frozen=True, eq=False)
class DfaDecomposition:
    attr_part: Tuple[np.ndarray, ...]
    ideal_part: Tuple[np.ndarray, ...]
    nstar_basis: Tuple[np.ndarray, ...]
    algebra_00: Tuple[np.ndarray, ...]
    transient_full: bool
    checks: Tuple[Check, ...] = ()

    @property
    def nstar_dim(self) -> int:
        return len(self.nstar_basis)


def _product_closure(basis: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for a in basis:
        worst = max(worst, span_residual(a.conj().T, basis))
        for b in basis:
            worst = max(worst, span_residual(a @ b, basis))
    return worst


def dfa_nstar(attr: AttractorStructure, tol: Tolerances = DEFAULT_TOLERANCES) -> DfaDecomposition:
    """N⋆ = 𝔄 ⊕ B(H₁), cross-checked against Attr(Φ) ⊕ K_{P_P}."""
    split = attr.split
    attr_part = attr.orthonormal_attractor(tol.eps_alg)
    ideal = kernel_ideal(attr.projection, split, tol)
    block_form = orthonormal_span(
        [split.embed(x00=a) for a in attr.algebra_basis_00] + ideal, tol.eps_alg
    )
    sum_form = orthonormal_span(list(attr_part) + ideal, tol.eps_alg)

    expected = len(attr.algebra_basis_00) + split.h1_dim ** 2
    if len(sum_form) != len(attr_part) + len(ideal) or len(block_form) != expected:
        raise DerivationViolationError(
            "Attr ⊕ K is not a direct sum of the expected dimension",
            invariant="nstar.direct_sum",
            details={"attr": len(attr_part), "ideal": len(ideal), "nstar": len(block_form)},
        )
    distance = span_distance(sum_form, block_form)
    if distance > tol.eps_alg:
        logger.error(f"N⋆ decompositions disagree: {distance:.3e}")
        raise DerivationViolationError(
            "Attr(Φ) ⊕ K_{P_P} ≠ 𝔄 ⊕ B(H₁)", invariant="nstar.span_equality", margin=distance
        )

    equals_attr = span_distance(block_form, attr_part) <= tol.eps_alg
    if equals_attr != split.faithful:
        raise DerivationViolationError(
            "N⋆ = Attr(Φ) must hold exactly for faithful maps",
            invariant="nstar.faithfulness",
            details={"faithful": split.faithful, "nstar_equals_attr": equals_attr},
        )
    checks = (
        check("nstar.span_equality", distance, tol.eps_alg),
        check("nstar.product_closure", _product_closure(block_form), tol.eps_alg),
    )
    logger.info(f"N⋆ built: dim {len(block_form)} = {len(attr_part)} + {len(ideal)}")
    return DfaDecomposition(
        attr_part=tuple(attr_part),
        ideal_part=tuple(ideal),
        nstar_basis=tuple(block_form),
        algebra_00=tuple(attr.algebra_basis_00),
        transient_full=split.h1_dim > 0 and len(ideal) == split.h1_dim ** 2,
        checks=checks,
    )


def power_growth(n: int) -> int:
    """Rounding growth of Φⁿ formed by repeated squaring."""
    return 1 + int(n).bit_length()


def star_decoherence_defect(
    c: Channel, projection: ProjectionMap, x: np.ndarray, y: np.ndarray, n: int
) -> float:
    """Worst violation of Φⁿ(Y⋆X) = Φⁿ(Y)⋆Φⁿ(X) and Φⁿ(X⋆Y) = Φⁿ(X)⋆Φⁿ(Y), ⋆ = P_P(··)."""

    power = superop_power(c.superop, n)
    phi = lambda z: apply_superop(power, z, (c.dim, c.dim))
    px, py = phi(x), phi(y)
    left = np.linalg.norm(phi(projection.apply(y @ x)) - projection.apply(py @ px))
    right = np.linalg.norm(phi(projection.apply(x @ y)) - projection.apply(px @ py))
    return float(max(left, right))


class DfaDefinitionReport(BaseModel):
    checks: List[Check]
    outside_trials: int
    outside_violations: int
    passed: bool


def dfa_definition_check(
    c: Channel,
    dfa: DfaDecomposition,
    projection: ProjectionMap,
    n_max: int = 8,
    trials: int = 64,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> DfaDefinitionReport:
    """Sample the defining conditions of N⋆ on members and spot-check non-members."""
    c = heisenberg(c, tol)
    rng = np.random.default_rng(seed)
    d = c.dim

    def gaussian() -> np.ndarray:
        z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        return z / np.linalg.norm(z)

    worst = np.zeros(n_max + 1)
    for _ in range(trials):
        coefficients = rng.standard_normal(dfa.nstar_dim) + 1j * rng.standard_normal(dfa.nstar_dim)
        x = sum(k * b for k, b in zip(coefficients / np.linalg.norm(coefficients), dfa.nstar_basis))
        y = gaussian()
        for n in range(1, n_max + 1):
            worst[n] = max(worst[n], star_decoherence_defect(c, projection, x, y, n))
    checks = [
        check(f"nstar.definition.n{n}", float(worst[n]), tol.eps_alg * power_growth(n)) for n in range(1, n_max + 1)
    ]
    violated = [ch for ch in checks if not ch.passed]
    if violated:
        logger.error(f"A member of N⋆ violates its defining conditions: {[ch.name for ch in violated]}")
        raise DerivationViolationError(
            "Sampled member of N⋆ violates Φⁿ-multiplicativity",
            invariant=violated[0].name,
            margin=violated[0].margin,
        )

    outside_trials, violations = 0, 0
    if dfa.nstar_dim < d * d:
        for _ in range(min(trials, 16)):
            x = gaussian()
            y = gaussian()
            outside_trials += 1
            if any(
                star_decoherence_defect(c, projection, x, y, n) > tol.eps_alg * power_growth(n)
                for n in range(1, n_max + 1)
            ):
                violations += 1
    return DfaDefinitionReport(
        checks=checks, outside_trials=outside_trials, outside_violations=violations, passed=all_passed(checks)
    )


def idempotent_cp_consistency(
    attr: AttractorStructure, automorphic: bool, tol: Tolerances = DEFAULT_TOLERANCES
) -> List[Check]:
    """P₀₀ (faithful idempotent Schwarz) must be CP; so must P_P when Φ is peripherally automorphic."""
    split = attr.split
    p00 = p00_superop(attr.projection, split)
    checks = [check("p00_choi_psd", max(0.0, -min_eigenvalue(choi_from_superop(p00, split.h0_dim, split.h0_dim))), tol.eps_alg)]
    if automorphic:
        checks.append(check("pp_choi_psd_automorphic", max(0.0, -min_eigenvalue(attr.projection.choi)), tol.eps_alg))
    return checks
