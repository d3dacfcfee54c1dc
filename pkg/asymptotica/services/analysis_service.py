# asymptotica/services/analysis_service.py

import hashlib
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from asymptotica.services.channel import (
    BlockMaps,
    Channel,
    block_maps,
    schwarz_falsify,
    with_schwarz_flag,
)
from asymptotica.services.choi_effros import (
    CStarReport,
    DfaDefinitionReport,
    build_star_algebra,
    dfa_definition_check,
    dfa_nstar,
    idempotent_cp_consistency,
    isomorphism_checks,
    peripherally_automorphic,
    verify_cstar,
)
from asymptotica.services.spectral import (
    ProjectionMap,
    SpectralData,
    cesaro_agreement_check,
    decay_check,
    fixed_projection,
    peripheral_projection,
    projection_checks,
    spectrum,
)
from asymptotica.services.structure import (
    AttractorStructure,
    EigvecReport,
    WolfDecomposition,
    asymptotic_action,
    block_vanishing_checks,
    closed_form_checks,
    commutation_identity_check,
    cycle_lengths,
    cycle_spectrum_check,
    dual_support_checks,
    extract_dynamics,
    extract_rho,
    heisenberg,
    idempotent_relation_check,
    p11_extract,
    peripheral_eigvec_check,
    recurrent_support,
    reduce,
    schrodinger_correspondence,
    wolf_decompose,
)
from asymptotica.services.unfolder import UnfoldSpec, declared_algebra_basis, lambda_embed, unfold
from asymptotica.utils.matrix_json import matrix_to_json
from asymptotica.utils.checks import Check, check, failed
from asymptotica.utils.config import RunSettings, Tolerances, load_config
from asymptotica.utils.errors import StructuralError, ValidationError
from asymptotica.utils.matcore import HilbertSplit, orthonormal_span, phase_distance, span_distance, unvec, vec

logger = logging.getLogger(__name__)


class PropertyFlags(BaseModel):
    picture: str
    unital: bool
    trace_preserving: bool
    cp: bool
    schwarz_unfalsified: Optional[bool] = None


class BlockReport(BaseModel):
    d1: int
    d2: int
    rho_k: Any


class StructureReport(BaseModel):
    h0_dim: int
    h1_dim: int
    blocks: List[BlockReport]
    permutation: List[int]
    cycle_lengths: List[int]
    unitaries: List[Any]
    external: bool
    p11: Any
    attractor_dim: int


class ChoiEffrosReport(BaseModel):
    nstar_dim: int
    attr_dim: int
    ideal_dim: int
    peripherally_automorphic: bool
    automorphy_witness: Optional[Tuple[int, int]] = None
    worst_margins: Dict[str, float]
    cstar: CStarReport
    definition: DfaDefinitionReport


class AnalysisReport(BaseModel):
    input_digest: str
    flags: PropertyFlags
    spectrum: List[Dict[str, Any]]
    structure: StructureReport
    choi_effros: ChoiEffrosReport
    eigvec: EigvecReport
    checks: List[Check]
    tolerances: Dict[str, float]
    seed: int
    passed: bool
    timings: Dict[str, float]


class RoundTripReport(BaseModel):
    checks: List[Check]
    mismatches: List[str]
    passed: bool
    seed: Optional[int] = None


@dataclass(frozen=True, eq=False)
class StructureResult:
    """Intermediate objects of the structure stage, kept for round-trip comparison."""

    channel: Channel
    spectral: SpectralData
    projection: ProjectionMap
    split: HilbertSplit
    blockmaps: BlockMaps
    wolf: WolfDecomposition
    attractor: AttractorStructure
    checks: Tuple[Check, ...]


def digest_of(c: Channel) -> str:
    return "sha256:" + hashlib.sha256(np.ascontiguousarray(c.superop).tobytes()).hexdigest()


def _tensor_factors(t: np.ndarray, d1: int, d2: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """Nearest A⊗B to t, both scaled to unitary norm; third value is the product defect."""
    realigned = t.reshape(d1, d2, d1, d2).transpose(0, 2, 1, 3).reshape(d1 * d1, d2 * d2)
    u, s, vh = np.linalg.svd(realigned)
    a = u[:, 0].reshape(d1, d1) * np.sqrt(d1)
    b = vh[0, :].reshape(d2, d2) * s[0] / np.sqrt(d1)
    return a, b, float(np.linalg.norm(t - np.kron(a, b)))


class AnalysisService:
    """Runs the asymptotic-structure pipeline and compares syntheses with their declarations."""

    def __init__(self):
        self.tolerances, self.settings = load_config()

    def _resolve(self, tol: Optional[Tolerances], settings: Optional[RunSettings]) -> Tuple[Tolerances, RunSettings]:
        return tol or self.tolerances, settings or self.settings

    def spectrum_fragment(self, c: Channel, tol: Optional[Tolerances] = None) -> List[Dict[str, Any]]:
        tol, _ = self._resolve(tol, None)
        return spectrum(heisenberg(c, tol), tol).fragment()

    def analyze_structure(
        self, c: Channel, tol: Optional[Tolerances] = None, settings: Optional[RunSettings] = None
    ) -> StructureResult:
        tol, settings = self._resolve(tol, settings)
        h = heisenberg(c, tol)
        if not h.flags.unital:
            raise ValidationError("Structure analysis needs a unital map in the Heisenberg picture")
        spectral = spectrum(h, tol)
        projection = peripheral_projection(h, tol, spectral)
        split = recurrent_support(h, tol, projection)
        blockmaps = block_maps(h, split, tol)
        reduced = reduce(h, split, tol)
        reduced_spectral = spectrum(reduced, tol)
        wolf = wolf_decompose(reduced, tol, settings, reduced_spectral, split)
        wolf = extract_rho(reduced, wolf, tol, reduced_spectral)
        wolf = extract_dynamics(reduced, wolf, tol)
        attr = p11_extract(h, split, wolf, projection, tol)
        attr = asymptotic_action(h, attr, tol)

        checks = list(block_vanishing_checks(attr, settings.seed, tol))
        checks += closed_form_checks(projection, split, wolf, tol)
        checks.append(idempotent_relation_check(attr, tol))
        checks.append(commutation_identity_check(blockmaps, attr, tol))
        checks.append(cycle_spectrum_check(attr, wolf, tol))
        checks += schrodinger_correspondence(h, split, projection, spectral, tol)
        checks += dual_support_checks(h, split, spectral, tol)
        return StructureResult(
            channel=h,
            spectral=spectral,
            projection=projection,
            split=split,
            blockmaps=blockmaps,
            wolf=wolf,
            attractor=attr,
            checks=tuple(checks),
        )

    def analyze(
        self,
        c: Channel,
        tol: Optional[Tolerances] = None,
        settings: Optional[RunSettings] = None,
        digest: Optional[str] = None,
    ) -> AnalysisReport:
        """Properties, spectrum, structure, Choi-Effros algebra and eigenvector checks of one map."""
        tol, settings = self._resolve(tol, settings)
        timings: Dict[str, float] = {}

        @contextmanager
        def stage(name: str) -> Iterator[None]:
            start = time.perf_counter()
            yield
            timings[name] = time.perf_counter() - start

        with stage("properties"):
            h = heisenberg(c, tol)
            if not h.flags.unital:
                raise ValidationError("Input is neither unital (Heisenberg) nor trace preserving (Schrödinger)")
            operator = schwarz_falsify(h, settings.schwarz_trials, settings.seed, tol=tol)
            kadison = schwarz_falsify(h, settings.schwarz_trials, settings.seed, hermitian_only=True, tol=tol)
            h = with_schwarz_flag(h, operator)
            if h.flags.schwarz_unfalsified is False:
                logger.error(f"Schwarz inequality violated by {operator.worst_min_eigenvalue:.3e}")
                raise StructuralError(
                    "Map violates the operator Schwarz inequality",
                    invariant="properties.schwarz",
                    margin=-operator.worst_min_eigenvalue,
                )
            checks: List[Check] = [operator.to_check(), kadison.to_check()]
            flags = PropertyFlags(
                picture=c.picture.value,
                unital=c.flags.unital,
                trace_preserving=c.flags.trace_preserving,
                cp=c.flags.cp,
                schwarz_unfalsified=h.flags.schwarz_unfalsified,
            )

        with stage("spectrum"):
            spectral = spectrum(h, tol)
            projection = peripheral_projection(h, tol, spectral)
            checks += projection_checks(projection, h, tol, "peripheral_projection")
            checks += projection_checks(fixed_projection(h, tol, spectral), h, tol, "fixed_projection")
            checks.append(cesaro_agreement_check(h, spectral, settings.cesaro_n, tol))
            decay, _ = decay_check(h, spectral, projection, tol=tol)
            checks.append(decay)
            logger.info(
                f"Spectrum computed: {spectral.eigenvalues.size} eigenvalues, "
                f"{spectral.peripheral_indices.size} peripheral"
            )

        with stage("structure"):
            result = self.analyze_structure(h, tol, settings)
            checks += result.checks
            attr, wolf, split = result.attractor, result.wolf, result.split

        with stage("choi_effros"):
            algebra = build_star_algebra(attr, tol)
            cstar = verify_cstar(algebra, settings.cstar_trials, settings.seed, tol)
            automorphy = peripherally_automorphic(attr, tol)
            checks += isomorphism_checks(h, attr, settings.cstar_trials, settings.seed, tol)
            dfa = dfa_nstar(attr, tol)
            checks += dfa.checks
            definition = dfa_definition_check(
                h, dfa, attr.projection, settings.dfa_n_max, settings.dfa_trials, settings.seed, tol
            )
            checks += idempotent_cp_consistency(attr, automorphy.peripherally_automorphic, tol)
            margins = {ch.name: ch.margin for ch in cstar.checks + definition.checks + list(dfa.checks)}
            margins["star_vs_product"] = automorphy.star_defect
            margins["p11_multiplicativity"] = automorphy.p11_defect
            choi_effros = ChoiEffrosReport(
                nstar_dim=dfa.nstar_dim,
                attr_dim=len(dfa.attr_part),
                ideal_dim=len(dfa.ideal_part),
                peripherally_automorphic=automorphy.peripherally_automorphic,
                automorphy_witness=automorphy.witness,
                worst_margins=margins,
                cstar=cstar,
                definition=definition,
            )

        with stage("eigvec"):
            eigvec = peripheral_eigvec_check(h, split, result.blockmaps, spectral, tol)

        structure = StructureReport(
            h0_dim=split.h0_dim,
            h1_dim=split.h1_dim,
            blocks=[BlockReport(d1=b.d1, d2=b.d2, rho_k=matrix_to_json(b.rho)) for b in wolf.blocks],
            permutation=list(wolf.permutation),
            cycle_lengths=cycle_lengths(wolf.permutation),
            unitaries=[matrix_to_json(u) for u in wolf.unitaries],
            external=bool(wolf.external),
            p11=matrix_to_json(attr.p11_matrix),
            attractor_dim=attr.dim,
        )
        passed = not failed(checks) and cstar.passed and definition.passed and eigvec.passed
        if not passed:
            logger.warning(f"Failed checks: {[c.name for c in failed(checks)]}")
        return AnalysisReport(
            input_digest=digest or digest_of(c),
            flags=flags,
            spectrum=spectral.fragment(),
            structure=structure,
            choi_effros=choi_effros,
            eigvec=eigvec,
            checks=checks,
            tolerances=tol.model_dump(),
            seed=settings.seed,
            passed=passed,
            timings=timings,
        )

    def compare(
        self, spec: UnfoldSpec, result: StructureResult, tol: Optional[Tolerances] = None, settings: Optional[RunSettings] = None
    ) -> RoundTripReport:
        """Recovered structure against the declared one, up to block relabeling and tensor gauge."""
        tol, settings = self._resolve(tol, settings)
        bound = settings.roundtrip_tol
        mismatches: List[str] = []
        checks: List[Check] = []
        split, wolf, attr = result.split, result.wolf, result.attractor
        d0, d = spec.h0_dim, spec.dim

        if (split.h0_dim, split.h1_dim) != (d0, spec.h1_dim):
            mismatches.append(f"dimensions: declared ({d0}, {spec.h1_dim}), recovered ({split.h0_dim}, {split.h1_dim})")
            return RoundTripReport(checks=checks, mismatches=mismatches, passed=False, seed=spec.seed)

        declared_shapes = sorted((b.d1, b.d2) for b in spec.blocks)
        recovered_shapes = sorted((b.d1, b.d2) for b in wolf.blocks)
        if declared_shapes != recovered_shapes:
            mismatches.append(f"blocks: declared {declared_shapes}, recovered {recovered_shapes}")
            return RoundTripReport(checks=checks, mismatches=mismatches, passed=False, seed=spec.seed)

        # σ: recovered block → declared block, by signature and overlap
        absolute = [split.v0 @ b.iso for b in wolf.blocks]
        declared_isos = [np.vstack([spec.block_isometry(j), np.zeros((spec.h1_dim, spec.block_isometry(j).shape[1]))])
                         for j in range(spec.n_blocks)]
        sigma: List[int] = []
        for k, b in enumerate(wolf.blocks):
            candidates = [
                j for j, s in enumerate(spec.blocks) if (s.d1, s.d2) == (b.d1, b.d2) and j not in sigma
            ]
            best = max(candidates, key=lambda j: np.linalg.norm(declared_isos[j].conj().T @ absolute[k]))
            sigma.append(best)

        factors = []
        worst_product, worst_rho = 0.0, 0.0
        for k, b in enumerate(wolf.blocks):
            j = sigma[k]
            t = declared_isos[j].conj().T @ absolute[k]
            a, bb, defect = _tensor_factors(t, b.d1, b.d2)
            factors.append(a)
            worst_product = max(worst_product, defect)
            aligned = bb @ b.rho @ bb.conj().T
            worst_rho = max(worst_rho, float(np.linalg.norm(aligned - spec.rho_k(j))))
        checks.append(check("roundtrip.tensor_alignment", worst_product, bound))
        checks.append(check("roundtrip.rho", worst_rho, bound))

        recovered_cycles = cycle_lengths(wolf.permutation)
        declared_cycles = cycle_lengths(spec.perm)
        if recovered_cycles != declared_cycles:
            mismatches.append(f"cycle type: declared {declared_cycles}, recovered {recovered_cycles}")
        relabel_consistent = all(sigma[wolf.permutation[k]] == spec.perm[sigma[k]] for k in range(wolf.n_blocks))
        if not relabel_consistent:
            mismatches.append("permutation is not conjugate to the declared one under the block matching")

        worst_u = 0.0
        if relabel_consistent:
            inverse = {j: k for k, j in enumerate(wolf.permutation)}
            for jr, u in enumerate(wolf.unitaries):
                kr = inverse[jr]
                expected = factors[jr] @ u @ factors[kr].conj().T
                worst_u = max(worst_u, phase_distance(expected, spec.unitaries[sigma[jr]]))
            checks.append(check("roundtrip.unitaries", worst_u, bound))

        lam = lambda_embed(spec, tol)
        worst_p11 = 0.0
        declared_attr = []
        for a in declared_algebra_basis(spec):
            expected = unvec(lam @ vec(a), (d, d))
            declared_attr.append(expected)
            padded = np.zeros((d, d), dtype=complex)
            padded[:d0, :d0] = a
            recovered = attr.lam(split.v0.conj().T @ padded @ split.v0)
            worst_p11 = max(worst_p11, float(np.linalg.norm(recovered - expected)))
        checks.append(check("roundtrip.p11", worst_p11, bound))
        distance = span_distance(attr.orthonormal_attractor(tol.eps_alg), orthonormal_span(declared_attr, tol.eps_alg))
        checks.append(check("roundtrip.attractor_span", distance, tol.eps_alg))

        mismatches += [f"{c.name}: margin {c.margin:.3e} > {c.tolerance:.1e}" for c in failed(checks)]
        passed = not mismatches
        logger.info(f"Round trip {'passed' if passed else 'failed'} for spec seed={spec.seed}")
        return RoundTripReport(checks=checks, mismatches=mismatches, passed=passed, seed=spec.seed)

    def roundtrip(
        self, spec: UnfoldSpec, tol: Optional[Tolerances] = None, settings: Optional[RunSettings] = None
    ) -> RoundTripReport:
        tol, settings = self._resolve(tol, settings)
        channel = unfold(spec, tol)
        return self.compare(spec, self.analyze_structure(channel, tol, settings), tol, settings)


# Global service instance
analysis_service = AnalysisService()
