# asymptotica/tests/test_analysis_service.py

import json

import numpy as np
import pytest

from asymptotica.services.analysis_service import AnalysisService, digest_of
from asymptotica.services.channel import Channel, transpose_map, unitary_channel
from asymptotica.services.unfolder import unfold
from asymptotica.utils.matrix_json import matrix_from_json
from asymptotica.utils.config import RunSettings
from asymptotica.utils.errors import StructuralError, ValidationError

FAST = RunSettings(cesaro_n=2000, schwarz_trials=40, cstar_trials=16, dfa_n_max=4, dfa_trials=8)


@pytest.fixture
def service():
    """A service with reduced sampling so each report builds quickly."""
    svc = AnalysisService()
    svc.settings = FAST
    return svc


def test_damping_report(service, damping):
    report = service.analyze(damping)
    assert report.passed, [c.name for c in report.checks if not c.passed]
    assert report.flags.unital and report.flags.cp
    assert report.flags.schwarz_unfalsified is True
    assert report.structure.h0_dim == 1
    assert report.structure.h1_dim == 1
    assert report.structure.attractor_dim == 1
    assert [(b.d1, b.d2) for b in report.structure.blocks] == [(1, 1)]
    assert report.structure.permutation == [0]
    assert report.structure.cycle_lengths == [1]
    assert report.choi_effros.peripherally_automorphic
    assert (report.choi_effros.attr_dim, report.choi_effros.ideal_dim, report.choi_effros.nstar_dim) == (1, 1, 2)
    assert report.spectrum[0]["peripheral"]
    assert set(report.timings) == {"properties", "spectrum", "structure", "choi_effros", "eigvec"}
    assert report.seed == 0


def test_schrodinger_input_reports_original_picture(service, damping_schrodinger):
    report = service.analyze(damping_schrodinger)
    assert report.flags.picture == "schrodinger"
    assert report.flags.trace_preserving
    assert report.structure.h0_dim == 1


def test_identity_report(service, qubit_identity):
    report = service.analyze(qubit_identity)
    assert report.passed
    assert report.structure.h1_dim == 0
    assert report.structure.attractor_dim == 4
    assert report.choi_effros.ideal_dim == 0
    assert report.eigvec.psi11_nonunital is None


def test_non_automorphic_report(service, non_automorphic_spec):
    report = service.analyze(unfold(non_automorphic_spec))
    assert report.passed
    assert not report.choi_effros.peripherally_automorphic
    assert report.choi_effros.automorphy_witness is not None
    assert report.choi_effros.worst_margins["p11_multiplicativity"] > 1e-3


def test_report_is_deterministic_apart_from_timings(service):
    first = service.analyze(unitary_channel(np.diag([1.0, 1j])))
    second = service.analyze(unitary_channel(np.diag([1.0, 1j])))
    assert first.model_dump(exclude={"timings"}) == second.model_dump(exclude={"timings"})
    assert first.input_digest == digest_of(unitary_channel(np.diag([1.0, 1j])))


def test_report_serializes_to_json(service, damping):
    payload = json.loads(service.analyze(damping).model_dump_json())
    p11 = matrix_from_json(payload["structure"]["p11"])
    assert p11.shape == (1, 1)
    assert abs(p11[0, 0]) == pytest.approx(1.0)
    assert payload["tolerances"]["eps_alg"] == service.tolerances.eps_alg


def test_seed_override_is_reported(service, damping):
    report = service.analyze(damping, settings=RunSettings(**{**FAST.model_dump(), "seed": 17}))
    assert report.seed == 17


def test_transpose_is_rejected_as_non_schwarz(service):
    with pytest.raises(StructuralError) as excinfo:
        service.analyze(transpose_map(2))
    assert excinfo.value.invariant == "properties.schwarz"
    assert excinfo.value.margin > 0


def test_non_unital_input_is_rejected(service):
    with pytest.raises(ValidationError, match="unital"):
        service.analyze(Channel.from_superop(0.5 * np.eye(4)))


def test_spectrum_fragment(service, damping):
    fragment = service.spectrum_fragment(damping)
    assert sum(entry["multiplicity"] for entry in fragment) == 4
    assert [entry["peripheral"] for entry in fragment] == [True, False, False]


def test_roundtrip_report(service, swap_spec):
    report = service.roundtrip(swap_spec)
    assert report.passed
    assert report.mismatches == []
    assert all(c.passed for c in report.checks)
