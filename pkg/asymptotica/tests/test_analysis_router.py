# asymptotica/tests/test_analysis_router.py

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from asymptotica.main import app, cors_origins, create_app
from asymptotica.services.analysis_service import analysis_service
from asymptotica.services.channel import transpose_map
from asymptotica.services.channel_io import channel_document, parse_channel_text
from asymptotica.utils.config import RunSettings

# Create test client
client = TestClient(app)

SWAP_REQUEST = {
    "blocks": [{"d1": 1, "d2": 1}, {"d1": 1, "d2": 1}],
    "h1_dim": 0,
    "perm": [1, 0],
    "unitaries": [[[[1.0, 0.0]]], [[[1.0, 0.0]]]],
}


@pytest.fixture(autouse=True)
def fast_settings():
    """Reduce sampling on the shared service and restore it afterwards."""
    saved = analysis_service.settings
    analysis_service.settings = RunSettings(cesaro_n=2000, schwarz_trials=40, cstar_trials=16, dfa_n_max=4, dfa_trials=8)
    yield
    analysis_service.settings = saved


def upload(doc):
    return {"file": ("channel.json", json.dumps(doc).encode("utf-8"), "application/json")}


def test_root_health_endpoint():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_cors_origins_come_from_the_environment(monkeypatch):
    monkeypatch.setenv("ASYMPTOTICA_CORS_ORIGINS", "http://a.example, http://b.example,")
    assert cors_origins() == ["http://a.example", "http://b.example"]
    response = TestClient(create_app()).get("/health", headers={"Origin": "http://a.example"})
    assert response.headers["access-control-allow-origin"] == "http://a.example"


def test_no_cross_origin_access_by_default(monkeypatch):
    monkeypatch.delenv("ASYMPTOTICA_CORS_ORIGINS", raising=False)
    assert cors_origins() == []
    response = TestClient(create_app()).get("/health", headers={"Origin": "http://a.example"})
    assert response.status_code == 200
    assert "access-control-allow-origin" not in response.headers


def test_api_health_endpoint():
    """The router health check exposes the tolerances in effect."""
    response = client.get("/api/health")
    assert response.status_code == 200
    data = response.json()
    assert data["status"] == "healthy"
    assert data["tolerances"]["eps_alg"] == analysis_service.tolerances.eps_alg
    assert "seed" in data


def test_analyze_upload(damping):
    response = client.post("/api/analyze", files=upload(channel_document(damping)))
    assert response.status_code == 200
    data = response.json()
    assert data["passed"]
    assert data["structure"]["h0_dim"] == 1
    assert data["structure"]["h1_dim"] == 1
    assert data["choi_effros"]["peripherally_automorphic"]


def test_analyze_with_seed_query(damping):
    response = client.post("/api/analyze?seed=5", files=upload(channel_document(damping)))
    assert response.status_code == 200
    assert response.json()["seed"] == 5


def test_analyze_malformed_upload():
    response = client.post(
        "/api/analyze", files={"file": ("channel.json", b"{not json", "application/json")}
    )
    assert response.status_code == 400
    assert "not valid JSON" in response.json()["detail"]


def test_analyze_non_utf8_upload():
    response = client.post("/api/analyze", files={"file": ("channel.json", b"\xff\xfe\x00", "application/json")})
    assert response.status_code == 400


def test_analyze_non_schwarz_map_is_unprocessable():
    response = client.post("/api/analyze", files=upload(channel_document(transpose_map(2))))
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert detail["invariant"] == "properties.schwarz"
    assert detail["margin"] > 0


def test_spectrum_endpoint(damping):
    response = client.post("/api/spectrum", files=upload(channel_document(damping)))
    assert response.status_code == 200
    fragment = response.json()["spectrum"]
    assert [entry["multiplicity"] for entry in fragment] == [1, 2, 1]


def test_synthesize_swap():
    """The synthesized channel exchanges the two diagonal entries; the truth echoes the request."""
    response = client.post("/api/synthesize", json=SWAP_REQUEST)
    assert response.status_code == 200
    data = response.json()
    assert data["truth"]["perm"] == [1, 0]
    channel = parse_channel_text(json.dumps(data["channel"]))
    assert channel.dim == 2
    assert channel.flags.unital and channel.flags.cp
    image = (channel.superop @ np.diag([1.0, 0.0]).reshape(-1, order="F")).reshape(2, 2, order="F")
    assert np.allclose(image, np.diag([0.0, 1.0]))


def test_synthesize_invalid_spec():
    request = {**SWAP_REQUEST, "perm": [0, 0]}
    response = client.post("/api/synthesize", json=request)
    assert response.status_code == 400


def test_synthesize_schema_error():
    response = client.post("/api/synthesize", json={"blocks": [{"d1": 1}]})
    assert response.status_code == 422


def test_roundtrip_endpoint():
    response = client.post("/api/roundtrip", json=SWAP_REQUEST)
    assert response.status_code == 200
    data = response.json()
    assert data["passed"]
    assert data["mismatches"] == []
