# asymptotica/tests/test_config.py

import json

import pytest
from pydantic import ValidationError as SchemaError

from asymptotica.utils.checks import all_passed, check, check_at_least, failed
from asymptotica.utils.config import DEFAULT_TOLERANCES, RunSettings, Tolerances, load_config


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep ASYMPTOTICA_* variables from the surrounding shell out of these tests."""
    for name in list(Tolerances.model_fields) + list(RunSettings.model_fields):
        monkeypatch.delenv("ASYMPTOTICA_" + name.upper(), raising=False)
    yield


def test_defaults():
    tol, settings = load_config()
    assert tol == DEFAULT_TOLERANCES
    assert tol.eps_alg == 1e-7
    assert settings.seed == 0
    assert settings.cesaro_n == 10_000


def test_environment_overrides_defaults(monkeypatch):
    monkeypatch.setenv("ASYMPTOTICA_EPS_ALG", "1e-6")
    monkeypatch.setenv("ASYMPTOTICA_SEED", "42")
    tol, settings = load_config()
    assert tol.eps_alg == 1e-6
    assert settings.seed == 42


def test_config_file_overrides_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ASYMPTOTICA_SEED", "42")
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"tolerances": {"eps_mat": 1e-11}, "settings": {"seed": 7, "cstar_trials": 4}}))
    tol, settings = load_config(str(path))
    assert tol.eps_mat == 1e-11
    assert settings.seed == 7
    assert settings.cstar_trials == 4


def test_explicit_overrides_win(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"settings": {"seed": 7}}))
    tol, settings = load_config(str(path), {"eps_eig": 1e-9, "eps_mat": None}, {"seed": 3})
    assert tol.eps_eig == 1e-9
    assert tol.eps_mat == DEFAULT_TOLERANCES.eps_mat
    assert settings.seed == 3


def test_unreadable_config_file(tmp_path):
    with pytest.raises(ValueError, match="Failed to read config file"):
        load_config(str(tmp_path / "missing.json"))


def test_tolerances_must_be_positive():
    with pytest.raises(SchemaError):
        Tolerances(eps_alg=0.0)
    with pytest.raises(SchemaError):
        RunSettings(cesaro_n=0)


def test_check_helpers():
    ok = check("defect", 1e-12, 1e-10)
    bad = check("defect", 1e-3, 1e-10)
    nan = check("defect", float("nan"), 1.0)
    gap = check_at_least("gap", 0.5, 1e-7)
    assert ok.passed and not bad.passed and not nan.passed
    assert gap.passed and gap.bound == "lower"
    assert not check_at_least("gap", 0.0, 1e-7).passed
    assert all_passed([ok, gap])
    rejected = failed([ok, bad, nan])
    assert len(rejected) == 2 and rejected[0] is bad and rejected[1] is nan
