# asymptotica/utils/config.py

import json
import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

ENV_PREFIX = "ASYMPTOTICA_"


class Tolerances(BaseModel):
    """Numerical thresholds shared by every module."""

    model_config = {"frozen": True}

    eps_mat: float = Field(1e-10, gt=0, description="element-level identities")
    eps_eig: float = Field(1e-8, gt=0, description="eigen-residuals")
    eps_cluster: float = Field(1e-7, gt=0, description="eigenvalue grouping")
    eps_per: float = Field(1e-9, gt=0, description="peripheral threshold on |λ|")
    eps_supp: float = Field(1e-9, gt=0, description="support of P_P†(I), relative")
    eps_faith: float = Field(1e-9, gt=0, description="invertibility of fixed states")
    eps_alg: float = Field(1e-7, gt=0, description="algebra-level identities")


class RunSettings(BaseModel):
    """Sampling sizes and seeds for the randomized checks."""

    model_config = {"frozen": True}

    seed: int = 0
    cesaro_n: int = Field(10_000, ge=1)
    schwarz_trials: int = Field(200, ge=1)
    cstar_trials: int = Field(64, ge=1)
    dfa_n_max: int = Field(8, ge=1)
    dfa_trials: int = Field(64, ge=1)
    max_retries: int = Field(8, ge=1)
    roundtrip_tol: float = Field(1e-6, gt=0)


DEFAULT_TOLERANCES = Tolerances()
DEFAULT_SETTINGS = RunSettings()


def _from_env(model: type) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for name, field in model.model_fields.items():
        raw = os.getenv(ENV_PREFIX + name.upper())
        if raw is None:
            continue
        values[name] = field.annotation(raw)
    return values


def load_config(
    config_path: Optional[str] = None,
    tolerance_overrides: Optional[Dict[str, Any]] = None,
    setting_overrides: Optional[Dict[str, Any]] = None,
) -> "tuple[Tolerances, RunSettings]":
    """Resolve tolerances and run settings.

    Precedence: defaults < environment (.env honoured) < JSON config file < overrides.
    """
    load_dotenv()

    tol_values = _from_env(Tolerances)
    run_values = _from_env(RunSettings)

    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except Exception as e:
            raise ValueError(f"Failed to read config file {config_path}: {e}")
        tol_values.update(data.get("tolerances", {}))
        run_values.update(data.get("settings", {}))

    tol_values.update({k: v for k, v in (tolerance_overrides or {}).items() if v is not None})
    run_values.update({k: v for k, v in (setting_overrides or {}).items() if v is not None})

    tol = Tolerances(**tol_values)
    settings = RunSettings(**run_values)
    logger.debug(f"Resolved tolerances {tol.model_dump()} and settings {settings.model_dump()}")
    return tol, settings
