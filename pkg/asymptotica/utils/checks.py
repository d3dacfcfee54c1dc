# asymptotica/utils/checks.py

import math
from typing import Iterable, List, Literal

from pydantic import BaseModel


class Check(BaseModel):
    """One numeric assertion: the measured quantity and the tolerance it was held to.

    ``bound="upper"`` passes when margin ≤ tolerance (a defect), ``"lower"``
    when margin > tolerance (a separation, e.g. a spectral gap).
    """

    name: str
    margin: float
    tolerance: float
    passed: bool
    bound: Literal["upper", "lower"] = "upper"


def check(name: str, margin: float, tolerance: float) -> Check:
    margin = float(margin)
    passed = not math.isnan(margin) and margin <= tolerance
    return Check(name=name, margin=margin, tolerance=float(tolerance), passed=passed)


def check_at_least(name: str, value: float, minimum: float) -> Check:
    value = float(value)
    passed = not math.isnan(value) and value > minimum
    return Check(name=name, margin=value, tolerance=float(minimum), passed=passed, bound="lower")


def all_passed(checks: Iterable[Check]) -> bool:
    return all(c.passed for c in checks)


def failed(checks: Iterable[Check]) -> List[Check]:
    return [c for c in checks if not c.passed]
