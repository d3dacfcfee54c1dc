# asymptotica/utils/matrix_json.py
"""Complex matrices as JSON: nested rows of ``[re, im]`` pairs."""

import json
import os
from typing import Any, List, Optional, Union

import numpy as np

from asymptotica.utils.errors import ChannelFileError, DimensionError

PathLike = Union[str, os.PathLike]
Pair = List[float]
MatrixJson = List[List[Pair]]


def matrix_to_json(m: np.ndarray) -> MatrixJson:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data: Any, shape: Optional[tuple] = None) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as e:
        raise ChannelFileError(f"Matrix entries must be [re, im] pairs: {e}")
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ChannelFileError(f"Expected a matrix of [re, im] pairs, got array of shape {arr.shape}")
    m = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and m.shape != tuple(shape):
        raise DimensionError(f"Expected a {shape[0]}x{shape[1]} matrix, got {m.shape[0]}x{m.shape[1]}")
    return m


def dump_json(payload: Any, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1)
        f.write("\n")
