# asymptotica/services/channel_io.py

import json
import logging
import os
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ValidationError as SchemaError

from asymptotica.services.channel import Channel, Picture, from_kraus
from asymptotica.services.unfolder import BlockShape, UnfoldSpec
from asymptotica.utils.config import DEFAULT_TOLERANCES, Tolerances
from asymptotica.utils.errors import ChannelFileError, ValidationError
from asymptotica.utils.matrix_json import MatrixJson, PathLike, dump_json, matrix_from_json, matrix_to_json

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".truth.json"


class FlagsDocument(BaseModel):
    unital: Optional[bool] = None
    trace_preserving: Optional[bool] = None
    cp: Optional[bool] = None


class ChannelDocument(BaseModel):
    dim: int
    repr: Literal["kraus", "super", "choi"]
    picture: Literal["schrodinger", "heisenberg"]
    data: Any
    flags: Optional[FlagsDocument] = None


class BlockDocument(BaseModel):
    d1: int
    d2: int


class SpecDocument(BaseModel):
    blocks: List[BlockDocument]
    h1_dim: int = 0
    perm: List[int]
    unitaries: List[MatrixJson]
    transient_map: Optional[MatrixJson] = None
    rho: Optional[List[MatrixJson]] = None
    seed: Optional[int] = None


def parse_kraus(doc: ChannelDocument, tol: Tolerances) -> Channel:
    if not isinstance(doc.data, list) or not doc.data:
        raise ChannelFileError("Kraus data must be a non-empty list of matrices")
    ops = [matrix_from_json(k, (doc.dim, doc.dim)) for k in doc.data]
    return from_kraus(ops, Picture(doc.picture), tol)


def parse_super(doc: ChannelDocument, tol: Tolerances) -> Channel:
    n = doc.dim * doc.dim
    return Channel.from_superop(matrix_from_json(doc.data, (n, n)), Picture(doc.picture), tol=tol)


def parse_choi(doc: ChannelDocument, tol: Tolerances) -> Channel:
    n = doc.dim * doc.dim
    return Channel.from_choi(matrix_from_json(doc.data, (n, n)), Picture(doc.picture), tol=tol)


PARSERS = {"kraus": parse_kraus, "super": parse_super, "choi": parse_choi}


def _check_declared_flags(declared: FlagsDocument, channel: Channel) -> None:
    mismatched = [
        name
        for name in ("unital", "trace_preserving", "cp")
        if getattr(declared, name) is not None and getattr(declared, name) != getattr(channel.flags, name)
    ]
    if mismatched:
        raise ChannelFileError(f"Declared flags disagree with the recomputed ones: {', '.join(mismatched)}")


def parse_channel_document(payload: Dict[str, Any], tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    try:
        doc = ChannelDocument.model_validate(payload)
    except SchemaError as e:
        raise ChannelFileError(f"Malformed channel document: {e}")
    if doc.dim < 1:
        raise ChannelFileError("dim must be positive")
    channel = PARSERS[doc.repr](doc, tol)
    if doc.flags is not None:
        _check_declared_flags(doc.flags, channel)
    logger.debug(f"Parsed {doc.repr} channel of dimension {doc.dim} ({doc.picture})")
    return channel


def parse_channel_text(text: str, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ChannelFileError(f"Channel file is not valid JSON: {e}")
    if not isinstance(payload, dict):
        raise ChannelFileError("Channel file must hold a JSON object")
    return parse_channel_document(payload, tol)


def parse_file(file_path: PathLike, tol: Tolerances = DEFAULT_TOLERANCES) -> Channel:
    """Read a channel file; the representation is chosen by its ``repr`` field."""
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ChannelFileError(f"Failed to read channel file: {e}")
    return parse_channel_text(text, tol)


def channel_document(c: Channel, representation: str = "super") -> Dict[str, Any]:
    if representation == "kraus":
        if c.kraus is None:
            raise ValidationError("Channel carries no Kraus operators")
        data = [matrix_to_json(k) for k in c.kraus]
    elif representation == "super":
        data = matrix_to_json(c.superop)
    elif representation == "choi":
        data = matrix_to_json(c.choi)
    else:
        raise ValidationError(f"Unsupported representation: {representation}")
    return {
        "dim": c.dim,
        "repr": representation,
        "picture": c.picture.value,
        "data": data,
        "flags": {"unital": c.flags.unital, "trace_preserving": c.flags.trace_preserving, "cp": c.flags.cp},
    }


def write_channel(c: Channel, path: PathLike, representation: str = "super") -> None:
    dump_json(channel_document(c, representation), path)


def spec_document(spec: UnfoldSpec) -> Dict[str, Any]:
    return {
        "blocks": [{"d1": b.d1, "d2": b.d2} for b in spec.blocks],
        "h1_dim": spec.h1_dim,
        "perm": list(spec.perm),
        "unitaries": [matrix_to_json(u) for u in spec.unitaries],
        "transient_map": None if spec.transient_map is None else matrix_to_json(spec.transient_map),
        "rho": None if spec.rho is None else [matrix_to_json(r) for r in spec.rho],
        "seed": spec.seed,
    }


def spec_from_document(payload: Dict[str, Any]) -> UnfoldSpec:
    try:
        doc = SpecDocument.model_validate(payload)
    except SchemaError as e:
        raise ChannelFileError(f"Malformed unfold spec: {e}")
    return UnfoldSpec(
        blocks=tuple(BlockShape(d1=b.d1, d2=b.d2) for b in doc.blocks),
        h1_dim=doc.h1_dim,
        perm=tuple(doc.perm),
        unitaries=tuple(matrix_from_json(u) for u in doc.unitaries),
        transient_map=None if doc.transient_map is None else matrix_from_json(doc.transient_map),
        rho=None if doc.rho is None else tuple(matrix_from_json(r) for r in doc.rho),
        seed=doc.seed,
    )


def parse_spec_file(file_path: PathLike) -> UnfoldSpec:
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except OSError as e:
        raise ChannelFileError(f"Failed to read spec file: {e}")
    except json.JSONDecodeError as e:
        raise ChannelFileError(f"Spec file is not valid JSON: {e}")
    if not isinstance(payload, dict):
        raise ChannelFileError("Spec file must hold a JSON object")
    return spec_from_document(payload)


def write_spec(spec: UnfoldSpec, path: PathLike) -> None:
    dump_json(spec_document(spec), path)


def sidecar_path(channel_path: PathLike) -> str:
    return os.fspath(channel_path) + SIDECAR_SUFFIX
