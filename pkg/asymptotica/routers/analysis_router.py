# asymptotica/routers/analysis_router.py

import logging
from typing import Any, Dict, List, Optional

from fastapi import APIRouter, File, HTTPException, UploadFile
from pydantic import BaseModel

from asymptotica.services.analysis_service import AnalysisReport, RoundTripReport, analysis_service
from asymptotica.services.channel_io import channel_document, parse_channel_text, spec_from_document
from asymptotica.services.unfolder import unfold
from asymptotica.utils.config import RunSettings
from asymptotica.utils.errors import StructuralError
from asymptotica.utils.matrix_json import MatrixJson

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api", tags=["Analysis"])

MAX_UPLOAD_BYTES = 8 * 1024 * 1024


class BlockModel(BaseModel):
    d1: int
    d2: int


class UnfoldSpecRequest(BaseModel):
    blocks: List[BlockModel]
    h1_dim: int = 0
    perm: List[int]
    unitaries: List[MatrixJson]
    transient_map: Optional[MatrixJson] = None
    rho: Optional[List[MatrixJson]] = None
    seed: Optional[int] = None


class SynthesizeResponse(BaseModel):
    channel: Dict[str, Any]
    truth: Dict[str, Any]


def _http_error(e: Exception) -> HTTPException:
    if isinstance(e, StructuralError):
        return HTTPException(status_code=422, detail={"invariant": e.invariant, "message": str(e), "margin": e.margin})
    if isinstance(e, RuntimeError):
        return HTTPException(status_code=422, detail={"invariant": type(e).__name__, "message": str(e)})
    return HTTPException(status_code=400, detail=str(e))


async def _read_channel(file: UploadFile):
    if not file.filename:
        raise HTTPException(status_code=400, detail="No filename provided")
    content = await file.read()
    if len(content) > MAX_UPLOAD_BYTES:
        raise HTTPException(status_code=400, detail="Channel file too large")
    try:
        return parse_channel_text(content.decode("utf-8"), analysis_service.tolerances)
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail="Channel file must be UTF-8 JSON")


@router.post("/analyze", response_model=AnalysisReport)
async def analyze_channel(file: UploadFile = File(...), seed: Optional[int] = None):
    """
    Upload a channel JSON file and run the full asymptotic analysis.
    """
    try:
        channel = await _read_channel(file)
        settings = analysis_service.settings
        if seed is not None:
            settings = RunSettings(**{**settings.model_dump(), "seed": seed})
        return analysis_service.analyze(channel, settings=settings)
    except HTTPException:
        raise
    except (ValueError, RuntimeError) as e:
        logger.warning(f"Analysis of {file.filename} failed: {e}")
        raise _http_error(e)


@router.post("/spectrum")
async def channel_spectrum(file: UploadFile = File(...)):
    try:
        channel = await _read_channel(file)
        return {"spectrum": analysis_service.spectrum_fragment(channel)}
    except HTTPException:
        raise
    except (ValueError, RuntimeError) as e:
        raise _http_error(e)


@router.post("/synthesize", response_model=SynthesizeResponse)
async def synthesize_channel(request: UnfoldSpecRequest):
    """
    Unfold a declared structure into a channel; the declaration is echoed back as ground truth.
    """
    try:
        spec = spec_from_document(request.model_dump())
        channel = unfold(spec, analysis_service.tolerances)
        return SynthesizeResponse(channel=channel_document(channel), truth=request.model_dump())
    except (ValueError, RuntimeError) as e:
        raise _http_error(e)


@router.post("/roundtrip", response_model=RoundTripReport)
async def roundtrip_spec(request: UnfoldSpecRequest):
    try:
        return analysis_service.roundtrip(spec_from_document(request.model_dump()))
    except (ValueError, RuntimeError) as e:
        raise _http_error(e)


@router.get("/health")
async def health_check():
    """
    Health check for the analysis router.
    """
    return {
        "status": "healthy",
        "tolerances": analysis_service.tolerances.model_dump(),
        "seed": analysis_service.settings.seed,
    }
