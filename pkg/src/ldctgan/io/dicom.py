"""Uncompressed single-frame CT DICOM ingestion (pydicom-backed)."""

from __future__ import annotations

import io
import logging
import struct
from pathlib import Path

import numpy as np
import pydicom
from pydicom.errors import InvalidDicomError

from ..errors import MalformedFile, MissingTag, UnsupportedEncoding
from .slices import CTSlice

log = logging.getLogger(__name__)


def parse_dicom_slice(file_bytes: bytes) -> CTSlice:
    """Decode a CT slice and rescale stored values to Hounsfield units."""
    try:
        ds = pydicom.dcmread(io.BytesIO(file_bytes), force=False)
    except InvalidDicomError as exc:
        raise MalformedFile(str(exc)) from exc
    except (EOFError, OSError, ValueError, KeyError, struct.error) as exc:
        # truncated inside the element stream
        raise MissingTag(f"could not read element stream: {exc}") from exc

    meta = getattr(ds, "file_meta", None)
    tsuid = getattr(meta, "TransferSyntaxUID", None) if meta is not None else None
    if tsuid is not None and tsuid.is_compressed:
        raise UnsupportedEncoding(f"compressed transfer syntax {tsuid} is not supported")
    if int(ds.get("NumberOfFrames", 1) or 1) > 1:
        raise UnsupportedEncoding("multi-frame DICOM is not supported")

    for tag in ("PixelData", "RescaleSlope", "RescaleIntercept", "Rows", "Columns"):
        if tag not in ds:
            raise MissingTag(f"required tag {tag} is absent")

    try:
        stored = ds.pixel_array
    except Exception as exc:  # pydicom raises assorted types for short pixel data
        raise MissingTag(f"pixel data unreadable: {exc}") from exc
    if stored.ndim != 2:
        raise UnsupportedEncoding(f"expected a single 2D frame, got shape {stored.shape}")

    slope = float(ds.RescaleSlope)
    intercept = float(ds.RescaleIntercept)
    hu = stored.astype(np.float64) * slope + intercept

    kv = ds.get("KVP")
    thickness = ds.get("SliceThickness")
    if kv is None or thickness is None:
        log.debug("slice lacks KVP or SliceThickness; recording 0")
    spacing = ds.get("PixelSpacing")
    return CTSlice(
        pixels=hu,
        kv=int(float(kv)) if kv not in (None, "") else 0,
        thickness_mm=float(thickness) if thickness not in (None, "") else 0.0,
        slice_index=int(ds.get("InstanceNumber", 0) or 0),
        series_id=str(ds.get("SeriesInstanceUID", "")),
        pixel_spacing=(float(spacing[0]), float(spacing[1])) if spacing else None,
    )


def read_dicom_file(path: str | Path) -> CTSlice:
    return parse_dicom_slice(Path(path).read_bytes())
