"""Directory-level loading and saving of slices."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError
from .dicom import read_dicom_file
from .slices import CTSlice
from .tensorio import read_tensor, write_tensor

TENSOR_SUFFIX = ".ltn"
DICOM_SUFFIXES = (".dcm", ".dicom", ".ima")


def is_slice_file(path: Path) -> bool:
    return path.is_file() and path.suffix.lower() in (TENSOR_SUFFIX, *DICOM_SUFFIXES)


def read_slice(path: str | os.PathLike, slice_index: int = 0, series_id: str | None = None) -> CTSlice:
    """Read a HU slice from a DICOM file or a 2D tensor container."""
    path = Path(path)
    if path.suffix.lower() == TENSOR_SUFFIX:
        arr = read_tensor(path)
        if arr.ndim != 2:
            raise DataError(f"{path}: expected a 2D tensor, got shape {arr.shape}")
        return CTSlice(arr, slice_index=slice_index, series_id=series_id or path.parent.name)
    return read_dicom_file(path)


def list_slice_files(directory: str | os.PathLike) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"{d} is not a directory")
    return sorted(p for p in d.iterdir() if is_slice_file(p))


def load_slices(directory: str | os.PathLike) -> list[CTSlice]:
    """All slices in ``directory``, sorted by (series, instance number, filename)."""
    files = list_slice_files(directory)
    slices = [read_slice(p, slice_index=i) for i, p in enumerate(files)]
    order = sorted(range(len(slices)), key=lambda i: (slices[i].series_id, slices[i].slice_index, files[i].name))
    return [slices[i] for i in order]


def save_slice(slice_or_array, path: str | os.PathLike) -> Path:
    arr = slice_or_array.pixels if isinstance(slice_or_array, CTSlice) else slice_or_array
    return write_tensor(np.asarray(arr, dtype=np.float32), path)


def save_png(display: np.ndarray, path: str | os.PathLike, y_min: float = 0.0, y_max: float = 255.0) -> Path:
    """8-bit grayscale PNG of a display-range image."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scaled = (np.asarray(display, dtype=np.float64) - y_min) / (y_max - y_min) * 255.0
    Image.fromarray(np.clip(np.rint(scaled), 0, 255).astype(np.uint8), mode="L").save(path)
    return path
