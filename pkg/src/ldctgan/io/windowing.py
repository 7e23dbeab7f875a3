"""Display windowing (level/width) and the affine map into model range."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateRange, InvalidSpec
from .slices import CTSlice

PAPER_W_PLUS_1 = "paper_w_plus_1"
DICOM_W_MINUS_1 = "dicom_w_minus_1"


@dataclass(frozen=True)
class WindowSpec:
    """Window level ``level_c`` and width ``width_w`` in HU, mapped onto [y_min, y_max].

    ``divisor_mode`` selects the slope of the linear part: ``w + 1`` (default)
    or the DICOM VOI LUT ``w - 1``.
    """

    level_c: float = 40.0
    width_w: float = 300.0
    y_min: float = 0.0
    y_max: float = 255.0
    divisor_mode: str = PAPER_W_PLUS_1

    def __post_init__(self):
        if not self.width_w > 0:
            raise InvalidSpec(f"window width must be > 0, got {self.width_w}")
        if not self.y_max > self.y_min:
            raise InvalidSpec(f"y_max must exceed y_min, got [{self.y_min}, {self.y_max}]")
        if self.divisor_mode not in (PAPER_W_PLUS_1, DICOM_W_MINUS_1):
            raise InvalidSpec(f"unknown divisor_mode {self.divisor_mode!r}")
        if self.divisor_mode == DICOM_W_MINUS_1 and not self.width_w > 1:
            raise InvalidSpec("dicom_w_minus_1 mode needs width_w > 1")

    @property
    def divisor(self) -> float:
        return self.width_w + 1 if self.divisor_mode == PAPER_W_PLUS_1 else self.width_w - 1

    @property
    def lower_threshold(self) -> float:
        """Inputs at or below this value map to ``y_min``."""
        return self.level_c - 0.5 - (self.width_w - 1) / 2

    @property
    def upper_threshold(self) -> float:
        """Inputs strictly above this value map to ``y_max``."""
        return self.level_c - 0.5 + (self.width_w - 1) / 2


def apply_window(image, spec: WindowSpec) -> np.ndarray:
    """Piecewise-linear window transform, elementwise, returned as float64."""
    x = np.asarray(image.pixels if isinstance(image, CTSlice) else image, dtype=np.float64)
    span = spec.y_max - spec.y_min
    mid = ((x - (spec.level_c - 0.5)) / spec.divisor + 0.5) * span + spec.y_min
    y = np.where(x <= spec.lower_threshold, spec.y_min, np.where(x > spec.upper_threshold, spec.y_max, mid))
    return np.clip(y, spec.y_min, spec.y_max)


def invert_window(display, spec: WindowSpec) -> np.ndarray:
    """Inverse of the linear branch; exact for inputs that were inside the window."""
    y = np.asarray(display, dtype=np.float64)
    frac = (y - spec.y_min) / (spec.y_max - spec.y_min)
    return (frac - 0.5) * spec.divisor + spec.level_c - 0.5


def normalize_for_model(display, y_min: float, y_max: float) -> np.ndarray:
    if y_max == y_min:
        raise DegenerateRange("y_max equals y_min")
    d = np.asarray(display, dtype=np.float64)
    return 2.0 * (d - y_min) / (y_max - y_min) - 1.0


def denormalize(model_values, y_min: float, y_max: float) -> np.ndarray:
    if y_max == y_min:
        raise DegenerateRange("y_max equals y_min")
    v = np.asarray(model_values, dtype=np.float64)
    return (v + 1.0) * (y_max - y_min) / 2.0 + y_min


# raw-HU alternative to windowing: clip to the 12-bit CT range before normalizing
HU_RANGE = (-1024.0, 3071.0)


def to_model_range(pixels, window: WindowSpec | None) -> np.ndarray:
    """HU pixels -> [-1, 1], windowed first unless ``window`` is None."""
    if window is None:
        lo, hi = HU_RANGE
        return normalize_for_model(np.clip(pixels, lo, hi), lo, hi)
    return normalize_for_model(apply_window(pixels, window), window.y_min, window.y_max)


def from_model_range(values, window: WindowSpec | None) -> np.ndarray:
    """[-1, 1] -> HU, inverting :func:`to_model_range` inside the window."""
    if window is None:
        return denormalize(values, *HU_RANGE)
    return invert_window(denormalize(values, window.y_min, window.y_max), window)
