"""Image-quality metrics: PSNR, SSIM, perceptual distance, ROI SNR and CNR."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from scipy.ndimage import correlate1d

from .errors import EmptyDataset, ImageTooSmall, OverlappingROIs, ShapeMismatch, ZeroVariance
from .features import FeatureExtractor, make_extractor
from .io.windowing import WindowSpec, apply_window, normalize_for_model
from .losses import PerceptualConfig, perceptual_loss

PSNR_CAP_DB = 99.0


def _pair(reference, test) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"reference {a.shape} and test {b.shape} differ")
    return a, b


def psnr(reference, test, max_value: float = 255.0, cap: float = PSNR_CAP_DB) -> float:
    a, b = _pair(reference, test)
    if not max_value > 0:
        raise ValueError("max_value must be > 0")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * math.log10(max_value**2 / mse))


@dataclass(frozen=True)
class SSIMParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    max_value: float = 255.0


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    out = correlate1d(correlate1d(img, g, axis=0, mode="reflect"), g, axis=1, mode="reflect")
    h = len(g) // 2
    return out[h : img.shape[0] - h, h : img.shape[1] - h]


def ssim_map(reference, test, params: SSIMParams = SSIMParams()) -> np.ndarray:
    a, b = _pair(reference, test)
    if a.ndim != 2:
        raise ShapeMismatch("SSIM expects single-channel 2D images")
    if min(a.shape) < params.window:
        raise ImageTooSmall(f"image {a.shape} smaller than the {params.window}px SSIM window")
    g = gaussian_window(params.window, params.sigma)
    c1 = (params.k1 * params.max_value) ** 2
    c2 = (params.k2 * params.max_value) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(reference, test, params: SSIMParams = SSIMParams()) -> float:
    return float(np.mean(ssim_map(reference, test, params)))


def perceptual_metric(reference, test, config: PerceptualConfig, extractor: FeatureExtractor) -> float:
    """Perceptual distance with exactly the training loss computation (no gradients)."""

    def to_tensor(v):
        t = v if isinstance(v, torch.Tensor) else torch.as_tensor(np.asarray(v, dtype=np.float32))
        while t.dim() < 4:
            t = t.unsqueeze(0)
        return t

    with torch.no_grad():
        return float(perceptual_loss(to_tensor(reference), to_tensor(test), config, extractor))


@dataclass(frozen=True)
class ROISpec:
    center_row: int
    center_col: int
    radius_px: int
    label: str = ""

    def mask(self, shape: tuple[int, int]) -> np.ndarray:
        rows, cols = shape
        if (
            self.radius_px < 0
            or self.center_row - self.radius_px < 0
            or self.center_col - self.radius_px < 0
            or self.center_row + self.radius_px >= rows
            or self.center_col + self.radius_px >= cols
        ):
            raise ShapeMismatch(f"ROI {self} not inside image of shape {shape}")
        rr, cc = np.ogrid[:rows, :cols]
        return (rr - self.center_row) ** 2 + (cc - self.center_col) ** 2 <= self.radius_px**2


def roi_mask(roi, shape: tuple[int, int]) -> np.ndarray:
    """Boolean mask for a :class:`ROISpec` or an explicit boolean array of ``shape``."""
    if isinstance(roi, ROISpec):
        return roi.mask(shape)
    m = np.asarray(roi, dtype=bool)
    if m.shape != tuple(shape):
        raise ShapeMismatch(f"ROI mask shape {m.shape} differs from image shape {tuple(shape)}")
    if not m.any():
        raise ShapeMismatch("ROI mask selects no pixels")
    return m


def _roi_stats(image: np.ndarray, roi) -> tuple[float, float]:
    vals = image[roi_mask(roi, image.shape)]
    return float(vals.mean()), float(vals.std())


def snr(image, roi) -> float:
    """ROI mean over ROI population std. ``roi`` is a ROISpec or a boolean mask."""
    mean, std = _roi_stats(np.asarray(image, dtype=np.float64), roi)
    if std == 0.0:
        raise ZeroVariance(f"ROI {getattr(roi, 'label', '') or 'mask'} is constant")
    return mean / std


def cnr(image, roi_signal, roi_background) -> float:
    """|mean(signal) - mean(background)| over background std."""
    img = np.asarray(image, dtype=np.float64)
    if np.any(roi_mask(roi_signal, img.shape) & roi_mask(roi_background, img.shape)):
        raise OverlappingROIs("signal and background ROIs overlap")
    ms, _ = _roi_stats(img, roi_signal)
    mb, sb = _roi_stats(img, roi_background)
    if sb == 0.0:
        raise ZeroVariance("background ROI is constant")
    return abs(ms - mb) / sb


# report ---------------------------------------------------------------------

METRIC_COLUMNS = ("psnr_db", "ssim", "pl", "snr", "cnr")


@dataclass
class EvalItem:
    """One (reference, test) pair in HU; ROIs enable the SNR/CNR columns."""

    image_id: str
    reference: np.ndarray
    test: np.ndarray
    method: str = "test"
    roi_signal: ROISpec | None = None
    roi_background: ROISpec | None = None


@dataclass
class EvalConfig:
    window: WindowSpec = field(default_factory=WindowSpec)
    ssim: SSIMParams = field(default_factory=SSIMParams)
    perceptual: PerceptualConfig = field(default_factory=PerceptualConfig)
    roi_units: str = "display"  # or "hu"
    extractor: FeatureExtractor | None = None

    def get_extractor(self) -> FeatureExtractor:
        if self.extractor is None:
            self.extractor = make_extractor(self.perceptual.extractor_id)
        return self.extractor


@dataclass
class MetricsReport:
    rows: list[dict]
    window: dict
    rois: dict
    cnr_definition: str = "|mean(signal) - mean(background)| / std(background)"

    def methods(self) -> list[str]:
        seen: list[str] = []
        for r in self.rows:
            if r["method"] not in seen:
                seen.append(r["method"])
        return seen

    def aggregates(self) -> dict[str, dict[str, dict[str, float]]]:
        out = {}
        for m in self.methods():
            rows = [r for r in self.rows if r["method"] == m]
            out[m] = {}
            for col in METRIC_COLUMNS:
                vals = [r[col] for r in rows if r.get(col) is not None]
                if vals:
                    out[m][col] = {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "n": len(vals)}
        return out

    def to_text(self) -> str:
        agg = self.aggregates()
        header = f"{'Method':<20}" + "".join(f"{c.upper():>16}" for c in METRIC_COLUMNS)
        lines = [header, "-" * len(header)]
        for m, cols in agg.items():
            cells = []
            for c in METRIC_COLUMNS:
                cells.append(f"{cols[c]['mean']:>9.4f}±{cols[c]['std']:<6.3f}" if c in cols else f"{'-':>16}")
            lines.append(f"{m:<20}" + "".join(cells))
        lines.append("")
        lines.append(f"window: level {self.window['level_c']} width {self.window['width_w']} "
                     f"range [{self.window['y_min']}, {self.window['y_max']}] ({self.window['divisor_mode']})")
        lines.append(f"CNR = {self.cnr_definition}")
        return "\n".join(lines) + "\n"

    def write(self, directory: str | os.PathLike, stem: str = "metrics") -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"text": d / f"{stem}.txt", "rows": d / f"{stem}_rows.jsonl", "summary": d / f"{stem}_summary.json"}
        paths["text"].write_text(self.to_text())
        with paths["rows"].open("w") as fh:
            for r in self.rows:
                fh.write(json.dumps(r) + "\n")
        paths["summary"].write_text(json.dumps(
            {"aggregates": self.aggregates(), "window": self.window, "rois": self.rois,
             "cnr_definition": self.cnr_definition}, indent=2))
        return paths


def evaluate_report(items: Sequence[EvalItem], config: EvalConfig | None = None) -> MetricsReport:
    """Window every pair identically, then compute all applicable metrics per row."""
    config = config or EvalConfig()
    if not items:
        raise EmptyDataset("nothing to evaluate")
    win = config.window
    ssim_params = SSIMParams(**{**asdict(config.ssim), "max_value": win.y_max - win.y_min})
    extractor = config.get_extractor()
    rows, rois = [], {}
    for it in sorted(items, key=lambda i: (i.method, i.image_id)):
        ref_d = apply_window(it.reference, win)
        test_d = apply_window(it.test, win)
        row = {
            "image_id": it.image_id,
            "method": it.method,
            "psnr_db": psnr(ref_d - win.y_min, test_d - win.y_min, max_value=win.y_max - win.y_min),
            "ssim": ssim(ref_d, test_d, ssim_params),
            "pl": perceptual_metric(
                normalize_for_model(ref_d, win.y_min, win.y_max),
                normalize_for_model(test_d, win.y_min, win.y_max),
                config.perceptual, extractor,
            ),
            "snr": None,
            "cnr": None,
        }
        if it.roi_signal is not None:
            roi_img = test_d if config.roi_units == "display" else np.asarray(it.test, dtype=np.float64)
            row["snr"] = snr(roi_img, it.roi_signal)
            if it.roi_background is not None:
                row["cnr"] = cnr(roi_img, it.roi_signal, it.roi_background)
            rois[it.image_id] = {
                "signal": asdict(it.roi_signal),
                "background": asdict(it.roi_background) if it.roi_background else None,
            }
        rows.append(row)
    return MetricsReport(rows=rows, window=asdict(win), rois=rois)
