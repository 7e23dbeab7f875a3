"""Synthetic low-contrast phantoms with Poisson + Gaussian low-dose noise.

The clean (NDCT) image is a uniform background carrying one low-contrast
disc. Contrast is a percentage of the background's attenuation relative to
air, i.e. of ``background_hu + HU_OFFSET``: 1% on a 40 HU background gives a
disc about 10.6 HU brighter, as in a Catphan supra-slice module.

Low-dose noise is drawn in offset-HU space, ``s = hu + HU_OFFSET >= 0``::

    s_noisy = Poisson(s * photon_scale) / photon_scale + Normal(0, noise_sigma_hu)

so the noise variance at a pixel is ``s / photon_scale + noise_sigma_hu**2``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import InvalidSpec
from .slices import CTSlice

HU_OFFSET = 1024.0


@dataclass(frozen=True)
class PhantomSpec:
    size_px: int = 64
    disc_contrast_pct: float = 1.0
    disc_diameter_px: int = 16
    noise_sigma_hu: float = 25.0
    photon_scale: float = 0.5
    seed: int = 0
    background_hu: float = 40.0
    disc_offset_px: tuple[int, int] = (0, 0)
    poisson: bool = True

    def __post_init__(self):
        if self.size_px < 32:
            raise InvalidSpec(f"size_px must be >= 32, got {self.size_px}")
        if not self.disc_contrast_pct > 0:
            raise InvalidSpec("disc_contrast_pct must be > 0")
        if self.noise_sigma_hu < 0:
            raise InvalidSpec("noise_sigma_hu must be >= 0")
        if not self.photon_scale > 0:
            raise InvalidSpec("photon_scale must be > 0")
        if self.disc_diameter_px < 1 or self.disc_diameter_px >= self.size_px:
            raise InvalidSpec("disc_diameter_px must lie in [1, size_px)")
        if self.background_hu + HU_OFFSET < 0:
            raise InvalidSpec("background must be at or above air")

    @property
    def disc_hu(self) -> float:
        return self.background_hu + self.disc_contrast_pct / 100.0 * (self.background_hu + HU_OFFSET)

    @property
    def disc_center(self) -> tuple[float, float]:
        c = (self.size_px - 1) / 2.0
        return c + self.disc_offset_px[0], c + self.disc_offset_px[1]

    def background_noise_std(self) -> float:
        """Analytic std of (ldct - ndct) over the background."""
        poisson_var = (self.background_hu + HU_OFFSET) / self.photon_scale if self.poisson else 0.0
        return math.sqrt(poisson_var + self.noise_sigma_hu**2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["disc_offset_px"] = list(self.disc_offset_px)
        return d


def disc_mask(spec: PhantomSpec) -> np.ndarray:
    rr, cc = np.mgrid[: spec.size_px, : spec.size_px]
    r0, c0 = spec.disc_center
    return (rr - r0) ** 2 + (cc - c0) ** 2 <= (spec.disc_diameter_px / 2.0) ** 2


def clean_image(spec: PhantomSpec) -> np.ndarray:
    img = np.full((spec.size_px, spec.size_px), spec.background_hu, dtype=np.float64)
    img[disc_mask(spec)] = spec.disc_hu
    return img


def add_low_dose_noise(hu: np.ndarray, spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    shifted = np.clip(hu + HU_OFFSET, 0.0, None)
    noise = np.zeros_like(shifted)
    if spec.poisson:
        noise += rng.poisson(shifted * spec.photon_scale) / spec.photon_scale - shifted
    if spec.noise_sigma_hu > 0:
        noise += rng.normal(0.0, spec.noise_sigma_hu, size=hu.shape)
    # added as a perturbation so the noise-free case returns its input bit for bit
    return hu + noise


def make_phantom(spec: PhantomSpec, slice_index: int = 0, series_id: str = "phantom") -> tuple[CTSlice, CTSlice]:
    """Return ``(ndct, ldct)``; deterministic in ``spec`` (including its seed)."""
    rng = np.random.default_rng(spec.seed)
    clean = clean_image(spec)
    noisy = add_low_dose_noise(clean, spec, rng)
    meta = dict(slice_index=slice_index, series_id=series_id, thickness_mm=1.0)
    return CTSlice(clean, kv=120, **meta), CTSlice(noisy, kv=80, **meta)


def varied_spec(spec: PhantomSpec, index: int, jitter: bool = True) -> PhantomSpec:
    """Per-index variant of ``spec``: own noise seed and, with ``jitter``, own geometry."""
    ss = np.random.SeedSequence([spec.seed, index])
    noise_seed = int(ss.generate_state(1)[0])
    if not jitter:
        return replace(spec, seed=noise_seed)
    rng = np.random.default_rng(ss.spawn(1)[0])
    radius = spec.disc_diameter_px / 2.0
    diameter = max(2, int(round(spec.disc_diameter_px * rng.uniform(0.75, 1.25))))
    margin = spec.size_px / 2.0 - radius * 1.25 - 6
    limit = max(0, int(margin))
    offset = tuple(int(v) for v in rng.integers(-limit, limit + 1, size=2))
    background = spec.background_hu + float(rng.uniform(-20.0, 20.0))
    return replace(spec, seed=noise_seed, disc_diameter_px=diameter, disc_offset_px=offset, background_hu=background)


def phantom_series(spec: PhantomSpec, count: int, start: int = 0, jitter: bool = True):
    """``count`` independent (ndct, ldct, variant_spec) triples for indices start..start+count-1."""
    out = []
    for i in range(start, start + count):
        v = varied_spec(spec, i, jitter)
        ndct, ldct = make_phantom(v, slice_index=i, series_id=f"phantom-{spec.seed}")
        out.append((ndct, ldct, v))
    return out


def phantom_volume(spec: PhantomSpec, n_slices: int, series: int = 0) -> tuple[list[CTSlice], list[CTSlice]]:
    """A stack whose disc is a sphere cross-section, so adjacent slices are correlated."""
    base = varied_spec(spec, 10_000 + series)
    ndct, ldct = [], []
    half = (n_slices - 1) / 2.0
    for z in range(n_slices):
        frac = 1.0 - ((z - half) / (half + 1.0)) ** 2
        diameter = max(2, int(round(base.disc_diameter_px * math.sqrt(max(frac, 0.05)))))
        v = replace(base, disc_diameter_px=diameter, seed=varied_spec(base, z, jitter=False).seed)
        clean, noisy = make_phantom(v, slice_index=z, series_id=f"volume-{series}")
        ndct.append(clean)
        ldct.append(noisy)
    return ndct, ldct


def phantom_rois(spec: PhantomSpec) -> dict:
    """Disc ROI inside the disc and a same-size background ROI in the farthest corner."""
    r0, c0 = spec.disc_center
    radius = max(1, int(spec.disc_diameter_px * 0.35))
    n = spec.size_px
    corner_r = radius + 3 if r0 > n / 2 else n - radius - 4
    corner_c = radius + 3 if c0 > n / 2 else n - radius - 4
    return {
        "signal": {"center_row": int(round(r0)), "center_col": int(round(c0)), "radius_px": radius, "label": "disc"},
        "background": {"center_row": int(corner_r), "center_col": int(corner_c), "radius_px": radius, "label": "background"},
    }
