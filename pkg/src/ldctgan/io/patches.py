"""Training-array preparation: windowing, normalisation and aligned random crops."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .slices import CTSlice, Item, Slab3
from .windowing import WindowSpec, to_model_range


def item_to_model_array(item: Item, window: WindowSpec | None) -> np.ndarray:
    """(C, H, W) float32 array in [-1, 1]; C is 1 for a slice, 3 for a slab."""
    pixels = item.pixels[None] if isinstance(item, CTSlice) else item.pixels
    return to_model_range(pixels, window).astype(np.float32)


def random_crop(arr: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Crop the trailing two axes to ``size``; all leading planes share the window."""
    h, w = arr.shape[-2:]
    if size >= h and size >= w:
        return arr
    ch, cw = min(size, h), min(size, w)
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    return arr[..., top : top + ch, left : left + cw]


def make_batch(items: Sequence[Item], window: WindowSpec | None, patch_size: int, rng: np.random.Generator) -> np.ndarray:
    return np.stack([random_crop(item_to_model_array(it, window), patch_size, rng) for it in items])


def is_slab(item: Item) -> bool:
    return isinstance(item, Slab3)
