"""CT slice containers, domain datasets and 3-slice slabs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from ..errors import EmptyDataset, IndexOutOfRange, InvalidSpec


@dataclass
class CTSlice:
    """One axial slice in Hounsfield units plus acquisition metadata."""

    pixels: np.ndarray
    kv: int = 0
    thickness_mm: float = 0.0
    slice_index: int = 0
    series_id: str = ""
    pixel_spacing: tuple[float, float] | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or min(self.pixels.shape) <= 0:
            raise InvalidSpec(f"CT slice must be a non-empty 2D array, got shape {self.pixels.shape}")
        if not np.all(np.isfinite(self.pixels)):
            raise InvalidSpec("CT slice contains non-finite pixels")

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]


@dataclass
class Slab3:
    """Center slice with its two through-plane neighbours (edge-replicated at volume ends)."""

    center: CTSlice
    above: CTSlice
    below: CTSlice

    @property
    def pixels(self) -> np.ndarray:
        """Stacked (3, rows, cols) array ordered above, center, below."""
        return np.stack([self.above.pixels, self.center.pixels, self.below.pixels])


def stack_neighbors(volume: Sequence[CTSlice], index: int) -> Slab3:
    """Build the slab centred on ``volume[index]``.

    Neighbours come from adjacent list positions of the same series; a
    missing neighbour (volume end or series change) is replaced by the centre.
    """
    n = len(volume)
    if not 0 <= index < n:
        raise IndexOutOfRange(f"slice index {index} outside volume of {n} slices")
    center = volume[index]

    def neighbour(j: int) -> CTSlice:
        if 0 <= j < n and volume[j].series_id == center.series_id:
            return volume[j]
        return center

    return Slab3(center=center, above=neighbour(index - 1), below=neighbour(index + 1))


def volume_slabs(volume: Sequence[CTSlice]) -> list[Slab3]:
    return [stack_neighbors(volume, i) for i in range(len(volume))]


Item = Union[CTSlice, Slab3]


@dataclass
class DomainDataset:
    """Unordered sample pool for one image domain.

    Sampling is uniform over ``slices`` and fully determined by ``sampling_seed``.
    """

    domain_tag: str
    slices: list[Item]
    sampling_seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.domain_tag not in ("LDCT", "NDCT"):
            raise InvalidSpec(f"domain_tag must be LDCT or NDCT, got {self.domain_tag!r}")
        self.slices = list(self.slices)
        self.reset()

    def reset(self, seed: int | None = None) -> None:
        if seed is not None:
            self.sampling_seed = seed
        self._rng = np.random.default_rng(self.sampling_seed)

    def __len__(self) -> int:
        return len(self.slices)

    def __getitem__(self, i: int) -> Item:
        return self.slices[i]

    def draw(self, n: int, rng: np.random.Generator | None = None) -> list[Item]:
        if not self.slices:
            raise EmptyDataset(f"{self.domain_tag} dataset is empty")
        idx = (self._rng if rng is None else rng).integers(0, len(self.slices), size=n)
        return [self.slices[i] for i in idx]

    def __iter__(self) -> Iterator[Item]:
        """One pass of ``len(self)`` uniform draws (with replacement)."""
        for item in self.draw(len(self.slices)):
            yield item
