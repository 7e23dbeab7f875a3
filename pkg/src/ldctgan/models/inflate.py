"""Planar -> slab (2.5D) weight inflation."""

from __future__ import annotations

import torch

from ..errors import AlreadyInflated
from .networks import Generator
from .specs import as_2p5d


def inflate_kernel(w: torch.Tensor) -> torch.Tensor:
    """(O, I, k, k) -> (O, I, 3, k, k) with the kernel in the middle plane and zeros around it."""
    out = torch.zeros(w.shape[:2] + (3,) + w.shape[2:], dtype=w.dtype, device=w.device)
    out[:, :, 1] = w
    return out


def inflate_2d_to_3d(model: Generator) -> Generator:
    """New slab generator whose outputs match ``model`` on the center slice exactly."""
    if model.dimensionality == "conv3d":
        raise AlreadyInflated("generator is already a slab model")
    slab = Generator(as_2p5d(model.spec))
    source = model.state_dict()
    target = slab.state_dict()
    with torch.no_grad():
        for name, value in target.items():
            src = source[name]
            if value.dim() == src.dim() + 1:
                value.copy_(inflate_kernel(src))
            else:
                value.copy_(src)
    return slab
