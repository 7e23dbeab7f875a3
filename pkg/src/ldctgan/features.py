"""Frozen feature extractors for the perceptual term.

Both extractors share the layer layout of the first 16 modules of VGG-19's
``features`` stack (conv/relu pairs with two max-pools). A tap identifier
``"n"`` is the activation after the first ``n`` modules; ``"0"`` is the input
itself. The VGG-19 adapter loads pretrained weights from a local state-dict
file; the toy extractor draws fixed weights from a seed so tests need no
downloads.
"""

from __future__ import annotations

import os
from typing import Sequence

import torch
import torch.nn as nn

from .errors import ConfigError

# channel plan of VGG-19 features[:16]; "M" is a 2x2 max-pool
VGG19_PLAN = (64, 64, "M", 128, 128, "M", 256, 256, 256, 256)
TOY_PLAN = (8, 8, "M", 16, 16, "M", 32, 32, 32, 32)
DEFAULT_TAP = "16"

# ImageNet statistics for the pretrained adapter
_MEAN = (0.485, 0.456, 0.406)
_STD = (0.229, 0.224, 0.225)


def _vgg_layers(plan, in_channels: int, n_modules: int = 16) -> nn.Sequential:
    mods: list[nn.Module] = []
    ch = in_channels
    for item in plan:
        if item == "M":
            mods.append(nn.MaxPool2d(2, 2))
        else:
            mods += [nn.Conv2d(ch, item, 3, padding=1), nn.ReLU(inplace=False)]
            ch = item
    return nn.Sequential(*mods[:n_modules])


class FeatureExtractor(nn.Module):
    """Sequential frozen network returning activations at requested taps."""

    in_channels = 3

    def __init__(self, layers: nn.Sequential):
        super().__init__()
        self.layers = layers
        self.freeze()

    def freeze(self) -> None:
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True):
        # frozen: always evaluate in inference mode
        return super().train(False)

    def prepare(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] == 1 and self.in_channels == 3:
            x = x.expand(-1, 3, -1, -1)
        return x

    def features(self, x: torch.Tensor, taps: Sequence[str]) -> list[torch.Tensor]:
        want = {int(t): t for t in taps}
        if any(not 0 <= k <= len(self.layers) for k in want):
            raise ConfigError(f"taps {list(taps)} outside 0..{len(self.layers)}")
        x = self.prepare(x)
        out: dict[str, torch.Tensor] = {}
        if 0 in want:
            out[want[0]] = x
        for i, layer in enumerate(self.layers, start=1):
            if i > max(want):
                break
            x = layer(x)
            if i in want:
                out[want[i]] = x
        return [out[t] for t in taps]

    def forward(self, x, taps: Sequence[str] = (DEFAULT_TAP,)):
        return self.features(x, taps)


class ToyExtractor(FeatureExtractor):
    """VGG-shaped, narrow, seeded random weights; input in [-1, 1]."""

    def __init__(self, seed: int = 1234, in_channels: int = 1):
        self.in_channels = in_channels
        layers = _vgg_layers(TOY_PLAN, in_channels)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for m in layers:
                if isinstance(m, nn.Conv2d):
                    fan_in = m.in_channels * 9
                    m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * (2.0 / fan_in) ** 0.5)
                    m.bias.copy_(torch.randn(m.bias.shape, generator=gen) * 0.01)
        super().__init__(layers)


class VGG19Extractor(FeatureExtractor):
    """VGG-19 ``features[:16]`` with weights from a torchvision-style state dict.

    Inputs in [-1, 1] are mapped to [0, 1] and ImageNet-normalised.
    """

    def __init__(self, weights_path: str | os.PathLike | None = None):
        layers = _vgg_layers(VGG19_PLAN, 3)
        if weights_path is not None:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            state = {k.removeprefix("features."): v for k, v in state.items() if not k.startswith("classifier")}
            layers.load_state_dict({k: v for k, v in state.items() if k.split(".")[0].isdigit() and int(k.split(".")[0]) < 16})
        super().__init__(layers)
        self.register_buffer("mean", torch.tensor(_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_STD).view(1, 3, 1, 1))

    def prepare(self, x):
        x = super().prepare(x)
        return ((x + 1) / 2 - self.mean.to(x.dtype)) / self.std.to(x.dtype)


def make_extractor(extractor_id: str = "toy", **kwargs) -> FeatureExtractor:
    if extractor_id == "toy":
        return ToyExtractor(**kwargs)
    if extractor_id == "vgg19":
        return VGG19Extractor(**kwargs)
    raise ConfigError(f"unknown extractor {extractor_id!r}; choose 'toy' or 'vgg19'")
