"""Generator and patch discriminator built from declarative specs."""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ShapeMismatch
from .attention import AttentionGate
from .layers import ConvUnit, ResBlock, init_parameters
from .specs import (
    DiscriminatorSpec,
    GeneratorSpec,
    receptive_field,
    spec_hash,
    validate_discriminator_spec,
    validate_generator_spec,
)

INIT_STD = 0.02


class Generator(nn.Module):
    """Image-to-image mapping with tanh output in (-1, 1).

    Planar generators take (B, 1, H, W). Slab generators take (B, 3, H, W),
    three adjacent slices ordered above/center/below, and return the center
    plane as (B, 1, H, W).
    """

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        validate_generator_spec(spec)
        self.spec = spec
        slab = spec.input_slices == 3
        self.slab = slab

        self.encoder = nn.ModuleList()
        ch = 1
        enc_channels = []
        for layer in spec.encoder:
            self.encoder.append(ConvUnit(ch, layer, slab))
            ch = layer.out_channels
            enc_channels.append(ch)

        self.res = nn.Sequential(*[ResBlock(ch, slab) for _ in range(spec.res_blocks)])

        self.gates = nn.ModuleDict()
        self.decoder = nn.ModuleList()
        depth = len(spec.encoder)
        for j, layer in enumerate(spec.decoder):
            peer = depth - 1 - j
            in_ch = ch
            if peer in spec.attention_levels:
                self.gates[str(peer)] = AttentionGate(enc_channels[peer], ch, slab=slab)
                in_ch += enc_channels[peer]
            self.decoder.append(ConvUnit(in_ch, layer, slab))
            ch = layer.out_channels

    @property
    def dimensionality(self) -> str:
        return self.spec.dimensionality

    @property
    def spec_hash(self) -> str:
        return spec_hash(self.spec)

    def _check_input(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(0)
        if x.dim() != 4:
            raise ShapeMismatch(f"expected (B, C, H, W) input, got {tuple(x.shape)}")
        if x.shape[1] != self.spec.input_slices:
            raise ShapeMismatch(f"expected {self.spec.input_slices} input slice(s), got {x.shape[1]}")
        f = self.spec.downsampling
        if x.shape[-1] % f or x.shape[-2] % f:
            raise ShapeMismatch(f"spatial dims {tuple(x.shape[-2:])} not divisible by {f}")
        return x.unsqueeze(1) if self.slab else x

    def forward(self, x: torch.Tensor, all_planes: bool = False) -> torch.Tensor:
        """``all_planes`` returns every slab plane as (B, 3, H, W) instead of the center."""
        h = self._check_input(x)
        skips = []
        for unit in self.encoder:
            h = unit(h)
            skips.append(h)
        h = self.res(h)
        depth = len(self.encoder)
        for j, unit in enumerate(self.decoder):
            key = str(depth - 1 - j)
            if key in self.gates:
                skip = skips[depth - 1 - j]
                h = torch.cat([self.gates[key](skip, h), h], dim=1)
            h = unit(h)
        if not self.slab:
            return h
        return h[:, 0] if all_planes else h[:, :, 1]


class Discriminator(nn.Module):
    """Fully convolutional patch critic; each score depends on one 70x70 input window."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        validate_discriminator_spec(spec)
        self.spec = spec
        self.layers = nn.ModuleList()
        ch = spec.in_channels
        for layer in spec.layers:
            self.layers.append(ConvUnit(ch, layer))
            ch = layer.out_channels
        self.receptive_field = receptive_field(spec.layers)

    @property
    def dimensionality(self) -> str:
        return "conv2d"

    @property
    def spec_hash(self) -> str:
        return spec_hash(self.spec)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(0)
        if x.dim() != 4 or x.shape[1] != self.spec.in_channels:
            raise ShapeMismatch(f"expected (B, {self.spec.in_channels}, H, W), got {tuple(x.shape)}")
        if min(x.shape[-2:]) < self.receptive_field:
            raise ShapeMismatch(f"input {tuple(x.shape[-2:])} smaller than the {self.receptive_field}px receptive field")
        for unit in self.layers:
            x = unit(x)
        return x


def build_generator(spec: GeneratorSpec, init_seed: int = 0) -> Generator:
    g = Generator(spec)
    init_parameters(g, init_seed, INIT_STD)
    return g


def build_discriminator(spec: DiscriminatorSpec, init_seed: int = 0) -> Discriminator:
    d = Discriminator(spec)
    init_parameters(d, init_seed, INIT_STD)
    return d


def generator_forward(model: Generator, x: torch.Tensor) -> torch.Tensor:
    return model(x)


def discriminator_forward(model: Discriminator, x: torch.Tensor) -> torch.Tensor:
    return model(x)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
