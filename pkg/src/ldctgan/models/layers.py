"""Convolution units shared by all networks.

Every unit works on planar (B, C, H, W) input or on depth-3 slabs
(B, C, 3, H, W). Slab kernels are (3, k, k); through-plane stride is 1 and the
depth axis is zero-padded, so the slab depth stays 3 through the network.
Normalisation statistics are always per plane, which keeps a slab network
whose kernels have empty neighbour planes identical, plane by plane, to the
planar network it was inflated from.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .specs import ConvLayerSpec

_ACT = {
    "relu": F.relu,
    "leaky_relu_0.2": lambda x: F.leaky_relu(x, 0.2),
    "tanh": torch.tanh,
    "sigmoid": torch.sigmoid,
    "none": lambda x: x,
}


def planes_to_batch(x: torch.Tensor) -> torch.Tensor:
    b, c, d, h, w = x.shape
    return x.transpose(1, 2).reshape(b * d, c, h, w)


def batch_to_planes(x: torch.Tensor, depth: int) -> torch.Tensor:
    bd, c, h, w = x.shape
    return x.reshape(bd // depth, depth, c, h, w).transpose(1, 2)


def slab_conv(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor | None, transpose: bool = False, **kw) -> torch.Tensor:
    """Depth-3 convolution (through-plane stride 1, zero depth padding) as a sum of planar convolutions.

    Equal to ``conv3d`` / ``conv_transpose3d`` with depth padding 1. The center
    tap is evaluated first and with the bias, by the same planar call a 2D
    network makes, so all-zero neighbour taps leave the result bit-identical
    to the planar computation instead of merely close to it.
    """
    depth = x.shape[2]
    conv = F.conv_transpose2d if transpose else F.conv2d
    padded = F.pad(x, (0, 0, 0, 0, 1, 1))
    out = None
    for tap in (1, 0, 2):
        # output plane o reads input plane o + tap - 1 (conv) or o - tap + 1 (transposed)
        start = 2 - tap if transpose else tap
        planes = planes_to_batch(padded[:, :, start : start + depth])
        y = conv(planes, weight[:, :, tap], bias if tap == 1 else None, **kw)
        out = y if out is None else out + y
    return batch_to_planes(out, depth)


class PlaneNorm(nn.Module):
    """Instance or batch norm whose statistics never mix slab planes."""

    def __init__(self, kind: str, channels: int):
        super().__init__()
        self.kind = kind
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        if kind == "batch":
            self.register_buffer("running_mean", torch.zeros(channels))
            self.register_buffer("running_var", torch.ones(channels))

    def _norm2d(self, x):
        if self.kind == "instance":
            return F.instance_norm(x, weight=self.weight, bias=self.bias, eps=1e-5)
        return F.batch_norm(
            x, self.running_mean, self.running_var, self.weight, self.bias,
            training=self.training, momentum=0.1, eps=1e-5,
        )

    def forward(self, x):
        if x.dim() == 5:
            return batch_to_planes(self._norm2d(planes_to_batch(x)), x.shape[2])
        return self._norm2d(x)


class ConvUnit(nn.Module):
    """conv (or transposed conv) -> optional norm -> activation, built from a layer spec."""

    def __init__(self, in_channels: int, spec: ConvLayerSpec, slab: bool = False):
        super().__init__()
        self.spec = spec
        self.slab = slab
        k = spec.kernel
        shape = (in_channels, spec.out_channels) if spec.transpose else (spec.out_channels, in_channels)
        shape = shape + ((3, k, k) if slab else (k, k))
        self.weight = nn.Parameter(torch.empty(shape))
        self.bias = nn.Parameter(torch.zeros(spec.out_channels)) if spec.bias else None
        self.norm = PlaneNorm(spec.norm, spec.out_channels) if spec.norm != "none" else None

    @property
    def in_channels(self) -> int:
        return self.weight.shape[0] if self.spec.transpose else self.weight.shape[1]

    def _conv(self, x):
        s, p = self.spec.stride, self.spec.padding
        reflect = self.spec.pad_mode == "reflect" and p > 0
        if reflect:
            x = F.pad(x, (p, p, p, p) + ((0, 0) if self.slab else ()), mode="reflect")
            p = 0
        if not self.slab:
            if self.spec.transpose:
                return F.conv_transpose2d(x, self.weight, self.bias, stride=s, padding=p, output_padding=s - 1)
            return F.conv2d(x, self.weight, self.bias, stride=s, padding=p)
        if self.spec.transpose:
            return slab_conv(x, self.weight, self.bias, transpose=True, stride=s, padding=p, output_padding=s - 1)
        return slab_conv(x, self.weight, self.bias, stride=s, padding=p)

    def forward(self, x):
        x = self._conv(x)
        if self.norm is not None:
            x = self.norm(x)
        return _ACT[self.spec.activation](x)


class ResBlock(nn.Module):
    def __init__(self, channels: int, slab: bool = False):
        super().__init__()
        self.conv1 = ConvUnit(channels, ConvLayerSpec(channels, 3, 1, 1, "instance", "relu", pad_mode="reflect"), slab)
        self.conv2 = ConvUnit(channels, ConvLayerSpec(channels, 3, 1, 1, "instance", "none", pad_mode="reflect"), slab)

    def forward(self, x):
        return x + self.conv2(self.conv1(x))


def init_parameters(module: nn.Module, seed: int, std: float = 0.02) -> None:
    """Deterministic init: conv kernels ~ N(0, std), norm scales 1, every bias 0."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in module.named_parameters():
            leaf = name.rsplit(".", 1)[-1]
            if isinstance(_owner(module, name), PlaneNorm):
                p.fill_(1.0 if leaf == "weight" else 0.0)
            elif p.dim() >= 2:
                p.copy_(torch.randn(p.shape, generator=gen, dtype=p.dtype) * std)
            else:
                p.zero_()


def _owner(module: nn.Module, name: str) -> nn.Module:
    path = name.rsplit(".", 1)[0] if "." in name else ""
    return module.get_submodule(path) if path else module
