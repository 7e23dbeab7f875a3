"""Additive attention gate on U-Net skip connections.

Per spatial location ``i``::

    q_i = psi . relu(W_h h_i + W_l l_i + b_l) + b_psi
    a_i = sigmoid(q_i)
    out_i = a_i * l_i

``l`` is the encoder (skip) feature, ``h`` the decoder feature at the same
resolution. All projections are 1x1 convolutions (1x1x... over a slab when
inflated, where the kernels have a through-plane extent of 3).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ShapeMismatch
from .layers import slab_conv


@dataclass
class AttentionGateParams:
    W_l: torch.Tensor  # (C_int, C_l, [D,] 1, 1)
    W_h: torch.Tensor  # (C_int, C_h, [D,] 1, 1)
    b_l: torch.Tensor  # (C_int,)
    psi: torch.Tensor  # (1, C_int, [D,] 1, 1)
    b_psi: torch.Tensor  # (1,)


def _pointwise(x: torch.Tensor, w: torch.Tensor, b: torch.Tensor | None = None) -> torch.Tensor:
    if w.dim() == 4:
        return F.conv2d(x, w, b)
    return slab_conv(x, w, b)


def attention_coefficients(F_l: torch.Tensor, F_h: torch.Tensor, params: AttentionGateParams) -> torch.Tensor:
    """Gate map ``a`` with a single channel, values in (0, 1)."""
    if F_l.dim() != F_h.dim() or F_l.shape[0] != F_h.shape[0] or F_l.shape[2:] != F_h.shape[2:]:
        raise ShapeMismatch(f"skip {tuple(F_l.shape)} and decoder {tuple(F_h.shape)} features differ spatially")
    if F_l.dim() != params.W_l.dim():
        raise ShapeMismatch(f"{F_l.dim()}D features do not fit {params.W_l.dim()}D gate kernels")
    if F_l.shape[1] != params.W_l.shape[1] or F_h.shape[1] != params.W_h.shape[1]:
        raise ShapeMismatch(
            f"channels ({F_l.shape[1]}, {F_h.shape[1]}) do not match gate ({params.W_l.shape[1]}, {params.W_h.shape[1]})"
        )
    inter = F.relu(_pointwise(F_h, params.W_h) + _pointwise(F_l, params.W_l, params.b_l))
    q = _pointwise(inter, params.psi, params.b_psi)
    return torch.sigmoid(q)


def attention_gate(F_l: torch.Tensor, F_h: torch.Tensor, params: AttentionGateParams) -> torch.Tensor:
    return attention_coefficients(F_l, F_h, params) * F_l


class AttentionGate(nn.Module):
    def __init__(self, skip_channels: int, decoder_channels: int, inter_channels: int | None = None, slab: bool = False):
        super().__init__()
        c_int = inter_channels or max(1, skip_channels // 2)
        tail = (3, 1, 1) if slab else (1, 1)
        self.W_l = nn.Parameter(torch.empty((c_int, skip_channels) + tail))
        self.W_h = nn.Parameter(torch.empty((c_int, decoder_channels) + tail))
        self.b_l = nn.Parameter(torch.zeros(c_int))
        self.psi = nn.Parameter(torch.empty((1, c_int) + tail))
        self.b_psi = nn.Parameter(torch.zeros(1))

    def params(self) -> AttentionGateParams:
        return AttentionGateParams(self.W_l, self.W_h, self.b_l, self.psi, self.b_psi)

    def forward(self, F_l, F_h):
        return attention_gate(F_l, F_h, self.params())
