"""Composite generator objective and the critic objective.

The generator minimises::

    total = lambda_adv * adversarial + lambda_cyc * cycle + lambda_perc * perceptual

with least-squares adversarial terms by default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import torch
import torch.nn.functional as F

from .errors import InvalidSpec, ShapeMismatch
from .features import DEFAULT_TAP, FeatureExtractor

ADV_MODES = ("lsgan", "log")


@dataclass(frozen=True)
class LossWeights:
    lambda_adv: float = 1.0
    lambda_cyc: float = 10.0
    lambda_perc: float = 1.0

    def __post_init__(self):
        if min(self.lambda_adv, self.lambda_cyc, self.lambda_perc) < 0:
            raise InvalidSpec("loss weights must be non-negative")


@dataclass(frozen=True)
class PerceptualConfig:
    layer_set_S: tuple[str, ...] = (DEFAULT_TAP,)
    weights_omega: tuple[float, ...] = (1.0,)
    extractor_id: str = "toy"
    # "cycle": input vs its cycle reconstruction; "cycle+translation" also input vs its translation
    pairing: str = "cycle"

    def __post_init__(self):
        object.__setattr__(self, "layer_set_S", tuple(str(t) for t in self.layer_set_S))
        object.__setattr__(self, "weights_omega", tuple(float(w) for w in self.weights_omega))
        if len(self.layer_set_S) != len(self.weights_omega):
            raise InvalidSpec("layer_set_S and weights_omega must have equal length")
        if any(w < 0 for w in self.weights_omega):
            raise InvalidSpec("weights_omega must be non-negative")
        if self.pairing not in ("cycle", "cycle+translation"):
            raise InvalidSpec(f"unknown perceptual pairing {self.pairing!r}")


class LossParts(NamedTuple):
    adv: torch.Tensor | float
    cyc: torch.Tensor | float
    perc: torch.Tensor | float


def adversarial_gen_loss(scores_fake_Y: torch.Tensor, scores_fake_X: torch.Tensor, mode: str = "lsgan") -> torch.Tensor:
    """Average over the two critics of the per-map mean generator loss."""
    if mode == "lsgan":
        terms = [((s - 1.0) ** 2).mean() for s in (scores_fake_Y, scores_fake_X)]
    elif mode == "log":
        terms = [F.softplus(-s).mean() for s in (scores_fake_Y, scores_fake_X)]
    else:
        raise InvalidSpec(f"unknown adversarial mode {mode!r}")
    return 0.5 * (terms[0] + terms[1])


def adversarial_disc_loss(scores_real: torch.Tensor, scores_fake: torch.Tensor, mode: str = "lsgan") -> torch.Tensor:
    if mode == "lsgan":
        return 0.5 * (((scores_real - 1.0) ** 2).mean() + (scores_fake**2).mean())
    if mode == "log":
        return 0.5 * (F.softplus(-scores_real).mean() + F.softplus(scores_fake).mean())
    raise InvalidSpec(f"unknown adversarial mode {mode!r}")


def cycle_loss(x: torch.Tensor, F_of_G_x: torch.Tensor, y: torch.Tensor, G_of_F_y: torch.Tensor) -> torch.Tensor:
    if x.shape != F_of_G_x.shape or y.shape != G_of_F_y.shape:
        raise ShapeMismatch(
            f"cycle pairs differ in shape: {tuple(x.shape)} vs {tuple(F_of_G_x.shape)}, "
            f"{tuple(y.shape)} vs {tuple(G_of_F_y.shape)}"
        )
    return (F_of_G_x - x).abs().mean() + (G_of_F_y - y).abs().mean()


def perceptual_loss(a: torch.Tensor, b: torch.Tensor, config: PerceptualConfig, extractor: FeatureExtractor) -> torch.Tensor:
    """Sum over taps of omega * mean squared feature difference."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"perceptual inputs differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}")
    taps = config.layer_set_S
    fa = extractor.features(a, taps)
    fb = extractor.features(b, taps)
    total = a.new_zeros(())
    for w, u, v in zip(config.weights_omega, fa, fb):
        total = total + w * ((u - v) ** 2).mean()
    return total


def total_loss(parts: Sequence, weights: LossWeights):
    adv, cyc, perc = parts
    return weights.lambda_adv * adv + weights.lambda_cyc * cyc + weights.lambda_perc * perc
