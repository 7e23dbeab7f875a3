"""Declarative layer specifications for generators and patch discriminators."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

from ..errors import InvalidSpec, SpecMismatch

NORMS = ("none", "batch", "instance")
ACTIVATIONS = ("relu", "leaky_relu_0.2", "tanh", "sigmoid", "none")
PAD_MODES = ("zeros", "reflect")


@dataclass(frozen=True)
class ConvLayerSpec:
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0
    norm: str = "none"
    activation: str = "none"
    bias: bool = True
    transpose: bool = False
    pad_mode: str = "zeros"

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.out_channels < 1 or self.padding < 0:
            raise InvalidSpec(f"invalid conv layer {self}")
        if self.norm not in NORMS:
            raise InvalidSpec(f"unknown norm {self.norm!r}")
        if self.activation not in ACTIVATIONS:
            raise InvalidSpec(f"unknown activation {self.activation!r}")
        if self.pad_mode not in PAD_MODES:
            raise InvalidSpec(f"unknown pad_mode {self.pad_mode!r}")
        if self.transpose and self.pad_mode != "zeros":
            raise InvalidSpec("transposed convolutions only support zero padding")


@dataclass(frozen=True)
class GeneratorSpec:
    """Encoder -> residual blocks -> decoder, with attention-gated skips.

    Before decoder layer ``j`` the feature map meets the skip from encoder
    level ``len(encoder) - 1 - j``; that skip exists only if the level is in
    ``attention_levels``. The gated skip is concatenated channel-wise in front
    of the decoder features.
    """

    input_slices: int = 1
    encoder: tuple[ConvLayerSpec, ...] = ()
    res_blocks: int = 9
    decoder: tuple[ConvLayerSpec, ...] = ()
    attention_levels: tuple[int, ...] = (1, 2)

    @property
    def dimensionality(self) -> str:
        return "conv2d" if self.input_slices == 1 else "conv3d"

    @property
    def downsampling(self) -> int:
        f = 1
        for layer in self.encoder:
            f *= layer.stride
        return f

    @property
    def res_channels(self) -> int:
        return self.encoder[-1].out_channels


@dataclass(frozen=True)
class DiscriminatorSpec:
    layers: tuple[ConvLayerSpec, ...] = ()
    in_channels: int = 1


def default_generator_spec(base_channels: int = 64, input_slices: int = 1) -> GeneratorSpec:
    b = base_channels
    enc = (
        ConvLayerSpec(b, 7, 1, 3, "instance", "relu", pad_mode="reflect"),
        ConvLayerSpec(2 * b, 3, 2, 1, "instance", "relu"),
        ConvLayerSpec(4 * b, 3, 2, 1, "instance", "relu"),
    )
    dec = (
        ConvLayerSpec(2 * b, 3, 2, 1, "instance", "relu", transpose=True),
        ConvLayerSpec(b, 3, 2, 1, "instance", "relu", transpose=True),
        ConvLayerSpec(1, 7, 1, 3, "none", "tanh", pad_mode="reflect"),
    )
    return GeneratorSpec(input_slices=input_slices, encoder=enc, res_blocks=9, decoder=dec, attention_levels=(1, 2))


def default_discriminator_spec(base_channels: int = 64) -> DiscriminatorSpec:
    b = base_channels
    lrelu = "leaky_relu_0.2"
    layers = (
        ConvLayerSpec(b, 4, 2, 1, "none", lrelu),
        ConvLayerSpec(b, 1, 1, 0, "batch", lrelu, bias=False),
        ConvLayerSpec(2 * b, 4, 2, 1, "batch", lrelu, bias=False),
        ConvLayerSpec(2 * b, 1, 1, 0, "batch", lrelu, bias=False),
        ConvLayerSpec(4 * b, 4, 2, 1, "batch", lrelu, bias=False),
        ConvLayerSpec(4 * b, 1, 1, 0, "batch", lrelu, bias=False),
        ConvLayerSpec(8 * b, 4, 1, 1, "batch", lrelu, bias=False),
        ConvLayerSpec(1, 4, 1, 1, "none", "none"),
    )
    return DiscriminatorSpec(layers=layers)


def receptive_field(layers) -> int:
    """Input extent seen by one output unit: r <- (r - 1) * stride + kernel, from r = 1."""
    layers = list(layers)
    if not layers:
        raise InvalidSpec("receptive_field needs at least one layer")
    r = 1
    for layer in reversed(layers):
        r = (r - 1) * layer.stride + layer.kernel
    return r


def receptive_window(layers, out_index: int) -> tuple[int, int]:
    """Half-open input interval [start, stop) feeding output position ``out_index`` along one axis.

    Coordinates are in the unpadded input; the interval may extend past the
    image edges, where the unit sees padding.
    """
    jump, offset = 1, 0
    for layer in layers:
        offset += layer.padding * jump
        jump *= layer.stride
    start = out_index * jump - offset
    return start, start + receptive_field(layers)


def output_size(layers, size: int) -> int:
    for layer in layers:
        size = (size + 2 * layer.padding - layer.kernel) // layer.stride + 1
    return size


def validate_generator_spec(spec: GeneratorSpec) -> None:
    if spec.input_slices not in (1, 3):
        raise SpecMismatch(f"input_slices must be 1 or 3, got {spec.input_slices}")
    if spec.res_blocks != 9:
        raise SpecMismatch(f"the generator uses 9 residual blocks, got {spec.res_blocks}")
    if not spec.encoder:
        raise SpecMismatch("encoder is empty")
    if len(spec.decoder) != len(spec.encoder):
        raise SpecMismatch(
            f"decoder has {len(spec.decoder)} levels but encoder has {len(spec.encoder)}; every skip needs a peer"
        )
    if any(layer.transpose for layer in spec.encoder):
        raise SpecMismatch("encoder layers cannot be transposed")
    depth = len(spec.encoder)
    for level in spec.attention_levels:
        if not 0 <= level < depth:
            raise SpecMismatch(f"attention level {level} outside encoder depth {depth}")

    enc_factor = []
    f = 1
    for layer in spec.encoder:
        f *= layer.stride
        enc_factor.append(f)
    for j, layer in enumerate(spec.decoder):
        peer = depth - 1 - j
        if peer in spec.attention_levels and enc_factor[peer] != f:
            raise SpecMismatch(f"skip from encoder level {peer} (scale 1/{enc_factor[peer]}) meets decoder at 1/{f}")
        if layer.transpose:
            if f % layer.stride:
                raise SpecMismatch("decoder upsamples past full resolution")
            f //= layer.stride
        else:
            f *= layer.stride
    if f != 1:
        raise SpecMismatch(f"decoder ends at scale 1/{f}, expected full resolution")
    head = spec.decoder[-1]
    if head.out_channels != 1 or head.activation != "tanh":
        raise SpecMismatch("decoder must end in a single-channel tanh layer")


def validate_discriminator_spec(spec: DiscriminatorSpec) -> None:
    layers = spec.layers
    if len(layers) != 8:
        raise SpecMismatch(f"discriminator has {len(layers)} conv layers, expected 8")
    last = layers[-1]
    if last.out_channels != 1 or last.norm != "none" or last.activation != "none":
        raise SpecMismatch("final discriminator layer must be 1 channel without norm or activation")
    if any(layer.transpose for layer in layers):
        raise SpecMismatch("discriminator layers cannot be transposed")
    rf = receptive_field(layers)
    if rf != 70:
        raise SpecMismatch(f"discriminator receptive field is {rf}, expected 70")


# serialisation -------------------------------------------------------------

def spec_to_dict(spec) -> dict:
    d = asdict(spec)
    d["kind"] = type(spec).__name__
    return d


def spec_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if kind == "GeneratorSpec":
        return GeneratorSpec(
            input_slices=d["input_slices"],
            encoder=tuple(ConvLayerSpec(**x) for x in d["encoder"]),
            res_blocks=d["res_blocks"],
            decoder=tuple(ConvLayerSpec(**x) for x in d["decoder"]),
            attention_levels=tuple(d["attention_levels"]),
        )
    if kind == "DiscriminatorSpec":
        return DiscriminatorSpec(layers=tuple(ConvLayerSpec(**x) for x in d["layers"]), in_channels=d["in_channels"])
    raise InvalidSpec(f"unknown spec kind {kind!r}")


def spec_hash(spec) -> str:
    blob = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def as_2p5d(spec: GeneratorSpec) -> GeneratorSpec:
    return replace(spec, input_slices=3)
