"""Network specifications, construction, attention gates, inflation and checkpoints."""

from .attention import AttentionGate, AttentionGateParams, attention_coefficients, attention_gate
from .checkpoint import check_spec_hash, load_models, read_manifest, save_models
from .inflate import inflate_2d_to_3d, inflate_kernel
from .networks import (
    Discriminator,
    Generator,
    build_discriminator,
    build_generator,
    discriminator_forward,
    generator_forward,
    parameter_count,
)
from .specs import (
    ConvLayerSpec,
    DiscriminatorSpec,
    GeneratorSpec,
    default_discriminator_spec,
    default_generator_spec,
    output_size,
    receptive_field,
    receptive_window,
    spec_hash,
)
