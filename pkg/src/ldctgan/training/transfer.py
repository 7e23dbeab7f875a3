"""Transfer learning: task migration (fine-tuning) and planar -> slab migration."""

from __future__ import annotations

import os

from ..io.patches import is_slab
from ..models.checkpoint import check_spec_hash, load_models
from ..models.inflate import inflate_2d_to_3d
from ..models.networks import build_discriminator
from .checkpointing import resolve_checkpoint
from .config import TrainConfig
from .trainer import TrainState, assemble_state, train


def fine_tune_state(checkpoint: str | os.PathLike, config: TrainConfig, input_slices: int = 1) -> TrainState:
    """Networks from ``checkpoint``, fresh Adam moments, empty pools, epoch 0."""
    ckpt = resolve_checkpoint(checkpoint)
    check_spec_hash(ckpt, "G", config.generator_spec(input_slices))
    check_spec_hash(ckpt, "F", config.generator_spec(input_slices))
    nets = load_models(ckpt)
    D_X, D_Y = nets["D_X"], nets["D_Y"]
    if config.reinit_discriminators:
        D_X = build_discriminator(config.discriminator_spec(), config.seed * 4 + 2)
        D_Y = build_discriminator(config.discriminator_spec(), config.seed * 4 + 3)
    else:
        check_spec_hash(ckpt, "D_X", config.discriminator_spec())
    return assemble_state(nets["G"], nets["F"], D_X, D_Y, config)


def fine_tune(checkpoint, new_datasets, config: TrainConfig, **train_kwargs):
    """Continue training a pretrained model on new domains; returns (state, log)."""
    input_slices = 3 if is_slab(new_datasets[0][0]) else 1
    state = fine_tune_state(checkpoint, config, input_slices)
    return train(new_datasets, config, state=state, **train_kwargs)


def migrate_state(checkpoint_or_state, config: TrainConfig) -> TrainState:
    """Inflate both generators of a planar model; critics are kept as they are."""
    if isinstance(checkpoint_or_state, TrainState):
        nets = checkpoint_or_state.networks
    else:
        nets = load_models(resolve_checkpoint(checkpoint_or_state))
    G3 = inflate_2d_to_3d(nets["G"])
    F3 = inflate_2d_to_3d(nets["F"])
    return assemble_state(G3, F3, nets["D_X"], nets["D_Y"], config)


def migrate_to_2p5d(checkpoint_or_state, slab_datasets, config: TrainConfig, **train_kwargs):
    """Inflate, then train on slab inputs with center-slice targets; returns (state, log)."""
    state = migrate_state(checkpoint_or_state, config)
    return train(slab_datasets, config, state=state, **train_kwargs)
