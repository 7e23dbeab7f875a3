"""Alternating adversarial training, checkpoints and transfer procedures."""

from .checkpointing import load_checkpoint, load_config, resolve_checkpoint, save_checkpoint
from .config import TrainConfig
from .pool import ImagePool
from .trainer import TrainLog, TrainState, denoise_items, init_state, train, train_step, validation_metrics
from .transfer import fine_tune, fine_tune_state, migrate_state, migrate_to_2p5d
