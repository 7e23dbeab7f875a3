"""Training hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InvalidSpec
from ..io.windowing import WindowSpec
from ..losses import ADV_MODES, LossWeights, PerceptualConfig
from ..models.specs import DiscriminatorSpec, GeneratorSpec, default_discriminator_spec, default_generator_spec


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 1
    learning_rate: float = 2e-4
    lr_decay_start_epoch: int = 10
    loss_weights: LossWeights = field(default_factory=LossWeights)
    perceptual: PerceptualConfig = field(default_factory=PerceptualConfig)
    seed: int = 0
    patch_size: int = 128
    checkpoint_every: int = 5
    image_pool_size: int = 50
    betas: tuple[float, float] = (0.5, 0.999)
    adv_mode: str = "lsgan"
    generator_channels: int = 64
    discriminator_channels: int = 64
    # None trains on clipped raw HU instead of windowed images
    window: WindowSpec | None = field(default_factory=WindowSpec)
    steps_per_epoch: int | None = None
    reinit_discriminators: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidSpec("epochs must be >= 0")
        if self.batch_size < 1:
            raise InvalidSpec("batch_size must be >= 1")
        if not self.learning_rate >= 0:
            raise InvalidSpec("learning_rate must be >= 0")
        if self.image_pool_size < 0:
            raise InvalidSpec("image_pool_size must be >= 0")
        if self.adv_mode not in ADV_MODES:
            raise InvalidSpec(f"adv_mode must be one of {ADV_MODES}")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise InvalidSpec("steps_per_epoch must be >= 1")

    def generator_spec(self, input_slices: int = 1) -> GeneratorSpec:
        return default_generator_spec(self.generator_channels, input_slices)

    def discriminator_spec(self) -> DiscriminatorSpec:
        return default_discriminator_spec(self.discriminator_channels)

    def lr_at(self, epoch: int) -> float:
        """Constant until ``lr_decay_start_epoch``, then linear, reaching 0 at the end of the last epoch."""
        start = min(self.lr_decay_start_epoch, self.epochs)
        if epoch < start:
            return self.learning_rate
        return self.learning_rate * (self.epochs - epoch) / max(1, self.epochs - start)
