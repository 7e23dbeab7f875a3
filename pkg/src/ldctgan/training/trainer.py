"""Alternating optimisation of G, F, D_X and D_Y.

Domain X is low-dose, domain Y normal-dose. ``G: X -> Y`` is the denoiser,
``F: Y -> X`` its inverse, ``D_X`` / ``D_Y`` judge LDCT / NDCT realism.
Every step updates G and F jointly first, then D_X, then D_Y.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as Fn

from ..errors import EmptyDataset, NonFiniteLoss
from ..features import FeatureExtractor, make_extractor
from ..io.patches import item_to_model_array, make_batch
from ..io.slices import DomainDataset
from ..io.windowing import WindowSpec, denormalize
from ..losses import (
    LossParts,
    adversarial_disc_loss,
    adversarial_gen_loss,
    cycle_loss,
    perceptual_loss,
    total_loss,
)
from ..metrics import psnr, ssim
from ..models.networks import Discriminator, Generator, build_discriminator, build_generator
from .config import TrainConfig
from .pool import ImagePool

log = logging.getLogger(__name__)


@dataclass
class TrainState:
    G: Generator
    F: Generator
    D_X: Discriminator
    D_Y: Discriminator
    opt_G: torch.optim.Adam
    opt_DX: torch.optim.Adam
    opt_DY: torch.optim.Adam
    pool_X: ImagePool
    pool_Y: ImagePool
    rng: np.random.Generator
    epoch: int = 0
    step: int = 0

    @property
    def networks(self) -> dict[str, torch.nn.Module]:
        return {"G": self.G, "F": self.F, "D_X": self.D_X, "D_Y": self.D_Y}

    @property
    def optimizers(self) -> dict[str, torch.optim.Adam]:
        return {"opt_G": self.opt_G, "opt_DX": self.opt_DX, "opt_DY": self.opt_DY}

    @property
    def pools(self) -> dict[str, ImagePool]:
        return {"pool_X": self.pool_X, "pool_Y": self.pool_Y}


@dataclass
class TrainLog:
    steps: list[dict] = field(default_factory=list)
    epochs: list[dict] = field(default_factory=list)

    def write(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with (d / "steps.jsonl").open("w") as fh:
            for row in self.steps:
                fh.write(json.dumps(row) + "\n")
        if self.epochs:
            keys = list(self.epochs[0])
            for row in self.epochs[1:]:
                keys += [k for k in row if k not in keys]
            lines = [",".join(keys)]
            lines += [",".join("" if r.get(k) is None else repr(r[k]) for k in keys) for r in self.epochs]
            (d / "epochs.csv").write_text("\n".join(lines) + "\n")


def make_optimizers(G, F, D_X, D_Y, config: TrainConfig):
    params_g = list(G.parameters()) + list(F.parameters())
    adam = lambda ps: torch.optim.Adam(ps, lr=config.learning_rate, betas=tuple(config.betas))  # noqa: E731
    return adam(params_g), adam(D_X.parameters()), adam(D_Y.parameters())


def assemble_state(G, F, D_X, D_Y, config: TrainConfig, rng: np.random.Generator | None = None) -> TrainState:
    opt_G, opt_DX, opt_DY = make_optimizers(G, F, D_X, D_Y, config)
    return TrainState(
        G=G, F=F, D_X=D_X, D_Y=D_Y,
        opt_G=opt_G, opt_DX=opt_DX, opt_DY=opt_DY,
        pool_X=ImagePool(config.image_pool_size), pool_Y=ImagePool(config.image_pool_size),
        rng=rng if rng is not None else np.random.default_rng(config.seed),
    )


def init_state(config: TrainConfig, input_slices: int = 1) -> TrainState:
    s = config.seed
    G = build_generator(config.generator_spec(input_slices), s * 4 + 0)
    F = build_generator(config.generator_spec(input_slices), s * 4 + 1)
    D_X = build_discriminator(config.discriminator_spec(), s * 4 + 2)
    D_Y = build_discriminator(config.discriminator_spec(), s * 4 + 3)
    return assemble_state(G, F, D_X, D_Y, config)


def critic_input(img: torch.Tensor, min_size: int) -> torch.Tensor:
    """Reflect-pad images smaller than the critic's receptive field up to it."""
    h, w = img.shape[-2:]
    ph, pw = max(0, min_size - h), max(0, min_size - w)
    if not ph and not pw:
        return img
    pad = (pw // 2, pw - pw // 2, ph // 2, ph - ph // 2)
    mode = "reflect" if max(pad) < min(h, w) else "replicate"
    return Fn.pad(img, pad, mode=mode)


def center_plane(t: torch.Tensor) -> torch.Tensor:
    return t[:, 1:2] if t.shape[1] == 3 else t


def _set_requires_grad(modules, flag: bool) -> None:
    for m in modules:
        for p in m.parameters():
            p.requires_grad_(flag)


def _check_finite(values: dict[str, torch.Tensor], step: int) -> None:
    bad = {k: float(v.detach()) for k, v in values.items() if not torch.isfinite(v).all()}
    if bad:
        raise NonFiniteLoss(f"non-finite loss at step {step}: {bad}")


def train_step(
    state: TrainState,
    x_batch: torch.Tensor,
    y_batch: torch.Tensor,
    config: TrainConfig,
    extractor: FeatureExtractor,
) -> dict[str, float]:
    """One generator update followed by one update of each critic."""
    G, F, D_X, D_Y = state.G, state.F, state.D_X, state.D_Y
    slab = G.dimensionality == "conv3d"
    w = config.loss_weights
    pc = config.perceptual
    rf_x, rf_y = D_X.receptive_field, D_Y.receptive_field
    x_c, y_c = center_plane(x_batch), center_plane(y_batch)

    # generators
    _set_requires_grad((D_X, D_Y), False)
    if slab:
        fake_y_planes = G(x_batch, all_planes=True)
        fake_x_planes = F(y_batch, all_planes=True)
        fake_y, fake_x = fake_y_planes[:, 1:2], fake_x_planes[:, 1:2]
        rec_x = F(fake_y_planes)
        rec_y = G(fake_x_planes)
    else:
        fake_y, fake_x = G(x_batch), F(y_batch)
        rec_x, rec_y = F(fake_y), G(fake_x)

    adv = adversarial_gen_loss(D_Y(critic_input(fake_y, rf_y)), D_X(critic_input(fake_x, rf_x)), config.adv_mode)
    cyc = cycle_loss(x_c, rec_x, y_c, rec_y)
    with torch.set_grad_enabled(w.lambda_perc > 0):
        perc = perceptual_loss(rec_x, x_c, pc, extractor) + perceptual_loss(rec_y, y_c, pc, extractor)
        if pc.pairing == "cycle+translation":
            perc = perc + perceptual_loss(fake_y, x_c, pc, extractor) + perceptual_loss(fake_x, y_c, pc, extractor)
    loss_g = total_loss(LossParts(adv, cyc, perc), w)
    _check_finite({"adv": adv, "cyc": cyc, "perc": perc, "total": loss_g}, state.step)
    state.opt_G.zero_grad(set_to_none=True)
    loss_g.backward()
    state.opt_G.step()

    # critics
    _set_requires_grad((D_X, D_Y), True)
    pooled_x = state.pool_X.query(fake_x.detach(), state.rng)
    loss_dx = adversarial_disc_loss(D_X(critic_input(x_c, rf_x)), D_X(critic_input(pooled_x, rf_x)), config.adv_mode)
    _check_finite({"D_X": loss_dx}, state.step)
    state.opt_DX.zero_grad(set_to_none=True)
    loss_dx.backward()
    state.opt_DX.step()

    pooled_y = state.pool_Y.query(fake_y.detach(), state.rng)
    loss_dy = adversarial_disc_loss(D_Y(critic_input(y_c, rf_y)), D_Y(critic_input(pooled_y, rf_y)), config.adv_mode)
    _check_finite({"D_Y": loss_dy}, state.step)
    state.opt_DY.zero_grad(set_to_none=True)
    loss_dy.backward()
    state.opt_DY.step()

    state.step += 1
    return {
        "adv": adv.item(), "cyc": cyc.item(), "perc": perc.item(),
        "total": loss_g.item(), "D_X": loss_dx.item(), "D_Y": loss_dy.item(),
    }


def set_learning_rate(state: TrainState, lr: float) -> None:
    for opt in state.optimizers.values():
        for group in opt.param_groups:
            group["lr"] = lr


def steps_per_epoch(datasets: Sequence[DomainDataset], config: TrainConfig) -> int:
    if config.steps_per_epoch is not None:
        return config.steps_per_epoch
    return max(1, max(len(d) for d in datasets) // config.batch_size)


def sample_batch(dataset: DomainDataset, config: TrainConfig, rng: np.random.Generator) -> torch.Tensor:
    items = dataset.draw(config.batch_size, rng)
    return torch.from_numpy(make_batch(items, config.window, config.patch_size, rng))


@torch.no_grad()
def denoise_items(G: Generator, items, window: WindowSpec | None, batch: int = 16) -> list[np.ndarray]:
    """Model-range outputs (H, W) for slices or slabs."""
    outs = []
    for i in range(0, len(items), batch):
        arr = torch.from_numpy(np.stack([item_to_model_array(it, window) for it in items[i : i + batch]]))
        outs.extend(G(arr)[:, 0].numpy().astype(np.float64))
    return outs


def validation_metrics(G: Generator, val_pairs, window: WindowSpec | None) -> dict[str, float]:
    """Mean PSNR/SSIM of G(ldct) against the clean image, in display units."""
    lo, hi = (window.y_min, window.y_max) if window is not None else (-1.0, 1.0)
    outs = denoise_items(G, [p[0] for p in val_pairs], window)
    ps, ss = [], []
    for out, (_, clean) in zip(outs, val_pairs):
        ref = denormalize(item_to_model_array(clean, window)[0], lo, hi) - lo
        test = denormalize(out, lo, hi) - lo
        ps.append(psnr(ref, test, hi - lo))
        ss.append(ssim(ref, test) if min(ref.shape) >= 11 else float("nan"))
    return {"val_psnr": float(np.mean(ps)), "val_ssim": float(np.mean(ss))}


def train(
    datasets: tuple[DomainDataset, DomainDataset],
    config: TrainConfig,
    state: TrainState | None = None,
    extractor: FeatureExtractor | None = None,
    out_dir=None,
    val_pairs=None,
    on_epoch: Callable[[TrainState, dict], None] | None = None,
) -> tuple[TrainState, TrainLog]:
    """Run ``config.epochs`` epochs (resuming from ``state.epoch`` if a state is given).

    ``datasets`` is (LDCT, NDCT). With ``out_dir`` set, checkpoints go to
    ``out_dir/checkpoints/epoch_NNNN`` and logs to ``out_dir``.
    """
    from .checkpointing import save_checkpoint

    ldct, ndct = datasets
    if len(ldct) == 0 or len(ndct) == 0:
        raise EmptyDataset("both domain datasets must be non-empty")
    input_slices = 3 if item_to_model_array(ldct[0], config.window).shape[0] == 3 else 1
    if state is None:
        state = init_state(config, input_slices)
    extractor = extractor or make_extractor(config.perceptual.extractor_id)
    trace = TrainLog()
    n_steps = steps_per_epoch(datasets, config)

    for epoch in range(state.epoch, config.epochs):
        lr = config.lr_at(epoch)
        set_learning_rate(state, lr)
        sums: dict[str, float] = {}
        for _ in range(n_steps):
            x = sample_batch(ldct, config, state.rng)
            y = sample_batch(ndct, config, state.rng)
            losses = train_step(state, x, y, config, extractor)
            trace.steps.append({"epoch": epoch, "step": state.step, "lr": lr, **losses})
            for k, v in losses.items():
                sums[k] = sums.get(k, 0.0) + v
        state.epoch = epoch + 1
        row = {"epoch": state.epoch, "step": state.step, "lr": lr, **{k: v / n_steps for k, v in sums.items()}}
        if val_pairs:
            row.update(validation_metrics(state.G, val_pairs, config.window))
        trace.epochs.append(row)
        log.info("epoch %d: %s", state.epoch, {k: round(v, 5) for k, v in row.items() if isinstance(v, float)})
        if on_epoch is not None:
            on_epoch(state, row)
        if out_dir is not None and config.checkpoint_every and (
            state.epoch % config.checkpoint_every == 0 or state.epoch == config.epochs
        ):
            save_checkpoint(state, config, Path(out_dir) / "checkpoints" / f"epoch_{state.epoch:04d}")
    if out_dir is not None:
        trace.write(out_dir)
    return state, trace
