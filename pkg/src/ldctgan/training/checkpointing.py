"""Resumable training checkpoints.

A training checkpoint is a model checkpoint directory (see
``ldctgan.models.checkpoint``) whose manifest carries an extra ``training``
section: epoch/step counters, the resolved TrainConfig, the sampling RNG
state, Adam moments (one tensor file per moment) and the image-pool contents.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import torch

from ..config import from_dict, to_dict
from ..io.tensorio import read_tensor, write_tensor
from ..models.checkpoint import load_models, read_manifest, save_models
from .config import TrainConfig
from .pool import ImagePool
from .trainer import TrainState, assemble_state

LATEST = "latest"


def _save_optimizer(opt: torch.optim.Optimizer, directory: Path, name: str) -> dict:
    sd = opt.state_dict()
    entries = {}
    for idx, st in sd["state"].items():
        files = {}
        for key, val in st.items():
            if key == "step":
                continue
            rel = f"{name}/{idx}.{key}.ltn"
            write_tensor(val, directory / rel)
            files[key] = rel
        entries[str(idx)] = {"step": float(st["step"]), "files": files}
    return {"param_groups": sd["param_groups"], "state": entries}


def _load_optimizer(opt: torch.optim.Optimizer, directory: Path, doc: dict) -> None:
    state = {}
    for idx, entry in doc["state"].items():
        st = {"step": torch.tensor(entry["step"], dtype=torch.float32)}
        for key, rel in entry["files"].items():
            st[key] = torch.from_numpy(read_tensor(directory / rel))
        state[int(idx)] = st
    groups = [dict(g, betas=tuple(g["betas"])) if "betas" in g else g for g in doc["param_groups"]]
    opt.load_state_dict({"state": state, "param_groups": groups})


def save_checkpoint(state: TrainState, config: TrainConfig, directory: str | os.PathLike) -> Path:
    directory = Path(directory)
    optim = {name: _save_optimizer(opt, directory, name) for name, opt in state.optimizers.items()}
    pools = {}
    for name, pool in state.pools.items():
        files = []
        for i, img in enumerate(pool.images):
            rel = f"{name}/{i:04d}.ltn"
            write_tensor(img, directory / rel)
            files.append(rel)
        pools[name] = {"size": pool.size, "files": files}
    training = {
        "epoch": state.epoch,
        "step": state.step,
        "config": to_dict(config),
        "rng_state": state.rng.bit_generator.state,
        "optimizers": optim,
        "pools": pools,
    }
    save_models(directory, state.networks, training=training)
    (directory.parent / LATEST).write_text(directory.name + "\n")
    return directory


def load_config(directory: str | os.PathLike) -> TrainConfig:
    return from_dict(TrainConfig, read_manifest(directory)["training"]["config"])


def load_checkpoint(directory: str | os.PathLike, config: TrainConfig | None = None) -> tuple[TrainState, TrainConfig]:
    """Rebuild the full training state; ``config`` defaults to the stored snapshot."""
    directory = Path(directory)
    doc = read_manifest(directory)
    tr = doc["training"]
    config = config or from_dict(TrainConfig, tr["config"])
    nets = load_models(directory)
    rng = np.random.default_rng()
    rng.bit_generator.state = tr["rng_state"]
    state = assemble_state(nets["G"], nets["F"], nets["D_X"], nets["D_Y"], config, rng)
    for name, opt in state.optimizers.items():
        _load_optimizer(opt, directory, tr["optimizers"][name])
    for name in state.pools:
        entry = tr["pools"][name]
        pool = ImagePool(entry["size"])
        pool.images = [torch.from_numpy(read_tensor(directory / rel)) for rel in entry["files"]]
        setattr(state, name, pool)
    state.epoch = tr["epoch"]
    state.step = tr["step"]
    return state, config


def resolve_checkpoint(path: str | os.PathLike) -> Path:
    """Accept a checkpoint dir, a ``checkpoints`` dir with a ``latest`` pointer, or a run dir."""
    p = Path(path)
    if (p / "manifest.json").is_file():
        return p
    for base in (p, p / "checkpoints"):
        if (base / LATEST).is_file():
            return base / (base / LATEST).read_text().strip()
    return p
