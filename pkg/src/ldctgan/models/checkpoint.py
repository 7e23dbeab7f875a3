"""Checkpoint directories: ``manifest.json`` plus one tensor container per array.

Manifest layout::

    {"format": "ldctgan-checkpoint", "version": 1,
     "networks": {"G": {"spec": {...}, "spec_hash": "...", "dimensionality": "conv2d",
                        "params": [{"id": "encoder.0.weight", "shape": [...], "file": "G/encoder.0.weight.ltn"}, ...]},
                  ...},
     ...extra top-level sections written by the trainer...}
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import torch
import torch.nn as nn

from ..errors import DataError, DimMismatch, SpecHashMismatch
from ..io.tensorio import read_tensor, write_tensor
from .networks import Discriminator, Generator
from .specs import spec_from_dict, spec_hash, spec_to_dict

FORMAT = "ldctgan-checkpoint"
MANIFEST = "manifest.json"


def save_network(model: nn.Module, directory: str | os.PathLike, name: str) -> dict:
    directory = Path(directory)
    params = []
    for pid, tensor in model.state_dict().items():
        rel = f"{name}/{pid}.ltn"
        write_tensor(tensor, directory / rel)
        params.append({"id": pid, "shape": list(tensor.shape), "file": rel})
    return {
        "spec": spec_to_dict(model.spec),
        "spec_hash": spec_hash(model.spec),
        "dimensionality": model.dimensionality,
        "params": params,
    }


def load_network(directory: str | os.PathLike, entry: dict) -> nn.Module:
    directory = Path(directory)
    spec = spec_from_dict(entry["spec"])
    if spec_hash(spec) != entry["spec_hash"]:
        raise SpecHashMismatch("manifest spec does not match its recorded hash")
    model = Generator(spec) if type(spec).__name__ == "GeneratorSpec" else Discriminator(spec)
    state = model.state_dict()
    listed = {p["id"]: p for p in entry["params"]}
    if set(listed) != set(state):
        raise DimMismatch(f"checkpoint parameters differ from the spec: {sorted(set(listed) ^ set(state))[:5]}")
    loaded = {}
    for pid, ref in state.items():
        arr = read_tensor(directory / listed[pid]["file"])
        if list(arr.shape) != list(ref.shape):
            raise DimMismatch(f"{pid}: stored shape {arr.shape} != expected {tuple(ref.shape)}")
        loaded[pid] = torch.from_numpy(arr).to(ref.dtype)
    model.load_state_dict(loaded)
    return model


def write_manifest(directory: str | os.PathLike, networks: dict[str, dict], **sections) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {"format": FORMAT, "version": 1, "networks": networks, **sections}
    path = directory / MANIFEST
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def read_manifest(directory: str | os.PathLike) -> dict:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise DataError(f"{directory} has no {MANIFEST}")
    doc = json.loads(path.read_text())
    if doc.get("format") != FORMAT:
        raise DataError(f"{path} is not an {FORMAT} manifest")
    return doc


def save_models(directory: str | os.PathLike, models: dict[str, nn.Module], **sections) -> Path:
    networks = {name: save_network(m, directory, name) for name, m in models.items()}
    return write_manifest(directory, networks, **sections)


def load_models(directory: str | os.PathLike, names=None) -> dict[str, nn.Module]:
    doc = read_manifest(directory)
    names = names or list(doc["networks"])
    return {n: load_network(directory, doc["networks"][n]) for n in names}


def check_spec_hash(directory: str | os.PathLike, name: str, expected_spec) -> None:
    doc = read_manifest(directory)
    got = doc["networks"][name]["spec_hash"]
    want = spec_hash(expected_spec)
    if got != want:
        raise SpecHashMismatch(f"checkpoint {name} has spec hash {got}, current model spec is {want}")
