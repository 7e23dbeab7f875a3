"""``ldctgan`` command line: window, phantom, train, finetune, migrate25d, infer, evaluate.

Settings come from an optional YAML/JSON config file (``--config``), then
``--set section.key=value`` overrides, then the per-command flags. The fully
resolved configuration is written as ``resolved_config.json`` next to every
command's outputs. ``LDCTGAN_OUTPUT_ROOT`` prefixes relative output paths.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .config import from_dict, to_dict
from .errors import ConfigError, DataError, LDCTError, PairingError
from .io.files import list_slice_files, load_slices, read_slice, save_png, save_slice
from .io.phantom import PhantomSpec, phantom_rois, phantom_series, phantom_volume
from .io.slices import DomainDataset, volume_slabs
from .io.windowing import WindowSpec, apply_window, from_model_range
from .metrics import EvalConfig, EvalItem, ROISpec, evaluate_report
from .models.checkpoint import check_spec_hash, load_models, read_manifest
from .training.checkpointing import load_checkpoint, resolve_checkpoint, save_checkpoint
from .training.config import TrainConfig
from .training.trainer import denoise_items, train
from .training.transfer import fine_tune, migrate_state

log = logging.getLogger("ldctgan")

OUTPUT_ROOT_ENV = "LDCTGAN_OUTPUT_ROOT"
RESOLVED = "resolved_config.json"


@dataclass
class PhantomSection:
    spec: PhantomSpec = field(default_factory=PhantomSpec)
    count: int = 10
    start: int = 0
    jitter: bool = True
    volume: bool = False


@dataclass
class DataSection:
    ldct_dir: str | None = None
    ndct_dir: str | None = None
    val_ldct_dir: str | None = None
    val_ndct_dir: str | None = None
    sampling_seed: int = 0


@dataclass
class EvaluateSection:
    ref_dir: str | None = None
    test_dir: str | None = None
    baseline_dir: str | None = None
    method: str = "denoised"
    roi_signal: ROISpec | None = None
    roi_background: ROISpec | None = None
    roi_units: str = "display"


@dataclass
class RunConfig:
    output_dir: str = "runs/default"
    window: WindowSpec = field(default_factory=WindowSpec)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    data: DataSection = field(default_factory=DataSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)


# config plumbing ------------------------------------------------------------

def _parse_value(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _assign(tree: dict, dotted: str, value) -> None:
    node = tree
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {dotted}: {p} is not a section")
    node[parts[-1]] = value


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def load_run_config(path: str | None, overrides: list[str], flags: dict) -> tuple[RunConfig, dict]:
    """Resolve file -> --set -> flags; returns the config and the raw user-supplied tree."""
    tree: dict = {}
    if path:
        text = Path(path).read_text()
        try:
            loaded = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        tree = loaded
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        _assign(tree, key.strip(), _parse_value(val))
    for key, val in flags.items():
        if val is not None:
            _assign(tree, key, val)
    cfg = from_dict(RunConfig, _merge(to_dict(RunConfig()), tree))
    return cfg, tree


def output_path(p: str) -> Path:
    path = Path(p)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def write_resolved(cfg: RunConfig, out: Path, command: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / RESOLVED
    path.write_text(json.dumps({"command": command, **to_dict(cfg)}, indent=2))
    return path


# commands -----------------------------------------------------------------

def cmd_window(cfg: RunConfig, args) -> int:
    out = output_path(cfg.output_dir)
    write_resolved(cfg, out, "window")
    files = list_slice_files(args.input)
    failures = []
    for f in files:
        try:
            s = read_slice(f)
        except LDCTError as exc:
            failures.append((f.name, type(exc).__name__, str(exc)))
            continue
        disp = apply_window(s, cfg.window)
        save_png(disp, out / f"{f.stem}.png", cfg.window.y_min, cfg.window.y_max)
        save_slice(disp, out / f"{f.stem}.ltn")
    for name, kind, msg in failures:
        print(f"error: {name}: {kind}: {msg}", file=sys.stderr)
    print(f"windowed {len(files) - len(failures)}/{len(files)} file(s) into {out}")
    return DataError.exit_code if failures else 0


def cmd_phantom(cfg: RunConfig, args) -> int:
    out = output_path(cfg.output_dir)
    write_resolved(cfg, out, "phantom")
    p = cfg.phantom
    (out / "ndct").mkdir(parents=True, exist_ok=True)
    (out / "ldct").mkdir(parents=True, exist_ok=True)
    entries = []
    if p.volume and p.count:
        ndct, ldct = phantom_volume(p.spec, p.count)
        triples = [(n, l, None) for n, l in zip(ndct, ldct)]
    else:
        triples = phantom_series(p.spec, p.count, p.start, p.jitter)
    for k, (clean, noisy, variant) in enumerate(triples):
        stem = f"{p.start + k:05d}"
        save_slice(clean, out / "ndct" / f"{stem}.ltn")
        save_slice(noisy, out / "ldct" / f"{stem}.ltn")
        entry = {"id": stem, "ndct": f"ndct/{stem}.ltn", "ldct": f"ldct/{stem}.ltn"}
        if variant is not None:
            entry["spec"] = variant.to_dict()
            entry["rois"] = phantom_rois(variant)
        entries.append(entry)
    manifest = {"spec": p.spec.to_dict(), "count": p.count, "volume": p.volume, "entries": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"wrote {len(entries)} phantom pair(s) to {out}")
    return 0


def _require(value, name: str):
    if not value:
        raise ConfigError(f"missing required setting {name}")
    return value


def _load_domain(directory: str, tag: str, seed: int, slabs: bool) -> DomainDataset:
    slices = load_slices(directory)
    items = volume_slabs(slices) if slabs else slices
    return DomainDataset(tag, items, sampling_seed=seed)


def _val_pairs(cfg: RunConfig, slabs: bool):
    d = cfg.data
    if not (d.val_ldct_dir and d.val_ndct_dir):
        return None
    ld = load_slices(d.val_ldct_dir)
    nd = load_slices(d.val_ndct_dir)
    if len(ld) != len(nd):
        raise PairingError("validation LDCT and NDCT directories differ in size")
    return list(zip(volume_slabs(ld) if slabs else ld, nd))


def _finish_training(out: Path, trace) -> None:
    from .plotting import plot_loss_curves

    trace.write(out)
    if trace.epochs:
        plot_loss_curves(trace.epochs, out / "loss_curves.png")


def cmd_train(cfg: RunConfig, args) -> int:
    out = output_path(cfg.output_dir)
    write_resolved(cfg, out, "train")
    d = cfg.data
    datasets = (
        _load_domain(_require(d.ldct_dir, "data.ldct_dir"), "LDCT", d.sampling_seed, False),
        _load_domain(_require(d.ndct_dir, "data.ndct_dir"), "NDCT", d.sampling_seed + 1, False),
    )
    state = None
    if args.resume:
        state, _ = load_checkpoint(resolve_checkpoint(args.resume), cfg.train)
    state, trace = train(datasets, cfg.train, state=state, out_dir=out, val_pairs=_val_pairs(cfg, False))
    _finish_training(out, trace)
    print(f"trained to epoch {state.epoch} ({state.step} steps); outputs in {out}")
    return 0


def cmd_finetune(cfg: RunConfig, args) -> int:
    out = output_path(cfg.output_dir)
    write_resolved(cfg, out, "finetune")
    d = cfg.data
    datasets = (
        _load_domain(_require(d.ldct_dir, "data.ldct_dir"), "LDCT", d.sampling_seed, False),
        _load_domain(_require(d.ndct_dir, "data.ndct_dir"), "NDCT", d.sampling_seed + 1, False),
    )
    state, trace = fine_tune(args.checkpoint, datasets, cfg.train, out_dir=out, val_pairs=_val_pairs(cfg, False))
    _finish_training(out, trace)
    print(f"fine-tuned for {state.epoch} epoch(s); outputs in {out}")
    return 0


def cmd_migrate25d(cfg: RunConfig, args) -> int:
    out = output_path(cfg.output_dir)
    write_resolved(cfg, out, "migrate25d")
    d = cfg.data
    datasets = (
        _load_domain(_require(d.ldct_dir, "data.ldct_dir"), "LDCT", d.sampling_seed, True),
        _load_domain(_require(d.ndct_dir, "data.ndct_dir"), "NDCT", d.sampling_seed + 1, True),
    )
    state = migrate_state(resolve_checkpoint(args.checkpoint), cfg.train)
    if cfg.train.epochs:
        state, trace = train(datasets, cfg.train, state=state, out_dir=out, val_pairs=_val_pairs(cfg, True))
        _finish_training(out, trace)
    # the slab model is always saved, even with zero epochs or checkpointing off
    save_checkpoint(state, cfg.train, out / "checkpoints" / f"epoch_{state.epoch:04d}")
    print(f"migrated to 2.5D and trained {state.epoch} epoch(s); outputs in {out}")
    return 0


def _expected_generator_spec(cfg: RunConfig, user_tree: dict, ckpt: Path, input_slices: int):
    """Spec the user asked for; falls back to the checkpoint's own training snapshot."""
    if "generator_channels" in user_tree.get("train", {}):
        return cfg.train.generator_spec(input_slices)
    stored = read_manifest(ckpt).get("training", {}).get("config", {})
    channels = stored.get("generator_channels", cfg.train.generator_channels)
    return replace(cfg.train, generator_channels=channels).generator_spec(input_slices)


def cmd_infer(cfg: RunConfig, args, user_tree: dict) -> int:
    out = output_path(cfg.output_dir)
    write_resolved(cfg, out, "infer")
    ckpt = resolve_checkpoint(_require(args.checkpoint, "--checkpoint"))
    manifest = read_manifest(ckpt)
    input_slices = 3 if manifest["networks"]["G"]["dimensionality"] == "conv3d" else 1
    check_spec_hash(ckpt, "G", _expected_generator_spec(cfg, user_tree, ckpt, input_slices))
    G = load_models(ckpt, ["G"])["G"].eval()
    files = list_slice_files(args.input)
    slices = [read_slice(f, slice_index=i) for i, f in enumerate(files)]
    items = volume_slabs(slices) if input_slices == 3 else slices
    window = cfg.train.window
    outputs = denoise_items(G, items, window)
    for f, value in zip(files, outputs):
        hu = from_model_range(value, window)
        save_slice(hu, out / f"{f.stem}.ltn")
        save_png(apply_window(hu, cfg.window), out / f"{f.stem}.png", cfg.window.y_min, cfg.window.y_max)
    print(f"denoised {len(files)} slice(s) into {out}")
    return 0


def _find_rois(ref_dir: Path) -> dict:
    for cand in (ref_dir / "manifest.json", ref_dir.parent / "manifest.json"):
        if cand.is_file():
            doc = json.loads(cand.read_text())
            return {e["id"]: e["rois"] for e in doc.get("entries", []) if "rois" in e}
    return {}


def _paired_files(ref_dir: Path, test_dir: Path) -> list[tuple[str, Path, Path]]:
    ref = {p.stem: p for p in list_slice_files(ref_dir)}
    test = {p.stem: p for p in list_slice_files(test_dir)}
    missing = sorted(set(ref) ^ set(test))
    if missing:
        raise PairingError(f"no counterpart for: {', '.join(missing[:10])}")
    if not ref:
        raise PairingError(f"{ref_dir} contains no slices")
    return [(k, ref[k], test[k]) for k in sorted(ref)]


def cmd_evaluate(cfg: RunConfig, args) -> int:
    from .plotting import plot_comparison, plot_metric_summary

    out = output_path(cfg.output_dir)
    write_resolved(cfg, out, "evaluate")
    ev = cfg.evaluate
    ref_dir = Path(_require(ev.ref_dir, "evaluate.ref_dir"))
    sources = [(ev.method, Path(_require(ev.test_dir, "evaluate.test_dir")))]
    if ev.baseline_dir:
        sources.insert(0, ("LDCT", Path(ev.baseline_dir)))
    auto_rois = _find_rois(ref_dir)
    items = []
    for method, test_dir in sources:
        for stem, rp, tp in _paired_files(ref_dir, test_dir):
            sig, bg = ev.roi_signal, ev.roi_background
            if sig is None and stem in auto_rois:
                sig = ROISpec(**auto_rois[stem]["signal"])
                bg = ROISpec(**auto_rois[stem]["background"])
            items.append(EvalItem(stem, read_slice(rp).pixels, read_slice(tp).pixels, method, sig, bg))
    report = evaluate_report(items, EvalConfig(window=cfg.window, roi_units=ev.roi_units))
    paths = report.write(out)
    plot_metric_summary(report.aggregates(), out / "metrics_summary.png")
    first = items[0].image_id
    panels = {m: apply_window(next(i.test for i in items if i.method == m and i.image_id == first), cfg.window)
              for m, _ in sources}
    panels["reference"] = apply_window(items[0].reference, cfg.window)
    plot_comparison(panels, out / f"comparison_{first}.png", cfg.window.y_min, cfg.window.y_max)
    print(report.to_text())
    print(f"report written to {paths['text']}")
    return 0


# argument parsing -----------------------------------------------------------

def _roi_arg(text: str) -> dict:
    try:
        row, col, radius = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected ROW,COL,RADIUS") from exc
    return {"center_row": row, "center_col": col, "radius_px": radius}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldctgan", description="Unpaired low-dose CT denoising toolkit")
    p.add_argument("--config", help="YAML or JSON run configuration")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", dest="output_dir", help="output directory")

    sp = sub.add_parser("window", help="apply the display window to a directory of slices")
    common(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--level", type=float)
    sp.add_argument("--width", type=float)
    sp.add_argument("--divisor-mode", choices=["paper_w_plus_1", "dicom_w_minus_1"])

    sp = sub.add_parser("phantom", help="generate paired synthetic phantoms")
    common(sp)
    sp.add_argument("--count", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--size", type=int)
    sp.add_argument("--sigma", type=float, help="additive Gaussian noise std (HU)")
    sp.add_argument("--photon-scale", type=float)
    sp.add_argument("--volume", action="store_true", default=None, help="one correlated stack instead of independent slices")

    for name, text in (("train", "train from scratch"), ("finetune", "fine-tune a checkpoint on new domains"),
                       ("migrate25d", "inflate a 2D checkpoint and train on 3-slice slabs")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--ldct", help="LDCT slice directory")
        sp.add_argument("--ndct", help="NDCT slice directory")
        sp.add_argument("--epochs", type=int)
        if name == "train":
            sp.add_argument("--resume", help="checkpoint to resume from")
        else:
            sp.add_argument("--checkpoint", required=True)

    sp = sub.add_parser("infer", help="denoise slices with a trained generator")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--input", required=True)

    sp = sub.add_parser("evaluate", help="compute PSNR/SSIM/PL/SNR/CNR reports")
    common(sp)
    sp.add_argument("--ref", help="reference (NDCT) directory")
    sp.add_argument("--test", help="test directory")
    sp.add_argument("--baseline", help="optional noisy-input directory reported as LDCT")
    sp.add_argument("--method", help="row label for the test directory")
    sp.add_argument("--roi-signal", type=_roi_arg, metavar="ROW,COL,RADIUS", help="signal ROI (else from phantom manifest)")
    sp.add_argument("--roi-background", type=_roi_arg, metavar="ROW,COL,RADIUS", help="background ROI for CNR")
    return p


def _flags(args) -> dict:
    f = {"output_dir": getattr(args, "output_dir", None)}
    c = args.command
    if c == "window":
        f.update({"window.level_c": args.level, "window.width_w": args.width, "window.divisor_mode": args.divisor_mode})
    elif c == "phantom":
        f.update({
            "phantom.count": args.count, "phantom.spec.seed": args.seed, "phantom.spec.size_px": args.size,
            "phantom.spec.noise_sigma_hu": args.sigma, "phantom.spec.photon_scale": args.photon_scale,
            "phantom.volume": args.volume,
        })
    elif c in ("train", "finetune", "migrate25d"):
        f.update({"data.ldct_dir": args.ldct, "data.ndct_dir": args.ndct, "train.epochs": args.epochs})
    elif c == "evaluate":
        f.update({"evaluate.ref_dir": args.ref, "evaluate.test_dir": args.test,
                  "evaluate.baseline_dir": args.baseline, "evaluate.method": args.method,
                  "evaluate.roi_signal": args.roi_signal, "evaluate.roi_background": args.roi_background})
    return f


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, tree = load_run_config(args.config, args.set, _flags(args))
        handlers = {
            "window": cmd_window, "phantom": cmd_phantom, "train": cmd_train, "finetune": cmd_finetune,
            "migrate25d": cmd_migrate25d, "evaluate": cmd_evaluate,
        }
        if args.command == "infer":
            return cmd_infer(cfg, args, tree)
        return handlers[args.command](cfg, args)
    except LDCTError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
