import json

import numpy as np
import pytest
import torch

from dicom_helpers import make_dicom
from ldctgan.cli import main
from ldctgan.io.files import list_slice_files, read_slice
from ldctgan.models.checkpoint import load_models

TINY = [
    "--set", "train.generator_channels=4", "--set", "train.discriminator_channels=4",
    "--set", "train.patch_size=64", "--set", "train.steps_per_epoch=2", "--set", "train.image_pool_size=2",
]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def phantoms(tmp_path):
    assert run("phantom", "--out", tmp_path / "ph", "--count", 4, "--sigma", 10, "--photon-scale", 2) == 0
    return tmp_path / "ph"


def test_window_dicoms(tmp_path):
    src = tmp_path / "dcm"
    src.mkdir()
    for i in range(3):
        (src / f"s{i}.dcm").write_bytes(make_dicom(np.full((8, 8), 1064 + i)))
    assert run("window", "--input", src, "--out", tmp_path / "w") == 0
    assert len(list((tmp_path / "w").glob("*.png"))) == 3
    resolved = json.loads((tmp_path / "w" / "resolved_config.json").read_text())
    assert resolved["window"]["level_c"] == 40.0 and resolved["window"]["width_w"] == 300.0
    assert read_slice(tmp_path / "w" / "s0.ltn").pixels[0, 0] == pytest.approx((0.5 / 301 + 0.5) * 255, rel=1e-6)


def test_window_with_bad_file(tmp_path, capsys):
    src = tmp_path / "dcm"
    src.mkdir()
    for i in range(2):
        (src / f"s{i}.dcm").write_bytes(make_dicom(np.zeros((8, 8))))
    (src / "broken.dcm").write_bytes(b"garbage" * 30)
    assert run("window", "--input", src, "--out", tmp_path / "w") != 0
    assert len(list((tmp_path / "w").glob("*.png"))) == 2
    assert "broken.dcm" in capsys.readouterr().err


def test_phantom_outputs(tmp_path):
    for name in ("a", "b"):
        assert run("phantom", "--out", tmp_path / name, "--count", 10, "--seed", 5) == 0
    assert len(list((tmp_path / "a" / "ndct").glob("*.ltn"))) == 10
    assert len(list((tmp_path / "a" / "ldct").glob("*.ltn"))) == 10
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert len(manifest["entries"]) == 10 and "rois" in manifest["entries"][0]
    for f in (tmp_path / "a" / "ldct").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / "ldct" / f.name).read_bytes()
    assert run("phantom", "--out", tmp_path / "empty", "--count", 0) == 0
    assert json.loads((tmp_path / "empty" / "manifest.json").read_text())["entries"] == []


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("LDCTGAN_OUTPUT_ROOT", str(tmp_path / "root"))
    assert run("phantom", "--out", "rel", "--count", 1) == 0
    assert (tmp_path / "root" / "rel" / "manifest.json").is_file()


def test_config_file_and_errors(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("phantom:\n  count: 2\n  spec:\n    size_px: 48\n")
    assert run("--config", cfg, "phantom", "--out", tmp_path / "p") == 0
    assert read_slice(tmp_path / "p" / "ndct" / "00000.ltn").pixels.shape == (48, 48)
    cfg.write_text("phantom:\n  cuont: 2\n")
    assert run("--config", cfg, "phantom", "--out", tmp_path / "p") == 2
    assert run("--set", "phantom.spec.size_px=8", "phantom", "--out", tmp_path / "p") == 2


def test_train_resume_infer_evaluate(tmp_path, phantoms):
    run_dir = tmp_path / "run"
    args = [*TINY, "--set", "train.checkpoint_every=1", "train", "--ldct", phantoms / "ldct", "--ndct", phantoms / "ndct"]
    assert run(*args, "--epochs", 2, "--out", run_dir) == 0
    assert (run_dir / "checkpoints" / "epoch_0001" / "manifest.json").is_file()
    assert (run_dir / "loss_curves.png").is_file()

    # resume from epoch 1 reproduces the uninterrupted second epoch
    assert run(*args, "--epochs", 2, "--out", tmp_path / "resumed", "--resume", run_dir / "checkpoints" / "epoch_0001") == 0
    full = [json.loads(line) for line in (run_dir / "steps.jsonl").read_text().splitlines()]
    tail = [json.loads(line) for line in (tmp_path / "resumed" / "steps.jsonl").read_text().splitlines()]
    assert tail == full[2:]

    assert run(*TINY, "infer", "--checkpoint", run_dir, "--input", phantoms / "ldct", "--out", tmp_path / "den") == 0
    assert len(list_slice_files(tmp_path / "den")) == 4

    out = tmp_path / "ev"
    assert run("evaluate", "--ref", phantoms / "ndct", "--test", tmp_path / "den", "--baseline", phantoms / "ldct", "--out", out) == 0
    rows = [json.loads(line) for line in (out / "metrics_rows.jsonl").read_text().splitlines()]
    assert len(rows) == 8 and all(r[c] is not None for r in rows for c in ("psnr_db", "ssim", "pl", "snr", "cnr"))
    summary = json.loads((out / "metrics_summary.json").read_text())
    den = [r["psnr_db"] for r in rows if r["method"] == "denoised"]
    assert summary["aggregates"]["denoised"]["psnr_db"]["mean"] == pytest.approx(np.mean(den), abs=1e-9)
    assert (out / "metrics_summary.png").is_file()


def test_infer_spec_mismatch(tmp_path, phantoms):
    run_dir = tmp_path / "run"
    assert run(*TINY, "--set", "train.checkpoint_every=1", "train", "--ldct", phantoms / "ldct",
               "--ndct", phantoms / "ndct", "--epochs", 1, "--out", run_dir) == 0
    code = run("--set", "train.generator_channels=8", "infer", "--checkpoint", run_dir,
               "--input", phantoms / "ldct", "--out", tmp_path / "x")
    assert code == 2


def test_migrate_and_slab_inference(tmp_path):
    assert run("phantom", "--out", tmp_path / "vol", "--count", 5, "--volume") == 0
    vol = tmp_path / "vol"
    assert run(*TINY, "--set", "train.checkpoint_every=1", "train", "--ldct", vol / "ldct", "--ndct", vol / "ndct",
               "--epochs", 1, "--out", tmp_path / "run") == 0
    assert run(*TINY, "migrate25d", "--checkpoint", tmp_path / "run", "--ldct", vol / "ldct", "--ndct", vol / "ndct",
               "--epochs", 0, "--out", tmp_path / "mig") == 0

    g2 = load_models(tmp_path / "run" / "checkpoints" / "epoch_0001", ["G"])["G"].eval()
    g3 = load_models(tmp_path / "mig" / "checkpoints" / "epoch_0000", ["G"])["G"].eval()
    assert g3.dimensionality == "conv3d"
    x = torch.rand(2, 3, 64, 64) * 2 - 1
    with torch.no_grad():
        assert (g3(x) - g2(x[:, 1:2])).abs().max().item() <= 1e-6

    assert run(*TINY, "infer", "--checkpoint", tmp_path / "mig", "--input", vol / "ldct", "--out", tmp_path / "d3") == 0
    assert len(list_slice_files(tmp_path / "d3")) == 5


def test_evaluate_missing_counterpart(tmp_path, phantoms):
    (phantoms / "ldct" / "00003.ltn").unlink()
    code = run("evaluate", "--ref", phantoms / "ndct", "--test", phantoms / "ldct", "--out", tmp_path / "ev")
    assert code == 3


def test_finetune(tmp_path, phantoms):
    assert run(*TINY, "--set", "train.checkpoint_every=1", "train", "--ldct", phantoms / "ldct",
               "--ndct", phantoms / "ndct", "--epochs", 1, "--out", tmp_path / "run") == 0
    assert run(*TINY, "--set", "train.checkpoint_every=1", "finetune", "--checkpoint", tmp_path / "run",
               "--ldct", phantoms / "ldct", "--ndct", phantoms / "ndct", "--epochs", 1, "--out", tmp_path / "ft") == 0
    assert (tmp_path / "ft" / "checkpoints" / "latest").is_file()


def test_evaluate_roi_flags(tmp_path, phantoms):
    out = tmp_path / "ev"
    code = run("evaluate", "--ref", phantoms / "ndct", "--test", phantoms / "ldct", "--out", out,
               "--roi-signal", "31,31,4", "--roi-background", "10,10,4")
    assert code == 0
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["evaluate"]["roi_signal"]["radius_px"] == 4
    summary = json.loads((out / "metrics_summary.json").read_text())
    assert summary["rois"]["00000"]["signal"] == {"center_row": 31, "center_col": 31, "radius_px": 4, "label": ""}
