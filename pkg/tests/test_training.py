import dataclasses

import pytest
import torch

from ldctgan.errors import AlreadyInflated, EmptyDataset, NonFiniteLoss, SpecHashMismatch
from ldctgan.features import make_extractor
from ldctgan.io.phantom import phantom_series, phantom_volume
from ldctgan.io.slices import DomainDataset, volume_slabs
from ldctgan.training import (
    ImagePool,
    TrainConfig,
    init_state,
    load_checkpoint,
    save_checkpoint,
    train,
    train_step,
)
from ldctgan.training.checkpointing import resolve_checkpoint
from ldctgan.training.trainer import critic_input, sample_batch
from ldctgan.training.transfer import fine_tune, migrate_state


@pytest.fixture
def domains(small_phantom):
    a = phantom_series(small_phantom, 6, 0)
    b = phantom_series(small_phantom, 6, 100)
    return DomainDataset("LDCT", [t[1] for t in a]), DomainDataset("NDCT", [t[0] for t in b])


def snapshot(module):
    return {k: v.detach().clone() for k, v in module.named_parameters()}


def one_batch(state, domains, config):
    return sample_batch(domains[0], config, state.rng), sample_batch(domains[1], config, state.rng)


def test_step_updates_every_network(domains, tiny_config):
    state = init_state(tiny_config)
    before = {n: snapshot(m) for n, m in state.networks.items()}
    x, y = one_batch(state, domains, tiny_config)
    train_step(state, x, y, tiny_config, make_extractor("toy"))
    for name, net in state.networks.items():
        after = snapshot(net)
        assert any(not torch.equal(before[name][k], after[k]) for k in after), name


def test_zero_learning_rate_is_null_update(domains, tiny_config):
    cfg = dataclasses.replace(tiny_config, learning_rate=0.0)
    state = init_state(cfg)
    before = {n: snapshot(m) for n, m in state.networks.items()}
    x, y = one_batch(state, domains, cfg)
    train_step(state, x, y, cfg, make_extractor("toy"))
    for name, net in state.networks.items():
        after = snapshot(net)
        assert all(torch.equal(before[name][k], after[k]) for k in after), name


def test_update_order(domains, tiny_config):
    state = init_state(tiny_config)
    order = []
    for name, opt in state.optimizers.items():
        original = opt.step

        def step(*a, _name=name, _orig=original, **kw):
            order.append(_name)
            return _orig(*a, **kw)

        opt.step = step
    x, y = one_batch(state, domains, tiny_config)
    train_step(state, x, y, tiny_config, make_extractor("toy"))
    assert order == ["opt_G", "opt_DX", "opt_DY"]


def test_extractor_stays_frozen(domains, tiny_config):
    ext = make_extractor("toy")
    before = snapshot(ext)
    train(domains, tiny_config, extractor=ext)
    assert all(torch.equal(before[k], v) for k, v in snapshot(ext).items())


def test_non_finite_aborts(domains, tiny_config):
    state = init_state(tiny_config)
    x, y = one_batch(state, domains, tiny_config)
    x[0, 0, 0, 0] = float("nan")
    with pytest.raises(NonFiniteLoss):
        train_step(state, x, y, tiny_config, make_extractor("toy"))


def test_fifty_step_determinism(domains, tiny_config):
    cfg = dataclasses.replace(tiny_config, epochs=5, steps_per_epoch=10)
    traces = []
    for _ in range(2):
        _, log = train(domains, cfg)
        traces.append([tuple(r.values()) for r in log.steps])
    assert len(traces[0]) == 50
    assert traces[0] == traces[1]


def test_zero_epochs(domains, tiny_config):
    cfg = dataclasses.replace(tiny_config, epochs=0)
    ref = init_state(cfg)
    state, log = train(domains, cfg)
    assert log.steps == [] and log.epochs == [] and state.step == 0
    for a, b in zip(ref.G.parameters(), state.G.parameters()):
        assert torch.equal(a, b)


def test_empty_domain(tiny_config):
    with pytest.raises(EmptyDataset):
        train((DomainDataset("LDCT", []), DomainDataset("NDCT", [])), tiny_config)


def test_resume_equals_uninterrupted(domains, tiny_config, tmp_path):
    cfg = dataclasses.replace(tiny_config, epochs=3, steps_per_epoch=3, image_pool_size=2)
    full, full_log = train(domains, cfg)

    first, first_log = train(domains, dataclasses.replace(cfg, epochs=2))
    save_checkpoint(first, cfg, tmp_path / "checkpoints" / "epoch_0002")
    resumed, _ = load_checkpoint(resolve_checkpoint(tmp_path))
    resumed, rest_log = train(domains, cfg, state=resumed)

    assert [r["total"] for r in first_log.steps + rest_log.steps] == [r["total"] for r in full_log.steps]
    for name in full.networks:
        a, b = full.networks[name].state_dict(), resumed.networks[name].state_dict()
        assert all(torch.equal(a[k], b[k]) for k in a), name


def test_checkpoints_written(domains, tiny_config, tmp_path):
    cfg = dataclasses.replace(tiny_config, epochs=2, checkpoint_every=1)
    train(domains, cfg, out_dir=tmp_path)
    assert (tmp_path / "checkpoints" / "epoch_0001" / "manifest.json").is_file()
    assert resolve_checkpoint(tmp_path).name == "epoch_0002"
    assert (tmp_path / "epochs.csv").read_text().startswith("epoch,")


def test_learning_rate_schedule():
    cfg = TrainConfig(epochs=20, lr_decay_start_epoch=10, learning_rate=2e-4)
    assert [cfg.lr_at(e) for e in (0, 9, 10)] == [2e-4, 2e-4, 2e-4]
    assert cfg.lr_at(15) == pytest.approx(1e-4)
    assert cfg.lr_at(19) == pytest.approx(2e-5)


def test_pool(rng):
    imgs = torch.arange(4.0).view(4, 1, 1, 1)
    assert torch.equal(ImagePool(0).query(imgs, rng), imgs)
    pool = ImagePool(4)
    assert torch.equal(pool.query(imgs, rng), imgs)
    out = pool.query(imgs + 10, rng)
    # every returned image is either the new fake or a stored old one
    assert all(float(v) in {0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0} for v in out.flatten())
    assert len(pool.images) == 4


def test_critic_input_padding():
    t = torch.randn(2, 1, 64, 64)
    assert critic_input(t, 70).shape == (2, 1, 70, 70)
    assert critic_input(t, 64) is t


# ---------------------------------------------------------------- transfer


@pytest.fixture
def checkpoint(domains, tiny_config, tmp_path):
    state, _ = train(domains, tiny_config)
    return save_checkpoint(state, tiny_config, tmp_path / "ck" / "epoch_0001"), state


def test_fine_tune_zero_epochs(domains, tiny_config, checkpoint):
    path, orig = checkpoint
    state, log = fine_tune(path, domains, dataclasses.replace(tiny_config, epochs=0))
    assert log.steps == []
    for a, b in zip(orig.G.parameters(), state.G.parameters()):
        assert torch.equal(a, b)


def test_fine_tune_wrong_architecture(domains, tiny_config, checkpoint):
    path, _ = checkpoint
    with pytest.raises(SpecHashMismatch):
        fine_tune(path, domains, dataclasses.replace(tiny_config, generator_channels=8))


def test_migration(tiny_config, checkpoint, small_phantom):
    path, orig = checkpoint
    state = migrate_state(resolve_checkpoint(path), tiny_config)
    ndct, ldct = phantom_volume(small_phantom, 5)
    slabs = torch.stack([torch.from_numpy(s.pixels) for s in volume_slabs(ldct)]).float() / 200
    with torch.no_grad():
        diff = (state.G.eval()(slabs) - orig.G.eval()(slabs[:, 1:2])).abs().max().item()
    assert diff <= 1e-6
    state.G.train()

    domains3 = (DomainDataset("LDCT", volume_slabs(ldct)), DomainDataset("NDCT", volume_slabs(ndct)))
    state, _ = train(domains3, dataclasses.replace(tiny_config, steps_per_epoch=1), state=state)
    neighbours = [p[:, :, [0, 2]] for name, p in state.G.named_parameters() if name.endswith("weight") and p.dim() == 5]
    assert neighbours
    assert any(w.abs().sum() > 0 for w in neighbours)
    with pytest.raises(AlreadyInflated):
        migrate_state(state, tiny_config)
