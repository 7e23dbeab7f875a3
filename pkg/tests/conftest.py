import numpy as np
import pytest

from ldctgan.io.phantom import PhantomSpec
from ldctgan.training.config import TrainConfig

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_config():
    """Narrow networks, 64 px patches and no checkpointing; fast enough for unit tests."""
    return TrainConfig(
        epochs=1, batch_size=1, patch_size=64, generator_channels=4, discriminator_channels=4,
        checkpoint_every=0, steps_per_epoch=2, image_pool_size=4,
    )


@pytest.fixture
def small_phantom():
    return PhantomSpec(size_px=64, noise_sigma_hu=10.0, photon_scale=2.0)
