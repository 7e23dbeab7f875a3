import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldctgan.errors import DegenerateRange, InvalidSpec
from ldctgan.io.slices import CTSlice
from ldctgan.io.windowing import (
    DICOM_W_MINUS_1,
    WindowSpec,
    apply_window,
    denormalize,
    from_model_range,
    invert_window,
    normalize_for_model,
    to_model_range,
)


def scalar_window(x, c, w, y_min, y_max, divisor):
    # branch-by-branch reference, one value at a time
    if x <= c - 0.5 - (w - 1) / 2:
        return y_min
    if x > c - 0.5 + (w - 1) / 2:
        return y_max
    return ((x - (c - 0.5)) / divisor + 0.5) * (y_max - y_min) + y_min


def test_known_points():
    spec = WindowSpec()
    out = apply_window(np.array([-110.0, 39.5, 200.0]), spec)
    np.testing.assert_array_equal(out, [0.0, 127.5, 255.0])


def test_thresholds():
    spec = WindowSpec()
    assert spec.lower_threshold == -110.0
    assert spec.upper_threshold == 189.0
    assert spec.divisor == 301.0
    assert WindowSpec(divisor_mode=DICOM_W_MINUS_1).divisor == 299.0


def test_middle_branch_matches_scalar(rng):
    spec = WindowSpec()
    xs = rng.uniform(-109.999, 189.0, size=2000)
    ref = np.array([scalar_window(x, 40, 300, 0, 255, 301) for x in xs])
    np.testing.assert_allclose(apply_window(xs, spec), ref, rtol=0, atol=1e-9)


def test_dicom_divisor_matches_scalar(rng):
    spec = WindowSpec(level_c=-600, width_w=1500, divisor_mode=DICOM_W_MINUS_1)
    xs = rng.uniform(-2000, 1000, size=500)
    ref = np.array([scalar_window(x, -600, 1500, 0, 255, 1499) for x in xs])
    np.testing.assert_allclose(apply_window(xs, spec), ref, atol=1e-9)


def test_accepts_slice():
    s = CTSlice(np.full((4, 4), 39.5))
    np.testing.assert_array_equal(apply_window(s, WindowSpec()), 127.5)


@given(st.floats(-5000, 5000), st.floats(-5000, 5000))
def test_monotone(a, b):
    lo, hi = sorted((a, b))
    ya, yb = apply_window(np.array([lo, hi]), WindowSpec())
    assert ya <= yb


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_output_in_range(x):
    y = float(apply_window(np.array([x]), WindowSpec())[0])
    assert 0.0 <= y <= 255.0
    if x <= -110:
        assert y == 0.0
    if x > 189:
        assert y == 255.0


@given(st.floats(-109.0, 188.0))
def test_invert_inside_window(x):
    spec = WindowSpec()
    assert invert_window(apply_window(np.array([x]), spec), spec)[0] == pytest.approx(x, abs=1e-9)


def test_invalid_specs():
    with pytest.raises(InvalidSpec):
        WindowSpec(width_w=0)
    with pytest.raises(InvalidSpec):
        WindowSpec(y_min=1, y_max=1)
    with pytest.raises(InvalidSpec):
        WindowSpec(divisor_mode="other")


def test_normalize_roundtrip(rng):
    d = rng.uniform(0, 255, size=50)
    n = normalize_for_model(d, 0, 255)
    assert n.min() >= -1 and n.max() <= 1
    np.testing.assert_allclose(denormalize(n, 0, 255), d, atol=1e-12)
    with pytest.raises(DegenerateRange):
        normalize_for_model(d, 3, 3)
    with pytest.raises(DegenerateRange):
        denormalize(d, 3, 3)


def test_model_range_roundtrip():
    hu = np.array([-100.0, 0.0, 40.0, 150.0])
    for win in (WindowSpec(), None):
        np.testing.assert_allclose(from_model_range(to_model_range(hu, win), win), hu, atol=1e-9)
