import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vesselaug.image_core import (
    DataContractError,
    as_float,
    clamp01,
    flip_horizontal,
    flip_vertical,
    mean_gray,
    quantize,
    rgb_to_gray,
)

images = arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9), st.just(3)))


def test_gray_of_gray_pixel_is_itself():
    v = 0.37
    img = np.full((2, 3, 3), v)
    np.testing.assert_allclose(rgb_to_gray(img), v, rtol=0, atol=1e-15)


def test_gray_of_black_and_pure_red():
    assert not rgb_to_gray(np.zeros((4, 4, 3))).any()
    assert rgb_to_gray(np.array([[[1.0, 0.0, 0.0]]]))[0, 0] == 0.299


def test_gray_accepts_uint8():
    assert rgb_to_gray(np.full((1, 1, 3), 255, np.uint8))[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_mean_gray():
    assert mean_gray(np.full((3, 3, 3), 0.25)) == pytest.approx(0.25)
    half = np.zeros((2, 2, 3))
    half[0] = 1.0
    assert mean_gray(half) == pytest.approx(0.5)
    two = np.array([[[0.2] * 3, [0.6] * 3]])
    assert mean_gray(two) == pytest.approx(0.4, abs=1e-15)


def test_mean_gray_empty_raises():
    with pytest.raises(DataContractError):
        mean_gray(np.zeros((0, 3, 3)))


def test_flip_examples():
    a, b = [1, 2, 3], [4, 5, 6]
    img = np.array([[a, b]], dtype=np.uint8)
    assert flip_horizontal(img).tolist() == [[b, a]]
    assert flip_vertical(img).tolist() == img.tolist()
    one = np.array([[[9, 8, 7]]], dtype=np.uint8)
    assert np.array_equal(flip_horizontal(one), one)
    assert np.array_equal(flip_vertical(one), one)


@given(images)
def test_flips_are_involutions_preserving_values(img):
    for flip in (flip_horizontal, flip_vertical):
        out = flip(img)
        assert np.array_equal(flip(out), img)
        assert np.array_equal(np.sort(out, axis=None), np.sort(img, axis=None))
        assert mean_gray(out) == pytest.approx(mean_gray(img), abs=1e-12)


def test_quantize_examples():
    assert quantize(np.array([0.0, 1.0, 0.5])).tolist() == [0, 255, 128]
    assert quantize(np.array([(64 / 255) ** 2]))[0] == 16


def test_quantize_rejects_unclamped():
    for bad in (1.2, -0.1, np.nan):
        with pytest.raises(DataContractError):
            quantize(np.array([0.5, bad]))


def test_quantize_normalize_round_trip():
    s = np.arange(256, dtype=np.uint8)
    assert np.array_equal(quantize(as_float(s)), s)


def test_clamp01():
    assert clamp01(np.array([1.5, -0.2, 0.7])).tolist() == [1.0, 0.0, 0.7]
    for bad in (np.nan, np.inf, -np.inf):
        with pytest.raises(DataContractError):
            clamp01(np.array([bad]))


@given(images)
def test_gray_in_unit_range(img):
    g = rgb_to_gray(img)
    assert g.min() >= 0.0 and g.max() <= 1.0 + 1e-12
