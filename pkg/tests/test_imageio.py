import numpy as np
import pytest
from PIL import Image

from glaaseg.imageio import (
    ImageFormatError,
    boundary,
    mask_to_uint8,
    overlay,
    read_gray,
    read_mask,
    to_uint8,
    write_pgm,
)


def test_pgm_roundtrip_is_binary_p5(tmp_path, rng):
    data = rng.integers(0, 256, (7, 9), dtype=np.uint8)
    p = write_pgm(tmp_path / "a.pgm", data)
    assert p.read_bytes().startswith(b"P5")
    np.testing.assert_array_equal(read_gray(p), data.astype(float))


def test_png_input(tmp_path, rng):
    data = rng.integers(0, 256, (5, 4), dtype=np.uint8)
    Image.fromarray(data, mode="L").save(tmp_path / "a.png")
    np.testing.assert_array_equal(read_gray(tmp_path / "a.png"), data)


def test_rgb_converted_with_warning(tmp_path, caplog):
    Image.new("RGB", (3, 2), (10, 10, 10)).save(tmp_path / "c.png")
    out = read_gray(tmp_path / "c.png")
    assert out.shape == (2, 3) and np.all(out == 10)
    assert "converting" in caplog.text


def test_unsupported_and_unreadable(tmp_path):
    Image.new("I;16", (3, 3)).save(tmp_path / "d.png")
    with pytest.raises(ImageFormatError):
        read_gray(tmp_path / "d.png")
    (tmp_path / "junk.pgm").write_bytes(b"not an image")
    with pytest.raises(ImageFormatError):
        read_gray(tmp_path / "junk.pgm")
    with pytest.raises(ImageFormatError):
        read_gray(tmp_path / "missing.pgm")


def test_write_pgm_rejects_non_uint8(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2)))


def test_to_uint8_rounds_and_saturates():
    np.testing.assert_array_equal(to_uint8([[-3.0, 0.4, 0.6, 254.5, 300.0]]), [[0, 0, 1, 254, 255]])


def test_mask_roundtrip(tmp_path):
    m = np.zeros((4, 5), bool)
    m[1:3, 2:4] = True
    write_pgm(tmp_path / "m.pgm", mask_to_uint8(m))
    np.testing.assert_array_equal(read_mask(tmp_path / "m.pgm"), m)


def test_boundary_and_overlay():
    m = np.zeros((6, 6), bool)
    m[1:5, 1:5] = True
    b = boundary(m)
    assert b.sum() == 12 and not b[2:4, 2:4].any()
    full = np.ones((3, 3), bool)
    assert boundary(full).sum() == 8  # the image border counts as outside
    img = np.full((6, 6), 40.0)
    ov = overlay(img, m)
    assert ov.dtype == np.uint8
    assert np.all(ov[b] == 255) and np.all(ov[~b] == 40)
