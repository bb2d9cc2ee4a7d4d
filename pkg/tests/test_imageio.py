import numpy as np
import pytest

from stc import imageio


def test_quantize01_snaps_to_grid():
    v = np.array([0.0, 0.5, 1.0, 0.123456])
    q = imageio.quantize01(v)
    assert np.array_equal(q * 255, np.round(q * 255))
    assert np.array_equal(imageio.quantize01(q), q)


def test_ppm_round_trip_is_lossless_on_grid_values(tmp_path):
    rng = np.random.default_rng(0)
    img = imageio.quantize01(rng.uniform(size=(5, 7, 3)))
    path = tmp_path / "img.ppm"
    imageio.write_ppm(path, img)
    assert np.array_equal(imageio.read_ppm(path), img)


def test_pgm_round_trip_exact_up_to_255(tmp_path):
    mask = np.arange(256, dtype=np.int64).reshape(16, 16)
    path = tmp_path / "mask.pgm"
    imageio.write_pgm(path, mask)
    assert np.array_equal(imageio.read_pgm(path), mask)


def test_pgm_rejects_out_of_range(tmp_path):
    with pytest.raises(ValueError, match="0..255"):
        imageio.write_pgm(tmp_path / "bad.pgm", np.array([[300]]))


def test_saliency_round_trip(tmp_path):
    sal = imageio.quantize01(np.linspace(0, 1, 20).reshape(4, 5))
    path = tmp_path / "sal.pgm"
    imageio.write_saliency_pgm(path, sal)
    assert np.array_equal(imageio.read_saliency_pgm(path), sal)


def test_truncated_file_error_names_path(tmp_path):
    path = tmp_path / "img.ppm"
    imageio.write_ppm(path, np.zeros((4, 4, 3)))
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(ValueError, match="img.ppm.*truncated"):
        imageio.read_ppm(path)


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "img.ppm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
    with pytest.raises(ValueError, match="P6"):
        imageio.read_ppm(path)


def test_comment_in_header_is_skipped(tmp_path):
    path = tmp_path / "img.pgm"
    path.write_bytes(b"P5\n# comment line\n2 2\n255\n" + bytes([1, 2, 3, 4]))
    assert np.array_equal(imageio.read_pgm(path), [[1, 2], [3, 4]])
