from unittest import mock

import numpy as np
import pytest
import requests

from harness import mnist
from harness.mnist import (MnistError, MnistFileMissing, MnistMagicError, MnistTruncatedError,
                           fetch_mnist, load_mnist, read_idx)
from tests.conftest import write_idx


def test_load_counts_and_pixel_range(mnist_dir):
    train, test = load_mnist(mnist_dir)
    assert len(train) == 200
    assert len(test) == 50
    assert train.images.shape == (200, 28, 28)
    assert train.images.min() >= 0.0 and train.images.max() <= 1.0
    assert train.images.max() == 1.0
    assert train.digits == list(range(10))


def test_read_idx_roundtrip_raw_and_gzip(tmp_path, rng):
    labels = rng.integers(0, 10, 17).astype(np.uint8)
    raw = write_idx(tmp_path / "labels", labels, 2049)
    gz = write_idx(tmp_path / "labels2", labels, 2049, compress=True)
    np.testing.assert_array_equal(read_idx(raw), labels)
    np.testing.assert_array_equal(read_idx(gz), labels)


def test_missing_file(tmp_path):
    with pytest.raises(MnistFileMissing) as info:
        load_mnist(tmp_path)
    assert isinstance(info.value, FileNotFoundError)
    assert "train-images-idx3-ubyte" in str(info.value)


def test_bad_magic(tmp_path):
    path = write_idx(tmp_path / "images", np.zeros((2, 28, 28)), 2049)
    with pytest.raises(MnistMagicError) as info:
        read_idx(path, expected_magic=2051)
    assert str(path) in str(info.value)
    path.write_bytes(b"\x00\x00\x09\x99" + bytes(16))
    with pytest.raises(MnistMagicError):
        read_idx(path)


def test_truncated_payload(tmp_path):
    path = write_idx(tmp_path / "images", np.zeros((3, 28, 28)), 2051)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(MnistTruncatedError) as info:
        read_idx(path)
    assert str(path) in str(info.value)


def test_truncated_header(tmp_path):
    path = tmp_path / "labels"
    path.write_bytes((2049).to_bytes(4, "big") + b"\x00\x00")
    with pytest.raises(MnistTruncatedError):
        read_idx(path)


def test_errors_share_a_base(tmp_path):
    for cls in (MnistFileMissing, MnistMagicError, MnistTruncatedError):
        assert issubclass(cls, MnistError)


def test_fetch_skips_present_files(mnist_dir):
    with mock.patch.object(mnist.requests, "get") as get:
        paths = fetch_mnist(mnist_dir)
    get.assert_not_called()
    assert len(paths) == 4


def test_fetch_retries_then_raises(tmp_path):
    with mock.patch.object(mnist.requests, "get", side_effect=requests.ConnectionError("down")) as get, \
         mock.patch.object(mnist.time, "sleep") as sleep:
        with pytest.raises(requests.ConnectionError):
            fetch_mnist(tmp_path)
    assert get.call_count == mnist.MAX_RETRY
    assert [c.args[0] for c in sleep.call_args_list] == [2, 4]
    assert not list(tmp_path.glob("*.part"))
