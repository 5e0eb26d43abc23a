import gzip
from pathlib import Path

import numpy as np
import pytest

from learning.training import Dataset


def write_idx(path: Path, array: np.ndarray, magic: int, compress: bool = False) -> Path:
    array = np.asarray(array, dtype=np.uint8)
    header = magic.to_bytes(4, "big") + b"".join(int(n).to_bytes(4, "big") for n in array.shape)
    payload = header + array.tobytes()
    if compress:
        path = path.with_name(path.name + ".gz")
        with gzip.open(path, "wb") as f:
            f.write(payload)
    else:
        path.write_bytes(payload)
    return path


def synthetic_digits(n_per_digit: int, digits=range(10), seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """uint8 images where digit d lights up row band d; easy to separate."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for digit in digits:
        block = rng.integers(0, 40, size=(n_per_digit, 28, 28))
        block[:, 2 * digit + 4:2 * digit + 7, 4:24] = 255
        images.append(block)
        labels.append(np.full(n_per_digit, digit))
    order = rng.permutation(n_per_digit * len(list(digits)))
    return np.concatenate(images)[order].astype(np.uint8), np.concatenate(labels)[order].astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mnist_dir(tmp_path):
    """Tiny IDX set: gzip-compressed train files, raw test files."""
    train_x, train_y = synthetic_digits(20, seed=1)
    test_x, test_y = synthetic_digits(5, seed=2)
    write_idx(tmp_path / "train-images-idx3-ubyte", train_x, 2051, compress=True)
    write_idx(tmp_path / "train-labels-idx1-ubyte", train_y, 2049, compress=True)
    write_idx(tmp_path / "t10k-images-idx3-ubyte", test_x, 2051)
    write_idx(tmp_path / "t10k-labels-idx1-ubyte", test_y, 2049)
    return tmp_path


@pytest.fixture
def tiny_data():
    """(train, test) over digits 0-1: 40 and 20 samples per digit."""
    train_x, train_y = synthetic_digits(40, digits=range(2), seed=3)
    test_x, test_y = synthetic_digits(20, digits=range(2), seed=4)
    return (Dataset(train_x / 255.0, train_y.astype(np.int64)),
            Dataset(test_x / 255.0, test_y.astype(np.int64)))
