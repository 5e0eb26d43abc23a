"""
MNIST ingestion: IDX parsing (raw or gzip) and a retrying downloader.

Usage:
    python harness/mnist.py --dir data/mnist          # download the four archives
    python harness/mnist.py --dir data/mnist --check  # parse and report sample counts
"""
import argparse
import gzip
import logging
import sys
import time
from pathlib import Path

import numpy as np
import requests
from tqdm import tqdm

sys.path.insert(0, str(Path(__file__).parent.parent))

from learning.training import Dataset

log = logging.getLogger("otafl.harness")

# ──────────────────────────────────────────────
# Config
# ──────────────────────────────────────────────
BASE_URL   = "https://ossci-datasets.s3.amazonaws.com/mnist/"
MAX_RETRY  = 3
TIMEOUT    = 30
CHUNK_SIZE = 1 << 16

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049

FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images":  "t10k-images-idx3-ubyte",
    "test_labels":  "t10k-labels-idx1-ubyte",
}


# ──────────────────────────────────────────────
# Errors
# ──────────────────────────────────────────────

class MnistError(Exception):
    def __init__(self, path: Path, message: str):
        self.path = Path(path)
        super().__init__(f"{self.path}: {message}")


class MnistFileMissing(MnistError, FileNotFoundError):
    pass


class MnistMagicError(MnistError):
    pass


class MnistTruncatedError(MnistError):
    pass


# ──────────────────────────────────────────────
# IDX parsing
# ──────────────────────────────────────────────

def _resolve(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise MnistFileMissing(directory / stem, "not found (also looked for .gz)")


def read_idx(path: Path, expected_magic: int | None = None) -> np.ndarray:
    """Parse one unsigned-byte IDX file: big-endian magic, big-endian dims, raw payload."""
    path = Path(path)
    if not path.exists():
        raise MnistFileMissing(path, "not found")
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rb") as f:
            data = f.read()
    except (OSError, EOFError) as e:
        raise MnistTruncatedError(path, f"unreadable ({e})") from e

    if len(data) < 4:
        raise MnistTruncatedError(path, f"only {len(data)} bytes, no header")
    magic = int.from_bytes(data[:4], "big")
    allowed = (expected_magic,) if expected_magic is not None else (IMAGES_MAGIC, LABELS_MAGIC)
    if magic not in allowed:
        raise MnistMagicError(path, f"magic number {magic}, expected one of {list(allowed)}")

    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise MnistTruncatedError(path, f"header needs {header} bytes, file has {len(data)}")
    dims = tuple(int(n) for n in np.frombuffer(data, dtype=">u4", count=ndim, offset=4))
    payload = int(np.prod(dims))
    if len(data) < header + payload:
        raise MnistTruncatedError(path, f"payload needs {payload} bytes, file has {len(data) - header}")
    return np.frombuffer(data, dtype=np.uint8, count=payload, offset=header).reshape(dims)


def _load_split(directory: Path, images_key: str, labels_key: str) -> Dataset:
    images = read_idx(_resolve(directory, FILES[images_key]), IMAGES_MAGIC)
    labels = read_idx(_resolve(directory, FILES[labels_key]), LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise MnistTruncatedError(directory / FILES[labels_key],
                                  f"{labels.shape[0]} labels for {images.shape[0]} images")
    return Dataset(images=images.astype(np.float64) / 255.0, labels=labels.astype(np.int64))


def load_mnist(directory: Path) -> tuple[Dataset, Dataset]:
    """(train, test) with pixels scaled to [0, 1]."""
    directory = Path(directory)
    train = _load_split(directory, "train_images", "train_labels")
    test = _load_split(directory, "test_images", "test_labels")
    log.info(f"Loaded MNIST from {directory}: {len(train):,} train / {len(test):,} test")
    return train, test


# ──────────────────────────────────────────────
# Download
# ──────────────────────────────────────────────

def _download(url: str, target: Path):
    """Stream url into target with retry logic; partial files never replace target."""
    part = target.with_name(target.name + ".part")
    for attempt in range(1, MAX_RETRY + 1):
        try:
            with requests.get(url, stream=True, timeout=TIMEOUT) as resp:
                resp.raise_for_status()
                total = int(resp.headers.get("content-length", 0)) or None
                with open(part, "wb") as f, tqdm(total=total, unit="B", unit_scale=True,
                                                  desc=target.name, leave=False) as pbar:
                    for chunk in resp.iter_content(chunk_size=CHUNK_SIZE):
                        f.write(chunk)
                        pbar.update(len(chunk))
            part.replace(target)
            return
        except requests.RequestException as e:
            wait = 2 ** attempt
            log.warning(f"{url} attempt {attempt}/{MAX_RETRY} failed: {e}. Retrying in {wait}s...")
            if attempt == MAX_RETRY:
                part.unlink(missing_ok=True)
                raise
            time.sleep(wait)


def fetch_mnist(directory: Path, base_url: str = BASE_URL) -> list[Path]:
    """Download the four gzip archives into directory, skipping those already present."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem in FILES.values():
        target = directory / f"{stem}.gz"
        if target.exists() or (directory / stem).exists():
            log.info(f"{stem} already present, skipping.")
        else:
            log.info(f"Downloading {stem}.gz ...")
            _download(base_url + f"{stem}.gz", target)
        paths.append(target if target.exists() else directory / stem)
    return paths


if __name__ == "__main__":
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%H:%M:%S",
    )
    parser = argparse.ArgumentParser(description="MNIST download and check")
    parser.add_argument("--dir",   type=Path, default=Path("data/mnist"), help="Target directory")
    parser.add_argument("--check", action="store_true", help="Only parse the files already present")
    args = parser.parse_args()

    if not args.check:
        fetch_mnist(args.dir)
    load_mnist(args.dir)
