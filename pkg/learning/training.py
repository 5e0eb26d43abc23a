"""
Federated-averaging building blocks: local SGD on one client's shard,
the global step with its decaying learning rate, and test evaluation.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from learning.network import NUM_CLASSES, Network, log_softmax


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray           # N x 28 x 28, values in [0, 1]
    labels: np.ndarray           # N ints in [0, 9]

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.images) != labels.size:
            raise ValueError(f"{len(self.images)} images but {labels.size} labels")
        if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
            raise ValueError(f"labels must lie in [0, {NUM_CLASSES - 1}]")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx])

    @property
    def digits(self) -> list[int]:
        return sorted(np.unique(self.labels).tolist())


@dataclass(frozen=True)
class LocalUpdate:
    delta: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.delta)):
            raise ValueError("local update has non-finite entries")


def decaying_lr_schedule(t: int) -> float:
    """alpha_t = 1 / (3 (1e-4 t + 1))."""
    return 1.0 / (3.0 * (1e-4 * t + 1.0))


def _batches(n: int, iters: int, batch_size: int, rng: np.random.Generator):
    """Without replacement inside a pass over the shard, reshuffled per pass."""
    if batch_size > n:
        for _ in range(iters):
            yield rng.integers(0, n, size=batch_size)
        return
    order = rng.permutation(n)
    pos = 0
    for _ in range(iters):
        if pos + batch_size > n:
            order = rng.permutation(n)
            pos = 0
        yield order[pos:pos + batch_size]
        pos += batch_size


def local_sgd(net: Network, theta_in: np.ndarray, shard: Dataset, iters: int,
              batch_size: int, lr: float, rng: np.random.Generator) -> LocalUpdate:
    """iters steps of theta <- theta - lr grad F_k(theta); returns theta_out - theta_in."""
    if len(shard) == 0:
        raise ValueError("local_sgd needs a nonempty shard")
    theta = np.array(theta_in, dtype=np.float64)
    for idx in _batches(len(shard), iters, batch_size, rng):
        _, grad = net.loss_and_grad(theta, shard.images[idx], shard.labels[idx])
        theta -= lr * grad
    return LocalUpdate(delta=theta - theta_in)


def global_update(theta: np.ndarray, delta_hat: np.ndarray, t: int,
                  lr_schedule: Callable[[int], float] = decaying_lr_schedule) -> np.ndarray:
    """theta(t+1) = theta(t) + alpha_t * delta_hat(t)."""
    theta = np.asarray(theta, dtype=np.float64)
    delta_hat = np.asarray(delta_hat, dtype=np.float64)
    if theta.shape != delta_hat.shape:
        raise ValueError(f"theta {theta.shape} and update {delta_hat.shape} differ")
    return theta + lr_schedule(t) * delta_hat


def evaluate(theta: np.ndarray, net: Network, test_set: Dataset,
             batch_size: int = 1000) -> tuple[float, float]:
    """Top-1 accuracy (argmax ties go to the lowest class) and mean cross-entropy."""
    n = len(test_set)
    if n == 0:
        raise ValueError("evaluate needs a nonempty test set")
    correct, total_loss = 0, 0.0
    for start in range(0, n, batch_size):
        images = test_set.images[start:start + batch_size]
        labels = test_set.labels[start:start + batch_size]
        logits = net.logits(theta, images)
        logp = log_softmax(logits)
        correct += int((logits.argmax(axis=1) == labels).sum())
        total_loss += float(-logp[np.arange(labels.size), labels].sum())
    return correct / n, total_loss / n
