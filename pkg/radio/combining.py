"""
Receive combining at the edge server.

blue_combine   zero-forcing on the individual estimates (unbiased given G_hat)
sum_combine    conjugate combining with the sum-channel estimate
genie_aggregate  ideal reference with the clients' exact updates
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from radio.airlink import PowerAllocation
from radio.estimation import PerClientEstimate, SumEstimate

log = logging.getLogger("otafl.radio")

MAX_CONDITION = 1e12


class CombiningError(RuntimeError):
    """The server cannot separate or scale the received block this round."""


@dataclass(frozen=True)
class CombinedPerClient:
    x_hats: np.ndarray           # K x T, row k is x_hat_k
    silent: np.ndarray           # K booleans; silent rows are zero


@dataclass(frozen=True)
class CombinedSum:
    x_hat: np.ndarray
    c:     float


def blue_combine(Y: np.ndarray, est: PerClientEstimate, alloc: PowerAllocation,
                 rho: float) -> CombinedPerClient:
    G_hat = est.G_hat
    M, K = G_hat.shape
    if Y.shape[0] != M:
        raise ValueError(f"Y has {Y.shape[0]} rows, estimate has M={M}")
    if M < K:
        raise CombiningError(f"zero-forcing needs M >= K, got M={M}, K={K}")
    cond = np.linalg.cond(G_hat)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise CombiningError(f"channel estimate is rank deficient (condition number {cond:.3g})")

    # (G^H G)^-1 G^H Y as a least-squares solve of G_hat X = Y
    solved, *_ = scipy.linalg.lstsq(G_hat, Y)

    silent = alloc.silent
    x_hats = np.zeros_like(solved)
    gain = np.sqrt(alloc.etas[~silent] * rho)
    x_hats[~silent] = solved[~silent] / gain[:, None]
    return CombinedPerClient(x_hats=x_hats, silent=silent)


def sum_combine(Y: np.ndarray, est: SumEstimate, eta: float, rho: float,
                M: int, K: int) -> CombinedSum:
    """x_hat = c (h_hat_sum^H Y)^T with c = K / (M sqrt(eta rho) gamma_bar)."""
    if eta <= 0 or rho <= 0:
        raise CombiningError(f"no transmission to combine (eta={eta}, rho={rho})")
    if est.gamma_bar <= 0:
        raise CombiningError(f"sum-channel estimate carries no information (gamma_bar={est.gamma_bar})")
    if Y.shape[0] != est.h_hat_sum.size:
        raise ValueError(f"Y has {Y.shape[0]} rows, estimate has length {est.h_hat_sum.size}")
    c = K / (M * np.sqrt(eta * rho) * est.gamma_bar)
    return CombinedSum(x_hat=c * (est.h_hat_sum.conj() @ Y), c=float(c))


def genie_aggregate(updates: Sequence[np.ndarray], weights) -> np.ndarray:
    """sum_k w_k delta_theta_k, bypassing channel, sparsification and recovery."""
    weights = np.asarray(weights, dtype=float)
    stacked = np.vstack([np.asarray(u, dtype=float) for u in updates])
    if stacked.shape[0] != weights.size:
        raise ValueError(f"{stacked.shape[0]} updates but {weights.size} weights")
    return weights @ stacked
