"""
Uplink data phase: power control policies and the superposed received block.
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from radio.channel import ChannelRealization, FadingProfile, complex_gaussian

log = logging.getLogger("otafl.radio")


class SilentRoundError(RuntimeError):
    """No client has anything to send under the coordinated power rule."""


@dataclass(frozen=True)
class PowerAllocation:
    etas: np.ndarray

    @property
    def silent(self) -> np.ndarray:
        return self.etas == 0


def _energies(x_list: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([float(np.vdot(x, x).real) for x in x_list])


def power_full(x_list: Sequence[np.ndarray], T: int) -> PowerAllocation:
    """Every client spends the whole budget: eta_k = T / ||x_k||^2."""
    energy = _energies(x_list)
    etas = np.zeros(energy.size)
    active = energy > 0
    etas[active] = T / energy[active]
    if not active.all():
        log.debug(f"Silent clients this round: {np.flatnonzero(~active).tolist()}")
    return PowerAllocation(etas=etas)


def power_sum(x_list: Sequence[np.ndarray], weights, profile: FadingProfile,
              T: int) -> tuple[PowerAllocation, float]:
    """
    Equal received gain for the sum-channel receiver: eta_k = eta w_k^2 / beta_k,
    with eta set so the most demanding client meets ||sqrt(eta_k) x_k||^2 = T.
    """
    profile.require_positive()
    weights = np.asarray(weights, dtype=float)
    energy = _energies(x_list)
    if weights.size != energy.size or profile.K != energy.size:
        raise ValueError(f"{energy.size} vectors, {weights.size} weights, "
                         f"{profile.K} fading coefficients")
    demand = weights ** 2 / profile.betas * energy
    peak = demand.max()
    if peak <= 0:
        raise SilentRoundError("every client has a zero update; nothing to transmit")
    eta = T / peak
    return PowerAllocation(etas=eta * weights ** 2 / profile.betas), float(eta)


def transmit(x_list: Sequence[np.ndarray], alloc: PowerAllocation,
             channel: ChannelRealization, rho: float, rng: np.random.Generator,
             noise: bool = True) -> np.ndarray:
    """Y = sum_k sqrt(rho eta_k) g_k x_k^T + N, N with CN(0, 1) entries."""
    X = np.vstack([np.asarray(x).reshape(1, -1) for x in x_list])
    if X.shape[0] != channel.K or alloc.etas.size != channel.K:
        raise ValueError(f"{X.shape[0]} vectors and {alloc.etas.size} etas for K={channel.K}")
    Y = channel.G @ (np.sqrt(rho * alloc.etas)[:, None] * X)
    if noise:
        Y = Y + complex_gaussian(rng, Y.shape)
    return Y
