"""
Block-fading Rayleigh channel and pilot-phase signals.

One coherence block carries the pilots and the whole model update, so a
ChannelRealization is drawn once per round and reused for both phases.
"""
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger("otafl.radio")


# ──────────────────────────────────────────────
# Helpers
# ──────────────────────────────────────────────

def complex_gaussian(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """CN(0, variance) entries: variance/2 on each real/imaginary part."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def db_to_linear(db) -> np.ndarray:
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


# ──────────────────────────────────────────────
# Types
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class FadingProfile:
    """Large-scale fading coefficients beta_k (linear power gains)."""
    betas: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=float).reshape(-1)
        if betas.size == 0:
            raise ValueError("FadingProfile needs at least one client")
        if not np.all(np.isfinite(betas)) or np.any(betas < 0):
            raise ValueError(f"betas must be finite and non-negative, got {betas}")
        object.__setattr__(self, "betas", betas)

    @property
    def K(self) -> int:
        return self.betas.size

    @property
    def beta_min(self) -> float:
        return float(self.betas.min())

    @classmethod
    def from_db(cls, betas_db) -> "FadingProfile":
        return cls(db_to_linear(betas_db))

    @classmethod
    def equal(cls, K: int, beta: float = 1.0) -> "FadingProfile":
        return cls(np.full(K, float(beta)))

    def require_positive(self):
        if self.beta_min <= 0:
            raise ValueError(f"operation needs beta_min > 0, got {self.beta_min}")


@dataclass(frozen=True)
class ChannelRealization:
    G:       np.ndarray          # M x K, column k is g_k
    profile: FadingProfile

    @property
    def M(self) -> int:
        return self.G.shape[0]

    @property
    def K(self) -> int:
        return self.G.shape[1]

    @property
    def H(self) -> np.ndarray:
        """Normalized channels h_k = g_k / sqrt(beta_k)."""
        self.profile.require_positive()
        return self.G / np.sqrt(self.profile.betas)[None, :]


@dataclass(frozen=True)
class PilotSet:
    Phi: np.ndarray              # tau_p x K, orthonormal columns

    @property
    def tau_p(self) -> int:
        return self.Phi.shape[0]

    @property
    def K(self) -> int:
        return self.Phi.shape[1]


# ──────────────────────────────────────────────
# Operations
# ──────────────────────────────────────────────

def generate_channel(M: int, K: int, profile: FadingProfile,
                     rng: np.random.Generator) -> ChannelRealization:
    """i.i.d. Rayleigh fading, g_k ~ CN(0, beta_k I_M), columns independent."""
    if M < 1 or K < 1:
        raise ValueError(f"need M >= 1 and K >= 1, got M={M}, K={K}")
    if profile.K != K:
        raise ValueError(f"profile has {profile.K} entries but K={K}")
    G = complex_gaussian(rng, (M, K)) * np.sqrt(profile.betas)[None, :]
    return ChannelRealization(G=G, profile=profile)


def _dft_columns(tau_p: int, count: int) -> np.ndarray:
    n = np.arange(tau_p)[:, None]
    k = np.arange(count)[None, :]
    return np.exp(-2j * np.pi * n * k / tau_p) / np.sqrt(tau_p)


def make_orthogonal_pilots(tau_p: int, K: int) -> PilotSet:
    """First K columns of the unitary tau_p-point DFT matrix."""
    if K < 1:
        raise ValueError(f"need K >= 1, got {K}")
    if tau_p < K:
        raise ValueError(f"orthogonal pilots need tau_p >= K, got tau_p={tau_p}, K={K}")
    return PilotSet(Phi=_dft_columns(tau_p, K))


def make_common_pilot(tau_p: int) -> np.ndarray:
    """Unit-norm pilot shared by every client in the sum-channel scheme."""
    if tau_p < 1:
        raise ValueError(f"need tau_p >= 1, got {tau_p}")
    return _dft_columns(tau_p, 1)[:, 0]


def _pilot_noise(M, tau_p, rng, noise):
    if not noise:
        return np.zeros((M, tau_p), dtype=complex)
    return complex_gaussian(rng, (M, tau_p))


def pilot_rx_orthogonal(channel: ChannelRealization, pilots: PilotSet, rho: float,
                        rng: np.random.Generator, noise: bool = True) -> np.ndarray:
    """Y_p = sum_k sqrt(rho tau_p) g_k phi_k^H + N_p."""
    if pilots.K != channel.K:
        raise ValueError(f"pilot set has {pilots.K} columns, channel has K={channel.K}")
    tau_p = pilots.tau_p
    Y = np.sqrt(rho * tau_p) * channel.G @ pilots.Phi.conj().T
    return Y + _pilot_noise(channel.M, tau_p, rng, noise)


def pilot_rx_sum(channel: ChannelRealization, phi: np.ndarray, rho: float,
                 profile: FadingProfile, rng: np.random.Generator,
                 noise: bool = True) -> np.ndarray:
    """
    All clients send the same pilot phi, client k scaling its power by
    beta_min / beta_k so the base station sees sum_k sqrt(rho tau_p beta_min) h_k.
    """
    profile.require_positive()
    if profile.K != channel.K:
        raise ValueError(f"profile has {profile.K} entries, channel has K={channel.K}")
    phi = np.asarray(phi).reshape(-1)
    tau_p = phi.size
    amplitude = np.sqrt(rho * tau_p * profile.beta_min / profile.betas)
    superposed = channel.G @ amplitude
    Y = np.outer(superposed, phi.conj())
    return Y + _pilot_noise(channel.M, tau_p, rng, noise)
