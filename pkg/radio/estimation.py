"""
MMSE channel estimation for the two pilot schemes, plus closed-form
estimate qualities and the sum-channel MSE comparison.
"""
from dataclasses import dataclass

import numpy as np

from radio.channel import FadingProfile, PilotSet


@dataclass(frozen=True)
class PerClientEstimate:
    G_hat:  np.ndarray           # M x K
    gammas: np.ndarray           # per-antenna mean-square of each g_hat_k


@dataclass(frozen=True)
class SumEstimate:
    h_hat_sum: np.ndarray        # length M
    gamma_bar: float


# ──────────────────────────────────────────────
# Closed forms
# ──────────────────────────────────────────────

def per_client_quality(profile: FadingProfile, rho: float, tau_p: int) -> np.ndarray:
    """gamma_k = rho tau_p beta_k^2 / (1 + rho tau_p beta_k)."""
    snr = rho * tau_p * profile.betas
    return snr * profile.betas / (1.0 + snr)


def sum_quality(profile: FadingProfile, rho: float, tau_p: int, K: int) -> float:
    """gamma_bar = rho tau_p beta_min K^2 / (1 + rho tau_p beta_min K)."""
    snr = rho * tau_p * profile.beta_min
    return float(snr * K * K / (1.0 + snr * K))


def mse_sum_from_orthogonal(profile: FadingProfile, rho: float, tau_p: int,
                            K: int) -> float:
    """Per-antenna MSE of sum_k g_hat_k as an estimate of sum_k g_k."""
    if profile.K != K:
        raise ValueError(f"profile has {profile.K} entries but K={K}")
    return float(np.sum(profile.betas / (1.0 + rho * tau_p * profile.betas)))


def mse_sum_from_common_pilot(profile: FadingProfile, rho: float, tau_p: int,
                              K: int) -> float:
    """
    Per-antenna MSE of sqrt(beta_min) h_hat_sum as an estimate of the
    gain-scaled sum channel. With equal betas this is K beta / (1 + rho tau_p beta K).
    """
    return profile.beta_min * (K - sum_quality(profile, rho, tau_p, K))


# ──────────────────────────────────────────────
# Estimators
# ──────────────────────────────────────────────

def estimate_per_client(Y_p: np.ndarray, pilots: PilotSet, rho: float,
                        profile: FadingProfile) -> PerClientEstimate:
    """g_hat_k = sqrt(rho tau_p) beta_k / (1 + rho tau_p beta_k) * Y_p phi_k."""
    if Y_p.shape[1] != pilots.tau_p:
        raise ValueError(f"Y_p has {Y_p.shape[1]} columns, pilots are {pilots.tau_p} long")
    if profile.K != pilots.K:
        raise ValueError(f"profile has {profile.K} entries, pilot set has {pilots.K}")
    tau_p = pilots.tau_p
    shrink = np.sqrt(rho * tau_p) * profile.betas / (1.0 + rho * tau_p * profile.betas)
    G_hat = (Y_p @ pilots.Phi) * shrink[None, :]
    return PerClientEstimate(G_hat=G_hat, gammas=per_client_quality(profile, rho, tau_p))


def estimate_sum(Y_p: np.ndarray, phi: np.ndarray, rho: float,
                 profile: FadingProfile, K: int) -> SumEstimate:
    """h_hat_sum = sqrt(rho tau_p beta_min) K / (1 + rho tau_p beta_min K) * Y_p phi."""
    phi = np.asarray(phi).reshape(-1)
    if Y_p.shape[1] != phi.size:
        raise ValueError(f"Y_p has {Y_p.shape[1]} columns, pilot is {phi.size} long")
    tau_p = phi.size
    snr = rho * tau_p * profile.beta_min
    shrink = np.sqrt(snr) * K / (1.0 + snr * K)
    return SumEstimate(h_hat_sum=shrink * (Y_p @ phi),
                       gamma_bar=sum_quality(profile, rho, tau_p, K))
