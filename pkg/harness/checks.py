"""
Monte-Carlo and property checks of the physical layer, the codec and the
learning layer. Each check returns a CheckResult; the CLI `validate`
subcommand runs them all and pytest asserts them individually.
"""
import logging
from dataclasses import dataclass

import numpy as np

from codec.recovery import (RecoveryProblem, best_support_objective, recover,
                            recovery_rate_experiment)
from codec.coding import make_measurement_matrix
from harness.partition import paired_beta_profile
from learning.network import build_cnn, build_mlp
from radio.airlink import power_full, power_sum, transmit
from radio.channel import (ChannelRealization, FadingProfile, complex_gaussian, generate_channel,
                           make_common_pilot, make_orthogonal_pilots,
                           pilot_rx_orthogonal, pilot_rx_sum)
from radio.combining import blue_combine, sum_combine
from radio.estimation import (PerClientEstimate, estimate_per_client, estimate_sum,
                              mse_sum_from_common_pilot, mse_sum_from_orthogonal,
                              per_client_quality, sum_quality)

log = logging.getLogger("otafl.harness")

CNN_PARAMETERS = 12810


@dataclass(frozen=True)
class CheckResult:
    name:   str
    passed: bool
    detail: str


def _result(name: str, passed: bool, detail: str) -> CheckResult:
    level = logging.INFO if passed else logging.ERROR
    log.log(level, f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return CheckResult(name=name, passed=bool(passed), detail=detail)


# ── Channel estimation ──────────────────────────

def check_estimation_mse(trials: int = 10_000, M: int = 16, K: int = 4,
                         rho_tau: float = 40.0, tolerance: float = 0.03,
                         seed: int = 1) -> CheckResult:
    """Empirical per-antenna MSE of both estimators against the closed forms."""
    rng = np.random.default_rng(seed)
    tau_p = K
    rho = rho_tau / tau_p
    profile = FadingProfile.equal(K)
    pilots = make_orthogonal_pilots(tau_p, K)
    phi = make_common_pilot(tau_p)

    err_client = np.zeros(K)
    err_sum = 0.0
    for _ in range(trials):
        channel = generate_channel(M, K, profile, rng)
        est = estimate_per_client(pilot_rx_orthogonal(channel, pilots, rho, rng), pilots, rho, profile)
        err_client += np.sum(np.abs(est.G_hat - channel.G) ** 2, axis=0)
        est_sum = estimate_sum(pilot_rx_sum(channel, phi, rho, profile, rng), phi, rho, profile, K)
        err_sum += np.sum(np.abs(est_sum.h_hat_sum - channel.H.sum(axis=1)) ** 2)

    mse_client = err_client / (trials * M)
    mse_sum = err_sum / (trials * M)
    expected_client = profile.betas - per_client_quality(profile, rho, tau_p)
    expected_sum = K - sum_quality(profile, rho, tau_p, K)
    rel_client = float(np.max(np.abs(mse_client / expected_client - 1)))
    rel_sum = abs(mse_sum / expected_sum - 1)
    return _result("estimation_mse", rel_client <= tolerance and rel_sum <= tolerance,
                   f"per-client rel. error {rel_client:.4f}, sum rel. error {rel_sum:.4f}")


def check_factor_k(Ks=(2, 4, 8), trials: int = 2_000, M: int = 16,
                   rho_tau_beta: float = 40.0, seed: int = 2) -> CheckResult:
    """Summed individual estimates are about K times worse than the common-pilot estimate."""
    rng = np.random.default_rng(seed)
    ratios = {}
    for K in Ks:
        tau_p = K
        rho = rho_tau_beta / tau_p
        profile = FadingProfile.equal(K)
        pilots = make_orthogonal_pilots(tau_p, K)
        phi = make_common_pilot(tau_p)
        err_orth = err_common = 0.0
        for _ in range(trials):
            channel = generate_channel(M, K, profile, rng)
            target = channel.G.sum(axis=1)
            est = estimate_per_client(pilot_rx_orthogonal(channel, pilots, rho, rng), pilots, rho, profile)
            err_orth += np.sum(np.abs(est.G_hat.sum(axis=1) - target) ** 2)
            est_sum = estimate_sum(pilot_rx_sum(channel, phi, rho, profile, rng), phi, rho, profile, K)
            err_common += np.sum(np.abs(np.sqrt(profile.beta_min) * est_sum.h_hat_sum - target) ** 2)
        ratios[K] = err_orth / err_common
    passed = all(0.8 * K <= r <= 1.05 * K for K, r in ratios.items())
    closed = {K: mse_sum_from_orthogonal(FadingProfile.equal(K), rho_tau_beta / K, K, K)
              / mse_sum_from_common_pilot(FadingProfile.equal(K), rho_tau_beta / K, K, K) for K in Ks}
    detail = ", ".join(f"K={K}: {ratios[K]:.2f} (closed form {closed[K]:.2f})" for K in Ks)
    return _result("factor_k", passed, detail)


# ── Combining ───────────────────────────────────

def check_blue_unbiased(trials: int = 10_000, M: int = 16, K: int = 4, T: int = 8,
                        rho: float = 100.0, tolerance: float = 0.02,
                        seed: int = 3) -> CheckResult:
    """
    Conditional unbiasedness: with G_hat held fixed, g_k = g_hat_k + e_k,
    e_k ~ CN(0, (beta_k - gamma_k) I), and fresh noise every trial, the mean
    of the zero-forced estimate of each fixed x_k is x_k.
    """
    rng = np.random.default_rng(seed)
    profile = FadingProfile.equal(K)
    pilots = make_orthogonal_pilots(K, K)
    x_list = [complex_gaussian(rng, T) for _ in range(K)]
    alloc = power_full(x_list, T)

    est = estimate_per_client(pilot_rx_orthogonal(generate_channel(M, K, profile, rng), pilots, rho, rng),
                              pilots, rho, profile)
    error_var = profile.betas - est.gammas
    total = np.zeros((K, T), dtype=complex)
    for _ in range(trials):
        G = est.G_hat + complex_gaussian(rng, (M, K), error_var)
        Y = transmit(x_list, alloc, ChannelRealization(G=G, profile=profile), rho, rng)
        total += blue_combine(Y, est, alloc, rho).x_hats
    mean = total / trials
    worst = max(float(np.max(np.abs(mean[k] - x)) / np.sqrt(np.mean(np.abs(x) ** 2)))
                for k, x in enumerate(x_list))
    return _result("blue_unbiased", worst <= tolerance, f"worst per-component error {worst:.4f} x rms")


def check_sum_mean(trials: int = 10_000, M: int = 16, K: int = 4, T: int = 8,
                   rho: float = 100.0, tolerance: float = 0.03, seed: int = 4) -> CheckResult:
    """On average over channels and noise, the sum combiner returns sum_k w_k x_k."""
    rng = np.random.default_rng(seed)
    profile = FadingProfile.equal(K)
    weights = np.full(K, 1.0 / K)
    phi = make_common_pilot(K)
    x_list = [complex_gaussian(rng, T) for _ in range(K)]
    target = weights @ np.vstack(x_list)
    alloc, eta = power_sum(x_list, weights, profile, T)
    total = np.zeros(T, dtype=complex)
    for _ in range(trials):
        channel = generate_channel(M, K, profile, rng)
        est = estimate_sum(pilot_rx_sum(channel, phi, rho, profile, rng), phi, rho, profile, K)
        Y = transmit(x_list, alloc, channel, rho, rng)
        total += sum_combine(Y, est, eta, rho, M, K).x_hat
    rel = float(np.linalg.norm(total / trials - target) / np.linalg.norm(target))
    return _result("sum_mean", rel <= tolerance, f"relative error of the mean {rel:.4f}")


def check_zero_forcing_exact(instances: int = 100, M: int = 16, K: int = 4, T: int = 8,
                             rho: float = 100.0, tolerance: float = 1e-8,
                             seed: int = 5) -> CheckResult:
    """Perfect CSI and no noise: every client's vector comes back to machine precision."""
    rng = np.random.default_rng(seed)
    profile = paired_beta_profile(K)
    worst = 0.0
    for _ in range(instances):
        channel = generate_channel(M, K, profile, rng)
        x_list = [complex_gaussian(rng, T) for _ in range(K)]
        alloc = power_full(x_list, T)
        Y = transmit(x_list, alloc, channel, rho, rng, noise=False)
        est = PerClientEstimate(G_hat=channel.G, gammas=profile.betas)
        x_hats = blue_combine(Y, est, alloc, rho).x_hats
        for k, x in enumerate(x_list):
            worst = max(worst, float(np.linalg.norm(x_hats[k] - x) / np.linalg.norm(x)))
    return _result("zero_forcing_exact", worst <= tolerance, f"worst relative error {worst:.2e}")


# ── Recovery ────────────────────────────────────

def check_recovery_rate(trials: int = 200, S: int = 8, half_d: int = 640,
                        threshold: float = 0.95, seed: int = 6) -> CheckResult:
    rate = recovery_rate_experiment(10 * S, half_d, S, trials, rng=np.random.default_rng(seed))
    return _result("recovery_rate", rate >= threshold,
                   f"exact support in {rate:.1%} of {trials} trials (T={10 * S}, S={S}, d/2={half_d})")


def check_iht_monotone(trials: int = 50, T: int = 40, half_d: int = 200, S: int = 5,
                       noise_level: float = 0.05, seed: int = 7) -> CheckResult:
    """The objective never increases along the iterations, noisy measurements included."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        A = make_measurement_matrix(T, half_d, rng)
        x = np.zeros(half_d, dtype=complex)
        x[rng.choice(half_d, S, replace=False)] = complex_gaussian(rng, S)
        y = A.A @ x + complex_gaussian(rng, T, noise_level ** 2)
        history = np.asarray(recover(RecoveryProblem(A=A, y=y, sparsity_budget=S)).history)
        rises = np.diff(history) / np.maximum(history[:-1], 1e-300)
        worst = max(worst, float(rises.max(initial=0.0)))
    return _result("iht_monotone", worst <= 1e-10, f"largest relative increase {worst:.2e}")


def check_brute_force(trials: int = 100, T: int = 4, half_d: int = 8, S: int = 1,
                      tolerance: float = 1e-8, seed: int = 8) -> CheckResult:
    """On tiny problems the solver reaches the exhaustive-search optimum."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        A = make_measurement_matrix(T, half_d, rng)
        prob = RecoveryProblem(A=A, y=complex_gaussian(rng, T), sparsity_budget=S)
        best = best_support_objective(prob)
        worst = max(worst, (recover(prob).objective - best) / max(1.0, best))
    return _result("brute_force", worst <= tolerance, f"largest objective gap {worst:.2e}")


# ── Learning ────────────────────────────────────

def finite_difference_error(net, theta: np.ndarray, images: np.ndarray, labels: np.ndarray,
                            coordinates: int = 20, eps: float = 1e-6,
                            rng: np.random.Generator | None = None) -> float:
    """Largest relative gap between backprop and central differences on coordinates with |g| > 1e-4."""
    rng = rng if rng is not None else np.random.default_rng(0)
    _, grad = net.loss_and_grad(theta, images, labels)
    candidates = np.flatnonzero(np.abs(grad) > 1e-4)
    picks = rng.choice(candidates, size=min(coordinates, candidates.size), replace=False)
    worst = 0.0
    for i in picks:
        bumped = theta.copy()
        bumped[i] += eps
        up = net.loss(bumped, images, labels)
        bumped[i] -= 2 * eps
        down = net.loss(bumped, images, labels)
        fd = (up - down) / (2 * eps)
        worst = max(worst, abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-6))
    return worst


def check_gradients(tolerance: float = 1e-4, batch: int = 4, seed: int = 9) -> CheckResult:
    rng = np.random.default_rng(seed)
    images = rng.uniform(0.0, 1.0, size=(batch, 28, 28))
    labels = rng.integers(0, 10, size=batch)
    errors = {}
    for name, (net, params) in {"mlp": build_mlp(16, rng), "cnn": build_cnn(rng)}.items():
        errors[name] = finite_difference_error(net, params.theta, images, labels, rng=rng)
    cnn_d = build_cnn()[0].d
    passed = max(errors.values()) < tolerance and cnn_d == CNN_PARAMETERS
    detail = ", ".join(f"{k} {v:.2e}" for k, v in errors.items()) + f", cnn d={cnn_d}"
    return _result("gradients", passed, detail)


# ──────────────────────────────────────────────

def run_all_checks(quick: bool = False) -> list[CheckResult]:
    """quick=True shrinks the Monte-Carlo sizes for a smoke run."""
    scale = 10 if quick else 1
    return [
        check_estimation_mse(trials=10_000 // scale),
        check_factor_k(trials=2_000 // scale),
        check_blue_unbiased(trials=10_000 // scale, tolerance=0.02 * (np.sqrt(scale) if quick else 1)),
        check_sum_mean(trials=10_000 // scale, tolerance=0.03 * (np.sqrt(scale) if quick else 1)),
        check_zero_forcing_exact(),
        check_recovery_rate(trials=200 // scale),
        check_iht_monotone(),
        check_brute_force(),
        check_gradients(),
    ]
