"""
One federated round per call, for each aggregation method.

    blue      per-client sparsity, per-client matrices, full power,
              individual MMSE estimates, zero-forcing, per-client recovery
    sum-same  one shared pattern (chosen by a random client), one matrix,
              coordinated power, sum-channel estimate, one recovery of budget S
    sum-diff  as sum-same but every client sparsifies on its own; budget K*S
    genie     exact weighted average of the local updates

Every random draw comes from its own substream keyed by (seed, round,
client, role), so a replay with the same seed reproduces the round bit for
bit and changing one component leaves the others' draws untouched.

A round either commits (theta and every residual advance together) or
aborts on CombiningError / SilentRoundError and leaves both untouched.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from codec.coding import (ClientResidual, MeasurementMatrix, SparseUpdate,
                          choose_pattern_from_client, encode, make_measurement_matrix,
                          project_onto_pattern, sparsify, split, unsplit)
from codec.recovery import RecoveryProblem, recover
from harness.partition import paired_beta_profile, partition_heterogeneous
from harness.schemas import ExperimentConfig, MetricsRow
from learning.network import Network, build_cnn, build_mlp
from learning.training import Dataset, decaying_lr_schedule, evaluate, global_update, local_sgd
from radio.airlink import SilentRoundError, power_full, power_sum, transmit
from radio.channel import (ChannelRealization, FadingProfile, generate_channel,
                           make_common_pilot, make_orthogonal_pilots,
                           pilot_rx_orthogonal, pilot_rx_sum)
from radio.combining import CombiningError, blue_combine, genie_aggregate, sum_combine
from radio.estimation import (PerClientEstimate, SumEstimate, estimate_per_client,
                              estimate_sum)

log = logging.getLogger("otafl.harness")

ROLES = {
    "sgd":         0,
    "matrix":      1,
    "channel":     2,
    "pilot_noise": 3,
    "data_noise":  4,
    "chooser":     5,
    "init":        6,
}
SERVER = 1 << 20                 # client slot for server-side draws


def substream(seed: int, t: int, client: int, role: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t, client, ROLES[role])))


# ──────────────────────────────────────────────
# State
# ──────────────────────────────────────────────

@dataclass
class RoundTrace:
    t:               int
    method:          str
    sparsity_budget: int = 0
    matrices_used:   int = 0
    chooser:         Optional[int] = None
    aborted:         Optional[str] = None
    x_full:          list[np.ndarray] = field(default_factory=list)
    sparse:          list[SparseUpdate] = field(default_factory=list)

    @property
    def supports(self) -> list[np.ndarray]:
        return [s.support for s in self.sparse]


@dataclass
class FederatedState:
    config:      ExperimentConfig
    net:         Network
    theta:       np.ndarray
    shards:      list[Dataset]
    test_set:    Dataset
    profile:     FadingProfile
    residuals:   list[ClientResidual]
    t:           int = 1
    trace:       Optional[RoundTrace] = None
    lr_schedule: Callable[[int], float] = decaying_lr_schedule

    @classmethod
    def create(cls, config: ExperimentConfig, train: Dataset, test: Dataset,
               lr_schedule: Callable[[int], float] = decaying_lr_schedule) -> "FederatedState":
        init_rng = substream(config.seed, 0, SERVER, "init")
        if config.architecture == "cnn":
            net, params = build_cnn(init_rng)
        else:
            net, params = build_mlp(config.mlp_hidden, init_rng)
        shards = partition_heterogeneous(train, config.K)
        profile = paired_beta_profile(config.K, config.beta_db_low, config.beta_db_high)
        half_d = split(params.theta).size
        return cls(
            config=config, net=net, theta=params.theta.copy(), shards=shards,
            test_set=test, profile=profile,
            residuals=[ClientResidual.zeros(half_d) for _ in range(config.K)],
            lr_schedule=lr_schedule,
        )

    @property
    def d(self) -> int:
        return self.theta.size

    @property
    def half_d(self) -> int:
        return (self.d + 1) // 2

    @property
    def S(self) -> int:
        return min(self.config.sparsity(self.half_d), self.half_d)

    @property
    def T(self) -> int:
        return self.config.samples(self.half_d)

    def rng(self, client: int, role: str) -> np.random.Generator:
        return substream(self.config.seed, self.t, client, role)


# ──────────────────────────────────────────────
# Shared steps
# ──────────────────────────────────────────────

def _local_updates(state: FederatedState) -> list[np.ndarray]:
    cfg = state.config
    return [
        local_sgd(state.net, state.theta, shard, cfg.local_iters, cfg.batch_size,
                  cfg.local_lr, state.rng(k, "sgd")).delta
        for k, shard in enumerate(state.shards)
    ]


def _channel(state: FederatedState) -> ChannelRealization:
    return generate_channel(state.config.M, state.config.K, state.profile,
                            state.rng(SERVER, "channel"))


def _finish(state: FederatedState, trace: RoundTrace) -> MetricsRow:
    accuracy, loss = evaluate(state.theta, state.net, state.test_set)
    row = MetricsRow(round=state.t, method=state.config.method, seed=state.config.seed,
                     test_accuracy=accuracy, test_loss=loss, wall_time_seconds=0.0)
    state.trace = trace
    state.t += 1
    return row


def _commit(state: FederatedState, delta_hat: np.ndarray,
            residuals: Optional[list[ClientResidual]], trace: RoundTrace) -> MetricsRow:
    state.theta = global_update(state.theta, delta_hat, state.t, state.lr_schedule)
    if residuals is not None:
        state.residuals = residuals
    return _finish(state, trace)


def _abort(state: FederatedState, trace: RoundTrace, error: Exception) -> MetricsRow:
    trace.aborted = str(error)
    log.warning(f"Round {state.t} ({state.config.method}) aborted: {error}")
    return _finish(state, trace)


# ──────────────────────────────────────────────
# Rounds
# ──────────────────────────────────────────────

def _estimate_per_client(state: FederatedState, channel: ChannelRealization) -> PerClientEstimate:
    cfg = state.config
    if cfg.perfect_csi:
        return PerClientEstimate(G_hat=channel.G, gammas=state.profile.betas.copy())
    pilots = make_orthogonal_pilots(cfg.pilot_len, cfg.K)
    Y_p = pilot_rx_orthogonal(channel, pilots, cfg.rho, state.rng(SERVER, "pilot_noise"),
                              noise=not cfg.noiseless)
    return estimate_per_client(Y_p, pilots, cfg.rho, state.profile)


def _estimate_sum(state: FederatedState, channel: ChannelRealization) -> SumEstimate:
    cfg = state.config
    if cfg.perfect_csi:
        return SumEstimate(h_hat_sum=channel.H.sum(axis=1), gamma_bar=float(cfg.K))
    phi = make_common_pilot(cfg.pilot_len)
    Y_p = pilot_rx_sum(channel, phi, cfg.rho, state.profile, state.rng(SERVER, "pilot_noise"),
                       noise=not cfg.noiseless)
    return estimate_sum(Y_p, phi, cfg.rho, state.profile, cfg.K)


def run_round_blue(state: FederatedState) -> MetricsRow:
    cfg = state.config
    S, T, d = state.S, state.T, state.d
    trace = RoundTrace(t=state.t, method="blue", sparsity_budget=S)

    # clients: nothing below reads another client's data, matrix or power
    carriers: list[np.ndarray] = []
    matrices: list[MeasurementMatrix] = []
    residuals: list[ClientResidual] = []
    for k, delta in enumerate(_local_updates(state)):
        x_full = split(delta)
        sparse, residual = sparsify(x_full, state.residuals[k], S)
        A = make_measurement_matrix(T, state.half_d, state.rng(k, "matrix"), kind=cfg.measurement)
        trace.x_full.append(x_full)
        trace.sparse.append(sparse)
        matrices.append(A)
        residuals.append(residual)
        carriers.append(encode(sparse, A))
    trace.matrices_used = len(matrices)

    # server
    try:
        channel = _channel(state)
        est = _estimate_per_client(state, channel)
        alloc = power_full(carriers, T)
        Y = transmit(carriers, alloc, channel, cfg.rho, state.rng(SERVER, "data_noise"),
                     noise=not cfg.noiseless)
        combined = blue_combine(Y, est, alloc, cfg.rho)
    except CombiningError as e:
        return _abort(state, trace, e)

    updates = np.zeros((cfg.K, d))
    for k in range(cfg.K):
        if combined.silent[k]:
            continue
        result = recover(RecoveryProblem(A=matrices[k], y=combined.x_hats[k], sparsity_budget=S))
        updates[k] = unsplit(result.x, d)
    delta_hat = cfg.weights @ updates
    return _commit(state, delta_hat, residuals, trace)


def run_round_sum(state: FederatedState, same_pattern: bool) -> MetricsRow:
    cfg = state.config
    S, T, d, K = state.S, state.T, state.d, cfg.K
    budget = S if same_pattern else min(K * S, state.half_d)
    trace = RoundTrace(t=state.t, method="sum-same" if same_pattern else "sum-diff",
                       sparsity_budget=budget)

    x_fulls = [split(delta) for delta in _local_updates(state)]
    A = make_measurement_matrix(T, state.half_d, state.rng(SERVER, "matrix"), kind=cfg.measurement)
    trace.matrices_used = 1

    if same_pattern:
        chooser = int(state.rng(SERVER, "chooser").integers(K))
        pattern = choose_pattern_from_client(x_fulls[chooser] + state.residuals[chooser].r, S)
        trace.chooser = chooser
        coded = [project_onto_pattern(x, state.residuals[k], pattern) for k, x in enumerate(x_fulls)]
    else:
        coded = [sparsify(x, state.residuals[k], S) for k, x in enumerate(x_fulls)]
    trace.x_full = x_fulls
    trace.sparse = [sparse for sparse, _ in coded]
    residuals = [residual for _, residual in coded]
    carriers = [encode(sparse, A) for sparse in trace.sparse]

    try:
        alloc, eta = power_sum(carriers, cfg.weights, state.profile, T)
        channel = _channel(state)
        est = _estimate_sum(state, channel)
        Y = transmit(carriers, alloc, channel, cfg.rho, state.rng(SERVER, "data_noise"),
                     noise=not cfg.noiseless)
        combined = sum_combine(Y, est, eta, cfg.rho, cfg.M, K)
    except (CombiningError, SilentRoundError) as e:
        return _abort(state, trace, e)

    result = recover(RecoveryProblem(A=A, y=combined.x_hat, sparsity_budget=budget))
    return _commit(state, unsplit(result.x, d), residuals, trace)


def run_round_genie(state: FederatedState) -> MetricsRow:
    trace = RoundTrace(t=state.t, method="genie")
    delta_hat = genie_aggregate(_local_updates(state), state.config.weights)
    return _commit(state, delta_hat, None, trace)


def run_round(state: FederatedState) -> MetricsRow:
    """Dispatch on config.method; wall time is filled in only when record_timing is set."""
    start = time.perf_counter()
    method = state.config.method
    if method == "blue":
        row = run_round_blue(state)
    elif method == "sum-same":
        row = run_round_sum(state, same_pattern=True)
    elif method == "sum-diff":
        row = run_round_sum(state, same_pattern=False)
    elif method == "genie":
        row = run_round_genie(state)
    else:
        raise ValueError(f"unknown method: {method}")
    elapsed = time.perf_counter() - start
    log.debug(f"Round {row.round} {method}: acc={row.test_accuracy:.4f} "
              f"loss={row.test_loss:.4f} ({elapsed:.2f}s)")
    if state.config.record_timing:
        row = row.model_copy(update={"wall_time_seconds": elapsed})
    return row
