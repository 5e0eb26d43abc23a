"""
Sparse recovery of the transmitted updates:

    min ||A x - y||^2  s.t.  ||x||_0 <= budget

solved by iterative hard thresholding (unit step, valid because ||A|| < 1),
warm-started from plain matching pursuit.
"""
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from codec.coding import MeasurementMatrix, make_measurement_matrix, top_indices
from radio.channel import complex_gaussian

log = logging.getLogger("otafl.codec")

MP_RESIDUAL_FLOOR = 1e-10
IHT_TOL = 1e-6
IHT_MAX_ITER = 500


@dataclass(frozen=True)
class RecoveryProblem:
    A:               MeasurementMatrix
    y:               np.ndarray
    sparsity_budget: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex).reshape(-1)
        if self.sparsity_budget < 1:
            raise ValueError(f"sparsity budget must be >= 1, got {self.sparsity_budget}")
        if not self.A.norm < 1:
            raise ValueError(f"IHT needs ||A||_2 < 1, got {self.A.norm}")
        if y.size != self.A.T:
            raise ValueError(f"y has length {y.size}, A has {self.A.T} rows")
        object.__setattr__(self, "y", y)

    def objective(self, x: np.ndarray) -> float:
        r = self.A.A @ x - self.y
        return float(np.vdot(r, r).real)


@dataclass
class RecoveryResult:
    x:          np.ndarray
    objective:  float
    iterations: int
    converged:  bool
    history:    list[float] = field(default_factory=list)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x)


def hard_threshold(x: np.ndarray, budget: int) -> np.ndarray:
    """Keep the budget largest |x_i| (ties to the lower index)."""
    if budget >= x.size:
        return x.copy()
    out = np.zeros_like(x)
    keep = top_indices(x, budget)
    out[keep] = x[keep]
    return out


def matching_pursuit_warm_start(prob: RecoveryProblem) -> np.ndarray:
    A = prob.A.A
    col_norms = np.linalg.norm(A, axis=0)
    usable = col_norms > 0
    safe_norms = np.where(usable, col_norms, 1.0)

    x = np.zeros(A.shape[1], dtype=complex)
    residual = prob.y.copy()
    selected: set[int] = set()
    # each step removes the residual's projection on one atom; the cap only
    # guards against an atom being re-picked forever
    for _ in range(10 * prob.sparsity_budget + 10):
        if np.linalg.norm(residual) < MP_RESIDUAL_FLOOR:
            break
        inner = A.conj().T @ residual
        score = np.where(usable, np.abs(inner) / safe_norms, 0.0)
        j = int(np.argmax(score))
        if score[j] == 0:
            break
        coef = inner[j] / safe_norms[j] ** 2
        x[j] += coef
        residual = residual - coef * A[:, j]
        selected.add(j)
        if len(selected) == prob.sparsity_budget:
            break
    return x


def iht_solve(prob: RecoveryProblem, warm_start: np.ndarray | None = None,
              tol: float = IHT_TOL, max_iter: int = IHT_MAX_ITER) -> RecoveryResult:
    """x <- H_budget(x + A^H (y - A x)) until the relative change drops below tol."""
    A = prob.A.A
    budget = prob.sparsity_budget
    if warm_start is None:
        x = np.zeros(A.shape[1], dtype=complex)
    else:
        x = hard_threshold(np.asarray(warm_start, dtype=complex), budget)

    history = [prob.objective(x)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        x_new = hard_threshold(x + A.conj().T @ (prob.y - A @ x), budget)
        change = np.linalg.norm(x_new - x)
        scale = np.linalg.norm(x_new)
        x = x_new
        history.append(prob.objective(x))
        if change <= tol * scale or change == 0:
            converged = True
            break
    if not converged:
        log.debug(f"IHT hit the {max_iter}-iteration cap (objective {history[-1]:.3e})")
    return RecoveryResult(x=x, objective=history[-1], iterations=iterations,
                          converged=converged, history=history)


def recover(prob: RecoveryProblem) -> RecoveryResult:
    return iht_solve(prob, matching_pursuit_warm_start(prob))


# ──────────────────────────────────────────────
# Solver-quality harnesses
# ──────────────────────────────────────────────

def best_support_objective(prob: RecoveryProblem) -> float:
    """Exhaustive search over all supports of size budget (tiny problems only)."""
    A = prob.A.A
    best = float(np.vdot(prob.y, prob.y).real)
    for support in itertools.combinations(range(A.shape[1]), prob.sparsity_budget):
        sub = A[:, support]
        coef, *_ = scipy.linalg.lstsq(sub, prob.y)
        r = sub @ coef - prob.y
        best = min(best, float(np.vdot(r, r).real))
    return best


def recovery_rate_experiment(T: int, half_d: int, S: int, trials: int,
                             noise_level: float = 0.0,
                             rng: np.random.Generator | None = None,
                             kind: str = "gaussian") -> float:
    """Fraction of trials in which recover() finds the exact support of an S-sparse signal."""
    rng = rng if rng is not None else np.random.default_rng(0)
    hits = 0
    for _ in range(trials):
        support = np.sort(rng.choice(half_d, size=min(S, half_d), replace=False))
        x_true = np.zeros(half_d, dtype=complex)
        x_true[support] = complex_gaussian(rng, support.size)
        A = make_measurement_matrix(T, half_d, rng, kind=kind)
        y = A.A @ x_true
        if noise_level > 0:
            y = y + complex_gaussian(rng, T, noise_level ** 2)
        result = recover(RecoveryProblem(A=A, y=y, sparsity_budget=S))
        if np.array_equal(result.support, support):
            hits += 1
    return hits / trials
