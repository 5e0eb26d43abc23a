"""
Client-side update encoding.

    delta_theta --SPLIT--> x_full --(+ r_k, top-S)--> x_sparse --A_k--> x_k

The residual r_k keeps whatever sparsification dropped, so that
x_full + r_old == densify(x_sparse) + r_new holds exactly every round.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

log = logging.getLogger("otafl.codec")

NORM_MARGIN = 1.01
DENSE_GRAM_LIMIT = 400         # above this, Lanczos instead of forming the Gram matrix


# ──────────────────────────────────────────────
# Types
# ──────────────────────────────────────────────

@dataclass(frozen=True)
class SparseUpdate:
    support: np.ndarray          # strictly increasing indices (0-based)
    values:  np.ndarray          # complex values on the support
    S:       int
    half_d:  int

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64).reshape(-1)
        values = np.asarray(self.values, dtype=complex).reshape(-1)
        if support.size != values.size:
            raise ValueError(f"{support.size} indices but {values.size} values")
        if support.size > self.S:
            raise ValueError(f"support of size {support.size} exceeds S={self.S}")
        if support.size and (np.any(np.diff(support) <= 0)
                             or support[0] < 0 or support[-1] >= self.half_d):
            raise ValueError("support must be strictly increasing and inside [0, half_d)")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    def densify(self) -> np.ndarray:
        dense = np.zeros(self.half_d, dtype=complex)
        dense[self.support] = self.values
        return dense


@dataclass(frozen=True)
class ClientResidual:
    r: np.ndarray

    @classmethod
    def zeros(cls, half_d: int) -> "ClientResidual":
        return cls(np.zeros(half_d, dtype=complex))


@dataclass(frozen=True)
class MeasurementMatrix:
    A:    np.ndarray             # T x half_d
    norm: float                  # spectral norm as constructed

    @property
    def T(self) -> int:
        return self.A.shape[0]

    @property
    def half_d(self) -> int:
        return self.A.shape[1]


# ──────────────────────────────────────────────
# Complex packing
# ──────────────────────────────────────────────

def split(delta_theta: np.ndarray) -> np.ndarray:
    """[x]_i = dtheta_i + j dtheta_{i+d/2}; odd d gets one trailing zero."""
    v = np.asarray(delta_theta, dtype=float).reshape(-1)
    if v.size % 2:
        v = np.append(v, 0.0)
    half = v.size // 2
    return v[:half] + 1j * v[half:]


def unsplit(x: np.ndarray, d: int | None = None) -> np.ndarray:
    """Inverse of split; pass the original d to strip the odd-length pad."""
    x = np.asarray(x).reshape(-1)
    v = np.concatenate([x.real, x.imag]).astype(float)
    if d is not None:
        if d not in (v.size, v.size - 1):
            raise ValueError(f"cannot unsplit {x.size} complex entries into d={d}")
        v = v[:d]
    return v


# ──────────────────────────────────────────────
# Sparsification with error feedback
# ──────────────────────────────────────────────

def top_indices(x: np.ndarray, S: int) -> np.ndarray:
    """Sorted indices of the S largest |x|; equal magnitudes keep the lower index."""
    if S < 1:
        raise ValueError(f"sparsity must be >= 1, got {S}")
    order = np.argsort(-np.abs(x), kind="stable")
    return np.sort(order[:S])


def sparsify(x_full: np.ndarray, residual: ClientResidual,
             S: int) -> tuple[SparseUpdate, ClientResidual]:
    carrier = np.asarray(x_full) + residual.r
    keep = top_indices(carrier, S)
    keep = keep[carrier[keep] != 0]
    sparse = SparseUpdate(support=keep, values=carrier[keep], S=S, half_d=carrier.size)
    return sparse, ClientResidual(carrier - sparse.densify())


def choose_pattern_from_client(x_full: np.ndarray, S: int) -> np.ndarray:
    """The chooser's own top-S support, imposed on every client this round."""
    return top_indices(np.asarray(x_full), S)


def project_onto_pattern(x_full: np.ndarray, residual: ClientResidual,
                         pattern: np.ndarray) -> tuple[SparseUpdate, ClientResidual]:
    """Keep the carrier on a fixed support; everything else goes to the residual."""
    carrier = np.asarray(x_full) + residual.r
    pattern = np.asarray(pattern, dtype=np.int64)
    sparse = SparseUpdate(support=pattern, values=carrier[pattern],
                          S=pattern.size, half_d=carrier.size)
    return sparse, ClientResidual(carrier - sparse.densify())


# ──────────────────────────────────────────────
# Measurement matrices
# ──────────────────────────────────────────────

def spectral_norm(A: np.ndarray, dense_limit: int = DENSE_GRAM_LIMIT) -> float:
    """
    Largest singular value. Small problems take the top eigenvalue of the
    smaller Gram matrix; larger ones run Lanczos on A from a fixed start vector.
    """
    A = np.asarray(A)
    n = min(A.shape)
    if n <= dense_limit:
        gram = A @ A.conj().T if A.shape[0] <= A.shape[1] else A.conj().T @ A
        lam = scipy.linalg.eigvalsh(gram, subset_by_index=[n - 1, n - 1])[0]
        return float(np.sqrt(max(lam, 0.0)))
    v0 = np.full(n, 1.0 / np.sqrt(n), dtype=np.result_type(A.dtype, float))
    sigma = scipy.sparse.linalg.svds(A, k=1, v0=v0, return_singular_vectors=False)
    return float(sigma[0])


def normalize_measurement(raw: np.ndarray) -> MeasurementMatrix:
    """A = A_r / (1.01 ||A_r||_2); norm is measured on the returned A."""
    raw = np.asarray(raw, dtype=complex)
    scale = NORM_MARGIN * spectral_norm(raw)
    if scale == 0:
        raise ValueError("cannot normalize an all-zero measurement matrix")
    A = raw / scale
    return MeasurementMatrix(A=A, norm=spectral_norm(A))


def make_measurement_matrix(T: int, half_d: int, rng: np.random.Generator,
                            kind: str = "gaussian") -> MeasurementMatrix:
    """
    gaussian: A = A_r / (1.01 ||A_r||_2), A_r with CN(0, 1) entries.
    unitary:  orthonormal columns (T >= half_d) scaled by 1 / 1.01.
    """
    if T < 1 or half_d < 1:
        raise ValueError(f"need T >= 1 and half_d >= 1, got T={T}, half_d={half_d}")
    raw = rng.standard_normal((T, half_d)) + 1j * rng.standard_normal((T, half_d))
    raw /= np.sqrt(2.0)
    if kind == "gaussian":
        return normalize_measurement(raw)
    if kind == "unitary":
        if T < half_d:
            raise ValueError(f"unitary measurement needs T >= half_d, got T={T}, half_d={half_d}")
        Q, R = np.linalg.qr(raw)
        Q = Q * (np.diag(R) / np.abs(np.diag(R)))[None, :]
        A = Q / NORM_MARGIN
        return MeasurementMatrix(A=A, norm=spectral_norm(A))
    raise ValueError(f"unknown measurement kind: {kind}")


def encode(sparse: SparseUpdate, A: MeasurementMatrix) -> np.ndarray:
    """x = A densify(x_sparse)."""
    if sparse.half_d != A.half_d:
        raise ValueError(f"sparse update has length {sparse.half_d}, A has {A.half_d} columns")
    if sparse.support.size == 0:
        return np.zeros(A.T, dtype=complex)
    return A.A[:, sparse.support] @ sparse.values
