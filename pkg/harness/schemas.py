"""
Pydantic schemas for experiment configuration and per-round metrics.
"""
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, Field, model_validator

Method       = Literal["blue", "sum-same", "sum-diff", "genie"]
Scale        = Literal["desk", "paper"]
Architecture = Literal["mlp", "cnn"]
METHODS: tuple[str, ...] = ("blue", "sum-same", "sum-diff", "genie")
MAX_DIGITS = 10


# ── Experiment configuration ────────────────────────
class ExperimentConfig(BaseModel):
    model_config = {"extra": "forbid"}

    method:       Method = "blue"
    scale:        Scale  = "desk"

    # Radio
    M:            int   = Field(32, ge=1)
    K:            int   = Field(10, ge=2)
    rho_db:       float = 30.0
    tau_p:        Optional[int] = Field(None, ge=1)       # default K
    beta_db_low:  float = -40.0
    beta_db_high: float = 0.0
    perfect_csi:  bool  = False
    noiseless:    bool  = False

    # Encoding
    S:                    Optional[int] = Field(None, ge=1)   # default floor(fraction * d/2)
    T:                    Optional[int] = Field(None, ge=1)   # default samples_per_sparsity * S
    sparsity_fraction:    float = Field(0.005, gt=0, le=1)
    samples_per_sparsity: int   = Field(10, ge=1)
    measurement:          Literal["gaussian", "unitary"] = "gaussian"

    # Learning
    architecture: Architecture = "mlp"
    mlp_hidden:   int   = Field(32, ge=1)
    rounds:       int   = Field(150, ge=1)
    local_iters:  int   = Field(3, ge=1)
    batch_size:   int   = Field(100, ge=1)
    local_lr:     float = Field(0.01, ge=0)

    # Data & output
    seed:          int = Field(0, ge=0)
    train_samples: Optional[int] = Field(2000, ge=1)      # None = every sample of the used digits
    test_samples:  Optional[int] = Field(1000, ge=1)
    mnist_dir:     Path = Path("data/mnist")
    output:        Path = Path("results/metrics.csv")
    record_timing: bool = False

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.K % 2:
            raise ValueError(f"K must be even (clients come in pairs per digit), got {self.K}")
        if self.K // 2 > MAX_DIGITS:
            raise ValueError(f"K={self.K} needs more than {MAX_DIGITS} digits")
        if self.method == "blue" and self.pilot_len < self.K:
            raise ValueError(f"blue needs tau_p >= K, got tau_p={self.pilot_len}, K={self.K}")
        return self

    # ── Derived quantities ──
    @property
    def pilot_len(self) -> int:
        return self.tau_p if self.tau_p is not None else self.K

    @property
    def rho(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)

    @property
    def digits(self) -> list[int]:
        return list(range(self.K // 2))

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.K, 1.0 / self.K)

    def sparsity(self, half_d: int) -> int:
        if self.S is not None:
            return self.S
        return max(1, math.floor(self.sparsity_fraction * half_d))

    def samples(self, half_d: int) -> int:
        if self.T is not None:
            return self.T
        return self.samples_per_sparsity * self.sparsity(half_d)

    @classmethod
    def preset(cls, scale: Scale = "desk", **overrides) -> "ExperimentConfig":
        return cls(**{**PRESETS[scale], **overrides})


PRESETS: dict[str, dict] = {
    "desk": dict(scale="desk", M=32, K=10, rho_db=30.0, architecture="mlp", mlp_hidden=32,
                 train_samples=2000, test_samples=1000, rounds=150,
                 local_iters=3, batch_size=100, local_lr=0.01),
    "paper": dict(scale="paper", M=100, K=20, rho_db=30.0, tau_p=20, architecture="cnn",
                  train_samples=None, test_samples=None, rounds=2000,
                  local_iters=3, batch_size=500, local_lr=0.01),
}


def load_config(path: Optional[Path] = None, **overrides) -> ExperimentConfig:
    """
    Preset <- flat KEY=VALUE config file <- explicit overrides.
    Keys are ExperimentConfig field names (case-insensitive); empty values are ignored.
    """
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        fields = {name.lower(): name for name in ExperimentConfig.model_fields}
        raw = dotenv_values(path)
        values = {fields.get(k.strip().lower(), k.strip()): v
                  for k, v in raw.items() if v not in (None, "")}
    values.update({k: v for k, v in overrides.items() if v is not None})
    scale = values.pop("scale", "desk")
    if scale not in PRESETS:
        raise ValueError(f"unknown scale '{scale}', expected one of {sorted(PRESETS)}")
    return ExperimentConfig.preset(scale, **values)


# ── Metrics ─────────────────────────────────────────
class MetricsRow(BaseModel):
    round:             int
    method:            str
    seed:              int
    test_accuracy:     float = Field(ge=0.0, le=1.0)
    test_loss:         float
    wall_time_seconds: float = Field(ge=0.0)


CSV_COLUMNS: list[str] = list(MetricsRow.model_fields)
