"""
Experiment runner: data preparation, the round loop and CSV output.

Run from project root:
    python harness/experiment.py --method blue --seed 0

Steps:
    1. Load MNIST and restrict it to the digits held by the clients
    2. Partition across clients and initialise the model
    3. Run the configured number of rounds, evaluating after each
    4. Write one MetricsRow per round to CSV
"""
import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Iterable, Optional, Sequence

import pandas as pd
from tqdm import tqdm

sys.path.insert(0, str(Path(__file__).parent.parent))

from harness.mnist import load_mnist
from harness.partition import balanced_digit_subset, restrict_digits
from harness.rounds import FederatedState, run_round
from harness.schemas import CSV_COLUMNS, METHODS, ExperimentConfig, MetricsRow, load_config
from learning.training import Dataset

log = logging.getLogger("otafl.harness")


class ExperimentIOError(RuntimeError):
    def __init__(self, path: Path, cause: OSError):
        self.path = Path(path)
        super().__init__(f"cannot write {self.path}: {cause}")


# ──────────────────────────────────────────────
# Data
# ──────────────────────────────────────────────

def prepare_data(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    train, test = load_mnist(config.mnist_dir)
    digits = config.digits
    if config.train_samples is not None:
        train = balanced_digit_subset(train, digits, config.train_samples)
    else:
        train = restrict_digits(train, digits)
    if config.test_samples is not None:
        test = balanced_digit_subset(test, digits, config.test_samples)
    else:
        test = restrict_digits(test, digits)
    log.info(f"Digits {digits}: {len(train):,} train / {len(test):,} test samples")
    return train, test


# ──────────────────────────────────────────────
# Output
# ──────────────────────────────────────────────

def write_metrics(rows: Sequence[MetricsRow], path: Path) -> Path:
    path = Path(path)
    df = pd.DataFrame([row.model_dump() for row in rows], columns=CSV_COLUMNS)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False)
    except OSError as e:
        raise ExperimentIOError(path, e) from e
    return path


def read_metrics(paths: Iterable[Path]) -> pd.DataFrame:
    frames = []
    for path in paths:
        try:
            frames.append(pd.read_csv(path))
        except OSError as e:
            raise ExperimentIOError(path, e) from e
    if not frames:
        raise ValueError("no metrics files given")
    return pd.concat(frames, ignore_index=True)


# ──────────────────────────────────────────────
# Runner
# ──────────────────────────────────────────────

def run_experiment(config: ExperimentConfig,
                   data: Optional[tuple[Dataset, Dataset]] = None,
                   progress: bool = True) -> Path:
    start = time.perf_counter()
    log.info(f"[1/4] Loading MNIST for {config.method} (seed {config.seed})...")
    train, test = data if data is not None else prepare_data(config)

    log.info("[2/4] Building federated state...")
    state = FederatedState.create(config, train, test)
    log.info(f"       d={state.d:,}  S={state.S}  T={state.T}  M={config.M}  K={config.K}  "
             f"rho={config.rho_db} dB  tau_p={config.pilot_len}")

    log.info(f"[3/4] Running {config.rounds} rounds...")
    rows: list[MetricsRow] = []
    aborted = 0
    pbar = tqdm(range(config.rounds), desc=config.method, unit="round", disable=not progress)
    for _ in pbar:
        row = run_round(state)
        rows.append(row)
        aborted += state.trace is not None and state.trace.aborted is not None
        pbar.set_postfix({"acc": f"{row.test_accuracy:.3f}", "loss": f"{row.test_loss:.3f}"})

    log.info(f"[4/4] Writing metrics to {config.output}...")
    path = write_metrics(rows, config.output)
    if aborted:
        log.warning(f"{aborted}/{config.rounds} rounds aborted")
    log.info(f"✅ {config.method} seed {config.seed}: final accuracy {rows[-1].test_accuracy:.4f} "
             f"({time.perf_counter() - start:.1f}s)")
    return path


def sweep_output(base: Path, method: str, seed: int) -> Path:
    base = Path(base)
    return base.with_name(f"{base.stem}_{method}_seed{seed}{base.suffix or '.csv'}")


def sweep(config: ExperimentConfig, seeds: Sequence[int],
          methods: Sequence[str] = METHODS,
          data: Optional[tuple[Dataset, Dataset]] = None) -> list[Path]:
    """One run per (method, seed); the data set is loaded once and shared."""
    data = data if data is not None else prepare_data(config)
    paths = []
    for method in methods:
        for seed in seeds:
            run_config = ExperimentConfig(**{
                **config.model_dump(),
                "method": method,
                "seed": seed,
                "output": sweep_output(config.output, method, seed),
            })
            paths.append(run_experiment(run_config, data=data))
    return paths


def summarize(paths: Iterable[Path]) -> pd.DataFrame:
    """Final-round test accuracy per method: mean, std and number of seeds."""
    df = read_metrics(paths)
    final = df.loc[df.groupby(["method", "seed"])["round"].idxmax()]
    return (final.groupby("method")["test_accuracy"]
            .agg(["mean", "std", "count"])
            .sort_values("mean", ascending=False))


if __name__ == "__main__":
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%H:%M:%S",
    )
    parser = argparse.ArgumentParser(description="Run one federated learning experiment")
    parser.add_argument("--method", choices=METHODS, default="blue")
    parser.add_argument("--seed",   type=int, default=0)
    parser.add_argument("--scale",  choices=["desk", "paper"], default="desk")
    args = parser.parse_args()

    run_experiment(load_config(method=args.method, seed=args.seed, scale=args.scale))
