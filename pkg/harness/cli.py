"""
Command-line entry point.

Usage:
    python harness/cli.py run --method blue --seed 0
    python harness/cli.py run --config experiments/paper_20db.env --scale paper
    python harness/cli.py sweep --seeds 0 1 2 --methods genie blue sum-same sum-diff
    python harness/cli.py validate [--quick]
    python harness/cli.py fetch-mnist --mnist-dir data/mnist
    python harness/cli.py plot results/*.csv --output results/accuracy.html

Settings resolve as preset <- --config file <- flags. MNIST_DIR may be set in
the environment or a .env file.
"""
import argparse
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from pydantic import ValidationError

sys.path.insert(0, str(Path(__file__).parent.parent))

from harness.schemas import METHODS, PRESETS, ExperimentConfig, load_config

log = logging.getLogger("otafl.harness")


def _config_from_args(args) -> ExperimentConfig:
    return load_config(
        args.config,
        scale=args.scale,
        method=getattr(args, "method", None),
        seed=getattr(args, "seed", None),
        rounds=args.rounds,
        rho_db=args.snr_db,
        tau_p=args.pilot_len,
        mnist_dir=args.mnist_dir,
        output=args.output,
    )


def cmd_run(args) -> int:
    from harness.experiment import run_experiment

    run_experiment(_config_from_args(args))
    return 0


def cmd_sweep(args) -> int:
    from harness.experiment import summarize, sweep

    config = _config_from_args(args)
    paths = sweep(config, seeds=args.seeds, methods=args.methods)
    table = summarize(paths)
    print("\nFinal-round test accuracy")
    print(table.to_string(float_format=lambda v: f"{v:.4f}"))
    return 0


def cmd_validate(args) -> int:
    from harness.checks import run_all_checks

    results = run_all_checks(quick=args.quick)
    width = max(len(r.name) for r in results)
    print()
    for r in results:
        print(f"  {'✅' if r.passed else '❌'} {r.name:<{width}}  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    print(f"\n{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_fetch(args) -> int:
    from harness.mnist import fetch_mnist, load_mnist

    directory = args.mnist_dir or Path("data/mnist")
    fetch_mnist(directory)
    load_mnist(directory)
    return 0


def cmd_plot(args) -> int:
    from dashboard.plot import write_accuracy_html

    output = args.output or Path("results/accuracy.html")
    write_accuracy_html(args.csv, output, title=args.title)
    log.info(f"Wrote {output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Federated edge learning over a MIMO uplink")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p, with_method: bool = True):
        p.add_argument("--config",    type=Path, help="Flat KEY=VALUE file of ExperimentConfig fields")
        p.add_argument("--scale",     choices=sorted(PRESETS), default=None)
        if with_method:
            p.add_argument("--method", choices=METHODS)
            p.add_argument("--seed",   type=int)
        p.add_argument("--rounds",    type=int)
        p.add_argument("--snr-db",    type=float)
        p.add_argument("--pilot-len", type=int)
        p.add_argument("--mnist-dir", type=Path, default=os.environ.get("MNIST_DIR"))
        p.add_argument("--output",    type=Path)

    p_run = sub.add_parser("run", help="Run one experiment and write its metrics CSV")
    experiment_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="Repeat run over seeds and methods")
    experiment_flags(p_sweep, with_method=False)
    p_sweep.add_argument("--seeds",   type=int, nargs="+", default=[0, 1, 2])
    p_sweep.add_argument("--methods", choices=METHODS, nargs="+", default=list(METHODS))
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="Run the Monte-Carlo and property checks")
    p_val.add_argument("--quick", action="store_true", help="Smaller Monte-Carlo sizes")
    p_val.set_defaults(func=cmd_validate)

    p_fetch = sub.add_parser("fetch-mnist", help="Download the MNIST IDX archives")
    p_fetch.add_argument("--mnist-dir", type=Path, default=os.environ.get("MNIST_DIR"))
    p_fetch.set_defaults(func=cmd_fetch)

    p_plot = sub.add_parser("plot", help="Accuracy-vs-round HTML from metrics CSVs")
    p_plot.add_argument("csv", type=Path, nargs="+")
    p_plot.add_argument("--output", type=Path)
    p_plot.add_argument("--title",  default="Test accuracy")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%H:%M:%S",
    )
    try:
        return args.func(args)
    except ValidationError as e:
        log.error(f"Invalid configuration:\n{e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
