"""
Accuracy-vs-round figure from metrics CSVs, averaged over seeds.

Run from project root:
    python dashboard/plot.py results/*.csv --output results/accuracy.html
"""
import argparse
import sys
from pathlib import Path
from typing import Iterable

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

sys.path.insert(0, str(Path(__file__).parent.parent))

from harness.experiment import ExperimentIOError, read_metrics

METHOD_COLORS = {
    "genie":    "#8a9bb0",
    "blue":     "#1f77b4",
    "sum-same": "#d62728",
    "sum-diff": "#ff7f0e",
}

PLOTLY_LAYOUT = dict(
    template="plotly_white",
    font=dict(family="Inter, sans-serif", size=13),
    legend=dict(title="", orientation="h", yanchor="bottom", y=1.02, x=0),
    margin=dict(l=40, r=20, t=60, b=40),
    yaxis=dict(range=[0, 1], tickformat=".0%"),
)


def accuracy_curves(df: pd.DataFrame) -> pd.DataFrame:
    """Mean and spread of test accuracy per (method, round) across seeds."""
    return (df.groupby(["method", "round"])["test_accuracy"]
            .agg(mean="mean", low="min", high="max", seeds="count")
            .reset_index())


def accuracy_figure(df: pd.DataFrame, title: str = "Test accuracy") -> go.Figure:
    curves = accuracy_curves(df)
    fig = px.line(
        curves, x="round", y="mean", color="method",
        color_discrete_map=METHOD_COLORS,
        hover_data={"low": ":.3f", "high": ":.3f", "seeds": True},
        labels={"round": "Round", "mean": "Test accuracy (mean over seeds)"},
        title=title,
    )
    fig.update_layout(**PLOTLY_LAYOUT)
    return fig


def write_accuracy_html(paths: Iterable[Path], output: Path, title: str = "Test accuracy") -> Path:
    fig = accuracy_figure(read_metrics(paths), title=title)
    output = Path(output)
    try:
        output.parent.mkdir(parents=True, exist_ok=True)
        fig.write_html(output, include_plotlyjs="cdn")
    except OSError as e:
        raise ExperimentIOError(output, e) from e
    return output


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Plot accuracy curves")
    parser.add_argument("csv", type=Path, nargs="+")
    parser.add_argument("--output", type=Path, default=Path("results/accuracy.html"))
    parser.add_argument("--title",  default="Test accuracy")
    args = parser.parse_args()

    print(write_accuracy_html(args.csv, args.output, args.title))
