import pandas as pd
import pytest

from dashboard.plot import accuracy_curves
from harness.cli import _config_from_args, build_parser, main


@pytest.fixture
def tiny_config(mnist_dir, tmp_path):
    path = tmp_path / "tiny.env"
    path.write_text(f"K=4\nM=8\nmlp_hidden=2\nS=5\nT=50\nlocal_iters=1\nbatch_size=10\n"
                    f"train_samples=40\ntest_samples=10\nMNIST_DIR={mnist_dir}\n")
    return path


def test_run_then_plot(tiny_config, tmp_path):
    csv = tmp_path / "runs" / "genie.csv"
    assert main(["run", "--config", str(tiny_config), "--method", "genie", "--rounds", "2",
                 "--output", str(csv)]) == 0
    assert len(pd.read_csv(csv)) == 2

    html = tmp_path / "accuracy.html"
    assert main(["plot", str(csv), "--output", str(html)]) == 0
    assert "plotly" in html.read_text()


def test_invalid_configuration_exit_code(tiny_config):
    assert main(["run", "--config", str(tiny_config), "--method", "blue", "--pilot-len", "2"]) == 2


def test_parser_rejects_unknown_method():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--method", "ota"])


def test_accuracy_curves_average_over_seeds():
    df = pd.DataFrame({
        "round":         [1, 1, 2, 2, 1],
        "method":        ["blue", "blue", "blue", "blue", "genie"],
        "seed":          [0, 1, 0, 1, 0],
        "test_accuracy": [0.2, 0.4, 0.5, 0.7, 0.9],
    })
    curves = accuracy_curves(df).set_index(["method", "round"])
    assert curves.loc[("blue", 1), "mean"] == pytest.approx(0.3)
    assert curves.loc[("blue", 2), "low"] == pytest.approx(0.5)
    assert curves.loc[("blue", 2), "high"] == pytest.approx(0.7)
    assert curves.loc[("genie", 1), "seeds"] == 1


@pytest.mark.parametrize("scale,K,architecture", [("desk", 10, "mlp"), ("paper", 20, "cnn")])
def test_scale_flag_selects_preset(scale, K, architecture):
    args = build_parser().parse_args(["run", "--scale", scale, "--method", "sum-same"])
    config = _config_from_args(args)
    assert (config.scale, config.K, config.architecture) == (scale, K, architecture)
    assert config.method == "sum-same"


def test_paper_scale_from_config_file(tmp_path):
    path = tmp_path / "paper.env"
    path.write_text("scale=paper\nrho_db=20\ntau_p=200\n")
    args = build_parser().parse_args(["run", "--config", str(path)])
    config = _config_from_args(args)
    assert (config.M, config.K, config.pilot_len, config.rho_db) == (100, 20, 200, 20.0)
