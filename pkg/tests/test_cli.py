import logging

import numpy as np
import orjson
import pandas as pd
import pytest
from typer.testing import CliRunner

from pgem.main import app
from pgem.services.io import write_dataset_csv

runner = CliRunner()


@pytest.fixture(autouse=True)
def detach_cli_log_handlers():
    """每次调用都会重新配置日志，测试结束后移除绑定在已关闭流上的处理器"""
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_pgem_handler", False):
            root.removeHandler(handler)


@pytest.fixture
def data_csv(tmp_path, small_dataset):
    path = tmp_path / "data.csv"
    write_dataset_csv(small_dataset, path)
    return path


def invoke(*args: str):
    return runner.invoke(app, ["--log-level", "WARNING", *args])


def test_simulate_writes_data_and_meta(tmp_path):
    out = tmp_path / "sim.csv"
    result = invoke("simulate", "--design", "custom", "--out", str(out), "--seed", "3", "--set", "n=40", "--set", "beta=1,-1")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["y", "m", "x1", "x2"]
    assert len(frame) == 40
    meta = orjson.loads((tmp_path / "sim.csv.meta.json").read_bytes())
    assert meta["seed"] == 3
    assert meta["true_beta"] == [1.0, -1.0]
    assert meta["config"]["design"] == "custom"


def test_simulate_rejects_malformed_override(tmp_path):
    result = invoke("simulate", "--out", str(tmp_path / "x.csv"), "--set", "n40")
    assert result.exit_code == 2


def test_fit_writes_report(tmp_path, data_csv):
    out = tmp_path / "report.json"
    result = invoke("fit", "--data", str(data_csv), "--out", str(out), "--algorithm", "qnem")
    assert result.exit_code == 0, result.output
    report = orjson.loads(out.read_bytes())
    assert report["algorithm"] == "qnem"
    assert report["converged"] is True
    assert len(report["beta_hat"]) == 3
    assert report["config"]["algorithm"] == "qnem"
    assert report["seed"] == report["config"]["seed"]


def test_fit_penalized(tmp_path, data_csv):
    out = tmp_path / "report.json"
    result = invoke("fit", "--data", str(data_csv), "--out", str(out), "--algorithm", "da-cd", "--lambda", "2.0")
    assert result.exit_code == 0, result.output
    report = orjson.loads(out.read_bytes())
    assert report["config"]["penalty"] == "lasso"
    assert report["stddevs"] is None


@pytest.mark.parametrize(
    "args",
    [
        ["--algorithm", "newton"],
        ["--algorithm", "online-em", "--rate-c", "0.4"],
        ["--algorithm", "ecm"],
    ],
)
def test_fit_rejections_exit_with_error(tmp_path, data_csv, args):
    result = invoke("fit", "--data", str(data_csv), "--out", str(tmp_path / "r.json"), *args)
    assert result.exit_code == 2
    assert not (tmp_path / "r.json").exists()


def test_fit_missing_file(tmp_path):
    result = invoke("fit", "--data", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "r.json"))
    assert result.exit_code == 5


def test_path_command(tmp_path, data_csv):
    out = tmp_path / "path.csv"
    result = invoke("path", "--data", str(data_csv), "--out", str(out), "--grid", "4", "--tol", "1e-6")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert list(frame.columns[:3]) == ["lambda", "objective", "nnz"]
    assert len(frame) == 4
    assert np.all(np.diff(frame["lambda"]) < 0)
    meta = orjson.loads((tmp_path / "path.csv.meta.json").read_bytes())
    assert meta["config"]["algorithm"] == "da-cd"


def test_benchmark_command(tmp_path, data_csv):
    out = tmp_path / "bench"
    result = invoke(
        "benchmark", "--out", str(out), "--data", str(data_csv),
        "--algorithm", "em", "--algorithm", "online-em", "--passes", "2",
    )
    assert result.exit_code == 0, result.output
    trace = pd.read_csv(out / "trace.csv")
    assert list(trace.columns) == ["algorithm", "pass", "seconds", "logloss", "grad_norm"]
    assert set(trace["algorithm"]) == {"em", "online-em"}
    summary = orjson.loads((out / "summary.json").read_bytes())
    assert set(summary["arms"]) == {"em", "online-em"}


def test_benchmark_rejects_penalized_arm(tmp_path, data_csv):
    result = invoke("benchmark", "--out", str(tmp_path / "b"), "--data", str(data_csv), "--algorithm", "da-cd")
    assert result.exit_code == 2


def test_predict_round_trip(tmp_path, data_csv, small_dataset):
    report = tmp_path / "report.json"
    assert invoke("fit", "--data", str(data_csv), "--out", str(report)).exit_code == 0
    out = tmp_path / "pred.csv"
    result = invoke("predict", "--data", str(data_csv), "--report", str(report), "--out", str(out))
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert len(frame) == small_dataset.n
    assert frame["prob"].between(0, 1).all()


@pytest.mark.parametrize(
    "algorithm, extra",
    [
        ("em", []),
        ("qnem", []),
        ("vb", []),
        ("online-em", ["--passes", "2"]),
        ("sgd", ["--passes", "2"]),
        ("da-cd", ["--lambda", "1.0"]),
        ("da-cg", ["--lambda", "1.0"]),
        ("irls-cd", ["--lambda", "1.0"]),
        ("irls-cg", ["--lambda", "1.0"]),
        ("bridge", ["--lambda", "1.0"]),
    ],
)
def test_every_binary_algorithm_writes_report(tmp_path, data_csv, algorithm, extra):
    out = tmp_path / f"{algorithm}.json"
    result = invoke("fit", "--data", str(data_csv), "--out", str(out), "--algorithm", algorithm, *extra)
    assert result.exit_code == 0, result.output
    report = orjson.loads(out.read_bytes())
    assert report["algorithm"] == algorithm
    assert len(report["beta_hat"]) == 3
    if report["cov"] is not None:
        assert np.asarray(report["cov"]).shape == (3, 3)
        assert len(report["intervals"]) == 3


@pytest.mark.parametrize("algorithm", ["ecm", "partial-irls"])
def test_every_multinomial_algorithm_writes_report(tmp_path, multi_data, algorithm):
    data = tmp_path / "multi.csv"
    write_dataset_csv(multi_data, data)
    out = tmp_path / f"{algorithm}.json"
    result = invoke("fit", "--data", str(data), "--out", str(out), "--algorithm", algorithm, "--tol", "1e-6")
    assert result.exit_code == 0, result.output
    report = orjson.loads(out.read_bytes())
    assert np.asarray(report["B"]).shape == (multi_data.d, multi_data.k)


def test_locale_option_switches_error_language(tmp_path):
    args = ("fit", "--data", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "r.json"))
    english = runner.invoke(app, ["--log-level", "WARNING", "--locale", "en", *args])
    assert english.exit_code == 5
    assert "Error" in english.output
    chinese = invoke(*args)
    assert chinese.exit_code == 5
    assert "错误" in chinese.output
