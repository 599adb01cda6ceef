import time

import numpy as np
import pytest

from pgem.models import GaussianPrior, RunConfig
from pgem.services.benchmark import TRACE_COLUMNS, run_benchmark, train_test_split
from pgem.services.simulate import simulate


def benchmark_config(*arms: str, **fields) -> RunConfig:
    return RunConfig(command="benchmark", arms=list(arms), seed=17, **fields)


def test_train_test_split(small_dataset):
    train, test = train_test_split(small_dataset, 0.2, seed=1)
    assert (train.n, test.n) == (96, 24)
    rows = {tuple(r) for r in np.vstack([train.X, test.X]).round(12)}
    assert len(rows) == small_dataset.n
    again, _ = train_test_split(small_dataset, 0.2, seed=1)
    np.testing.assert_array_equal(train.X, again.X)


def test_single_batch_arm(small_dataset):
    rows, summary = run_benchmark(benchmark_config("em"), small_dataset)
    assert len(rows) == 1
    assert set(rows[0]) == set(TRACE_COLUMNS)
    arm = summary["arms"]["em"]
    assert arm["status"] == "ok"
    assert arm["converged"]
    assert arm["final_logloss"] == pytest.approx(rows[0]["logloss"])
    assert summary["n_train"] + summary["n_test"] == small_dataset.n
    assert summary["config"]["arms"] == ["em"]
    assert summary["prior"]["mu"] == [0.0] * small_dataset.d


def test_em_and_qnem_agree(small_dataset):
    _, summary = run_benchmark(benchmark_config("em", "qnem"), small_dataset)
    np.testing.assert_allclose(summary["arms"]["qnem"]["beta_hat"], summary["arms"]["em"]["beta_hat"], atol=1e-6)


def test_streaming_arms_report_each_pass(small_dataset):
    rows, summary = run_benchmark(benchmark_config("online-em", "sgd", passes=4, match_clock=False), small_dataset)
    for arm in ("online-em", "sgd"):
        passes = [row["pass"] for row in rows if row["algorithm"] == arm]
        assert passes == [1, 2, 3, 4]
        assert summary["arms"][arm]["status"] == "ok"
    seconds = [row["seconds"] for row in rows if row["algorithm"] == "sgd"]
    assert np.all(np.diff(seconds) >= 0)


def test_failed_arm_does_not_stop_others(small_dataset):
    # 强先验使逐样本梯度步发散
    prior = GaussianPrior.isotropic(small_dataset.d, precision=1e8)
    rows, summary = run_benchmark(benchmark_config("em", "sgd", passes=2), small_dataset, prior=prior)
    assert summary["arms"]["sgd"]["status"] == "failed"
    assert summary["arms"]["sgd"]["error_code"] == "SOLVER_DIVERGED"
    assert summary["arms"]["em"]["status"] == "ok"
    assert {row["algorithm"] for row in rows} == {"em"}


def test_sgd_budget_matches_online_em(small_dataset):
    rows, summary = run_benchmark(benchmark_config("online-em", "sgd", passes=2), small_dataset)
    arms = summary["arms"]
    assert arms["sgd"]["status"] == "ok"
    assert arms["sgd"]["time_budget"] == pytest.approx(arms["online-em"]["seconds"])
    sgd_rows = [row for row in rows if row["algorithm"] == "sgd"]
    assert 1 <= len(sgd_rows) <= 2
    assert summary["comparisons"]["sgd_minus_online_logloss"] == pytest.approx(
        arms["sgd"]["final_logloss"] - arms["online-em"]["final_logloss"]
    )


def test_comparisons_against_em(small_dataset):
    _, summary = run_benchmark(benchmark_config("em", "qnem", "online-em"), small_dataset)
    versus = summary["comparisons"]["versus_em"]
    assert set(versus) == {"qnem", "online-em"}
    assert versus["qnem"]["logloss_ratio"] == pytest.approx(1.0, rel=1e-6)
    assert abs(versus["qnem"]["objective_gap"]) <= 1e-6
    assert versus["online-em"]["objective_gap"] >= -1e-9
    assert summary["comparisons"]["sgd_minus_online_logloss"] is None


@pytest.mark.slow
def test_online_em_on_collinear_design():
    # d=50, N=1e4, 批大小100, c=0.52, 3遍
    data, _ = simulate("figure1", seed=2013)
    config = benchmark_config("em", "online-em", "sgd", passes=3, batch_size=100, rate_c=0.52)
    started = time.perf_counter()
    _, summary = run_benchmark(config, data)
    assert time.perf_counter() - started < 60.0
    arms = summary["arms"]
    assert all(info["status"] == "ok" for info in arms.values())
    assert arms["online-em"]["final_logloss"] <= 1.01 * arms["em"]["final_logloss"]
    # 同样的墙钟时间内，online-em 的训练目标更接近批量最优
    versus = summary["comparisons"]["versus_em"]
    assert versus["online-em"]["objective_gap"] <= versus["sgd"]["objective_gap"]
    assert arms["sgd"]["time_budget"] == pytest.approx(arms["online-em"]["seconds"])
