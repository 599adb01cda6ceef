"""
文件路径: pgem/services/benchmark.py

基准测试模块

在同一份数据和同一个种子上运行多个算法（arm），记录每遍的留出对数损失、
耗时和训练目标的梯度范数。批量算法（em/qnem/vb）只记录最终一行。
单个算法失败时记录在该 arm 的结果中，其余 arm 继续运行。
摘要中的 comparisons 记录各算法相对批量EM的留出损失之比和训练目标差距。
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from pgem.core.config import settings
from pgem.core.exceptions import PgemError
from pgem.models import Dataset, FitReport, GaussianPrior, RunConfig
from pgem.services.em_batch import fit_em, fit_qnem
from pgem.services.objective import gradient_norm, log_loss, log_posterior
from pgem.services.online import fit_online_em, fit_sgd
from pgem.services.vb import fit_vb

logger = logging.getLogger(__name__)

DEFAULT_PASSES = {"online-em": 3, "sgd": 50}
TRACE_COLUMNS = ["algorithm", "pass", "seconds", "logloss", "grad_norm"]


def train_test_split(dataset: Dataset, holdout_frac: float, seed: int) -> Tuple[Dataset, Dataset]:
    """随机划分训练集和留出集，留出集至少一条"""
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.n)
    n_test = min(max(1, int(round(holdout_frac * dataset.n))), dataset.n - 1)
    return dataset.subset(np.sort(order[n_test:])), dataset.subset(np.sort(order[:n_test]))


def _run_arm(
    arm: str, train: Dataset, prior: GaussianPrior, config: RunConfig, time_budget: Optional[float] = None,
) -> FitReport:
    passes = config.passes or DEFAULT_PASSES.get(arm, 1)
    if arm == "online-em":
        return fit_online_em(
            train, prior, rate=config.learn_rate(), batch_size=config.batch_size,
            passes=passes, seed=config.seed, pr_burn=config.pr_burn,
        )
    if arm == "sgd":
        return fit_sgd(
            train, prior, rate=config.learn_rate(), passes=passes, rng_seed=config.seed, time_budget=time_budget,
        )

    options: Dict[str, Any] = {}
    if config.tol is not None:
        options["tol"] = config.tol
    if config.max_iter is not None:
        options["max_iter"] = config.max_iter
    if arm == "em":
        return fit_em(train, prior, **options)
    if arm == "qnem":
        return fit_qnem(train, prior, **options)
    return fit_vb(train, prior, **options)


def _arm_rows(arm: str, report: FitReport, train: Dataset, test: Dataset, prior: GaussianPrior, seconds: float) -> List[Dict[str, Any]]:
    pass_betas = report.diagnostics.get("pass_betas")
    if pass_betas:
        return [
            {
                "algorithm": arm,
                "pass": index,
                "seconds": report.diagnostics["pass_seconds"][index - 1],
                "logloss": log_loss(test, beta),
                "grad_norm": gradient_norm(train, prior, beta),
            }
            for index, beta in enumerate(pass_betas, start=1)
        ]
    return [{
        "algorithm": arm,
        "pass": report.iterations,
        "seconds": seconds,
        "logloss": log_loss(test, report.beta_hat),
        "grad_norm": gradient_norm(train, prior, report.beta_hat),
    }]


def _comparisons(arms: Dict[str, Any]) -> Dict[str, Any]:
    """
    与批量EM的对比：留出对数损失之比、训练目标差距（EM 目标减该算法目标），
    以及 sgd 与 online-em 的留出对数损失之差（正值表示 online-em 更好）
    """
    ok = {arm: info for arm, info in arms.items() if info["status"] == "ok"}
    versus_em: Dict[str, Any] = {}
    if "em" in ok:
        em = ok["em"]
        for arm, info in ok.items():
            if arm == "em":
                continue
            versus_em[arm] = {
                "logloss_ratio": info["final_logloss"] / em["final_logloss"],
                "objective_gap": em["train_objective"] - info["train_objective"],
            }
    sgd_minus_online = None
    if "sgd" in ok and "online-em" in ok:
        sgd_minus_online = ok["sgd"]["final_logloss"] - ok["online-em"]["final_logloss"]
    return {"versus_em": versus_em, "sgd_minus_online_logloss": sgd_minus_online}


def run_benchmark(
    config: RunConfig,
    dataset: Dataset,
    prior: Optional[GaussianPrior] = None,
    max_workers: int = settings.MAX_WORKERS,
) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
    """
    运行基准测试

    config.match_clock 为真且同时比较 online-em 和 sgd 时，sgd 在其余算法结束后单独运行，
    墙钟预算等于 online-em 的耗时，遍数上限不变。

    参数:
        config: 运行配置，config.arms 为要比较的算法
        dataset: 完整数据集，按 holdout_frac 划分训练集和留出集
        prior: 先验，默认为精度 1e-5 的各向同性先验
        max_workers: 并行线程数

    返回:
        (轨迹行列表, JSON 摘要)。轨迹列为 algorithm, pass, seconds, logloss, grad_norm
    """
    train, test = train_test_split(dataset, config.holdout_frac, config.seed)
    prior = prior or GaussianPrior.isotropic(dataset.d)
    matched = config.match_clock and "sgd" in config.arms and "online-em" in config.arms
    pooled = [arm for arm in config.arms if not (matched and arm == "sgd")]

    def task(arm: str, time_budget: Optional[float] = None):
        started = time.perf_counter()
        report = _run_arm(arm, train, prior, config, time_budget)
        return report, time.perf_counter() - started

    def outcome(call: Callable[[], Tuple[FitReport, float]]):
        try:
            return call()
        except PgemError as e:
            return e

    outcomes: Dict[str, Any] = {}
    with ThreadPoolExecutor(max_workers=max(1, min(max_workers, len(pooled)))) as pool:
        futures = {arm: pool.submit(task, arm) for arm in pooled}
        for arm, future in futures.items():
            outcomes[arm] = outcome(future.result)

    budget = None
    if matched:
        online = outcomes["online-em"]
        if isinstance(online, PgemError):
            logger.warning("online-em 失败，sgd 不限时运行", extra={"error": online.error_message})
        else:
            budget = online[1]
        outcomes["sgd"] = outcome(lambda: task("sgd", budget))

    rows: List[Dict[str, Any]] = []
    arms: Dict[str, Any] = {}
    for arm in config.arms:
        result = outcomes[arm]
        if isinstance(result, PgemError):
            logger.warning("基准测试算法失败", extra={"arm": arm, "error": result.error_message})
            arms[arm] = {"status": "failed", "error_code": result.error_code, "error": result.error_message}
            continue
        report, seconds = result
        arm_rows = _arm_rows(arm, report, train, test, prior, seconds)
        rows.extend(arm_rows)
        arms[arm] = {
            "status": "ok",
            "iterations": report.iterations,
            "converged": report.converged,
            "seconds": seconds,
            "final_logloss": arm_rows[-1]["logloss"],
            "final_grad_norm": arm_rows[-1]["grad_norm"],
            "train_objective": log_posterior(train, prior, report.beta_hat, with_hessian=False).log_posterior,
            "beta_hat": report.beta_hat,
        }
        if arm == "sgd":
            arms[arm]["time_budget"] = report.diagnostics.get("time_budget")
            arms[arm]["budget_exhausted"] = report.diagnostics.get("budget_exhausted")

    summary = {
        "n_train": train.n,
        "n_test": test.n,
        "d": dataset.d,
        "arms": arms,
        "comparisons": _comparisons(arms),
        "prior": prior.to_dict(),
        "config": config.echo(),
        "seed": config.seed,
    }
    logger.info("基准测试完成", extra={"arms": list(arms), "matched_clock": matched})
    return rows, summary
