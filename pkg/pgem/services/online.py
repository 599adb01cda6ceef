"""
文件路径: pgem/services/online.py

在线EM与随机梯度下降基线

在线EM按小批量流式读取数据，用凸组合更新按观测平均的充分统计量：
S̄ ← (1-γ)S̄ + γ·XᵀΩX/|B|，d̄ ← (1-γ)d̄ + γ·Xᵀκ/|B|，
然后求解 (n·S̄ + Σ⁻¹)β = n·d̄ + Σ⁻¹μ，n 为已处理的观测数（可设上限）。
"""
import logging
import math
import time
from typing import Iterator, List, Optional

import numpy as np
from scipy.linalg import cho_solve

from pgem.core.config import settings
from pgem.core.exceptions import DimensionMismatchError, DivergenceError, DomainError
from pgem.models import Dataset, FitReport, GaussianPrior, LearnRate, OnlineState, TraceEntry
from pgem.services.em_batch import e_step
from pgem.services.linsolve import cholesky, spd_inverse
from pgem.services.objective import kappa, log_posterior
from pgem.utils.numerics import sigmoid, symmetrize

logger = logging.getLogger(__name__)


def gamma(rate: LearnRate, step: int) -> float:
    """
    学习率 γ = scale·(step + t0 + 1)^(-c)，截断到不超过1

    参数:
        rate: 学习率设置
        step: 步数，从1开始

    返回:
        [0, 1] 内的学习率
    """
    if step < 1:
        raise DomainError(f"步数从1开始: {step}", error_details={"detail": f"step={step}"})
    return float(min(1.0, rate.scale * (step + rate.t0 + 1.0) ** (-rate.c)))


def _solve_online(state_S: np.ndarray, state_d: np.ndarray, n_eff: float, prior: GaussianPrior, prior_free: bool):
    if prior_free:
        return cho_solve(cholesky(state_S), state_d)
    A = n_eff * state_S + prior.precision
    b = n_eff * state_d + prior.precision @ prior.mu
    return cho_solve(cholesky(symmetrize(A)), b)


def online_update(
    state: OnlineState,
    batch: Dataset,
    rate: LearnRate,
    prior: GaussianPrior,
    n_cap: Optional[int] = None,
    prior_free: bool = False,
    gamma_override: Optional[float] = None,
) -> OnlineState:
    """
    在线EM的一步

    参数:
        state: 当前状态
        batch: 非空小批量
        rate: 学习率
        prior: 高斯先验
        n_cap: 重缩放时 n 的上限（多遍扫描时取数据集大小）
        prior_free: 不加先验，直接求解 S̄β = d̄
        gamma_override: 测试用，强制使用给定的 γ

    返回:
        新状态
    """
    d = state.beta.shape[0]
    if batch.n == 0:
        raise DomainError("小批量不能为空", error_details={"detail": "empty batch"})
    if batch.d != d:
        raise DimensionMismatchError(
            f"小批量特征维度 {batch.d} 与状态维度 {d} 不一致",
            error_details={"detail": f"{batch.d} != {d}"},
        )

    step = state.step + 1
    g = gamma(rate, step) if gamma_override is None else float(gamma_override)
    omega = e_step(batch, state.beta)
    size = float(batch.n)
    S_batch = (batch.X.T * omega) @ batch.X / size
    d_batch = batch.X.T @ kappa(batch) / size

    S_bar = symmetrize((1.0 - g) * state.S_bar + g * S_batch)
    d_bar = (1.0 - g) * state.d_bar + g * d_batch
    n_processed = state.n_processed + batch.n
    n_eff = float(n_processed if n_cap is None else min(n_processed, n_cap))
    beta = _solve_online(S_bar, d_bar, n_eff, prior, prior_free)

    pr_sum = state.pr_sum if state.pr_sum is not None else np.zeros(d)
    pr_count = state.pr_count
    if step > state.pr_burn:
        pr_sum, pr_count = pr_sum + beta, pr_count + 1
    return OnlineState(
        S_bar=S_bar,
        d_bar=d_bar,
        beta=beta,
        step=step,
        n_processed=n_processed,
        pr_burn=state.pr_burn,
        pr_sum=pr_sum,
        pr_count=pr_count,
    )


def polyak_ruppert(state: OnlineState, burn: Optional[int] = None) -> np.ndarray:
    """
    Polyak-Ruppert 平均：步数大于 burn 的 β 的算术平均

    累加器只保存步数大于 state.pr_burn 的和与个数，burn 省略时取 state.pr_burn。

    异常:
        DomainError: burn >= step，或 burn 与累加器的起点不一致
    """
    burn = state.pr_burn if burn is None else burn
    if burn < 0 or burn >= state.step:
        raise DomainError(
            f"burn 必须小于已完成的步数: burn={burn}, step={state.step}",
            error_details={"detail": f"burn={burn}, step={state.step}"},
        )
    if burn != state.pr_burn or state.pr_count < 1 or state.pr_sum is None:
        raise DomainError(
            f"累加器从第 {state.pr_burn + 1} 步开始，不能按 burn={burn} 求平均",
            error_details={"detail": f"burn={burn}, pr_burn={state.pr_burn}"},
        )
    return state.pr_sum / state.pr_count


def iter_minibatches(
    dataset: Dataset,
    batch_size: int,
    passes: int = 1,
    seed: int = settings.DEFAULT_SEED,
    shuffle: bool = True,
) -> Iterator[Dataset]:
    """
    按小批量拉取数据，每遍重新随机排列

    参数:
        dataset: 数据集
        batch_size: 批大小
        passes: 遍数
        seed: 随机种子
        shuffle: 是否每遍打乱顺序

    返回:
        小批量迭代器
    """
    if batch_size < 1:
        raise DomainError(f"批大小至少为1: {batch_size}", error_details={"detail": f"batch_size={batch_size}"})
    rng = np.random.default_rng(seed)
    for _ in range(passes):
        order = rng.permutation(dataset.n) if shuffle else np.arange(dataset.n)
        for start in range(0, dataset.n, batch_size):
            yield dataset.subset(order[start:start + batch_size])


def default_batch_size(d: int) -> int:
    return max(d, settings.ONLINE_MIN_BATCH)


def fit_online_em(
    dataset: Dataset,
    prior: GaussianPrior,
    rate: Optional[LearnRate] = None,
    batch_size: Optional[int] = None,
    passes: int = 3,
    seed: int = settings.DEFAULT_SEED,
    pr_burn: Optional[int] = None,
    cap_at_dataset_size: bool = True,
    prior_free: bool = False,
    s0_ridge: float = settings.ONLINE_S0_RIDGE,
) -> FitReport:
    """
    在线EM驱动

    参数:
        dataset: 数据集
        prior: 高斯先验
        rate: 学习率，默认 c = ONLINE_RATE_C
        batch_size: 批大小，默认 max(d, ONLINE_MIN_BATCH)
        passes: 扫描遍数
        seed: 随机种子
        pr_burn: Polyak-Ruppert 烧入步数，默认为第一遍的步数（只有一遍时取一半）
        cap_at_dataset_size: 重缩放时 n 不超过数据集大小
        prior_free: 不加先验求解
        s0_ridge: 初始统计量 S₀ = s0_ridge·I

    返回:
        FitReport，beta_hat 为 Polyak-Ruppert 平均，
        diagnostics["pass_betas"] 为每遍结束时的平均估计
    """
    rate = rate or LearnRate()
    batch_size = batch_size or default_batch_size(dataset.d)
    if passes < 1:
        raise DomainError(f"遍数至少为1: {passes}", error_details={"detail": f"passes={passes}"})
    if batch_size == 1:
        logger.warning("批大小为1时在线EM可能不稳定", extra={"batch_size": batch_size})

    steps_per_pass = max(1, math.ceil(dataset.n / batch_size))
    if pr_burn is None:
        pr_burn = steps_per_pass if passes > 1 else steps_per_pass // 2
    if pr_burn < 0:
        raise DomainError(f"烧入步数不能为负: {pr_burn}", error_details={"detail": f"pr_burn={pr_burn}"})
    n_cap = dataset.n if cap_at_dataset_size else None

    state = OnlineState.initial(dataset.d, s0_ridge, pr_burn=pr_burn)
    trace: List[TraceEntry] = []
    pass_betas: List[np.ndarray] = []
    pass_seconds: List[float] = []
    started = time.perf_counter()

    for index, batch in enumerate(iter_minibatches(dataset, batch_size, passes, seed), start=1):
        state = online_update(state, batch, rate, prior, n_cap=n_cap, prior_free=prior_free)
        if index % steps_per_pass == 0:
            estimate = _estimate(state)
            objective = log_posterior(dataset, prior, estimate, with_hessian=False)
            pass_betas.append(estimate)
            pass_seconds.append(time.perf_counter() - started)
            trace.append(TraceEntry(
                iteration=len(pass_betas),
                objective=objective.log_posterior,
                step_norm=float(np.max(np.abs(state.beta - estimate))),
                extra={"grad_norm": float(np.max(np.abs(objective.gradient))), "steps": float(state.step)},
            ))
            logger.debug("在线EM完成一遍", extra={"pass": len(pass_betas), "objective": objective.log_posterior})

    beta_hat = _estimate(state)
    n_eff = float(state.n_processed if n_cap is None else min(state.n_processed, n_cap))
    A = symmetrize(n_eff * state.S_bar + prior.precision)
    cov = spd_inverse(A)
    logger.info("在线EM完成", extra={"steps": state.step, "passes": passes, "batch_size": batch_size})

    return FitReport(
        beta_hat=beta_hat,
        cov=cov,
        trace=trace,
        iterations=state.step,
        converged=True,
        algorithm="online-em",
        diagnostics={
            "pass_betas": pass_betas,
            "pass_seconds": pass_seconds,
            "last_iterate": state.beta,
            "pr_burn": pr_burn,
            "batch_size": batch_size,
        },
    )


def _estimate(state: OnlineState) -> np.ndarray:
    if state.pr_count > 0:
        return polyak_ruppert(state, state.pr_burn)
    return state.beta


def _sgd_diverged(beta: np.ndarray, step: int) -> DivergenceError:
    norm = float(np.max(np.abs(beta))) if beta.size else 0.0
    return DivergenceError(
        "随机梯度下降发散",
        error_details={"iterations": step, "norm": norm},
        last_iterate=beta,
    )


def fit_sgd(
    dataset: Dataset,
    prior: GaussianPrior,
    rate: Optional[LearnRate] = None,
    passes: int = 50,
    rng_seed: int = settings.DEFAULT_SEED,
    beta0: Optional[np.ndarray] = None,
    divergence: float = settings.SGD_DIVERGENCE,
    time_budget: Optional[float] = None,
) -> FitReport:
    """
    逐样本随机梯度上升基线

    β ← β + γₜ·[(yₜ - mₜσ(ψₜ))xₜ - Σ⁻¹(β - μ)/N]，每遍随机打乱顺序，
    学习率与在线EM使用同一族 (t + t0 + 1)^(-c)。
    每一步都检查 ‖β‖∞，超过 divergence 时在溢出之前停止。

    Args:
        dataset: 数据集
        prior: 高斯先验
        rate: 学习率
        passes: 遍数上限
        rng_seed: 随机种子
        beta0: 初始点
        divergence: ‖β‖∞ 超过该值视为发散
        time_budget: 墙钟时间预算（秒），用完后在当前样本处停止，未走完的遍也记一行

    Returns:
        FitReport，diagnostics["pass_betas"] 为每遍结束时的 β

    Raises:
        DivergenceError: 迭代发散
    """
    rate = rate or LearnRate()
    if passes < 1:
        raise DomainError(f"遍数至少为1: {passes}", error_details={"detail": f"passes={passes}"})
    if time_budget is not None and time_budget <= 0:
        raise DomainError(f"时间预算必须为正: {time_budget}", error_details={"detail": f"time_budget={time_budget}"})
    n = max(dataset.n, 1)
    beta = np.zeros(dataset.d) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    rng = np.random.default_rng(rng_seed)
    X, y, m = dataset.X, dataset.y, dataset.m
    P, mu = prior.precision, prior.mu

    trace: List[TraceEntry] = []
    pass_betas: List[np.ndarray] = []
    pass_seconds: List[float] = []
    started = time.perf_counter()
    deadline = None if time_budget is None else started + time_budget
    step = 0
    exhausted = False

    for pass_index in range(1, passes + 1):
        start_beta = beta.copy()
        for t in rng.permutation(dataset.n):
            step += 1
            g = gamma(rate, step)
            residual = y[t] - m[t] * sigmoid(X[t] @ beta)
            beta = beta + g * (residual * X[t] - P @ (beta - mu) / n)
            if beta.size and not np.max(np.abs(beta)) <= divergence:
                raise _sgd_diverged(beta, step)
            if deadline is not None and time.perf_counter() >= deadline:
                exhausted = True
                break
        objective = log_posterior(dataset, prior, beta, with_hessian=False)
        pass_betas.append(beta.copy())
        pass_seconds.append(time.perf_counter() - started)
        trace.append(TraceEntry(
            iteration=pass_index,
            objective=objective.log_posterior,
            step_norm=float(np.max(np.abs(beta - start_beta))) if beta.size else 0.0,
            extra={"grad_norm": float(np.max(np.abs(objective.gradient))) if beta.size else 0.0},
        ))
        if exhausted:
            break

    logger.info("随机梯度下降完成", extra={"steps": step, "passes": len(pass_betas), "budget_exhausted": exhausted})
    return FitReport(
        beta_hat=beta,
        cov=None,
        trace=trace,
        iterations=step,
        converged=True,
        algorithm="sgd",
        diagnostics={
            "pass_betas": pass_betas,
            "pass_seconds": pass_seconds,
            "time_budget": time_budget,
            "budget_exhausted": exhausted,
        },
    )
