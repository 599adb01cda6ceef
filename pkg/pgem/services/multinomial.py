"""
文件路径: pgem/services/multinomial.py

K 类逻辑回归

- fit_ecm: 数据增强ECM，固定第一类系数为0，依次对第 2..K 类做二元条件更新，
  偏移 cₜₖ = log Σ_{l≠k} exp(xₜᵀβₗ)
- fit_partial_irls: 惩罚部分IRLS基线，保留全部 K 个系数块，每轮后按特征做中位数中心化

两个目标函数都以最大化形式给出并分别命名：
multinomial_objective 是标准多项似然，one_vs_rest_objective 额外包含 (1-Y)log(1-θ) 项。
ECM 的每次块更新对 multinomial_objective 单调不减。
"""
import logging
from typing import List, Optional

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax

from pgem.core.config import settings
from pgem.core.exceptions import DimensionMismatchError, DomainError
from pgem.models import MultiDataset, MultiFitReport, PenaltySpec, TraceEntry
from pgem.services.pg_math import pg_mean
from pgem.services.sparse import cd_solve, majorized_solve, penalty_vector
from pgem.utils.numerics import as_matrix

logger = logging.getLogger(__name__)


def _check_block(B: np.ndarray, X: np.ndarray) -> np.ndarray:
    B = as_matrix(B, "B")
    if B.shape[0] != X.shape[1]:
        raise DimensionMismatchError(
            f"系数矩阵行数 {B.shape[0]} 与特征数 {X.shape[1]} 不一致",
            error_details={"detail": f"{B.shape} vs d={X.shape[1]}"},
        )
    return B


def class_probs(B: np.ndarray, X: np.ndarray) -> np.ndarray:
    """θₜₖ = exp(xₜᵀβₖ)/Σₗ exp(xₜᵀβₗ)，按行减去最大值后计算"""
    X = np.asarray(X, dtype=float)
    B = _check_block(B, X)
    return softmax(X @ B, axis=1)


def conditional_offset(B: np.ndarray, k: int, X: np.ndarray) -> np.ndarray:
    """
    cₜₖ = log Σ_{l≠k} exp(xₜᵀβₗ)

    参数:
        B: d×K 系数矩阵
        k: 类别下标（从0开始）
        X: 设计矩阵

    返回:
        长度 N 的偏移
    """
    X = np.asarray(X, dtype=float)
    B = _check_block(B, X)
    if B.shape[1] < 2:
        raise DomainError("类别数 K 至少为 2", error_details={"detail": f"K={B.shape[1]}"})
    eta = X @ B
    others = np.delete(eta, k, axis=1)
    return logsumexp(others, axis=1)


def _l1(B: np.ndarray, penalty: Optional[PenaltySpec]) -> float:
    if penalty is None or penalty.family == "none" or penalty.lam == 0:
        return 0.0
    mask = ~penalty.exempt_mask(B.shape[0])
    return penalty.lam * float(np.sum(np.abs(B[mask])))


def multinomial_objective(data: MultiDataset, B: np.ndarray, penalty: Optional[PenaltySpec] = None) -> float:
    """标准多项似然的惩罚对数似然 Σₜₖ Yₜₖ log θₜₖ - λΣ|βⱼₖ|"""
    B = _check_block(B, data.X)
    log_theta = log_softmax(data.X @ B, axis=1)
    return float(np.sum(data.Y * log_theta)) - _l1(B, penalty)


def one_vs_rest_objective(data: MultiDataset, B: np.ndarray, penalty: Optional[PenaltySpec] = None) -> float:
    """
    含 (1-Y)log(1-θ) 项的惩罚对数似然

    Σₜₖ [Yₜₖ log θₜₖ + (1-Yₜₖ) log(1-θₜₖ)] - λΣ|βⱼₖ|，只报告，不保证单调。
    """
    B = _check_block(B, data.X)
    eta = data.X @ B
    log_theta = log_softmax(eta, axis=1)
    # log(1-θₖ) = log Σ_{l≠k} exp(ηₗ) - logsumexp(η)
    log_rest = np.column_stack([
        logsumexp(np.delete(eta, k, axis=1), axis=1) for k in range(eta.shape[1])
    ]) - logsumexp(eta, axis=1)[:, None]
    value = np.sum(data.Y * log_theta + (1.0 - data.Y) * log_rest)
    return float(value) - _l1(B, penalty)


def median_recenter(B: np.ndarray) -> np.ndarray:
    """βⱼₖ ← βⱼₖ - median(βⱼ₁, …, βⱼK)，不改变 class_probs"""
    B = np.asarray(B, dtype=float)
    return B - np.median(B, axis=1, keepdims=True)


def multinomial_gradient(data: MultiDataset, B: np.ndarray) -> np.ndarray:
    """标准多项对数似然关于 B 的梯度 Xᵀ(Y - θ)"""
    return data.X.T @ (data.Y - class_probs(B, data.X))


def _lam_vector(penalty: Optional[PenaltySpec], d: int) -> np.ndarray:
    if penalty is None or penalty.family == "none":
        return np.zeros(d)
    if penalty.family != "lasso":
        raise DomainError(f"多分类只支持 lasso 惩罚: {penalty.family}", error_details={"detail": penalty.family})
    return penalty_vector(penalty, d)


def fit_ecm(
    data: MultiDataset,
    penalty: Optional[PenaltySpec] = None,
    tol: float = settings.SPARSE_TOL,
    max_iter: int = settings.SPARSE_MAX_ITER,
    B0: Optional[np.ndarray] = None,
    solver: str = "cg",
) -> MultiFitReport:
    """
    数据增强ECM

    每个块 k = 2..K：ψₜₖ = xₜᵀβₖ - cₜₖ，ωₜₖ = pg_mean(1, ψₜₖ)，
    在 Sₖ = XᵀΩₖX + diag(λ/|βⱼₖ|) 上求解 Sₖβₖ = Xᵀ(κₖ + Ωₖcₖ)（cg），
    或对增强二次型做坐标下降（cd）。整轮 β 变化 <= tol 时收敛。

    Args:
        data: 多分类数据集
        penalty: lasso 惩罚或 None
        tol: 收敛容差
        max_iter: 最大轮数
        B0: 初始系数，第一列会被置0
        solver: cg 或 cd

    Returns:
        MultiFitReport，trace 的目标值为 multinomial_objective
    """
    X, d, K = data.X, data.d, data.k
    lam = _lam_vector(penalty, d)
    B = np.zeros((d, K)) if B0 is None else _check_block(B0, X).copy()
    B[:, 0] = 0.0

    objective = multinomial_objective(data, B, penalty)
    trace = [TraceEntry(iteration=0, objective=objective, step_norm=0.0)]
    block_objectives: List[float] = [objective]
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        previous = B.copy()
        for k in range(1, K):
            offset = conditional_offset(B, k, X)
            psi = X @ B[:, k] - offset
            omega = pg_mean(np.ones(data.n), psi)
            kappa_k = data.Y[:, k] - 0.5
            z = kappa_k / omega + offset
            if solver == "cd":
                B[:, k], _ = cd_solve(X, omega, z, B[:, k], lam, tol=0.1 * tol)
            else:
                B[:, k] = majorized_solve(X, omega, z, B[:, k], lam, settings.LASSO_ZERO_TOL)
            block_objectives.append(multinomial_objective(data, B, penalty))

        step_norm = float(np.max(np.abs(B - previous)))
        objective = block_objectives[-1]
        trace.append(TraceEntry(iteration=iteration, objective=objective, step_norm=step_norm))
        logger.debug("ECM迭代", extra={"iteration": iteration, "objective": objective})
        if step_norm <= tol:
            converged = True
            break

    if not converged:
        logger.warning("ECM未收敛", extra={"iterations": iteration})
    return MultiFitReport(
        B=B,
        trace=trace,
        iterations=iteration,
        converged=converged,
        algorithm="ecm",
        objective_name="multinomial",
        diagnostics={
            "block_objectives": block_objectives,
            "one_vs_rest_objective": one_vs_rest_objective(data, B, penalty),
        },
    )


def fit_partial_irls(
    data: MultiDataset,
    penalty: Optional[PenaltySpec] = None,
    tol: float = settings.SPARSE_TOL,
    max_iter: int = settings.SPARSE_MAX_ITER,
    clamp: float = settings.IRLS_PROB_CLAMP,
    patience: int = settings.IRLS_DIVERGENCE_PATIENCE,
) -> MultiFitReport:
    """
    惩罚部分IRLS

    依次对每个类别在当前 B 处做部分二阶近似：
    wₜ = θₜₖ(1-θₜₖ)，zₜ = xₜᵀβₖ + (Yₜₖ - θₜₖ)/wₜ，内层坐标下降；
    每轮结束后做中位数中心化。目标函数连续变差 patience 轮时标记发散。
    """
    X, d, K = data.X, data.d, data.k
    lam = _lam_vector(penalty, d)
    B = np.zeros((d, K))
    objective = multinomial_objective(data, B, penalty)
    trace = [TraceEntry(iteration=0, objective=objective, step_norm=0.0)]
    best_B, best_objective = B.copy(), objective
    worsening = 0
    converged = diverged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        previous = B.copy()
        for k in range(K):
            theta = np.clip(class_probs(B, X)[:, k], clamp, 1.0 - clamp)
            w = theta * (1.0 - theta)
            z = X @ B[:, k] + (data.Y[:, k] - theta) / w
            B[:, k], _ = cd_solve(X, w, z, B[:, k], lam, tol=0.1 * tol)
        B = median_recenter(B)

        new_objective = multinomial_objective(data, B, penalty)
        if not np.isfinite(new_objective):
            diverged = True
            break
        slack = 1e-12 * max(abs(objective), 1.0)
        worsening = worsening + 1 if new_objective < objective - slack else 0
        objective = new_objective
        if objective > best_objective:
            best_B, best_objective = B.copy(), objective
        step_norm = float(np.max(np.abs(B - previous)))
        trace.append(TraceEntry(iteration=iteration, objective=objective, step_norm=step_norm))
        if step_norm <= tol:
            converged = True
            break
        if worsening >= patience:
            diverged = True
            logger.warning("部分IRLS目标函数连续变差，判定为发散", extra={"iteration": iteration})
            break

    final = B if converged else best_B
    return MultiFitReport(
        B=final,
        trace=trace,
        iterations=iteration,
        converged=converged,
        algorithm="partial-irls",
        diverged=diverged,
        objective_name="multinomial",
        diagnostics={"one_vs_rest_objective": one_vs_rest_objective(data, final, penalty)},
    )


def predict_classes(B: np.ndarray, X: np.ndarray) -> np.ndarray:
    """预测类别（1..K）"""
    return np.argmax(class_probs(B, X), axis=1) + 1
