"""
文件路径: pgem/services/em_batch.py

批量 Polya-Gamma EM 及其拟牛顿加速

E步: ωₜ = pg_mean(mₜ, ψₜ)
M步: 求解 (XᵀΩX + Σ⁻¹)β = Xᵀκ + Σ⁻¹μ，直接分解或热启动共轭梯度（部分M步）

由恒等式 y - m·σ(ψ) = κ - ωψ，EM 步等于 β + A⁻¹g，其中 A = XᵀΩX + Σ⁻¹，
g 为对数后验梯度；精确的负Hessian为 A - Xᵀ(Ω - W)X，第二项半正定。
拟牛顿EM用 SR1 割线更新近似这一剩余项。
"""
import logging
from typing import Literal, Optional

import numpy as np
from scipy.linalg import cho_solve

from pgem.core.config import settings
from pgem.core.exceptions import DomainError, NotPositiveDefiniteError
from pgem.models import CgConfig, Dataset, FitReport, FitState, GaussianPrior, QnState, SpdSystem, TraceEntry
from pgem.services.linsolve import cholesky, solve_cg, solve_direct, spd_inverse
from pgem.services.objective import kappa, log_posterior
from pgem.services.pg_math import pg_mean
from pgem.utils.numerics import as_vector, symmetrize

logger = logging.getLogger(__name__)

SolveMode = Literal["direct", "cg"]


def e_step(dataset: Dataset, beta: np.ndarray) -> np.ndarray:
    """
    E步：PG条件均值 ω̂ₜ = (mₜ/2ψₜ)·tanh(ψₜ/2)

    参数:
        dataset: 数据集
        beta: 当前系数

    返回:
        长度 N 的正权重，ψₜ = 0 时取 mₜ/4
    """
    beta = as_vector(beta, "beta", dataset.d)
    if dataset.n == 0:
        return np.zeros(0)
    return pg_mean(dataset.m, dataset.X @ beta)


def assemble_system(dataset: Dataset, prior: GaussianPrior, omega: np.ndarray) -> SpdSystem:
    """组装 S = XᵀΩX + Σ⁻¹ 和 d = Xᵀκ + Σ⁻¹μ"""
    omega = as_vector(omega, "omega", dataset.n)
    S = (dataset.X.T * omega) @ dataset.X + prior.precision
    d_vec = dataset.X.T @ kappa(dataset) + prior.precision @ prior.mu
    return SpdSystem(S=symmetrize(S), d_vec=d_vec)


def m_step(
    dataset: Dataset,
    prior: GaussianPrior,
    omega: np.ndarray,
    mode: SolveMode = "direct",
    cg_config: Optional[CgConfig] = None,
) -> np.ndarray:
    """
    M步：求解完全数据后验的正规方程

    参数:
        dataset: 数据集
        prior: 高斯先验
        omega: E步权重，全部为正
        mode: direct 或 cg
        cg_config: cg 模式的配置，warm_start 为上一轮的 β 时即部分M步

    返回:
        新的 β
    """
    omega = as_vector(omega, "omega", dataset.n)
    if np.any(omega <= 0):
        raise DomainError("E步权重必须为正", error_details={"detail": "omega <= 0"})
    system = assemble_system(dataset, prior, omega)
    if mode == "direct":
        return solve_direct(system)
    if mode == "cg":
        return solve_cg(system, cg_config).x
    raise DomainError(f"未知的M步模式: {mode}", error_details={"detail": f"mode={mode}"})


def complete_data_cov(dataset: Dataset, prior: GaussianPrior, beta: np.ndarray) -> np.ndarray:
    """完全数据后验协方差 V_β = (XᵀΩ(β)X + Σ⁻¹)⁻¹"""
    system = assemble_system(dataset, prior, e_step(dataset, beta))
    return spd_inverse(system.S)


def fixed_point_residual(dataset: Dataset, prior: GaussianPrior, beta: np.ndarray) -> np.ndarray:
    """EM不动点残差 Xᵀ(κ - Ωψ) - Σ⁻¹(β - μ)，在众数处为0"""
    beta = as_vector(beta, "beta", dataset.d)
    omega = e_step(dataset, beta)
    psi = dataset.X @ beta
    return dataset.X.T @ (kappa(dataset) - omega * psi) - prior.precision @ (beta - prior.mu)


def _initial_beta(dataset: Dataset, prior: GaussianPrior, beta0: Optional[np.ndarray]) -> np.ndarray:
    if beta0 is None:
        return np.zeros(dataset.d)
    return as_vector(beta0, "beta0", dataset.d).copy()


def _converged(step_norm: float, grad_norm: float, tol: float) -> bool:
    return step_norm <= tol and grad_norm <= 10.0 * tol


def fit_em(
    dataset: Dataset,
    prior: GaussianPrior,
    beta0: Optional[np.ndarray] = None,
    tol: float = settings.EM_TOL,
    max_iter: int = settings.EM_MAX_ITER,
    mode: SolveMode = "direct",
    cg_config: Optional[CgConfig] = None,
) -> FitReport:
    """
    批量EM求后验众数

    交替E步和M步，直到 ‖Δβ‖∞ <= tol 且 ‖∇‖∞ <= 10·tol。
    达到 max_iter 时返回 converged=False 的报告而不抛异常。

    Args:
        dataset: 数据集
        prior: 高斯先验
        beta0: 初始点，默认为0
        tol: 收敛容差
        max_iter: 最大迭代次数
        mode: M步求解方式
        cg_config: cg 模式的 eps 和 max_iter，热启动点由每轮的 β 自动设置

    Returns:
        FitReport，cov 为众数处的完全数据后验协方差
    """
    if not tol > 0:
        raise DomainError(f"tol 必须为正: {tol}", error_details={"detail": f"tol={tol}"})
    beta = _initial_beta(dataset, prior, beta0)
    objective = log_posterior(dataset, prior, beta, with_hessian=False)
    trace = [TraceEntry(iteration=0, objective=objective.log_posterior, step_norm=0.0)]
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        omega = e_step(dataset, beta)
        config = None
        if mode == "cg":
            base = cg_config or CgConfig()
            config = CgConfig(eps=base.eps, max_iter=base.max_iter, warm_start=beta)
        new_beta = m_step(dataset, prior, omega, mode=mode, cg_config=config)
        step_norm = float(np.max(np.abs(new_beta - beta))) if dataset.d else 0.0
        beta = new_beta
        objective = log_posterior(dataset, prior, beta, with_hessian=False)
        grad_norm = float(np.max(np.abs(objective.gradient)))
        trace.append(TraceEntry(
            iteration=iteration,
            objective=objective.log_posterior,
            step_norm=step_norm,
            extra={"grad_norm": grad_norm},
        ))
        logger.debug(
            "EM迭代",
            extra={"iteration": iteration, "objective": objective.log_posterior, "step_norm": step_norm},
        )
        if _converged(step_norm, grad_norm, tol):
            converged = True
            break

    omega = e_step(dataset, beta)
    system = assemble_system(dataset, prior, omega)
    state = FitState(
        beta=beta,
        omega=omega,
        S=system.S,
        d_vec=system.d_vec,
        iteration=iteration,
        objective=objective.log_posterior,
    )
    cov = spd_inverse(state.S)

    if converged:
        logger.info("EM收敛", extra={"iterations": iteration, "objective": state.objective})
    else:
        logger.warning("EM达到最大迭代次数仍未收敛", extra={"iterations": iteration})

    return FitReport(
        beta_hat=beta,
        cov=cov,
        trace=trace,
        iterations=iteration,
        converged=converged,
        algorithm="em",
        diagnostics={"grad_norm": float(np.max(np.abs(objective.gradient))) if dataset.d else 0.0},
    )


def _sr1_update(qn: QnState, s: np.ndarray, v: np.ndarray, skip: float) -> QnState:
    """
    SR1 更新 M ← M + rrᵀ/(rᵀs)，r = v - Ms

    |rᵀs| < skip·‖r‖‖s‖ 时跳过更新。
    """
    M = qn.remainder_hessian_approx
    r = v - M @ s
    denom = float(r @ s)
    if abs(denom) < skip * np.linalg.norm(r) * np.linalg.norm(s) or denom == 0.0:
        return QnState(remainder_hessian_approx=M, last_s=s, last_y=v, skipped_updates=qn.skipped_updates + 1)
    M = symmetrize(M + np.outer(r, r) / denom)
    return QnState(remainder_hessian_approx=M, last_s=s, last_y=v, skipped_updates=qn.skipped_updates)


def _psd_part(M: np.ndarray) -> np.ndarray:
    """把对称矩阵的负特征值截断为0"""
    vals, vecs = np.linalg.eigh(symmetrize(M))
    return (vecs * np.maximum(vals, 0.0)) @ vecs.T


def fit_qnem(
    dataset: Dataset,
    prior: GaussianPrior,
    beta0: Optional[np.ndarray] = None,
    tol: float = settings.EM_TOL,
    max_iter: int = settings.EM_MAX_ITER,
    max_halvings: int = settings.QN_MAX_HALVINGS,
    sr1_skip: float = settings.QN_SR1_SKIP,
) -> FitReport:
    """
    拟牛顿加速EM

    步长 Δ = (A - M)⁻¹g，A = XᵀΩX + Σ⁻¹ 为完全数据精度，M 为剩余Hessian的 SR1 近似。
    A - M 不正定或步长减半 max_halvings 次后仍不上升时退回普通EM步，保证目标函数不下降；
    减半后的拟牛顿步不如EM步时同样取EM步。上升判断带 1e-12 的相对舍入容差。

    Args:
        dataset: 数据集
        prior: 高斯先验
        beta0: 初始点
        tol: 收敛容差
        max_iter: 最大迭代次数
        max_halvings: 拟牛顿步最多减半次数
        sr1_skip: SR1 跳过阈值

    Returns:
        FitReport，cov 为 (A - M₊)⁻¹（M₊ 为 M 的半正定部分），
        不正定时退回精确的 -∇²L⁻¹
    """
    if not tol > 0:
        raise DomainError(f"tol 必须为正: {tol}", error_details={"detail": f"tol={tol}"})
    d = dataset.d
    beta = _initial_beta(dataset, prior, beta0)
    qn = QnState(remainder_hessian_approx=np.zeros((d, d)))

    objective = log_posterior(dataset, prior, beta, with_hessian=False)
    system = assemble_system(dataset, prior, e_step(dataset, beta))
    trace = [TraceEntry(iteration=0, objective=objective.log_posterior, step_norm=0.0)]
    converged = False
    iteration = 0
    fallbacks = 0

    for iteration in range(1, max_iter + 1):
        g = objective.gradient
        A_factor = cholesky(system.S)
        em_step = cho_solve(A_factor, g)

        # 与 oracle_mode 相同的舍入容差，众数附近目标的变化低于舍入误差
        slack = 1e-12 * max(abs(objective.log_posterior), 1.0)
        candidate, cand_obj, used_qn, step = None, None, False, 1.0
        try:
            qn_factor = cholesky(system.S - qn.remainder_hessian_approx)
            direction = cho_solve(qn_factor, g)
            for _ in range(max_halvings + 1):
                trial_beta = beta + step * direction
                trial = log_posterior(dataset, prior, trial_beta, with_hessian=False)
                if trial.log_posterior >= objective.log_posterior - slack:
                    candidate, cand_obj, used_qn = trial_beta, trial, True
                    break
                step *= 0.5
        except NotPositiveDefiniteError:
            logger.debug("A - M 不正定，重置剩余Hessian近似", extra={"iteration": iteration})
            qn = QnState(remainder_hessian_approx=np.zeros((d, d)), skipped_updates=qn.skipped_updates)

        if not used_qn or step < 1.0:
            # 减半后的拟牛顿步与EM步取目标较大者
            em_beta = beta + em_step
            em_obj = log_posterior(dataset, prior, em_beta, with_hessian=False)
            if not used_qn or em_obj.log_posterior > cand_obj.log_posterior:
                fallbacks += 1
                candidate, cand_obj, used_qn = em_beta, em_obj, False
                logger.debug("拟牛顿步被拒绝，使用EM步", extra={"iteration": iteration})

        s = candidate - beta
        new_system = assemble_system(dataset, prior, e_step(dataset, candidate))
        # ∇²L·s ≈ g_new - g，而 M = A + ∇²L
        v = (cand_obj.gradient - g) + new_system.S @ s
        qn = _sr1_update(qn, s, v, sr1_skip)

        step_norm = float(np.max(np.abs(s))) if d else 0.0
        beta, objective, system = candidate, cand_obj, new_system
        grad_norm = float(np.max(np.abs(objective.gradient))) if d else 0.0
        trace.append(TraceEntry(
            iteration=iteration,
            objective=objective.log_posterior,
            step_norm=step_norm,
            extra={"grad_norm": grad_norm, "quasi_newton": float(used_qn)},
        ))
        if _converged(step_norm, grad_norm, tol):
            converged = True
            break

    cov = _qn_covariance(dataset, prior, beta, system.S, qn.remainder_hessian_approx)

    if converged:
        logger.info("拟牛顿EM收敛", extra={"iterations": iteration, "fallbacks": fallbacks})
    else:
        logger.warning("拟牛顿EM达到最大迭代次数仍未收敛", extra={"iterations": iteration})

    return FitReport(
        beta_hat=beta,
        cov=cov,
        trace=trace,
        iterations=iteration,
        converged=converged,
        algorithm="qnem",
        diagnostics={
            "grad_norm": float(np.max(np.abs(objective.gradient))) if d else 0.0,
            "em_fallbacks": fallbacks,
            "sr1_skipped": qn.skipped_updates,
            "remainder_hessian": qn.remainder_hessian_approx,
        },
    )


def _qn_covariance(dataset: Dataset, prior: GaussianPrior, beta: np.ndarray, S: np.ndarray, M: np.ndarray) -> np.ndarray:
    """-H̃⁻¹，H̃ = -A + M₊；不正定时使用精确的 -∇²L⁻¹"""
    d = dataset.d
    try:
        return spd_inverse(S - _psd_part(M))
    except NotPositiveDefiniteError:
        logger.warning("近似Hessian不正定，改用精确Hessian计算协方差")
        hessian = log_posterior(dataset, prior, beta).hessian
        return spd_inverse(-hessian)


def approx_stddev(report: FitReport) -> np.ndarray:
    """
    近似后验标准差，协方差对角线的平方根

    异常:
        NotPositiveDefiniteError: 协方差缺失或不正定
    """
    if report.cov is None:
        raise NotPositiveDefiniteError("报告中没有协方差", error_details={"min_eigenvalue": float("nan")})
    cov = np.asarray(report.cov, dtype=float)
    cholesky(symmetrize(cov))
    return np.sqrt(np.diag(cov))
