"""
文件路径: pgem/services/vb.py

Jaakkola-Jordan 变分贝叶斯

对每个试验使用界 log(2cosh(ψ/2)) <= φ(ξ) + λ̂(ξ)(ψ² - ξ²)，
得到 fₜ(β, ξₜ) = κₜψₜ - mₜφ(ξₜ) - mₜλ̂(ξₜ)(ψₜ² - ξₜ²) <= lₜ(β)。
二次项系数 ωₜ = 2mₜλ̂(ξₜ) 与EM的E步权重形式相同（ψ 换成 ξ）。
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.linalg import cho_solve

from pgem.core.config import settings
from pgem.core.exceptions import DomainError
from pgem.models import Dataset, FitReport, GaussianPrior, TraceEntry, VbState
from pgem.services.em_batch import assemble_system
from pgem.services.linsolve import cholesky, spd_inverse
from pgem.services.objective import log_posterior, oracle_mode
from pgem.services.pg_math import pg_mean
from pgem.utils.numerics import LOG_2, as_vector, log_cosh, tanh_ratio

logger = logging.getLogger(__name__)


def lambda_hat(psi):
    """λ̂(ψ) = tanh(ψ/2)/(4ψ)，ψ = 0 时为 1/8"""
    value = 0.5 * tanh_ratio(psi)
    return float(value) if np.ndim(value) == 0 else value


def _phi(xi: np.ndarray) -> np.ndarray:
    """φ(ξ) = log(2cosh(ξ/2))"""
    return log_cosh(0.5 * xi) + LOG_2


def vb_weights(dataset: Dataset, xi: np.ndarray) -> np.ndarray:
    """ωₜ = 2mₜλ̂(ξₜ) = (mₜ/2ξₜ)·tanh(ξₜ/2)"""
    xi = as_vector(xi, "xi", dataset.n)
    if dataset.n == 0:
        return np.zeros(0)
    return pg_mean(dataset.m, xi)


def xi_update(dataset: Dataset, m: np.ndarray, V: np.ndarray) -> np.ndarray:
    """
    ξₜ = √(xₜᵀVxₜ + (xₜᵀm)²)

    参数:
        dataset: 数据集
        m: 变分均值
        V: 变分协方差，半正定

    返回:
        非负的 ξ
    """
    m = as_vector(m, "m", dataset.d)
    X = dataset.X
    quad = np.einsum("ij,jk,ik->i", X, V, X)
    return np.sqrt(np.maximum(quad, 0.0) + (X @ m) ** 2)


def variational_bound_terms(dataset: Dataset, beta: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """逐观测的下界 fₜ(β, ξₜ)"""
    beta = as_vector(beta, "beta", dataset.d)
    xi = as_vector(xi, "xi", dataset.n)
    psi = dataset.X @ beta
    kappa = dataset.y - 0.5 * dataset.m
    return kappa * psi - dataset.m * _phi(xi) - dataset.m * lambda_hat(xi) * (psi ** 2 - xi ** 2)


def _posterior_moments(dataset: Dataset, prior: GaussianPrior, xi: np.ndarray):
    system = assemble_system(dataset, prior, vb_weights(dataset, xi))
    factor = cholesky(system.S)
    m = cho_solve(factor, system.d_vec)
    V = spd_inverse(system.S, factor)
    return system, factor, m, V


def elbo(dataset: Dataset, prior: GaussianPrior, xi: np.ndarray) -> float:
    """
    变分下界 log ∫ p(β)·∏ₜ exp{fₜ(β, ξₜ)} dβ 的闭式值

    ½log|Σ⁻¹| - ½log|A| + ½bᵀA⁻¹b - ½μᵀΣ⁻¹μ + Σₜ(-mₜφ(ξₜ) + ½ωₜξₜ²)，
    其中 A = XᵀΩX + Σ⁻¹，b = Xᵀκ + Σ⁻¹μ。

    参数:
        dataset: 数据集
        prior: 高斯先验
        xi: 变分参数，全部为正

    返回:
        下界值（与对数后验使用相同的常数约定）
    """
    xi = as_vector(xi, "xi", dataset.n)
    if np.any(xi < 0):
        raise DomainError("变分参数 ξ 不能为负", error_details={"detail": "xi < 0"})
    system, factor, m, _ = _posterior_moments(dataset, prior, xi)
    c, _ = factor
    logdet_A = 2.0 * np.sum(np.log(np.abs(np.diag(c))))
    omega = vb_weights(dataset, xi)
    value = (
        0.5 * prior.logdet_precision()
        - 0.5 * logdet_A
        + 0.5 * float(system.d_vec @ m)
        - 0.5 * float(prior.mu @ prior.precision @ prior.mu)
        + float(np.sum(-dataset.m * _phi(xi) + 0.5 * omega * xi ** 2))
    )
    return float(value)


def fit_vb(
    dataset: Dataset,
    prior: GaussianPrior,
    tol: float = settings.VB_TOL,
    max_iter: int = settings.VB_MAX_ITER,
    xi_floor: float = settings.VB_XI_FLOOR,
) -> FitReport:
    """
    变分贝叶斯迭代

    从 ξₜ = |xₜᵀμ| + xi_floor 开始，交替更新 (m, V) 和 ξ，ELBO 变化 <= tol 时收敛。

    Args:
        dataset: 数据集
        prior: 高斯先验
        tol: ELBO 变化容差
        max_iter: 最大迭代次数
        xi_floor: ξ 初始下限

    Returns:
        FitReport，beta_hat 为变分均值，cov 为变分协方差，trace 的目标值为 ELBO
    """
    if not tol > 0:
        raise DomainError(f"tol 必须为正: {tol}", error_details={"detail": f"tol={tol}"})
    xi = np.abs(dataset.X @ prior.mu) + xi_floor
    _, _, m, V = _posterior_moments(dataset, prior, xi)
    state = VbState(m=m, V=V, xi=xi, elbo=elbo(dataset, prior, xi))
    trace = [TraceEntry(iteration=0, objective=state.elbo, step_norm=0.0)]
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        xi = xi_update(dataset, state.m, state.V)
        _, _, m, V = _posterior_moments(dataset, prior, xi)
        value = elbo(dataset, prior, xi)
        change = value - state.elbo
        step_norm = float(np.max(np.abs(m - state.m))) if dataset.d else 0.0
        state = VbState(m=m, V=V, xi=xi, elbo=value)
        trace.append(TraceEntry(iteration=iteration, objective=value, step_norm=step_norm))
        logger.debug("VB迭代", extra={"iteration": iteration, "elbo": value})
        if abs(change) <= tol:
            converged = True
            break

    if converged:
        logger.info("VB收敛", extra={"iterations": iteration, "elbo": state.elbo})
    else:
        logger.warning("VB达到最大迭代次数仍未收敛", extra={"iterations": iteration})

    return FitReport(
        beta_hat=state.m,
        cov=state.V,
        trace=trace,
        iterations=iteration,
        converged=converged,
        algorithm="vb",
        diagnostics={"elbo": state.elbo, "xi": state.xi},
    )


def log_marginal_quadrature(
    dataset: Dataset,
    prior: GaussianPrior,
    epsabs: float = 1e-13,
    epsrel: float = 1e-11,
) -> Tuple[float, float]:
    """
    一维问题的对数边际似然，用自适应求积计算

    以众数处的对数后验为基准平移被积函数，避免下溢。

    参数:
        dataset: d = 1 的数据集
        prior: 一维高斯先验

    返回:
        (对数边际似然, 积分的相对误差估计)
    """
    if dataset.d != 1:
        raise DomainError("求积参照只支持一维问题", error_details={"detail": f"d={dataset.d}"})
    mode = oracle_mode(dataset, prior)
    at_mode = log_posterior(dataset, prior, mode)
    peak = at_mode.log_posterior
    sd = float(np.sqrt(-1.0 / at_mode.hessian[0, 0]))
    center = float(mode[0])

    def integrand(b: float) -> float:
        return float(np.exp(log_posterior(dataset, prior, np.array([b]), with_hessian=False).log_posterior - peak))

    lower, upper = center - 40.0 * sd, center + 40.0 * sd
    value, abserr = integrate.quad(integrand, lower, upper, points=[center], epsabs=epsabs, epsrel=epsrel, limit=200)
    log_norm = 0.5 * (prior.logdet_precision() - np.log(2.0 * np.pi))
    return float(log_norm + peak + np.log(value)), float(abserr / value)
