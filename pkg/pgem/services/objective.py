"""
文件路径: pgem/services/objective.py

观测数据目标函数

精确的对数后验、解析梯度和Hessian，以及阻尼牛顿参考解。
所有EM/VB求解器都以这里的结果作为独立的检验基准。
目标函数省略与 β 无关的常数（包括混合表示中的 2^(-m)）。
"""
import logging
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve

from pgem.core.config import settings
from pgem.core.exceptions import ConvergenceError
from pgem.models import Dataset, GaussianPrior, ObjectiveReport
from pgem.services.linsolve import cholesky
from pgem.utils.numerics import as_vector, sigmoid, softplus

logger = logging.getLogger(__name__)


def kappa(dataset: Dataset) -> np.ndarray:
    """κₜ = yₜ - mₜ/2"""
    return dataset.y - 0.5 * dataset.m


def linear_predictor(dataset: Dataset, beta: np.ndarray) -> np.ndarray:
    """ψₜ = xₜᵀβ"""
    beta = as_vector(beta, "beta", dataset.d)
    return dataset.X @ beta


def loglik_terms(dataset: Dataset, beta: np.ndarray) -> np.ndarray:
    """每个观测的对数似然贡献 yₜψₜ - mₜ·log(1 + exp(ψₜ))"""
    psi = linear_predictor(dataset, beta)
    return dataset.y * psi - dataset.m * softplus(psi)


def log_posterior(
    dataset: Dataset,
    prior: GaussianPrior,
    beta: np.ndarray,
    with_hessian: bool = True,
) -> ObjectiveReport:
    """
    对数后验、梯度和Hessian

    参数:
        dataset: 数据集
        prior: 高斯先验
        beta: 系数
        with_hessian: 是否计算Hessian

    返回:
        ObjectiveReport
    """
    beta = as_vector(beta, "beta", dataset.d)
    as_vector(prior.mu, "mu", dataset.d)
    psi = dataset.X @ beta
    diff = beta - prior.mu
    prec_diff = prior.precision @ diff

    value = float(np.sum(dataset.y * psi - dataset.m * softplus(psi)) - 0.5 * diff @ prec_diff)
    prob = sigmoid(psi)
    gradient = dataset.X.T @ (dataset.y - dataset.m * prob) - prec_diff

    hessian = None
    if with_hessian:
        w = dataset.m * prob * sigmoid(-psi)
        hessian = -(dataset.X.T * w) @ dataset.X - prior.precision
        hessian = 0.5 * (hessian + hessian.T)

    return ObjectiveReport(log_posterior=value, gradient=gradient, hessian=hessian, psi=psi)


def oracle_mode(
    dataset: Dataset,
    prior: GaussianPrior,
    beta0: Optional[np.ndarray] = None,
    tol: float = settings.ORACLE_TOL,
    max_iter: int = settings.ORACLE_MAX_ITER,
    max_halvings: int = settings.ORACLE_MAX_HALVINGS,
) -> np.ndarray:
    """
    阻尼牛顿法求后验众数

    每步沿牛顿方向做步长减半直到目标函数不下降，最多减半 max_halvings 次。

    参数:
        dataset: 数据集
        prior: 高斯先验
        beta0: 初始点，默认为0
        tol: 梯度无穷范数容差
        max_iter: 最大迭代次数
        max_halvings: 每步最多减半次数

    返回:
        满足 ‖∇‖∞ <= tol 的 β

    异常:
        ConvergenceError: 未收敛，last_iterate 为最后一次迭代值
    """
    beta = np.zeros(dataset.d) if beta0 is None else as_vector(beta0, "beta0", dataset.d).copy()
    report = log_posterior(dataset, prior, beta)

    for iteration in range(max_iter):
        grad_norm = float(np.max(np.abs(report.gradient)))
        if grad_norm <= tol:
            logger.debug("参考解收敛", extra={"iterations": iteration, "grad_norm": grad_norm})
            return beta

        # -H 是正定的
        direction = cho_solve(cholesky(-report.hessian), report.gradient)
        slack = 1e-12 * max(abs(report.log_posterior), 1.0)
        step = 1.0
        for _ in range(max_halvings + 1):
            candidate = beta + step * direction
            trial = log_posterior(dataset, prior, candidate)
            if trial.log_posterior >= report.log_posterior - slack:
                break
            step *= 0.5
        else:
            raise ConvergenceError(
                "阻尼牛顿步长减半后仍无法上升",
                error_details={"iterations": iteration, "grad_norm": grad_norm},
                last_iterate=beta,
            )
        beta, report = candidate, trial

    grad_norm = float(np.max(np.abs(report.gradient)))
    if grad_norm <= tol:
        return beta
    raise ConvergenceError(
        "阻尼牛顿未收敛",
        error_details={"iterations": max_iter, "grad_norm": grad_norm},
        last_iterate=beta,
    )


def predict_proba(X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """成功概率 σ(Xβ)"""
    return sigmoid(np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float))


def log_loss(dataset: Dataset, beta: np.ndarray) -> float:
    """每次试验的平均负对数似然"""
    total = float(np.sum(dataset.m))
    if total == 0:
        return 0.0
    return float(-np.sum(loglik_terms(dataset, beta)) / total)


def misclassification(dataset: Dataset, beta: np.ndarray) -> float:
    """
    按试验计的误分类率

    预测概率大于 1/2 时把全部试验判为成功，m = 1 时即通常的误分类率。
    """
    total = float(np.sum(dataset.m))
    if total == 0:
        return 0.0
    predict_success = predict_proba(dataset.X, beta) > 0.5
    errors = np.where(predict_success, dataset.m - dataset.y, dataset.y)
    return float(np.sum(errors) / total)


def gradient_norm(dataset: Dataset, prior: GaussianPrior, beta: np.ndarray) -> float:
    """梯度的无穷范数"""
    return float(np.max(np.abs(log_posterior(dataset, prior, beta, with_hessian=False).gradient)))
