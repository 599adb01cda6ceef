"""
文件路径: pgem/services/linsolve.py

M步使用的对称正定线性求解器

- solve_direct: Cholesky 分解直接求解，非正定时报告最小特征值
- solve_cg: ε 容差共轭梯度，可热启动，被截断时在结果中标记而不是报错
- spd_inverse: 协方差矩阵，C顺序且严格对称
"""
import logging
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from pgem.core.exceptions import NotPositiveDefiniteError
from pgem.models import CgConfig, CgResult, SpdSystem
from pgem.utils.numerics import as_matrix, as_vector

logger = logging.getLogger(__name__)

# 每隔多少次迭代重新计算一次真实残差，抑制舍入误差累积
RESIDUAL_REFRESH = 50


def _validate(system: SpdSystem) -> tuple:
    d_vec = as_vector(system.d_vec, "d_vec")
    S = as_matrix(system.S, "S", (d_vec.shape[0], d_vec.shape[0]))
    return S, d_vec


def _not_pd(S: np.ndarray, reason: str) -> NotPositiveDefiniteError:
    min_eig = float(np.linalg.eigvalsh(0.5 * (S + S.T)).min()) if S.size else 0.0
    return NotPositiveDefiniteError(
        f"线性系统矩阵不是正定的: {reason}",
        error_details={"min_eigenvalue": min_eig, "reason": reason},
    )


def cholesky(S: np.ndarray):
    """
    Cholesky 分解，失败时抛出 NotPositiveDefiniteError

    返回:
        cho_factor 的结果，可直接传给 cho_solve
    """
    try:
        return cho_factor(S, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise _not_pd(S, str(exc)) from exc


def solve_direct(system: SpdSystem) -> np.ndarray:
    """
    直接求解 Sβ = d

    参数:
        system: 对称正定系统

    返回:
        解向量 β

    异常:
        NotPositiveDefiniteError: 分解失败，error_details 中给出最小特征值
    """
    S, d_vec = _validate(system)
    factor = cholesky(S)
    return cho_solve(factor, d_vec)


def spd_inverse(S: np.ndarray, factor=None) -> np.ndarray:
    """
    对称正定矩阵的逆，按C顺序存储（cho_solve 的结果是F顺序）

    参数:
        S: 对称正定矩阵
        factor: 已有的 cholesky 分解，省略时现算
    """
    factor = cholesky(S) if factor is None else factor
    inverse = cho_solve(factor, np.eye(S.shape[0]))
    return np.ascontiguousarray(0.5 * (inverse + inverse.T))


def solve_cg(system: SpdSystem, config: Optional[CgConfig] = None) -> CgResult:
    """
    ε 容差共轭梯度

    当 ‖d - Sx‖² <= ε²‖d - Sx₀‖² 时停止；达到 max_iter 时返回当前迭代并标记 truncated。
    max_iter 取 1 即一步CG，取 n 即 n 步CG。

    参数:
        system: 对称正定系统
        config: eps、max_iter 和热启动点

    返回:
        CgResult，包含解、迭代次数、残差和能量历史

    异常:
        NotPositiveDefiniteError: 搜索方向上曲率 pᵀSp <= 0
    """
    config = config or CgConfig()
    S, d_vec = _validate(system)
    dim = d_vec.shape[0]
    max_iter = config.resolved_max_iter(dim)

    x = np.zeros(dim) if config.warm_start is None else as_vector(config.warm_start, "warm_start", dim).copy()
    r = d_vec - S @ x
    p = r.copy()
    delta_new = float(r @ r)
    delta0 = delta_new
    threshold = config.eps ** 2 * delta0

    residuals = [delta_new]
    energies = [float(0.5 * x @ (S @ x) - x @ d_vec)]
    iterations = 0

    while iterations < max_iter and delta_new > threshold:
        q = S @ p
        curvature = float(p @ q)
        if curvature <= 0.0:
            raise _not_pd(S, f"pᵀSp = {curvature:.3e} at iteration {iterations}")
        step = delta_new / curvature
        x = x + step * p
        iterations += 1
        if iterations % RESIDUAL_REFRESH == 0:
            r = d_vec - S @ x
        else:
            r = r - step * q
        delta_old = delta_new
        delta_new = float(r @ r)
        p = r + (delta_new / delta_old) * p
        residuals.append(delta_new)
        energies.append(float(0.5 * x @ (S @ x) - x @ d_vec))

    truncated = delta_new > threshold
    if truncated:
        logger.debug(
            "共轭梯度达到最大迭代次数",
            extra={"iterations": iterations, "residual": delta_new, "threshold": threshold},
        )
    return CgResult(x=x, iterations=iterations, truncated=truncated, residuals=residuals, energies=energies)
