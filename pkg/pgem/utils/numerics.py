"""
文件路径: pgem/utils/numerics.py

数值工具模块

提供溢出安全的基础函数：softplus、log cosh、sigmoid 以及数组形状检查。
所有求解器都应从这里导入这些函数，而不是各自实现。
"""
from typing import Optional

import numpy as np
from scipy.special import expit

from pgem.core.exceptions import DimensionMismatchError, DomainError

LOG_2 = float(np.log(2.0))


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x))，按 max(x, 0) + log1p(exp(-|x|)) 计算"""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def log_cosh(x: np.ndarray) -> np.ndarray:
    """log cosh(x) = |x| + log1p(exp(-2|x|)) - log 2"""
    ax = np.abs(np.asarray(x, dtype=float))
    return ax + np.log1p(np.exp(-2.0 * ax)) - LOG_2


def sigmoid(x: np.ndarray) -> np.ndarray:
    """逻辑函数"""
    return expit(x)


def tanh_ratio(x: np.ndarray, small: float = 1e-4) -> np.ndarray:
    """
    计算 tanh(x/2) / (2x)，在 x = 0 处连续延拓为 1/4

    |x| < small 时使用泰勒展开 (1/4)(1 - (x/2)^2/3 + 2(x/2)^4/15)。

    参数:
        x: 实数或数组
        small: 切换到泰勒展开的阈值

    返回:
        与 x 形状相同的数组
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = np.atleast_1d(x)
    half = 0.5 * x
    out = np.empty_like(x)
    near = np.abs(x) < small
    h2 = half[near] ** 2
    out[near] = 0.25 * (1.0 - h2 / 3.0 + 2.0 * h2 * h2 / 15.0)
    far = ~near
    out[far] = np.tanh(half[far]) / (2.0 * x[far])
    return out.reshape(shape)


def as_vector(value, name: str, length: Optional[int] = None) -> np.ndarray:
    """转换为一维浮点数组并检查长度"""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatchError(
            f"{name} 必须是一维数组，实际维度 {arr.ndim}",
            error_details={"detail": f"{name}.ndim={arr.ndim}"},
        )
    if length is not None and arr.shape[0] != length:
        raise DimensionMismatchError(
            f"{name} 长度应为 {length}，实际为 {arr.shape[0]}",
            error_details={"detail": f"{name}: {arr.shape[0]} != {length}"},
        )
    return arr


def as_matrix(value, name: str, shape: Optional[tuple] = None) -> np.ndarray:
    """转换为二维浮点数组并检查形状，shape 中的 None 表示不检查该维"""
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(
            f"{name} 必须是二维数组，实际维度 {arr.ndim}",
            error_details={"detail": f"{name}.ndim={arr.ndim}"},
        )
    if shape is not None:
        for axis, expected in enumerate(shape):
            if expected is not None and arr.shape[axis] != expected:
                raise DimensionMismatchError(
                    f"{name} 形状应为 {shape}，实际为 {arr.shape}",
                    error_details={"detail": f"{name}: {arr.shape} vs {shape}"},
                )
    return arr


def require_finite(arr: np.ndarray, name: str) -> None:
    """拒绝 NaN 和 Inf"""
    if not np.all(np.isfinite(arr)):
        raise DomainError(
            f"{name} 含有非有限值",
            error_details={"detail": f"{name} contains NaN/Inf"},
        )


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)
