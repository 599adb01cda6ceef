"""
文件路径: pgem/services/pg_math.py

Polya-Gamma 分布的纯函数

- pg_mean: 条件均值 E(ω) = (b/2c)·tanh(c/2)，E步的核心
- pg_laplace: Laplace 变换的闭式 cosh 形式（对数空间计算）
- pg_laplace_product: 截断无穷乘积形式，仅作测试参照
- pg_sample_truncated: 截断伽马级数抽样器，仅作测试参照

所有函数都接受标量或numpy数组，且关于 c 为偶函数。
"""
import logging
from typing import Optional, Union

import numpy as np

from pgem.core.exceptions import DomainError
from pgem.utils.numerics import log_cosh, tanh_ratio

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# 切换到泰勒展开的阈值
TAYLOR_THRESHOLD = 1e-4
DEFAULT_TERMS = 200
# 抽样时每块的样本数，限制 (size, terms) 中间数组的内存
SAMPLE_CHUNK = 10000


def _check_shape(b: ArrayLike) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if np.any(~(b > 0)):
        raise DomainError(
            "Polya-Gamma 形状参数 b 必须为正",
            error_details={"detail": f"b={b.min() if b.size else b}"},
        )
    return b


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def pg_mean(b: ArrayLike, c: ArrayLike) -> ArrayLike:
    """
    PG(b, c) 的均值 (b/2c)·tanh(c/2)

    在 c = 0 处连续延拓为 b/4，|c| < 1e-4 时使用泰勒展开。

    参数:
        b: 形状参数，必须为正
        c: 倾斜参数

    返回:
        均值，位于 (0, b/4]
    """
    b = _check_shape(b)
    c = np.asarray(c, dtype=float)
    return _scalar_or_array(b * tanh_ratio(c, TAYLOR_THRESHOLD))


def pg_laplace(b: ArrayLike, c: ArrayLike, t: ArrayLike) -> ArrayLike:
    """
    PG(b, c) 的 Laplace 变换 E[exp(-tω)]

    按 exp(b·(log cosh(c/2) - log cosh(√((c²/2 + t)/2)))) 计算以避免溢出。

    参数:
        b: 形状参数
        c: 倾斜参数
        t: 变换变量，t >= 0

    返回:
        (0, 1] 内的值
    """
    b = _check_shape(b)
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("Laplace 变换变量 t 不能为负", error_details={"detail": "t < 0"})
    inner = 0.5 * c * c + t
    value = np.exp(b * (log_cosh(0.5 * c) - log_cosh(np.sqrt(0.5 * inner))))
    return _scalar_or_array(value)


def pg_laplace_product(
    b: ArrayLike,
    c: ArrayLike,
    t: ArrayLike,
    terms: int = 10000,
    tail_correction: bool = True,
) -> ArrayLike:
    """
    截断的无穷乘积形式 ∏ₖ (1 + t/dₖ)^(-b)，dₖ = 2π²(k-1/2)² + c²/2

    tail_correction 为 True 时对 k > terms 的尾部使用
    Σ 1/(k-1/2)² ≈ 1/terms 的一阶修正。

    参数:
        b: 形状参数
        c: 倾斜参数
        t: 变换变量
        terms: 乘积项数
        tail_correction: 是否修正截断尾部

    返回:
        Laplace 变换的近似值
    """
    if terms < 1:
        raise DomainError("乘积项数至少为1", error_details={"detail": f"terms={terms}"})
    b = _check_shape(b)
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    k = np.arange(1, terms + 1, dtype=float)
    denom = 2.0 * np.pi ** 2 * (k - 0.5) ** 2 + 0.5 * c[..., None] ** 2
    log_value = -b * np.sum(np.log1p(t[..., None] / denom), axis=-1)
    if tail_correction:
        log_value = log_value - b * t / (2.0 * np.pi ** 2 * terms)
    return _scalar_or_array(np.exp(log_value))


def pg_sample_truncated(
    b: float,
    c: float,
    terms: int = DEFAULT_TERMS,
    rng_seed: int = 0,
    size: Optional[int] = None,
) -> ArrayLike:
    """
    截断伽马级数抽样 (1/2π²)·Σ gₖ/((k-1/2)² + c²/(4π²))，gₖ ~ Gamma(b, 1)

    只用作检验 pg_mean 的蒙特卡洛参照，不做偏差修正。

    参数:
        b: 形状参数
        c: 倾斜参数
        terms: 截断项数，至少为1
        rng_seed: 随机种子，结果由种子唯一确定
        size: 样本数，None 时返回单个样本

    返回:
        单个样本或长度为 size 的数组
    """
    if terms < 1:
        raise DomainError("截断项数至少为1", error_details={"detail": f"terms={terms}"})
    _check_shape(b)
    rng = np.random.default_rng(rng_seed)
    k = np.arange(1, terms + 1, dtype=float)
    weights = 1.0 / ((k - 0.5) ** 2 + c * c / (4.0 * np.pi ** 2))
    scale = 0.5 / np.pi ** 2

    count = 1 if size is None else int(size)
    draws = np.empty(count)
    for start in range(0, count, SAMPLE_CHUNK):
        stop = min(start + SAMPLE_CHUNK, count)
        g = rng.gamma(b, 1.0, size=(stop - start, terms))
        draws[start:stop] = scale * (g @ weights)

    logger.debug("截断级数抽样完成", extra={"b": b, "c": c, "terms": terms, "size": count})
    return float(draws[0]) if size is None else draws
