"""
文件路径: pgem/services/simulate.py

模拟数据生成器

- appendixA: 10 个系数从 -3 到 3 等距，250 个观测，独立标准正态预测变量
- figure1: 因子结构的共线设计 Σ = BBᵀ + 0.1I，各列重标定为方差 1/d
  （默认缩小为 d=50、10 个因子、N=10⁴；overrides 可恢复 d=250、50 个因子、N=10⁵）
- appendixB: 500×50 的 0/1 设计，前 10 个系数为 ±√5 交替，其余为 0
- custom: 独立标准正态设计，系数由 overrides 给出或随机抽取

相同的 (design, seed, overrides) 总是生成逐位相同的数据。
"""
import logging
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from pgem.core.config import settings
from pgem.core.exceptions import DimensionMismatchError, DomainError
from pgem.models import Dataset, MultiDataset
from pgem.services.multinomial import class_probs
from pgem.utils.numerics import sigmoid

logger = logging.getLogger(__name__)

DesignName = Literal["appendixA", "figure1", "appendixB", "custom"]


class DesignOverrides(BaseModel):
    """模拟参数覆盖项，未给出的字段使用各设计的默认值"""

    model_config = ConfigDict(extra="forbid")

    n: Optional[int] = Field(default=None, gt=0)
    d: Optional[int] = Field(default=None, gt=0)
    factors: Optional[int] = Field(default=None, gt=0)
    trials: float = Field(default=1.0, gt=0)
    n_nonzero: Optional[int] = Field(default=None, ge=0)
    signal: Optional[float] = None
    beta: Optional[List[float]] = None


def _binomial_response(rng: np.random.Generator, X: np.ndarray, beta: np.ndarray, trials: float) -> Dataset:
    p = sigmoid(X @ beta)
    m = np.full(X.shape[0], trials)
    if float(trials).is_integer():
        y = rng.binomial(int(trials), p).astype(float)
    else:
        # 非整数试验次数：取整数部分抽样后按比例放缩
        y = rng.binomial(int(np.ceil(trials)), p) * (trials / np.ceil(trials))
    return Dataset(y=y, m=m, X=X)


def _resolve_beta(opts: DesignOverrides, default: np.ndarray) -> np.ndarray:
    if opts.beta is None:
        return default
    beta = np.asarray(opts.beta, dtype=float)
    if beta.size != default.size:
        raise DimensionMismatchError(
            f"系数长度 {beta.size} 与设计维度 {default.size} 不一致",
            error_details={"detail": f"len(beta)={beta.size}, d={default.size}"},
        )
    return beta


def _appendix_a(rng: np.random.Generator, opts: DesignOverrides) -> Tuple[np.ndarray, np.ndarray]:
    n, d = opts.n or 250, opts.d or 10
    beta = _resolve_beta(opts, np.linspace(-3.0, 3.0, d))
    X = rng.standard_normal((n, d))
    return X, beta


def _figure1(rng: np.random.Generator, opts: DesignOverrides) -> Tuple[np.ndarray, np.ndarray]:
    n, d, factors = opts.n or 10_000, opts.d or 50, opts.factors or 10
    loadings = rng.standard_normal((d, factors))
    sigma = loadings @ loadings.T + 0.1 * np.eye(d)
    X = rng.multivariate_normal(np.zeros(d), sigma, size=n, method="cholesky")
    # 列方差 1/d，使线性预测子近似标准正态
    X = X / np.sqrt(np.diag(sigma) * d)
    beta = _resolve_beta(opts, rng.standard_normal(d))
    return X, beta


def _appendix_b(rng: np.random.Generator, opts: DesignOverrides) -> Tuple[np.ndarray, np.ndarray]:
    n, d = opts.n or 500, opts.d or 50
    n_nonzero = 10 if opts.n_nonzero is None else opts.n_nonzero
    if n_nonzero > d:
        raise DimensionMismatchError(
            f"非零系数个数 {n_nonzero} 超过维度 {d}",
            error_details={"detail": f"n_nonzero={n_nonzero}, d={d}"},
        )
    signal = np.sqrt(5.0) if opts.signal is None else opts.signal
    default = np.zeros(d)
    default[:n_nonzero] = signal * np.where(np.arange(n_nonzero) % 2 == 0, 1.0, -1.0)
    beta = _resolve_beta(opts, default)
    X = rng.integers(0, 2, size=(n, d)).astype(float)
    return X, beta


def _custom(rng: np.random.Generator, opts: DesignOverrides) -> Tuple[np.ndarray, np.ndarray]:
    if opts.beta is not None:
        d = len(opts.beta)
        if opts.d is not None and opts.d != d:
            raise DimensionMismatchError(
                f"d={opts.d} 与系数长度 {d} 不一致",
                error_details={"detail": f"len(beta)={d}, d={opts.d}"},
            )
    else:
        d = opts.d or 5
    n = opts.n or 200
    beta = _resolve_beta(opts, rng.standard_normal(d))
    X = rng.standard_normal((n, d))
    return X, beta


DESIGNS: Dict[str, Callable[[np.random.Generator, DesignOverrides], Tuple[np.ndarray, np.ndarray]]] = {
    "appendixA": _appendix_a,
    "figure1": _figure1,
    "appendixB": _appendix_b,
    "custom": _custom,
}


def simulate(
    design: DesignName = "appendixA",
    seed: int = settings.DEFAULT_SEED,
    overrides: Optional[dict] = None,
) -> Tuple[Dataset, np.ndarray]:
    """
    按实验设计生成二项数据

    参数:
        design: 设计名称
        seed: 随机种子
        overrides: 覆盖项，字段见 DesignOverrides

    返回:
        (数据集, 真实系数)
    """
    if design not in DESIGNS:
        raise DomainError(f"未知的模拟设计: {design}", error_details={"detail": design})
    try:
        opts = DesignOverrides(**(overrides or {}))
    except ValidationError as e:
        raise DomainError(f"模拟覆盖项无效: {e}", error_details={"detail": str(e)}) from e

    rng = np.random.default_rng(seed)
    X, beta = DESIGNS[design](rng, opts)
    dataset = _binomial_response(rng, X, beta, opts.trials)
    logger.info("生成模拟数据", extra={"design": design, "seed": seed, "n": dataset.n, "d": dataset.d})
    return dataset, beta


def simulate_multinomial(
    n: int = 300,
    d: int = 5,
    k: int = 3,
    seed: int = settings.DEFAULT_SEED,
    signal: float = 1.0,
) -> Tuple[MultiDataset, np.ndarray]:
    """
    生成多分类数据，第一类系数固定为 0

    返回:
        (多分类数据集, d×K 真实系数矩阵)
    """
    if k < 2:
        raise DomainError("类别数 K 至少为 2", error_details={"detail": f"K={k}"})
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))]) if d > 1 else np.ones((n, 1))
    B = signal * rng.standard_normal((d, k))
    B[:, 0] = 0.0
    theta = class_probs(B, X)
    # 逐行按累积概率抽取类别
    u = rng.random(n)[:, None]
    labels = np.minimum((u > np.cumsum(theta, axis=1)).sum(axis=1), k - 1) + 1
    return MultiDataset.from_labels(labels, X, n_classes=k), B
