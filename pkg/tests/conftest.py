"""
测试公共夹具

随机数据一律由固定种子的 numpy Generator 生成，保证用例可重复。
"""
import numpy as np
import pytest

from pgem.models import Dataset, GaussianPrior, MultiDataset
from pgem.services.simulate import simulate, simulate_multinomial


def make_logistic(rng: np.random.Generator, n: int = 120, d: int = 3, trials: float = 1.0, scale: float = 1.0) -> Dataset:
    """带截距的小规模逻辑回归数据"""
    X = np.column_stack([np.ones(n), rng.standard_normal((n, d - 1))])
    beta = scale * rng.standard_normal(d)
    p = 1.0 / (1.0 + np.exp(-X @ beta))
    m = np.full(n, trials)
    y = rng.binomial(int(trials), p).astype(float)
    return Dataset(y=y, m=m, X=X)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset(rng) -> Dataset:
    return make_logistic(rng)


@pytest.fixture
def binomial_dataset(rng) -> Dataset:
    return make_logistic(rng, n=80, d=4, trials=5.0, scale=0.5)


@pytest.fixture
def vague_prior():
    def build(d: int) -> GaussianPrior:
        return GaussianPrior.isotropic(d, precision=1e-5)
    return build


@pytest.fixture(scope="session")
def appendix_a():
    """d=10、N=250 的设计，真实系数从 -3 到 3"""
    dataset, beta = simulate("appendixA", seed=2013)
    return dataset, beta


@pytest.fixture(scope="session")
def appendix_b():
    dataset, beta = simulate("appendixB", seed=2013)
    return dataset, beta


@pytest.fixture
def multi_data() -> MultiDataset:
    data, _ = simulate_multinomial(n=200, d=3, k=3, seed=7)
    return data


@pytest.fixture
def logistic_factory():
    """返回 make_logistic，供需要自定义规模的用例使用"""
    return make_logistic
