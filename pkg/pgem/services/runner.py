"""
文件路径: pgem/services/runner.py

按运行配置分派拟合

命令行的 fit/path 命令和测试都通过这里调用具体求解器。
"""
import logging
from typing import Any, Dict, Optional, Union

from pgem.core.exceptions import DomainError
from pgem.models import Dataset, FitReport, GaussianPrior, MultiDataset, MultiFitReport, PathResult, RunConfig
from pgem.models.run import MULTINOMIAL_ALGORITHMS
from pgem.services.em_batch import fit_em, fit_qnem
from pgem.services.multinomial import fit_ecm, fit_partial_irls
from pgem.services.online import fit_online_em, fit_sgd
from pgem.services.sparse import (
    default_exempt,
    fit_penalized,
    holdout_misclassification,
    lambda_grid,
    lambda_max,
    solution_path,
)
from pgem.services.vb import fit_vb

logger = logging.getLogger(__name__)


def _options(config: RunConfig) -> Dict[str, Any]:
    options: Dict[str, Any] = {}
    if config.tol is not None:
        options["tol"] = config.tol
    if config.max_iter is not None:
        options["max_iter"] = config.max_iter
    return options


def fit_from_config(
    config: RunConfig,
    dataset: Union[Dataset, MultiDataset],
    prior: Optional[GaussianPrior] = None,
) -> Union[FitReport, MultiFitReport]:
    """
    按 config.algorithm 拟合

    参数:
        config: 运行配置（command 为 fit）
        dataset: 二项或多分类数据集
        prior: 高斯先验，默认为精度 1e-5 的各向同性先验

    返回:
        FitReport 或 MultiFitReport
    """
    algorithm = config.algorithm
    multinomial = isinstance(dataset, MultiDataset)
    if multinomial != (algorithm in MULTINOMIAL_ALGORITHMS):
        raise DomainError(
            f"算法 {algorithm} 与数据格式不匹配",
            error_details={"detail": f"{algorithm} / {'multinomial' if multinomial else 'binomial'}"},
        )
    options = _options(config)

    if multinomial:
        penalty = config.penalty_spec() if config.penalty != "none" else None
        if algorithm == "ecm":
            return fit_ecm(dataset, penalty, **options)
        return fit_partial_irls(dataset, penalty, **options)

    prior = prior or GaussianPrior.isotropic(dataset.d)
    if algorithm == "em":
        return fit_em(dataset, prior, **options)
    if algorithm == "qnem":
        return fit_qnem(dataset, prior, **options)
    if algorithm == "vb":
        return fit_vb(dataset, prior, **options)
    if algorithm == "online-em":
        return fit_online_em(
            dataset, prior, rate=config.learn_rate(), batch_size=config.batch_size,
            passes=config.passes or 3, seed=config.seed, pr_burn=config.pr_burn,
        )
    if algorithm == "sgd":
        return fit_sgd(dataset, prior, rate=config.learn_rate(), passes=config.passes or 50, rng_seed=config.seed)

    penalty = config.penalty_spec(exempt=default_exempt(dataset))
    return fit_penalized(dataset, algorithm, penalty, **options)


def path_from_config(config: RunConfig, dataset: Dataset) -> PathResult:
    """
    按配置拟合解路径；replicates > 0 时附加留出误分类率

    网格为 lambda_max 到 lambda_max·PATH_MIN_RATIO 的 config.grid 个几何等距点。
    """
    if not isinstance(dataset, Dataset):
        raise DomainError("解路径只支持二项数据", error_details={"detail": "multinomial data"})
    penalty = config.penalty_spec(exempt=default_exempt(dataset))
    grid = lambda_grid(lambda_max(dataset, penalty.exempt), size=config.grid)
    options = _options(config)
    result = solution_path(dataset, config.algorithm, grid, penalty=penalty, **options)
    if config.replicates > 0:
        result.misclassification = holdout_misclassification(
            dataset, config.algorithm, grid,
            replicates=config.replicates, holdout_frac=config.holdout_frac,
            seed=config.seed, penalty=penalty, **options,
        )
    return result
