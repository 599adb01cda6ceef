"""数据模型包，包含数据集、先验、惩罚设置和拟合报告等pydantic模型。"""
from pgem.models.dataset import Dataset, MultiDataset, negative_binomial_dataset
from pgem.models.prior import GaussianPrior
from pgem.models.penalty import CgConfig, LearnRate, PenaltySpec
from pgem.models.report import (
    CgResult,
    FitReport,
    MultiFitReport,
    ObjectiveReport,
    PathResult,
    TraceEntry,
)
from pgem.models.run import RunConfig
from pgem.models.state import FitState, OnlineState, QnState, SpdSystem, VbState

__all__ = [
    "Dataset", "MultiDataset", "negative_binomial_dataset",
    "GaussianPrior",
    "CgConfig", "LearnRate", "PenaltySpec",
    "CgResult", "FitReport", "MultiFitReport", "ObjectiveReport", "PathResult", "TraceEntry",
    "RunConfig",
    "FitState", "OnlineState", "QnState", "SpdSystem", "VbState",
]
