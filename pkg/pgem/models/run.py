"""
文件路径: pgem/models/run.py

运行配置模型

命令行的每次调用都会构造一个 RunConfig，它同时写入所有输出文件，
保证 (seed, config) 可以复现结果。
"""
from pathlib import Path

from pgem.core.config import settings
from pgem.models.base import (
    BaseModel,
    DomainError,
    Field,
    List,
    Literal,
    Optional,
    model_validator,
)
from pgem.models.penalty import LearnRate, PenaltySpec

Command = Literal["simulate", "fit", "path", "benchmark", "predict"]

BINARY_ALGORITHMS = ("em", "qnem", "vb", "online-em", "sgd", "irls-cd", "irls-cg", "da-cd", "da-cg", "bridge")
MULTINOMIAL_ALGORITHMS = ("ecm", "partial-irls")
PATH_ALGORITHMS = ("irls-cd", "irls-cg", "da-cd", "da-cg", "bridge")
BENCHMARK_ALGORITHMS = ("em", "qnem", "vb", "online-em", "sgd")
PENALIZED_ALGORITHMS = ("irls-cd", "irls-cg", "da-cd", "da-cg", "bridge", "ecm", "partial-irls")

_ALLOWED = {
    "fit": BINARY_ALGORITHMS + MULTINOMIAL_ALGORITHMS,
    "path": PATH_ALGORITHMS,
    "benchmark": BENCHMARK_ALGORITHMS,
}


class RunConfig(BaseModel):
    """
    命令行运行配置

    字段:
    - command / algorithm / arms: 命令与算法（benchmark 使用 arms）
    - data / out: 输入输出路径
    - penalty, lam, alpha: 惩罚设置
    - batch_size, passes, rate_c, rate_t0, pr_burn: 在线学习设置
    - grid, holdout_frac, replicates: 解路径与留出评估设置
    - match_clock: benchmark 中 sgd 的墙钟预算与 online-em 的耗时相同
    - design: 模拟设计名称
    """

    command: Command
    algorithm: Optional[str] = None
    arms: List[str] = Field(default_factory=list)
    data: Optional[Path] = None
    out: Optional[Path] = None
    seed: int = settings.DEFAULT_SEED
    tol: Optional[float] = Field(default=None, gt=0)
    max_iter: Optional[int] = Field(default=None, gt=0)
    penalty: Literal["none", "lasso", "bridge"] = "none"
    lam: float = Field(default=0.0, ge=0)
    alpha: float = 0.5
    batch_size: Optional[int] = Field(default=None, gt=0)
    passes: Optional[int] = Field(default=None, gt=0)
    rate_c: float = settings.ONLINE_RATE_C
    rate_t0: float = settings.ONLINE_RATE_T0
    pr_burn: Optional[int] = Field(default=None, ge=0)
    grid: int = Field(default=settings.PATH_GRID_SIZE, gt=0)
    design: str = "appendixA"
    holdout_frac: float = settings.HOLDOUT_FRAC
    replicates: int = Field(default=settings.REPLICATES, ge=0)
    match_clock: bool = True

    @model_validator(mode="after")
    def check_algorithm(self) -> "RunConfig":
        allowed = _ALLOWED.get(self.command)
        if self.command == "benchmark":
            if not self.arms:
                self.arms = ["online-em", "sgd"]
            bad = [arm for arm in self.arms if arm not in allowed]
            if bad:
                raise DomainError(f"benchmark 不支持的算法: {bad}", error_details={"detail": ",".join(bad)})
        elif allowed is not None:
            if self.algorithm is None:
                self.algorithm = "em" if self.command == "fit" else "da-cd"
            if self.algorithm not in allowed:
                raise DomainError(
                    f"命令 {self.command} 不支持算法 {self.algorithm}",
                    error_details={"detail": f"{self.command}/{self.algorithm}"},
                )
        if not 0.0 < self.holdout_frac < 1.0:
            raise DomainError(f"留出比例必须在(0, 1)内: {self.holdout_frac}", error_details={"detail": str(self.holdout_frac)})
        if self.algorithm in PENALIZED_ALGORITHMS and self.algorithm not in MULTINOMIAL_ALGORITHMS and self.penalty == "none":
            self.penalty = "bridge" if self.algorithm == "bridge" else "lasso"
        return self

    def penalty_spec(self, exempt=None) -> PenaltySpec:
        return PenaltySpec(family=self.penalty, lam=self.lam, alpha=self.alpha, exempt=exempt)

    def learn_rate(self) -> LearnRate:
        return LearnRate(c=self.rate_c, t0=self.rate_t0)

    def echo(self) -> dict:
        """写入输出文件的配置回显"""
        return self.model_dump(mode="json")
