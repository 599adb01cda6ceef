"""
文件路径: pgem/models/penalty.py

惩罚项、学习率和共轭梯度配置模型
"""
from pgem.core.config import settings
from pgem.models.base import (
    ArrayModel,
    BaseModel,
    ConfigDict,
    DomainError,
    Field,
    Literal,
    Optional,
    model_validator,
    np,
)


class PenaltySpec(ArrayModel):
    """
    惩罚设置

    字段:
    - family: none | lasso | bridge
    - lam: 惩罚强度 λ >= 0（序列化名为 lambda）
    - alpha: bridge 指数，0 < alpha < 1
    - exempt: 不受惩罚的系数掩码（如截距），None 表示全部受惩罚
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, populate_by_name=True)

    family: Literal["none", "lasso", "bridge"] = "lasso"
    lam: float = Field(0.0, alias="lambda")
    alpha: float = 0.5
    exempt: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def check_invariants(self) -> "PenaltySpec":
        if self.lam < 0:
            raise DomainError(f"λ 不能为负: {self.lam}", error_details={"detail": f"lambda={self.lam}"})
        if self.family == "bridge" and not 0.0 < self.alpha < 1.0:
            raise DomainError(f"bridge 指数必须在(0, 1)内: {self.alpha}", error_details={"detail": f"alpha={self.alpha}"})
        if self.exempt is not None:
            self.exempt = np.asarray(self.exempt, dtype=bool)
        return self

    def exempt_mask(self, d: int) -> np.ndarray:
        """长度为 d 的豁免掩码"""
        if self.exempt is None:
            return np.zeros(d, dtype=bool)
        if self.exempt.shape != (d,):
            raise DomainError("豁免掩码长度与维度不符", error_details={"detail": f"{self.exempt.shape} vs {d}"})
        return self.exempt

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(family=self.family, lam=lam, alpha=self.alpha, exempt=self.exempt)


class LearnRate(BaseModel):
    """
    学习率 γ = scale·(step + t0 + 1)^(-c)

    c 必须在 (0.5, 1) 开区间内：γ 不可求和但平方可求和。
    """

    c: float = settings.ONLINE_RATE_C
    t0: float = settings.ONLINE_RATE_T0
    scale: float = 1.0

    @model_validator(mode="after")
    def check_invariants(self) -> "LearnRate":
        if not 0.5 < self.c < 1.0:
            raise DomainError(f"学习率指数必须在(0.5, 1)内: {self.c}", error_details={"detail": f"c={self.c}"})
        if self.t0 < 0:
            raise DomainError(f"t0 不能为负: {self.t0}", error_details={"detail": f"t0={self.t0}"})
        if self.scale < 0:
            raise DomainError(f"scale 不能为负: {self.scale}", error_details={"detail": f"scale={self.scale}"})
        return self


class CgConfig(ArrayModel):
    """
    ε 容差共轭梯度配置

    max_iter 为 None 时取 CG_MAX_ITER_FACTOR·d。
    """

    eps: float = settings.CG_EPS
    max_iter: Optional[int] = None
    warm_start: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def check_invariants(self) -> "CgConfig":
        if not 0.0 < self.eps < 1.0:
            raise DomainError(f"eps 必须在(0, 1)内: {self.eps}", error_details={"detail": f"eps={self.eps}"})
        if self.max_iter is not None and self.max_iter < 1:
            raise DomainError(f"max_iter 至少为1: {self.max_iter}", error_details={"detail": f"max_iter={self.max_iter}"})
        return self

    def resolved_max_iter(self, d: int) -> int:
        return self.max_iter if self.max_iter is not None else settings.CG_MAX_ITER_FACTOR * max(d, 1)
