"""
文件路径: pgem/models/report.py

结果模型模块

目标函数报告、拟合报告、共轭梯度结果和解路径结果。
非异常性的失败（未收敛、被截断、路径单点失败）记录在这些对象中。
"""
from pgem.models.base import (
    ArrayModel,
    Any,
    BaseModel,
    Dict,
    Field,
    List,
    Literal,
    Optional,
    np,
)

Algorithm = Literal[
    "em", "qnem", "vb", "online-em", "sgd",
    "irls-cd", "irls-cg", "da-cd", "da-cg", "bridge",
    "ecm", "partial-irls", "oracle",
]


class ObjectiveReport(ArrayModel):
    """观测数据对数后验及其梯度和（可选的）Hessian"""

    log_posterior: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None


class TraceEntry(BaseModel):
    """单次迭代记录"""

    iteration: int
    objective: float
    step_norm: float
    extra: Dict[str, float] = Field(default_factory=dict)


class FitReport(ArrayModel):
    """
    拟合报告

    字段:
    - beta_hat: 众数或变分均值
    - cov: 近似后验协方差
    - trace: 迭代轨迹
    - iterations / converged / algorithm
    - diverged: 检测到发散（IRLS 振荡等）
    - diagnostics: 额外诊断量，如梯度范数、KKT违反量
    """

    beta_hat: np.ndarray
    cov: Optional[np.ndarray] = None
    trace: List[TraceEntry] = Field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    algorithm: Algorithm = "em"
    diverged: bool = False
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([entry.objective for entry in self.trace])


class MultiFitReport(ArrayModel):
    """多分类拟合结果，B 为 d×K 系数矩阵"""

    B: np.ndarray
    trace: List[TraceEntry] = Field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    algorithm: Algorithm = "ecm"
    diverged: bool = False
    objective_name: str = "multinomial"
    diagnostics: Dict[str, Any] = Field(default_factory=dict)


class CgResult(ArrayModel):
    """
    共轭梯度结果

    residuals 为每次迭代后的残差平方范数 δ（包含初始值），
    energies 为 ½xᵀSx - xᵀd（包含初始值）。
    """

    x: np.ndarray
    iterations: int
    truncated: bool = False
    residuals: List[float] = Field(default_factory=list)
    energies: List[float] = Field(default_factory=list)


class PathResult(ArrayModel):
    """
    解路径

    每行对应一个 λ：betas[i] 是解，objectives[i] 是惩罚负对数似然，
    nonzero_counts[i] 是非零系数个数。单点失败记录在 errors 中，路径继续。
    """

    method: str
    lambdas: np.ndarray
    betas: np.ndarray
    objectives: np.ndarray
    nonzero_counts: np.ndarray
    converged: List[bool] = Field(default_factory=list)
    errors: Dict[int, str] = Field(default_factory=dict)
    misclassification: Optional[np.ndarray] = None
