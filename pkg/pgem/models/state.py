"""
文件路径: pgem/models/state.py

求解器状态模型

批量EM、拟牛顿、变分贝叶斯和在线EM在迭代过程中持有的状态。
状态归单个求解器所有，可以在线程间转移但不共享修改。
"""
from pgem.models.base import ArrayModel, Optional, np


class FitState(ArrayModel):
    """
    批量EM状态

    S 为 XᵀΩX + Σ⁻¹，d_vec 为 Xᵀκ + Σ⁻¹μ。
    """

    beta: np.ndarray
    omega: np.ndarray
    S: np.ndarray
    d_vec: np.ndarray
    iteration: int = 0
    objective: float = float("-inf")


class QnState(ArrayModel):
    """拟牛顿EM状态：剩余Hessian的近似和最近的割线对"""

    remainder_hessian_approx: np.ndarray
    last_s: Optional[np.ndarray] = None
    last_y: Optional[np.ndarray] = None
    skipped_updates: int = 0


class VbState(ArrayModel):
    """变分贝叶斯状态"""

    m: np.ndarray
    V: np.ndarray
    xi: np.ndarray
    elbo: float = float("-inf")


class OnlineState(ArrayModel):
    """
    在线EM状态

    S_bar 和 d_bar 是按观测平均的充分统计量。
    pr_sum / pr_count 是步数大于 pr_burn 的 β 的累加和与个数，只保存当前迭代值。
    """

    S_bar: np.ndarray
    d_bar: np.ndarray
    beta: np.ndarray
    step: int = 0
    n_processed: int = 0
    pr_burn: int = 0
    pr_sum: Optional[np.ndarray] = None
    pr_count: int = 0

    @classmethod
    def initial(
        cls, d: int, ridge: float, beta0: Optional[np.ndarray] = None, pr_burn: int = 0,
    ) -> "OnlineState":
        """S₀ = ridge·I，d₀ = 0"""
        beta = np.zeros(d) if beta0 is None else np.asarray(beta0, dtype=float).copy()
        return cls(S_bar=ridge * np.eye(d), d_bar=np.zeros(d), beta=beta, pr_burn=pr_burn, pr_sum=np.zeros(d))


class SpdSystem(ArrayModel):
    """对称正定线性系统 Sβ = d_vec"""

    S: np.ndarray
    d_vec: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.d_vec.shape[0])
