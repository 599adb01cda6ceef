"""
文件路径: pgem/models/prior.py

高斯先验模型

先验以精度矩阵 Σ⁻¹ 存储，模糊先验用很小的对角精度表示。
"""
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from pgem.models.base import (
    ArrayModel,
    DomainError,
    NotPositiveDefiniteError,
    as_matrix,
    as_vector,
    model_validator,
    np,
    require_finite,
)

SYMMETRY_TOL = 1e-12


class GaussianPrior(ArrayModel):
    """
    β 的正态先验 N(mu, precision⁻¹)

    字段:
    - mu: 先验均值，长度 d
    - precision: d×d 对称正定精度矩阵
    """

    mu: np.ndarray
    precision: np.ndarray

    @model_validator(mode="after")
    def check_invariants(self) -> "GaussianPrior":
        self.mu = as_vector(self.mu, "mu")
        d = self.mu.shape[0]
        self.precision = as_matrix(self.precision, "precision", (d, d))
        require_finite(self.precision, "precision")
        scale = max(float(np.max(np.abs(self.precision))), 1.0)
        if np.max(np.abs(self.precision - self.precision.T)) > SYMMETRY_TOL * scale:
            raise DomainError("先验精度矩阵必须对称", error_details={"detail": "precision not symmetric"})
        try:
            cho_factor(self.precision)
        except LinAlgError as exc:
            min_eig = float(np.linalg.eigvalsh(self.precision).min())
            raise NotPositiveDefiniteError(
                "先验精度矩阵不是正定的",
                error_details={"min_eigenvalue": min_eig},
            ) from exc
        return self

    @classmethod
    def isotropic(cls, d: int, precision: float = 1e-5, mu=None) -> "GaussianPrior":
        """
        各向同性先验，默认是模糊的零均值先验

        参数:
            d: 维度
            precision: 对角精度
            mu: 先验均值，默认为0
        """
        if not precision > 0:
            raise DomainError(f"先验精度必须为正: {precision}", error_details={"detail": f"precision={precision}"})
        mu = np.zeros(d) if mu is None else np.asarray(mu, dtype=float)
        return cls(mu=mu, precision=precision * np.eye(d))

    @property
    def d(self) -> int:
        return int(self.mu.shape[0])

    @property
    def covariance(self) -> np.ndarray:
        return cho_solve(cho_factor(self.precision), np.eye(self.d))

    def logdet_precision(self) -> float:
        c, _ = cho_factor(self.precision)
        return float(2.0 * np.sum(np.log(np.diag(c))))
