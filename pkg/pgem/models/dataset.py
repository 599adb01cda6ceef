"""
文件路径: pgem/models/dataset.py

数据集模型模块

定义二项/负二项数据集 (y, m, X) 和多分类数据集 (Y, X)。
数据集构造后视为只读，可以在多个拟合之间共享。
"""
from pgem.models.base import (
    ArrayModel,
    DimensionMismatchError,
    DomainError,
    as_matrix,
    as_vector,
    model_validator,
    np,
    require_finite,
)


class Dataset(ArrayModel):
    """
    二项或负二项数据集

    字段:
    - y: 成功次数，长度 N，非负
    - m: 试验次数，长度 N，正实数（负二项数据中 m = y + r）
    - X: N×d 设计矩阵
    """

    y: np.ndarray
    m: np.ndarray
    X: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def coerce_arrays(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            X = np.asarray(data.get("X"), dtype=float)
            if X.ndim == 1:
                X = X.reshape(-1, 1)
            data["X"] = X
            data["y"] = as_vector(data.get("y"), "y")
            data["m"] = as_vector(data.get("m"), "m")
        return data

    @model_validator(mode="after")
    def check_invariants(self) -> "Dataset":
        X = as_matrix(self.X, "X")
        n, d = X.shape
        if d < 1:
            raise DimensionMismatchError("设计矩阵至少需要一列", error_details={"detail": "d < 1"})
        as_vector(self.y, "y", n)
        as_vector(self.m, "m", n)
        for name, arr in (("y", self.y), ("m", self.m), ("X", X)):
            require_finite(arr, name)
        if np.any(self.m <= 0):
            raise DomainError("试验次数 m 必须为正", error_details={"detail": "m <= 0"})
        if np.any(self.y < 0) or np.any(self.y > self.m):
            raise DomainError("需要满足 0 <= y <= m", error_details={"detail": "y outside [0, m]"})
        return self

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def subset(self, index: np.ndarray) -> "Dataset":
        """按行索引取子集"""
        index = np.asarray(index)
        return Dataset(y=self.y[index], m=self.m[index], X=self.X[index])

    def has_intercept(self) -> np.ndarray:
        """返回常数列（全为1）的布尔掩码"""
        if self.n == 0:
            return np.zeros(self.d, dtype=bool)
        return np.all(self.X == 1.0, axis=0)

    def mirrored(self) -> "Dataset":
        """成功与失败互换，y -> m - y"""
        return Dataset(y=self.m - self.y, m=self.m.copy(), X=self.X.copy())


def negative_binomial_dataset(y, X, r: float) -> Dataset:
    """
    构造负二项数据集

    参数:
        y: 计数
        X: 设计矩阵
        r: 过度离散参数，r > 0，可以是非整数

    返回:
        m = y + r 的数据集
    """
    if not r > 0:
        raise DomainError(f"过度离散参数 r 必须为正: {r}", error_details={"detail": f"r={r}"})
    y = as_vector(y, "y")
    return Dataset(y=y, m=y + float(r), X=X)


class MultiDataset(ArrayModel):
    """
    多分类数据集

    字段:
    - Y: N×K 指示矩阵，每行恰好一个1
    - X: N×d 设计矩阵
    """

    Y: np.ndarray
    X: np.ndarray

    @model_validator(mode="after")
    def check_invariants(self) -> "MultiDataset":
        self.Y = as_matrix(self.Y, "Y")
        self.X = as_matrix(self.X, "X", (self.Y.shape[0], None))
        require_finite(self.X, "X")
        if self.Y.shape[1] < 2:
            raise DomainError("类别数 K 至少为 2", error_details={"detail": f"K={self.Y.shape[1]}"})
        if not np.all((self.Y == 0.0) | (self.Y == 1.0)) or not np.all(self.Y.sum(axis=1) == 1.0):
            raise DomainError("Y 必须是每行恰好一个1的指示矩阵", error_details={"detail": "bad indicator rows"})
        return self

    @classmethod
    def from_labels(cls, labels, X, n_classes: int = None) -> "MultiDataset":
        """
        由类别标签构造，标签取值 1..K

        参数:
            labels: 整数标签
            X: 设计矩阵
            n_classes: 类别数，默认取标签最大值
        """
        labels = np.asarray(labels)
        if labels.size and (np.any(labels < 1) or np.any(labels != np.round(labels))):
            raise DomainError("类别标签必须是 1..K 的整数", error_details={"detail": "labels"})
        labels = labels.astype(int)
        k = int(n_classes or (labels.max() if labels.size else 2))
        Y = np.zeros((labels.size, k))
        Y[np.arange(labels.size), labels - 1] = 1.0
        return cls(Y=Y, X=np.asarray(X, dtype=float))

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    @property
    def k(self) -> int:
        return int(self.Y.shape[1])

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.Y, axis=1) + 1

    def binary_block(self, k: int) -> "Dataset":
        """第 k 类（0起）对其余类的二元数据集"""
        return Dataset(y=self.Y[:, k], m=np.ones(self.n), X=self.X)

    def subset(self, index: np.ndarray) -> "MultiDataset":
        index = np.asarray(index)
        return MultiDataset(Y=self.Y[index], X=self.X[index])
