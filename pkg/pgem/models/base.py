"""
文件路径: pgem/models/base.py

模型基础模块 - 为所有模型提供统一的导入点

定义携带numpy数组的pydantic基类，并导出模型文件常用的类型和工具，
确保所有模型使用一致的配置（允许任意类型、数组字段自动转换为float数组）。

使用说明:
- 所有模型文件应从此模块导入所需的基础类和工具
- 数组字段在校验前统一转换为 numpy 浮点数组
"""
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pgem.core.exceptions import DimensionMismatchError, DomainError, NotPositiveDefiniteError
from pgem.utils.numerics import as_matrix, as_vector, require_finite


class ArrayModel(BaseModel):
    """
    携带numpy数组的模型基类

    提供的功能:
    - 允许 numpy.ndarray 字段
    - to_dict(): 转换为可序列化的字典（数组转换为列表）
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, validate_assignment=False)

    def to_dict(self, exclude: Optional[List[str]] = None) -> Dict[str, Any]:
        """
        将模型转换为字典

        参数:
            exclude: 要排除的字段列表

        返回:
            包含模型数据的字典，numpy 数组转换为列表
        """
        exclude = set(exclude or [])
        result: Dict[str, Any] = {}
        for name in type(self).model_fields:
            if name in exclude:
                continue
            result[name] = _plain(getattr(self, name))
        return result


def _plain(value: Any) -> Any:
    """递归地把numpy对象和模型转换为普通Python对象"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, ArrayModel):
        return value.to_dict()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


__all__ = [
    "ArrayModel",
    "np",
    "BaseModel", "ConfigDict", "Field", "field_validator", "model_validator",
    "DimensionMismatchError", "DomainError", "NotPositiveDefiniteError",
    "as_matrix", "as_vector", "require_finite",
    "Any", "Dict", "List", "Literal", "Optional", "Tuple",
]
