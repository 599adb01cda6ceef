"""
异常定义模块

定义求解器的异常类型和错误代码。
错误代码前缀对应本地化资源的模块名，例如 SOLVER_NOT_POSITIVE_DEFINITE
对应 solver.errors.NOT_POSITIVE_DEFINITE。
非异常性结果（EM达到最大迭代次数、共轭梯度被截断、路径上的单点失败等）
记录在结果对象中，不在这里抛出。
"""
from typing import Any, Dict, Optional


class ErrorCode:
    """错误代码常量定义"""
    # 通用错误
    UNKNOWN_ERROR = "COMMON_UNKNOWN_ERROR"  # 未知错误
    INVALID_ARGUMENT = "COMMON_INVALID_ARGUMENT"  # 参数错误

    # 数值求解错误
    DOMAIN_ERROR = "SOLVER_DOMAIN_ERROR"  # 参数超出定义域
    DIMENSION_MISMATCH = "SOLVER_DIMENSION_MISMATCH"  # 维度不匹配
    NOT_POSITIVE_DEFINITE = "SOLVER_NOT_POSITIVE_DEFINITE"  # 矩阵非正定
    NOT_CONVERGED = "SOLVER_NOT_CONVERGED"  # 未收敛
    DIVERGED = "SOLVER_DIVERGED"  # 发散

    # 数据错误
    DATA_FORMAT_ERROR = "DATA_FORMAT_ERROR"  # 数据格式错误
    REPORT_WRITE_ERROR = "DATA_REPORT_WRITE_ERROR"  # 报告写入失败


class PgemError(Exception):
    """
    求解器异常基类

    所有自定义异常都应该继承自此类，
    以确保命令行统一处理和输出格式。
    """
    exit_code: int = 1
    error_code: str = ErrorCode.UNKNOWN_ERROR
    error_message: str = "发生了未知错误"
    error_details: Optional[Dict[str, Any]] = None

    def __init__(
        self,
        error_message: Optional[str] = None,
        error_code: Optional[str] = None,
        error_details: Optional[Dict[str, Any]] = None,
        exit_code: Optional[int] = None,
    ):
        if error_message:
            self.error_message = error_message
        if error_code:
            self.error_code = error_code
        if error_details:
            self.error_details = error_details
        if exit_code:
            self.exit_code = exit_code

        super().__init__(self.error_message)

    @property
    def i18n_key(self) -> str:
        """由错误代码推导本地化资源键"""
        module_name, _, key = self.error_code.partition("_")
        return f"{module_name.lower()}.errors.{key or self.error_code}"


# 不继承 ValueError，pydantic 校验器中抛出时保持原类型
class DomainError(PgemError):
    """参数超出定义域，例如 b <= 0 或学习率指数不在(0.5, 1)内"""
    exit_code = 2
    error_code = ErrorCode.DOMAIN_ERROR
    error_message = "参数超出有效范围"


class DimensionMismatchError(PgemError):
    """维度不匹配"""
    exit_code = 2
    error_code = ErrorCode.DIMENSION_MISMATCH
    error_message = "数组维度不匹配"


class NotPositiveDefiniteError(PgemError):
    """矩阵非正定，error_details 中记录最小特征值或失败的顺序主子式"""
    exit_code = 3
    error_code = ErrorCode.NOT_POSITIVE_DEFINITE
    error_message = "线性系统矩阵不是正定的"


class ConvergenceError(PgemError):
    """迭代未收敛，last_iterate 保存最后一次迭代值"""
    exit_code = 4
    error_code = ErrorCode.NOT_CONVERGED
    error_message = "迭代未能收敛"

    def __init__(self, *args: Any, last_iterate: Any = None, **kwargs: Any):
        super().__init__(*args, **kwargs)
        self.last_iterate = last_iterate


class DivergenceError(ConvergenceError):
    """迭代发散"""
    error_code = ErrorCode.DIVERGED
    error_message = "迭代发散"


class DataFormatError(PgemError):
    """输入数据格式错误，error_details 中记录行号"""
    exit_code = 5
    error_code = ErrorCode.DATA_FORMAT_ERROR
    error_message = "输入数据格式错误"


class ReportWriteError(PgemError):
    """报告文件无法写入"""
    exit_code = 6
    error_code = ErrorCode.REPORT_WRITE_ERROR
    error_message = "报告文件写入失败"
