"""
配置管理模块

此模块负责加载和验证求解器配置，使用Pydantic进行环境变量解析和类型验证。
配置分为不同部分便于管理，如EM配置、共轭梯度配置、在线学习配置等。
所有求解器的默认参数都来自这里，调用方可以逐个覆盖。
"""
import os
from pathlib import Path
from typing import List

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """求解器配置设置

    使用Pydantic的BaseSettings自动从环境变量加载配置
    配置项按功能分组，方便管理和文档化
    """

    # 项目配置
    PROJECT_NAME: str = "pgem"
    VERSION: str = "1.0.0"
    DEBUG: bool = False

    # 日志配置
    LOGGING_LEVEL: str = "INFO"
    LOG_JSON: bool = False

    # 国际化配置
    DEFAULT_LOCALE: str = "zh"
    SUPPORTED_LOCALES: List[str] = ["zh", "en"]
    LOCALE_DIR: str = str(Path(__file__).resolve().parent.parent / "locale")

    # 批量EM配置
    EM_TOL: float = 1e-8
    EM_MAX_ITER: int = 10000

    # 阻尼牛顿参考解配置
    ORACLE_TOL: float = 1e-10
    ORACLE_MAX_ITER: int = 200
    ORACLE_MAX_HALVINGS: int = 20

    # 共轭梯度配置
    CG_EPS: float = 1e-8
    CG_MAX_ITER_FACTOR: int = 10  # max_iter = 因子 * d

    # 拟牛顿加速配置
    QN_MAX_HALVINGS: int = 10
    QN_SR1_SKIP: float = 1e-8

    # 变分贝叶斯配置
    VB_TOL: float = 1e-10
    VB_MAX_ITER: int = 10000
    VB_XI_FLOOR: float = 1e-6

    # 在线EM配置
    ONLINE_RATE_C: float = 0.52
    ONLINE_RATE_T0: float = 0.0
    ONLINE_S0_RIDGE: float = 1e-6
    ONLINE_MIN_BATCH: int = 32

    # 随机梯度下降配置
    SGD_DIVERGENCE: float = 1e10

    # 稀疏估计配置
    SPARSE_TOL: float = 1e-8
    SPARSE_MAX_ITER: int = 20000
    CD_MAX_SWEEPS: int = 200
    LASSO_ZERO_TOL: float = 1e-8
    BRIDGE_ZERO_TOL: float = 1e-4
    IRLS_PROB_CLAMP: float = 1e-9
    IRLS_DIVERGENCE_PATIENCE: int = 5
    PATH_GRID_SIZE: int = 100
    PATH_MIN_RATIO: float = 1e-3

    # 命令行与基准测试配置
    DEFAULT_SEED: int = 20130101
    HOLDOUT_FRAC: float = 0.2
    REPLICATES: int = 50
    MAX_WORKERS: int = min(4, os.cpu_count() or 1)
    CSV_FLOAT_FORMAT: str = "%.17g"

    @field_validator("ONLINE_RATE_C")
    def check_rate_c(cls, v: float) -> float:
        """学习率指数必须位于(0.5, 1)开区间"""
        if not 0.5 < v < 1.0:
            raise ValueError(f"ONLINE_RATE_C必须在(0.5, 1)内: {v}")
        return v

    @field_validator("HOLDOUT_FRAC")
    def check_holdout(cls, v: float) -> float:
        """留出比例必须位于(0, 1)开区间"""
        if not 0.0 < v < 1.0:
            raise ValueError(f"HOLDOUT_FRAC必须在(0, 1)内: {v}")
        return v

    @field_validator("CG_EPS")
    def check_cg_eps(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"CG_EPS必须在(0, 1)内: {v}")
        return v

    # Pydantic设置
    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="PGEM_",
        case_sensitive=True,
        env_file_encoding="utf-8",
        extra="ignore"
    )


# 创建全局设置实例
settings = Settings()
