"""
文件路径: pgem/services/io.py

数据读写模块

- ingest_csv: 读取二项/计数格式 (y, m, x1…xd) 或多分类格式 (y, x1…xd) 的CSV
- write_dataset_csv / write_trace_csv / write_path_csv: 用 pandas 写出，浮点数保留17位有效数字
- emit_report: 用 orjson 写出拟合报告（估计值、标准差、95%近似区间、迭代轨迹、配置和种子）
- load_report / predict_from_report: 读取报告并计算预测概率
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import orjson
import pandas as pd

from pgem.core.config import settings
from pgem.core.exceptions import DataFormatError, ReportWriteError
from pgem.models import Dataset, FitReport, MultiDataset, MultiFitReport, PathResult
from pgem.services.multinomial import class_probs
from pgem.services.objective import predict_proba

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# 表头占第1行，第 i 条数据（从0起）在第 i+2 行
_HEADER_LINES = 2

_JSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_INDENT_2


def _json_default(value: Any) -> Any:
    """orjson 不能直接序列化的对象：非C连续数组和 numpy 标量"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"无法序列化的类型: {type(value).__name__}")


def dumps(payload: Any) -> bytes:
    return orjson.dumps(payload, default=_json_default, option=_JSON_OPTIONS)


def _format_error(path: PathLike, line: Optional[int], detail: str) -> DataFormatError:
    return DataFormatError(
        f"{path} 第 {line} 行: {detail}" if line is not None else f"{path}: {detail}",
        error_details={"line": line if line is not None else "-", "detail": detail, "path": str(path)},
    )


def _read_frame(path: PathLike) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip", skipinitialspace=True)
    except FileNotFoundError as e:
        raise _format_error(path, None, "文件不存在") from e
    except pd.errors.EmptyDataError as e:
        raise _format_error(path, 1, "缺少表头") from e
    except pd.errors.ParserError as e:
        # pandas 的消息形如 "Expected 3 fields in line 4, saw 5"
        message = str(e)
        line = None
        if " line " in message:
            token = message.split(" line ")[1].split(",")[0].strip()
            line = int(token) if token.isdigit() else None
        raise _format_error(path, line, message) from e
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _numeric(frame: pd.DataFrame, path: PathLike) -> np.ndarray:
    """逐列转为浮点数，定位第一个非数值或非有限值"""
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raw = frame.iloc[row, col]
        raise _format_error(path, int(row) + _HEADER_LINES, f"列 {frame.columns[col]} 的值 {raw!r} 不是有限数")
    return values


def ingest_csv(path: PathLike) -> Union[Dataset, MultiDataset]:
    """
    读取CSV数据

    表头必须包含 y；含 m 列时按二项/计数格式读取，否则按多分类格式读取
    （y 为 1..K 的整数类别）。其余列依次作为特征。

    参数:
        path: CSV文件路径

    返回:
        Dataset 或 MultiDataset

    异常:
        DataFormatError: 缺少列、非数值、NaN/Inf、y > m、类别非法，错误信息带行号
    """
    frame = _read_frame(path)
    if "y" not in frame.columns:
        raise _format_error(path, 1, "表头缺少 y 列")
    features = [c for c in frame.columns if c not in ("y", "m")]
    if not features:
        raise _format_error(path, 1, "表头缺少特征列")

    values = _numeric(frame[["y"] + (["m"] if "m" in frame.columns else []) + features], path)
    y = values[:, 0]

    if "m" in frame.columns:
        m = values[:, 1]
        X = values[:, 2:]
        for name, bad in (("m <= 0", m <= 0), ("y < 0", y < 0), ("y > m", y > m)):
            if bad.any():
                raise _format_error(path, int(np.argmax(bad)) + _HEADER_LINES, name)
        dataset = Dataset(y=y, m=m, X=X)
        logger.info("读取二项数据", extra={"path": str(path), "n": dataset.n, "d": dataset.d})
        return dataset

    X = values[:, 1:]
    bad = (y < 1) | (y != np.round(y))
    if bad.any():
        raise _format_error(path, int(np.argmax(bad)) + _HEADER_LINES, f"类别 {y[np.argmax(bad)]!r} 不是 1..K 的整数")
    k = int(y.max()) if y.size else 2
    dataset = MultiDataset.from_labels(y.astype(int), X, n_classes=max(k, 2))
    logger.info("读取多分类数据", extra={"path": str(path), "n": dataset.n, "d": dataset.d, "k": dataset.k})
    return dataset


def _write_frame(frame: pd.DataFrame, path: PathLike, header_comment: Optional[Dict[str, Any]] = None) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT)
        if header_comment is not None:
            sidecar = Path(f"{path}.meta.json")
            sidecar.write_bytes(dumps(header_comment))
    except OSError as e:
        raise ReportWriteError(f"无法写入 {path}: {e}", error_details={"path": str(path)}) from e


def feature_columns(d: int) -> List[str]:
    return [f"x{j + 1}" for j in range(d)]


def write_dataset_csv(
    dataset: Union[Dataset, MultiDataset],
    path: PathLike,
    meta: Optional[Dict[str, Any]] = None,
) -> None:
    """写出数据集，格式与 ingest_csv 一致；meta 写入同名 .meta.json"""
    columns = feature_columns(dataset.d)
    frame = pd.DataFrame(dataset.X, columns=columns)
    if isinstance(dataset, MultiDataset):
        frame.insert(0, "y", dataset.labels)
    else:
        frame.insert(0, "m", dataset.m)
        frame.insert(0, "y", dataset.y)
    _write_frame(frame, path, meta)


def write_trace_csv(rows: List[Dict[str, Any]], path: PathLike, meta: Optional[Dict[str, Any]] = None) -> None:
    """写出轨迹表，rows 中每个字典对应一行"""
    _write_frame(pd.DataFrame(rows), path, meta)


def path_frame(result: PathResult) -> pd.DataFrame:
    """解路径表：每个 λ 一行，列为 lambda, objective, nnz, misclassification(可选), beta1…betad"""
    d = result.betas.shape[1] if result.betas.ndim == 2 else 0
    frame = pd.DataFrame(result.betas, columns=[f"beta{j + 1}" for j in range(d)])
    if result.misclassification is not None:
        frame.insert(0, "misclassification", result.misclassification)
    frame.insert(0, "nnz", result.nonzero_counts)
    frame.insert(0, "objective", result.objectives)
    frame.insert(0, "lambda", result.lambdas)
    return frame


def write_path_csv(result: PathResult, path: PathLike, meta: Optional[Dict[str, Any]] = None) -> None:
    _write_frame(path_frame(result), path, meta)


def report_payload(
    report: Union[FitReport, MultiFitReport],
    config: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
) -> Dict[str, Any]:
    """
    拟合报告的JSON载荷

    二元模型输出 beta_hat、stddevs 和 estimate ± 1.96·stddev 的近似95%区间；
    协方差缺失或对角线为负时 stddevs 为 null。
    """
    payload: Dict[str, Any] = {
        "algorithm": report.algorithm,
        "iterations": report.iterations,
        "converged": report.converged,
        "diverged": report.diverged,
        "trace": [entry.model_dump() for entry in report.trace],
        "config": config or {},
        "seed": seed,
    }
    if isinstance(report, MultiFitReport):
        payload["B"] = report.B
        payload["objective_name"] = report.objective_name
        payload["one_vs_rest_objective"] = report.diagnostics.get("one_vs_rest_objective")
        return payload

    payload["beta_hat"] = report.beta_hat
    stddevs = None
    if report.cov is not None and np.all(np.diag(report.cov) >= 0):
        stddevs = np.sqrt(np.diag(report.cov))
    payload["stddevs"] = stddevs
    payload["intervals"] = (
        None if stddevs is None
        else np.column_stack([report.beta_hat - 1.96 * stddevs, report.beta_hat + 1.96 * stddevs])
    )
    payload["cov"] = report.cov
    return payload


def emit_report(
    report: Union[FitReport, MultiFitReport],
    path: PathLike,
    config: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
) -> None:
    """
    写出JSON报告

    Args:
        report: 拟合报告
        path: 输出路径
        config: 配置回显
        seed: 随机种子

    Raises:
        ReportWriteError: 路径不可写
    """
    content = dumps(report_payload(report, config, seed))
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(content)
    except OSError as e:
        raise ReportWriteError(f"无法写入 {path}: {e}", error_details={"path": str(path)}) from e
    logger.info("写出报告", extra={"path": str(path), "algorithm": report.algorithm})


def write_json(payload: Dict[str, Any], path: PathLike) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(dumps(payload))
    except OSError as e:
        raise ReportWriteError(f"无法写入 {path}: {e}", error_details={"path": str(path)}) from e


def load_report(path: PathLike) -> Dict[str, Any]:
    try:
        return orjson.loads(Path(path).read_bytes())
    except FileNotFoundError as e:
        raise _format_error(path, None, "文件不存在") from e
    except orjson.JSONDecodeError as e:
        raise _format_error(path, None, f"不是有效的JSON: {e}") from e


def predict_from_report(report: Dict[str, Any], dataset: Union[Dataset, MultiDataset]) -> pd.DataFrame:
    """
    用已保存报告中的系数计算预测概率

    二元报告输出列 prob；多分类报告输出 prob1…probK 和预测类别 label。
    """
    if "B" in report:
        B = np.asarray(report["B"], dtype=float)
        probs = class_probs(B, dataset.X)
        frame = pd.DataFrame(probs, columns=[f"prob{k + 1}" for k in range(probs.shape[1])])
        frame["label"] = np.argmax(probs, axis=1) + 1
        return frame
    if "beta_hat" not in report:
        raise _format_error("report", None, "报告中缺少 beta_hat")
    beta = np.asarray(report["beta_hat"], dtype=float)
    return pd.DataFrame({"prob": predict_proba(dataset.X, beta)})
