"""
命令行入口

负责初始化日志，注册异常处理，并提供 simulate / fit / path / benchmark / predict 命令。
每个输出文件都回显生成它的配置和随机种子。
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from pgem.core.config import settings
from pgem.core.exception_handlers import register_exception_handlers
from pgem.core.exceptions import DomainError
from pgem.core.logging import setup_logging
from pgem.models import Dataset, RunConfig
from pgem.services.benchmark import TRACE_COLUMNS, run_benchmark
from pgem.services.io import (
    emit_report,
    ingest_csv,
    load_report,
    predict_from_report,
    write_dataset_csv,
    write_json,
    write_path_csv,
    write_trace_csv,
)
from pgem.services.runner import fit_from_config, path_from_config
from pgem.services.simulate import DESIGNS, simulate
from pgem.utils.i18n import get_text, set_locale

logger = logging.getLogger(__name__)

app = typer.Typer(
    name=settings.PROJECT_NAME,
    help="Pólya-Gamma 数据增强的逻辑回归 EM 求解器",
    no_args_is_help=True,
    add_completion=False,
)
console = Console()


@app.callback()
def main(
    log_level: str = typer.Option(settings.LOGGING_LEVEL, "--log-level", help="日志级别"),
    log_json: bool = typer.Option(settings.LOG_JSON, "--log-json", help="以JSON格式输出日志"),
    locale: str = typer.Option(settings.DEFAULT_LOCALE, "--locale", help="提示信息的语言: zh | en"),
) -> None:
    """初始化日志和提示语言"""
    setup_logging(level=log_level, json_output=log_json)
    set_locale(locale)


def _config(**fields: Any) -> RunConfig:
    """构造运行配置，把 pydantic 校验错误转换为 DomainError"""
    try:
        return RunConfig(**{k: v for k, v in fields.items() if v is not None})
    except ValidationError as e:
        raise DomainError(
            f"命令行参数无效: {e}",
            error_code="COMMON_INVALID_ARGUMENT",
            error_details={"detail": "; ".join(err["msg"] for err in e.errors())},
        ) from e


def _parse_overrides(items: List[str]) -> Dict[str, Any]:
    """解析 key=value 形式的模拟覆盖项；beta 用逗号分隔"""
    overrides: Dict[str, Any] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise DomainError(f"覆盖项必须是 key=value: {item}", error_details={"detail": item})
        key = key.strip()
        if key == "beta":
            overrides[key] = [float(v) for v in value.split(",")]
        elif key in ("trials", "signal"):
            overrides[key] = float(value)
        else:
            overrides[key] = int(value)
    return overrides


def _load(config: RunConfig):
    dataset = ingest_csv(config.data)
    k = getattr(dataset, "k", 2)
    console.print(get_text("cli.messages.DATA_LOADED", {"n": dataset.n, "d": dataset.d, "k": k}))
    return dataset


@app.command("simulate")
@register_exception_handlers
def simulate_command(
    design: str = typer.Option("appendixA", "--design", help=f"模拟设计: {', '.join(DESIGNS)}"),
    out: Path = typer.Option(..., "--out", help="输出CSV路径"),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed", help="随机种子"),
    override: List[str] = typer.Option([], "--set", help="覆盖项 key=value，可重复"),
) -> None:
    """按实验设计生成模拟数据，真实系数写入同名 .meta.json"""
    config = _config(command="simulate", design=design, out=out, seed=seed)
    overrides = _parse_overrides(override)
    dataset, beta = simulate(design, seed=seed, overrides=overrides)
    write_dataset_csv(dataset, out, meta={"true_beta": beta, "overrides": overrides, "config": config.echo(), "seed": seed})
    console.print(get_text("cli.messages.SIMULATED", {"design": design, "seed": seed, "path": str(out)}))


@app.command("fit")
@register_exception_handlers
def fit_command(
    data: Path = typer.Option(..., "--data", help="输入CSV"),
    out: Path = typer.Option(..., "--out", help="输出JSON报告"),
    algorithm: str = typer.Option("em", "--algorithm", help="em | qnem | vb | online-em | sgd | irls-cd | irls-cg | da-cd | da-cg | bridge | ecm | partial-irls"),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed"),
    tol: Optional[float] = typer.Option(None, "--tol"),
    max_iter: Optional[int] = typer.Option(None, "--max-iter"),
    penalty: str = typer.Option("none", "--penalty", help="none | lasso | bridge"),
    lam: float = typer.Option(0.0, "--lambda", help="惩罚强度 λ"),
    alpha: float = typer.Option(0.5, "--alpha", help="bridge 指数"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size"),
    passes: Optional[int] = typer.Option(None, "--passes"),
    rate_c: float = typer.Option(settings.ONLINE_RATE_C, "--rate-c"),
    rate_t0: float = typer.Option(settings.ONLINE_RATE_T0, "--rate-t0"),
    pr_burn: Optional[int] = typer.Option(None, "--pr-burn"),
) -> None:
    """拟合单个模型并写出JSON报告"""
    config = _config(
        command="fit", data=data, out=out, algorithm=algorithm, seed=seed, tol=tol, max_iter=max_iter,
        penalty=penalty, lam=lam, alpha=alpha, batch_size=batch_size, passes=passes,
        rate_c=rate_c, rate_t0=rate_t0, pr_burn=pr_burn,
    )
    dataset = _load(config)
    report = fit_from_config(config, dataset)
    emit_report(report, out, config=config.echo(), seed=seed)
    console.print(get_text("cli.messages.FIT_DONE", {
        "algorithm": report.algorithm, "iterations": report.iterations,
        "converged": report.converged, "path": str(out),
    }))


@app.command("path")
@register_exception_handlers
def path_command(
    data: Path = typer.Option(..., "--data"),
    out: Path = typer.Option(..., "--out", help="输出路径表CSV"),
    algorithm: str = typer.Option("da-cd", "--algorithm", help="irls-cd | irls-cg | da-cd | da-cg | bridge"),
    grid: int = typer.Option(settings.PATH_GRID_SIZE, "--grid", help="λ 网格点数"),
    alpha: float = typer.Option(0.5, "--alpha"),
    tol: Optional[float] = typer.Option(None, "--tol"),
    max_iter: Optional[int] = typer.Option(None, "--max-iter"),
    holdout_frac: float = typer.Option(settings.HOLDOUT_FRAC, "--holdout-frac"),
    replicates: int = typer.Option(0, "--replicates", help="留出评估的划分次数，0 表示不评估"),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed"),
) -> None:
    """在 λ 网格上拟合解路径"""
    config = _config(
        command="path", data=data, out=out, algorithm=algorithm, grid=grid, alpha=alpha, tol=tol,
        max_iter=max_iter, holdout_frac=holdout_frac, replicates=replicates, seed=seed,
    )
    dataset = _load(config)
    if not isinstance(dataset, Dataset):
        raise DomainError("解路径只支持二项数据", error_details={"detail": "multinomial data"})
    result = path_from_config(config, dataset)
    write_path_csv(result, out, meta={"config": config.echo(), "seed": seed, "errors": {str(k): v for k, v in result.errors.items()}})
    console.print(get_text("cli.messages.PATH_DONE", {"method": result.method, "points": result.lambdas.size, "path": str(out)}))


@app.command("benchmark")
@register_exception_handlers
def benchmark_command(
    out: Path = typer.Option(..., "--out", help="输出目录"),
    algorithm: List[str] = typer.Option(["online-em", "sgd"], "--algorithm", help="参与比较的算法，可重复"),
    data: Optional[Path] = typer.Option(None, "--data", help="输入CSV，缺省时按 --design 模拟"),
    design: str = typer.Option("figure1", "--design"),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed"),
    tol: Optional[float] = typer.Option(None, "--tol"),
    max_iter: Optional[int] = typer.Option(None, "--max-iter"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size"),
    passes: Optional[int] = typer.Option(None, "--passes"),
    rate_c: float = typer.Option(settings.ONLINE_RATE_C, "--rate-c"),
    rate_t0: float = typer.Option(settings.ONLINE_RATE_T0, "--rate-t0"),
    pr_burn: Optional[int] = typer.Option(None, "--pr-burn"),
    holdout_frac: float = typer.Option(settings.HOLDOUT_FRAC, "--holdout-frac"),
    match_clock: bool = typer.Option(True, "--match-clock/--no-match-clock", help="sgd 使用与 online-em 相同的墙钟时间"),
) -> None:
    """在同一份数据上比较多个算法，写出 trace.csv 和 summary.json"""
    config = _config(
        command="benchmark", arms=list(algorithm), data=data, out=out, design=design, seed=seed, tol=tol,
        max_iter=max_iter, batch_size=batch_size, passes=passes, rate_c=rate_c, rate_t0=rate_t0,
        pr_burn=pr_burn, holdout_frac=holdout_frac, match_clock=match_clock,
    )
    if data is not None:
        dataset = _load(config)
        if not isinstance(dataset, Dataset):
            raise DomainError("基准测试只支持二项数据", error_details={"detail": "multinomial data"})
    else:
        dataset, _ = simulate(design, seed=seed)

    rows, summary = run_benchmark(config, dataset)
    write_trace_csv(rows or [dict.fromkeys(TRACE_COLUMNS)], out / "trace.csv", meta={"config": config.echo(), "seed": seed})
    write_json(summary, out / "summary.json")

    table = Table(title="benchmark")
    for column in ("algorithm", "status", "final_logloss", "seconds"):
        table.add_column(column)
    for arm, info in summary["arms"].items():
        table.add_row(arm, info["status"], f"{info.get('final_logloss', float('nan')):.6g}", f"{info.get('seconds', float('nan')):.3g}")
    console.print(table)
    console.print(get_text("cli.messages.BENCHMARK_DONE", {"arms": len(summary["arms"]), "path": str(out)}))


@app.command("predict")
@register_exception_handlers
def predict_command(
    data: Path = typer.Option(..., "--data"),
    report: Path = typer.Option(..., "--report", help="fit 命令写出的JSON报告"),
    out: Path = typer.Option(..., "--out", help="输出CSV"),
) -> None:
    """用已保存的报告计算预测概率"""
    config = _config(command="predict", data=data, out=out)
    dataset = _load(config)
    saved = load_report(report)
    frame = predict_from_report(saved, dataset)
    write_trace_csv(frame.to_dict(orient="records"), out, meta={"config": config.echo(), "report": str(report), "seed": saved.get("seed")})
    console.print(get_text("cli.messages.PREDICT_DONE", {"n": len(frame), "path": str(out)}))


if __name__ == "__main__":
    app()
