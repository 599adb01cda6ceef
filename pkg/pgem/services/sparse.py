"""
文件路径: pgem/services/sparse.py

惩罚估计：数据增强EM（lasso / bridge 先验）、坐标下降、惩罚IRLS基线和解路径

目标函数（最小化形式）为 -ℓ(β) + λΣⱼ pen(βⱼ)，豁免坐标（如截距）不受惩罚。
每轮外循环把对数似然替换为加权最小二乘 ½Σwₜ(zₜ - ψₜ)²：
- 数据增强(da): wₜ = pg_mean(mₜ, ψₜ)，zₜ = κₜ/wₜ，构成 -ℓ 的上界，因此单调
- IRLS: wₜ = mₜp(1-p)，zₜ = ψₜ + (yₜ - mₜp)/wₜ，二阶近似，不保证单调
内层求解方式：
- cd: 对带 ℓ¹ 项的加权最小二乘做坐标下降（软阈值）
- cg: 对 λ|βⱼ| 使用二次上界 (λ/|βⱼ|)βⱼ²/2，在活动集上用共轭梯度求解；
      零坐标在次梯度条件被违反时通过一次坐标下降步重新进入活动集
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np

from pgem.core.config import settings
from pgem.core.exceptions import DomainError, PgemError
from pgem.models import CgConfig, Dataset, FitReport, GaussianPrior, PathResult, PenaltySpec, SpdSystem, TraceEntry
from pgem.services.linsolve import solve_cg, solve_direct
from pgem.services.objective import kappa, loglik_terms, misclassification, oracle_mode
from pgem.services.pg_math import pg_mean
from pgem.utils.numerics import as_vector, sigmoid, symmetrize

logger = logging.getLogger(__name__)

WeightKind = Literal["da", "irls"]
InnerSolver = Literal["cd", "cg"]
PathMethod = Literal["da-cd", "da-cg", "irls-cd", "irls-cg", "bridge"]

PATH_METHODS: Dict[str, Tuple[WeightKind, InnerSolver]] = {
    "da-cd": ("da", "cd"),
    "da-cg": ("da", "cg"),
    "irls-cd": ("irls", "cd"),
    "irls-cg": ("irls", "cg"),
}


# ---------------------------------------------------------------------------
# 基本算子
# ---------------------------------------------------------------------------

def soft_threshold(z, gamma):
    """软阈值 sign(z)·(|z| - γ)₊"""
    if np.any(np.asarray(gamma) < 0):
        raise DomainError("软阈值参数不能为负", error_details={"detail": f"gamma={gamma}"})
    value = np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)
    return float(value) if np.ndim(value) == 0 else value


def cd_update(
    j: int,
    weights: np.ndarray,
    working_resp: np.ndarray,
    X: np.ndarray,
    beta: np.ndarray,
    lam: float,
) -> float:
    """
    第 j 个坐标的惩罚加权最小二乘极小值

    β̃ⱼ = S(Σᵢ wᵢxᵢⱼ(zᵢ - ỹᵢ⁽ʲ⁾), λ) / Σᵢ wᵢxᵢⱼ²，ỹ⁽ʲ⁾ 为去掉第 j 列贡献的拟合值。
    分母为0时跳过该坐标，返回原值。
    """
    xj = X[:, j]
    denom = float(np.sum(weights * xj * xj))
    if denom <= 0.0:
        logger.debug("坐标分母为0，跳过", extra={"coordinate": j})
        return float(beta[j])
    partial = working_resp - X @ beta + xj * beta[j]
    return soft_threshold(float(np.sum(weights * xj * partial)), lam) / denom


def irls_weights(
    dataset: Dataset,
    beta: np.ndarray,
    clamp: float = settings.IRLS_PROB_CLAMP,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    IRLS 权重和工作响应

    wₜ = mₜp(1-p)，zₜ = ψₜ + (yₜ - mₜp)/wₜ，p 截断到 [clamp, 1-clamp]。
    mₜ = 1 时即通常的 p(1-p) 和 ψ + (y-p)/(p(1-p))。
    """
    psi = dataset.X @ as_vector(beta, "beta", dataset.d)
    p = np.clip(sigmoid(psi), clamp, 1.0 - clamp)
    w = dataset.m * p * (1.0 - p)
    z = psi + (dataset.y - dataset.m * p) / w
    return w, z


def da_weights(dataset: Dataset, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    数据增强权重和工作响应

    ωₜ = pg_mean(mₜ, ψₜ)，zₜ = κₜ/ωₜ，使 ½Σωₜ(zₜ - ψₜ)² 与完全数据二次型相差常数。
    """
    psi = dataset.X @ as_vector(beta, "beta", dataset.d)
    omega = pg_mean(dataset.m, psi) if dataset.n else np.zeros(0)
    return omega, kappa(dataset) / omega


def penalty_vector(penalty: PenaltySpec, d: int) -> np.ndarray:
    """每个坐标的 λ，豁免坐标为0"""
    lam = np.full(d, float(penalty.lam))
    lam[penalty.exempt_mask(d)] = 0.0
    return lam


def penalized_objective(dataset: Dataset, beta: np.ndarray, penalty: PenaltySpec) -> float:
    """
    惩罚负对数似然 -ℓ(β) + λΣⱼ pen(βⱼ)

    lasso: pen = |βⱼ|；bridge: pen = |βⱼ|^α；none: 0
    """
    beta = as_vector(beta, "beta", dataset.d)
    value = -float(np.sum(loglik_terms(dataset, beta)))
    if penalty.family == "none" or penalty.lam == 0:
        return value
    mask = ~penalty.exempt_mask(dataset.d)
    if penalty.family == "lasso":
        return value + penalty.lam * float(np.sum(np.abs(beta[mask])))
    return value + penalty.lam * float(np.sum(np.abs(beta[mask]) ** penalty.alpha))


def loglik_gradient(dataset: Dataset, beta: np.ndarray) -> np.ndarray:
    """∇ℓ(β) = Xᵀ(y - m·σ(ψ))"""
    psi = dataset.X @ as_vector(beta, "beta", dataset.d)
    return dataset.X.T @ (dataset.y - dataset.m * sigmoid(psi))


def kkt_violation(dataset: Dataset, beta: np.ndarray, penalty: PenaltySpec) -> float:
    """
    ℓ¹ 次梯度条件的最大违反量

    非零坐标: |∂ⱼℓ - λ·sign(βⱼ)|；零坐标: max(0, |∂ⱼℓ| - λ)；豁免坐标: |∂ⱼℓ|
    """
    beta = as_vector(beta, "beta", dataset.d)
    g = loglik_gradient(dataset, beta)
    lam = penalty_vector(penalty, dataset.d)
    nonzero = beta != 0.0
    violation = np.where(
        nonzero | (lam == 0.0),
        np.abs(g - lam * np.sign(beta)),
        np.maximum(0.0, np.abs(g) - lam),
    )
    return float(np.max(violation)) if violation.size else 0.0


def _fit_exempt(dataset: Dataset, exempt: np.ndarray) -> np.ndarray:
    """只在豁免坐标上拟合（其余坐标为0）的极大似然"""
    beta = np.zeros(dataset.d)
    if not np.any(exempt):
        return beta
    sub = Dataset(y=dataset.y, m=dataset.m, X=dataset.X[:, exempt])
    nearly_flat = GaussianPrior.isotropic(int(np.sum(exempt)), precision=1e-12)
    beta[exempt] = oracle_mode(sub, nearly_flat, tol=1e-10)
    return beta


def lambda_max(dataset: Dataset, exempt: Optional[np.ndarray] = None) -> float:
    """
    使全部受惩罚系数为0的最小 λ

    先只拟合豁免坐标，再取 max |Xⱼᵀ(y - m·σ(ψ₀))|；没有豁免坐标时即 max |Xᵀκ|。
    """
    exempt = np.zeros(dataset.d, dtype=bool) if exempt is None else np.asarray(exempt, dtype=bool)
    beta0 = _fit_exempt(dataset, exempt)
    g = loglik_gradient(dataset, beta0)
    penalized = ~exempt
    if not np.any(penalized):
        return 0.0
    return float(np.max(np.abs(g[penalized])))


def lambda_grid(
    lam_max: float,
    size: int = settings.PATH_GRID_SIZE,
    min_ratio: float = settings.PATH_MIN_RATIO,
) -> np.ndarray:
    """从 lam_max 到 min_ratio·lam_max 的对数等距递减网格"""
    if not lam_max > 0:
        raise DomainError(f"lambda_max 必须为正: {lam_max}", error_details={"detail": f"lambda_max={lam_max}"})
    if size < 1 or not 0 < min_ratio < 1:
        raise DomainError("网格大小或比例无效", error_details={"detail": f"size={size}, min_ratio={min_ratio}"})
    return np.geomspace(lam_max, lam_max * min_ratio, size)


def default_exempt(dataset: Dataset) -> np.ndarray:
    """默认豁免常数列（截距）"""
    return dataset.has_intercept()


# ---------------------------------------------------------------------------
# 内层求解器
# ---------------------------------------------------------------------------

def cd_solve(
    X: np.ndarray,
    w: np.ndarray,
    z: np.ndarray,
    beta: np.ndarray,
    lam: np.ndarray,
    tol: float,
    max_sweeps: int = settings.CD_MAX_SWEEPS,
) -> Tuple[np.ndarray, int]:
    """
    ½Σw(z - Xβ)² + Σⱼλⱼ|βⱼ| 的坐标下降

    先全量扫描，再只在非零坐标上循环，收敛后再全量扫描确认。
    """
    beta = beta.copy()
    r = z - X @ beta
    wx2 = (w[:, None] * X * X).sum(axis=0)
    d = beta.shape[0]
    full_sweep = True
    sweeps = 0

    while sweeps < max_sweeps:
        sweeps += 1
        coords = range(d) if full_sweep else np.flatnonzero(beta != 0.0)
        max_change = 0.0
        for j in coords:
            if wx2[j] <= 0.0:
                continue
            xj = X[:, j]
            old = beta[j]
            rho = float(np.dot(w * xj, r)) + wx2[j] * old
            new = soft_threshold(rho, lam[j]) / wx2[j]
            if new != old:
                r -= xj * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change <= tol:
            if full_sweep:
                break
            full_sweep = True
        else:
            full_sweep = False

    return beta, sweeps


def _solve_spd(S: np.ndarray, b: np.ndarray, warm: np.ndarray, use_cg: bool) -> np.ndarray:
    system = SpdSystem(S=symmetrize(S), d_vec=b)
    if use_cg:
        return solve_cg(system, CgConfig(eps=settings.CG_EPS, warm_start=warm)).x
    return solve_direct(system)


def majorized_solve(
    X: np.ndarray,
    w: np.ndarray,
    z: np.ndarray,
    beta: np.ndarray,
    lam: np.ndarray,
    zero_tol: float,
) -> np.ndarray:
    """
    lasso 的二次上界一步

    1. 违反次梯度条件的零坐标用一次坐标下降步重新进入
    2. 在活动集上求解 (XᵀWX + diag(λⱼ/|βⱼ|))β = XᵀWz
    3. |βⱼ| < zero_tol 的受惩罚坐标置零
    """
    beta = beta.copy()
    r = z - X @ beta
    for j in np.flatnonzero((beta == 0.0) & (lam > 0.0)):
        xj = X[:, j]
        denom = float(np.sum(w * xj * xj))
        if denom <= 0.0:
            continue
        rho = float(np.dot(w * xj, r))
        if abs(rho) > lam[j]:
            beta[j] = soft_threshold(rho, lam[j]) / denom
            r -= xj * beta[j]

    active = (beta != 0.0) | (lam == 0.0)
    if np.any(active):
        Xa = X[:, active]
        precision = np.where(lam[active] > 0.0, lam[active] / np.maximum(np.abs(beta[active]), zero_tol), 0.0)
        S = (Xa.T * w) @ Xa + np.diag(precision)
        b = Xa.T @ (w * z)
        beta[active] = _solve_spd(S, b, beta[active], use_cg=True)
    beta[(np.abs(beta) < zero_tol) & (lam > 0.0)] = 0.0
    return beta


# ---------------------------------------------------------------------------
# 外层循环
# ---------------------------------------------------------------------------

def _fit_penalized(
    dataset: Dataset,
    penalty: PenaltySpec,
    weights: WeightKind,
    solver: InnerSolver,
    beta0: Optional[np.ndarray],
    tol: float,
    max_iter: int,
    algorithm: str,
    patience: int = settings.IRLS_DIVERGENCE_PATIENCE,
) -> FitReport:
    if not tol > 0:
        raise DomainError(f"tol 必须为正: {tol}", error_details={"detail": f"tol={tol}"})
    d = dataset.d
    lam = penalty_vector(penalty, d) if penalty.family != "none" else np.zeros(d)
    weight_fn: Callable = da_weights if weights == "da" else irls_weights
    zero_tol = settings.LASSO_ZERO_TOL

    beta = np.zeros(d) if beta0 is None else as_vector(beta0, "beta0", d).copy()
    objective = penalized_objective(dataset, beta, penalty)
    trace = [TraceEntry(iteration=0, objective=objective, step_norm=0.0)]
    best_beta, best_objective = beta.copy(), objective
    worsening = 0
    converged = diverged = False
    kkt = float("inf")
    iteration = 0

    for iteration in range(1, max_iter + 1):
        w, z = weight_fn(dataset, beta)
        if solver == "cd":
            new_beta, sweeps = cd_solve(dataset.X, w, z, beta, lam, tol=0.1 * tol)
        else:
            new_beta, sweeps = majorized_solve(dataset.X, w, z, beta, lam, zero_tol), 0

        step_norm = float(np.max(np.abs(new_beta - beta))) if d else 0.0
        new_objective = penalized_objective(dataset, new_beta, penalty)
        if not np.isfinite(new_objective):
            diverged = True
            logger.warning("惩罚目标函数出现非有限值", extra={"algorithm": algorithm, "iteration": iteration})
            break

        slack = 1e-12 * max(abs(objective), 1.0)
        worsening = worsening + 1 if new_objective > objective + slack else 0
        beta, objective = new_beta, new_objective
        if objective < best_objective:
            best_beta, best_objective = beta.copy(), objective
        kkt = kkt_violation(dataset, beta, penalty)
        trace.append(TraceEntry(
            iteration=iteration,
            objective=objective,
            step_norm=step_norm,
            extra={"kkt": kkt, "nonzero": float(np.count_nonzero(beta)), "sweeps": float(sweeps)},
        ))

        if step_norm <= tol and kkt <= 10.0 * tol:
            converged = True
            break
        if worsening >= patience:
            diverged = True
            logger.warning(
                "目标函数连续变差，判定为发散",
                extra={"algorithm": algorithm, "iteration": iteration, "patience": patience},
            )
            break

    final = beta if converged else best_beta
    if not converged and not diverged:
        logger.warning("惩罚拟合未收敛", extra={"algorithm": algorithm, "iterations": iteration})

    return FitReport(
        beta_hat=final,
        cov=None,
        trace=trace,
        iterations=iteration,
        converged=converged,
        algorithm=algorithm,
        diverged=diverged,
        diagnostics={
            "kkt": kkt_violation(dataset, final, penalty),
            "objective": penalized_objective(dataset, final, penalty),
            "lambda": penalty.lam,
        },
    )


def _require_lasso(penalty: PenaltySpec) -> None:
    if penalty.family not in ("lasso", "none"):
        raise DomainError(f"需要 lasso 惩罚: {penalty.family}", error_details={"detail": f"family={penalty.family}"})


def fit_lasso_em(
    dataset: Dataset,
    penalty: PenaltySpec,
    solver: InnerSolver = "cg",
    beta0: Optional[np.ndarray] = None,
    tol: float = settings.SPARSE_TOL,
    max_iter: int = settings.SPARSE_MAX_ITER,
) -> FitReport:
    """
    lasso 先验的数据增强EM

    E步: ωₜ = pg_mean(mₜ, ψₜ)，混合尺度的期望精度 λ/|βⱼ|
    M步: cg 在活动集上求解 (XᵀΩX + diag(λ/|βⱼ|))β = Xᵀκ；cd 对增强二次型做软阈值坐标下降

    Args:
        dataset: 数据集
        penalty: lasso 惩罚
        solver: cd 或 cg
        beta0: 初始点，默认为0（通过重新进入规则激活坐标）
        tol: 收敛容差，同时要求 KKT 违反量 <= 10·tol
        max_iter: 最大外层迭代次数

    Returns:
        FitReport，algorithm 为 da-cd 或 da-cg
    """
    _require_lasso(penalty)
    if penalty.family == "lasso" and not penalty.lam > 0:
        raise DomainError("lasso EM 需要 λ > 0", error_details={"detail": f"lambda={penalty.lam}"})
    return _fit_penalized(dataset, penalty, "da", solver, beta0, tol, max_iter, f"da-{solver}")


def fit_irls_cd(
    dataset: Dataset,
    penalty: PenaltySpec,
    beta0: Optional[np.ndarray] = None,
    tol: float = settings.SPARSE_TOL,
    max_iter: int = settings.SPARSE_MAX_ITER,
    solver: InnerSolver = "cd",
) -> FitReport:
    """
    惩罚IRLS基线：外层二阶近似，内层坐标下降（solver="cg" 时为活动集共轭梯度）

    振荡时返回惩罚目标最小的迭代值；目标函数连续变差
    IRLS_DIVERGENCE_PATIENCE 次时标记 diverged 并停止。
    """
    _require_lasso(penalty)
    return _fit_penalized(dataset, penalty, "irls", solver, beta0, tol, max_iter, f"irls-{solver}")


def _bridge_precision(beta: np.ndarray, lam: np.ndarray, alpha: float) -> np.ndarray:
    """bridge 的二次上界精度 λα|βⱼ|^(α-2)"""
    return lam * alpha * np.abs(beta) ** (alpha - 2.0)


def _ridge_start(dataset: Dataset, lam: np.ndarray) -> np.ndarray:
    """β = 0 处的一步岭回归形式的增强M步，作为 bridge 的初值"""
    w, z = da_weights(dataset, np.zeros(dataset.d))
    S = (dataset.X.T * w) @ dataset.X + np.diag(lam + 1e-8)
    return _solve_spd(S, dataset.X.T @ (w * z), np.zeros(dataset.d), use_cg=False)


def fit_bridge_em(
    dataset: Dataset,
    penalty: PenaltySpec,
    beta0: Optional[np.ndarray] = None,
    tol: float = settings.SPARSE_TOL,
    max_iter: int = settings.SPARSE_MAX_ITER,
    zero_floor: float = settings.BRIDGE_ZERO_TOL,
) -> FitReport:
    """
    bridge 先验的数据增强EM

    受惩罚坐标的精度为 λα|βⱼ|^(α-2)（λ|β|^α 的二次上界），
    |βⱼ| < zero_floor 的坐标冻结为0，此后不再参与迭代。
    beta0 中为0的坐标用岭回归初值填充。
    """
    if penalty.family != "bridge":
        raise DomainError(f"需要 bridge 惩罚: {penalty.family}", error_details={"detail": f"family={penalty.family}"})
    if not penalty.lam > 0:
        raise DomainError("bridge EM 需要 λ > 0", error_details={"detail": f"lambda={penalty.lam}"})
    d = dataset.d
    lam = penalty_vector(penalty, d)
    penalized = lam > 0.0

    beta = _ridge_start(dataset, lam)
    if beta0 is not None:
        beta0 = as_vector(beta0, "beta0", d)
        beta = np.where(beta0 != 0.0, beta0, beta)
    frozen = penalized & (np.abs(beta) < zero_floor)
    beta[frozen] = 0.0

    objective = penalized_objective(dataset, beta, penalty)
    trace = [TraceEntry(iteration=0, objective=objective, step_norm=0.0)]
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        w, z = da_weights(dataset, beta)
        active = ~frozen
        new_beta = np.zeros(d)
        if np.any(active):
            Xa = dataset.X[:, active]
            precision = np.where(penalized[active], _bridge_precision(beta[active], lam[active], penalty.alpha), 0.0)
            S = (Xa.T * w) @ Xa + np.diag(precision)
            new_beta[active] = _solve_spd(S, Xa.T @ (w * z), beta[active], use_cg=False)
        newly_frozen = penalized & ~frozen & (np.abs(new_beta) < zero_floor)
        if np.any(newly_frozen):
            logger.debug("bridge 坐标冻结为0", extra={"coordinates": np.flatnonzero(newly_frozen).tolist()})
        frozen = frozen | newly_frozen
        new_beta[frozen] = 0.0

        step_norm = float(np.max(np.abs(new_beta - beta))) if d else 0.0
        beta = new_beta
        objective = penalized_objective(dataset, beta, penalty)
        trace.append(TraceEntry(
            iteration=iteration,
            objective=objective,
            step_norm=step_norm,
            extra={"nonzero": float(np.count_nonzero(beta))},
        ))
        if step_norm <= tol:
            converged = True
            break

    if not converged:
        logger.warning("bridge EM未收敛", extra={"iterations": iteration})
    return FitReport(
        beta_hat=beta,
        trace=trace,
        iterations=iteration,
        converged=converged,
        algorithm="bridge",
        diagnostics={"objective": objective, "lambda": penalty.lam, "alpha": penalty.alpha, "frozen": int(np.sum(frozen))},
    )


def fit_penalized(
    dataset: Dataset,
    method: str,
    penalty: PenaltySpec,
    beta0: Optional[np.ndarray] = None,
    tol: float = settings.SPARSE_TOL,
    max_iter: int = settings.SPARSE_MAX_ITER,
) -> FitReport:
    """按方法标签分派：da-cd | da-cg | irls-cd | irls-cg | bridge"""
    if method == "bridge":
        return fit_bridge_em(dataset, penalty, beta0=beta0, tol=tol, max_iter=max_iter)
    if method not in PATH_METHODS:
        raise DomainError(f"未知的稀疏方法: {method}", error_details={"detail": f"method={method}"})
    weights, solver = PATH_METHODS[method]
    if weights == "da":
        return fit_lasso_em(dataset, penalty, solver=solver, beta0=beta0, tol=tol, max_iter=max_iter)
    return fit_irls_cd(dataset, penalty, beta0=beta0, tol=tol, max_iter=max_iter, solver=solver)


# ---------------------------------------------------------------------------
# 解路径
# ---------------------------------------------------------------------------

def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
        raise DomainError("λ 网格必须是严格递减的正数序列", error_details={"detail": "bad lambda grid"})
    return grid


def solution_path(
    dataset: Dataset,
    method: str = "da-cd",
    grid: Optional[np.ndarray] = None,
    warm_start: bool = True,
    penalty: Optional[PenaltySpec] = None,
    tol: float = settings.SPARSE_TOL,
    max_iter: int = settings.SPARSE_MAX_ITER,
    max_workers: int = settings.MAX_WORKERS,
) -> PathResult:
    """
    在 λ 网格上拟合解路径

    warm_start 为 True 时按顺序以上一个 λ 的解为初值；否则各网格点独立，
    用线程池并行拟合。单点失败记录在 errors 中，该行为 NaN，路径继续。

    参数:
        dataset: 数据集
        method: da-cd | da-cg | irls-cd | irls-cg | bridge
        grid: 严格递减的 λ 序列，默认为 lambda_grid(lambda_max)
        warm_start: 是否热启动
        penalty: 惩罚模板（family、alpha、exempt），λ 由网格给出
        tol: 收敛容差
        max_iter: 最大迭代次数
        max_workers: 并行线程数

    返回:
        PathResult
    """
    if penalty is None:
        family = "bridge" if method == "bridge" else "lasso"
        penalty = PenaltySpec(family=family, lam=0.0, exempt=default_exempt(dataset))
    exempt = penalty.exempt_mask(dataset.d)
    if grid is None:
        grid = lambda_grid(lambda_max(dataset, exempt))
    grid = _check_grid(grid)

    size, d = grid.size, dataset.d
    betas = np.full((size, d), np.nan)
    objectives = np.full(size, np.nan)
    converged: List[bool] = [False] * size
    errors: Dict[int, str] = {}

    def fit_point(index: int, start: Optional[np.ndarray]) -> Optional[FitReport]:
        try:
            return fit_penalized(dataset, method, penalty.with_lambda(float(grid[index])), beta0=start, tol=tol, max_iter=max_iter)
        except (PgemError, ArithmeticError, np.linalg.LinAlgError) as exc:
            errors[index] = str(exc)
            logger.warning("路径网格点拟合失败", extra={"index": index, "lambda": float(grid[index]), "error": str(exc)})
            return None

    def record(index: int, report: Optional[FitReport]) -> None:
        if report is None:
            return
        betas[index] = report.beta_hat
        objectives[index] = penalized_objective(dataset, report.beta_hat, penalty.with_lambda(float(grid[index])))
        converged[index] = report.converged

    if warm_start:
        start = None
        for index in range(size):
            report = fit_point(index, start)
            record(index, report)
            if report is not None:
                start = report.beta_hat
    else:
        with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
            reports = list(pool.map(lambda i: fit_point(i, None), range(size)))
        for index, report in enumerate(reports):
            record(index, report)

    nonzero = np.array([
        int(np.count_nonzero(row[~exempt])) if np.all(np.isfinite(row)) else -1
        for row in betas
    ])
    logger.info("解路径完成", extra={"method": method, "points": size, "failures": len(errors)})
    return PathResult(
        method=method,
        lambdas=grid,
        betas=betas,
        objectives=objectives,
        nonzero_counts=nonzero,
        converged=converged,
        errors=errors,
    )


def holdout_misclassification(
    dataset: Dataset,
    method: str,
    grid: np.ndarray,
    replicates: int = settings.REPLICATES,
    holdout_frac: float = settings.HOLDOUT_FRAC,
    seed: int = settings.DEFAULT_SEED,
    penalty: Optional[PenaltySpec] = None,
    tol: float = 1e-6,
    max_iter: int = settings.SPARSE_MAX_ITER,
) -> np.ndarray:
    """
    随机划分训练/留出集，在每个 λ 上计算留出误分类率的平均值

    每次划分在训练集上拟合一条热启动路径；划分由 seed 唯一确定。

    返回:
        长度与网格相同的平均误分类率
    """
    if not 0.0 < holdout_frac < 1.0:
        raise DomainError(f"留出比例必须在(0, 1)内: {holdout_frac}", error_details={"detail": f"holdout_frac={holdout_frac}"})
    grid = _check_grid(grid)
    rng = np.random.default_rng(seed)
    n_test = max(1, int(round(holdout_frac * dataset.n)))
    totals = np.zeros(grid.size)
    counts = np.zeros(grid.size)

    for _ in range(replicates):
        order = rng.permutation(dataset.n)
        test, train = dataset.subset(order[:n_test]), dataset.subset(order[n_test:])
        path = solution_path(train, method, grid, warm_start=True, penalty=penalty, tol=tol, max_iter=max_iter)
        for index, row in enumerate(path.betas):
            if np.all(np.isfinite(row)):
                totals[index] += misclassification(test, row)
                counts[index] += 1

    return np.where(counts > 0, totals / np.maximum(counts, 1), np.nan)
