"""
Row-wise Newton-Raphson fit of a mu-conditionals family to a target
cross-moment matrix, with a homotopy from independence when the full
target cannot be reached.
"""

import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from conditionals import ConditionalsFamily, LinkFunction, full_pmf, get_link, sample_many
from config import Config
from errors import (ArgumentError, BinmomWarning, BoundaryError, FitError,
                    NonConvergenceError, PreconditionError)
from moments import CrossMomentMatrix, as_matrix
from utils import enumerate_states, make_rng

ESTIMATORS = ("auto", "exact", "monte-carlo")


@dataclass(frozen=True)
class FitConfig:
    estimator: str = "auto"
    n_samples: int = Config.N_FIT
    max_iter: int = Config.MAX_NEWTON_ITER
    tol: Optional[float] = None
    homotopy_grid: int = Config.HOMOTOPY_GRID
    param_cap: float = Config.PARAM_CAP
    max_halvings: int = Config.MAX_STEP_HALVINGS
    exact_max_dim: int = Config.EXACT_MAX_DIM
    seed: Optional[int] = None

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ArgumentError(f"unknown estimator '{self.estimator}', expected one of {ESTIMATORS}")
        if self.tol is not None and self.tol <= 0:
            raise ArgumentError("Newton tolerance must be positive")
        if self.homotopy_grid < 2 or self.n_samples < 1 or self.max_iter < 1:
            raise ArgumentError("homotopy grid needs >= 2 points; sample and iteration counts >= 1")
        if self.param_cap <= 0:
            raise ArgumentError("parameter cap must be positive")

    def resolved_estimator(self, dim: int) -> str:
        if self.estimator != "auto":
            return self.estimator
        return "exact" if dim <= self.exact_max_dim else "monte-carlo"

    def tolerance(self, estimator: str) -> float:
        if self.tol is not None:
            return self.tol
        return Config.NEWTON_TOL_EXACT if estimator == "exact" else Config.NEWTON_TOL_MC

    def lambdas(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.homotopy_grid)


@dataclass
class RowFit:
    row: int
    iterations: int
    residual: float
    lam: float
    jacobian_positive: bool = True
    method: str = "newton"


@dataclass
class FitReport:
    """Per-row fits; lam is the largest homotopy weight reached, 0.0 when a row stays at independence"""
    rows: List[RowFit] = field(default_factory=list)
    estimator: str = "exact"
    wall_time: float = 0.0

    @property
    def lambdas(self) -> List[float]:
        return [row.lam for row in self.rows]

    @property
    def lambda_min(self) -> float:
        return min(self.lambdas) if self.rows else 1.0

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "wall_time": self.wall_time,
            "lambda_min": self.lambda_min,
            "rows": [asdict(row) for row in self.rows]
        }


class _RowProblem:
    """Expectations over the prefix family: enumerated states or a fixed sample set"""

    def __init__(self, states: np.ndarray, weights: np.ndarray, link: LinkFunction):
        self.design = np.hstack([states.astype(float), np.ones((states.shape[0], 1))])
        self.weights = weights
        self.link = link

    @classmethod
    def build(cls, prefix: ConditionalsFamily, estimator: str, n: int, rng) -> "_RowProblem":
        if estimator == "exact":
            table = full_pmf(prefix)
            return cls(enumerate_states(prefix.dim), table.probs, prefix.link)
        draws, _ = sample_many(prefix, n, rng)
        return cls(draws, np.full(n, 1.0 / n), prefix.link)

    def means(self) -> np.ndarray:
        return self.weights @ self.design[:, :-1]

    def value(self, a: np.ndarray) -> np.ndarray:
        return self.design.T @ (self.weights * self.link.eval(self.design @ a))

    def jacobian(self, a: np.ndarray) -> np.ndarray:
        slope = self.weights * self.link.derivative(self.design @ a)
        return self.design.T @ (slope[:, None] * self.design)


def _check_attainable(problem: _RowProblem, target: np.ndarray):
    """A pair on its Frechet bound needs an infinite parameter"""
    m_new = target[-1]
    for j, (m_j, t_j) in enumerate(zip(problem.means(), target[:-1])):
        lo = max(m_j + m_new - 1.0, 0.0)
        hi = min(m_j, m_new)
        if t_j <= lo + 1e-12 or t_j >= hi - 1e-12:
            raise BoundaryError(f"cross-moment with component {j + 1} sits on its bound")


def _newton(problem: _RowProblem, target: np.ndarray, start: np.ndarray, cfg: FitConfig,
            tol: float, track_jacobian: bool) -> Tuple[np.ndarray, int, float, bool]:
    a = start.copy()
    gap = problem.value(a) - target
    residual = float(np.max(np.abs(gap)))
    jacobian_positive = True
    for iteration in range(cfg.max_iter + 1):
        if residual <= tol:
            return a, iteration, residual, jacobian_positive
        if iteration == cfg.max_iter:
            break
        jac = problem.jacobian(a)
        if track_jacobian:
            sign, _ = np.linalg.slogdet(jac)
            jacobian_positive = jacobian_positive and bool(sign > 0)
        try:
            step = np.linalg.solve(jac, gap)
        except np.linalg.LinAlgError as err:
            raise NonConvergenceError(f"singular Jacobian: {err}") from err
        if not np.all(np.isfinite(step)):
            raise NonConvergenceError("non-finite Newton step")
        scale = 1.0
        for _ in range(cfg.max_halvings + 1):
            trial = a - scale * step
            trial_gap = problem.value(trial) - target
            trial_residual = float(np.max(np.abs(trial_gap)))
            if trial_residual < residual:
                break
            scale *= 0.5
        else:
            raise NonConvergenceError("residual did not decrease after step halving")
        a, gap, residual = trial, trial_gap, trial_residual
        if np.max(np.abs(a)) > cfg.param_cap:
            raise BoundaryError(f"parameter magnitude {np.max(np.abs(a)):.3g} exceeds cap {cfg.param_cap}")
    raise NonConvergenceError(f"no convergence in {cfg.max_iter} iterations (residual {residual:.3g})")


def _initial_row(link: LinkFunction, mean: float, dim: int) -> np.ndarray:
    start = np.zeros(dim + 1)
    start[-1] = float(link.inverse(mean))
    return start


def fit_row(prefix: ConditionalsFamily, target, cfg: Optional[FitConfig] = None, rng=None) -> np.ndarray:
    """Parameter row (a_1..a_d, a_{d+1,d+1}) matching the new column of cross-moments"""
    cfg = cfg or FitConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    target = np.asarray(target, dtype=float)
    if target.size != prefix.dim + 1:
        raise ArgumentError(f"target column must have {prefix.dim + 1} entries")
    estimator = cfg.resolved_estimator(prefix.dim + 1)
    problem = _RowProblem.build(prefix, estimator, cfg.n_samples, rng)
    _check_attainable(problem, target)
    start = _initial_row(prefix.link, target[-1], prefix.dim)
    a, _, _, _ = _newton(problem, target, start, cfg, cfg.tolerance(estimator), estimator == "exact")
    return a


def bordered_matrix(M) -> np.ndarray:
    """[[M, m], [m^T, 1]] with m = diag(M)"""
    M = as_matrix(M)
    m = np.diag(M)
    d = m.size
    bordered = np.ones((d + 1, d + 1))
    bordered[:d, :d] = M
    bordered[:d, d] = m
    bordered[d, :d] = m
    return bordered


def solve_linear_row(block) -> np.ndarray:
    """Row of the linear-link family for the last row/column of a (d+1)x(d+1) block"""
    block = as_matrix(block)
    d = block.shape[0] - 1
    if d < 0 or block.shape[0] != block.shape[1]:
        raise ArgumentError("solve_linear_row needs a square moment block")
    system = bordered_matrix(block[:d, :d])
    rhs = block[d, :d + 1]
    sign, _ = np.linalg.slogdet(system)
    if sign <= 0:
        raise PreconditionError("bordered moment matrix is singular or indefinite")
    try:
        return np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as err:
        raise PreconditionError(f"bordered moment matrix is singular: {err}") from err


def _homotopy_row(problem: _RowProblem, column: np.ndarray, means: np.ndarray, start: np.ndarray,
                  cfg: FitConfig, tol: float, track: bool) -> Tuple[np.ndarray, RowFit]:
    """Walk lambda upwards from independence, keep the last converged solution"""
    independent = means[:-1] * means[-1]
    best, best_fit = start, RowFit(0, 0, float("nan"), 0.0, True, "homotopy")
    current = start
    for lam in cfg.lambdas():
        target = column.copy()
        target[:-1] = lam * column[:-1] + (1.0 - lam) * independent
        try:
            current, iterations, residual, positive = _newton(problem, target, current, cfg, tol, track)
        except FitError:
            break
        best = current
        best_fit = RowFit(0, iterations, residual, float(lam), positive, "homotopy")
    return best, best_fit


def fit(M, link="logistic", cfg: Optional[FitConfig] = None, rng=None) -> Tuple[ConditionalsFamily, FitReport]:
    """Fit A row by row so the family reproduces M, falling back along the homotopy"""
    started = time.perf_counter()
    cfg = cfg or FitConfig()
    rng = make_rng(cfg.seed if rng is None else rng)
    target = CrossMomentMatrix.validated(M)
    link = get_link(link)
    M = target.entries
    m = target.mean
    d = target.dim
    estimator = cfg.resolved_estimator(d)
    tol = cfg.tolerance(estimator)
    params = np.zeros((d, d))
    report = FitReport(estimator=estimator if link.bijective else "linear-solve")

    if not link.bijective:
        for i in range(d):
            block = M[:i + 1, :i + 1]
            row = solve_linear_row(block)
            params[i, :i] = row[:-1]
            params[i, i] = row[-1]
            residual = float(np.max(np.abs(bordered_matrix(block[:i, :i]) @ row - block[i, :i + 1])))
            report.rows.append(RowFit(i, 0, residual, 1.0, True, "linear-solve"))
        report.wall_time = time.perf_counter() - started
        return ConditionalsFamily(params, link), report

    params[0, 0] = float(link.inverse(m[0]))
    report.rows.append(RowFit(0, 0, 0.0, 1.0, True, "closed-form"))
    for i in range(1, d):
        prefix = ConditionalsFamily(params[:i, :i], link)
        problem = _RowProblem.build(prefix, estimator, cfg.n_samples, rng)
        column = M[i, :i + 1].copy()
        start = _initial_row(link, m[i], i)
        track = estimator == "exact"
        try:
            _check_attainable(problem, column)
            row, iterations, residual, positive = _newton(problem, column, start, cfg, tol, track)
            row_fit = RowFit(i, iterations, residual, 1.0, positive, "newton")
        except FitError as err:
            row, row_fit = _homotopy_row(problem, column, m[:i + 1], start, cfg, tol, track)
            row_fit.row = i
            warnings.warn(f"row {i + 1}: {err}; homotopy reached lambda = {row_fit.lam:.3f}",
                          BinmomWarning, stacklevel=2)
        params[i, :i] = row[:-1]
        params[i, i] = row[-1]
        report.rows.append(row_fit)
    report.wall_time = time.perf_counter() - started
    return ConditionalsFamily(params, link), report
