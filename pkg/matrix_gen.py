"""
Random feasible cross-moment matrices.

The chain alternates uniform index permutations with sweeps that redraw
the off-diagonal entries of the last column. Each redraw is uniform on the
interval where the pairwise bounds hold and the covariance M - m m^T stays
positive definite; the difficulty rho shrinks that interval towards its
midpoint. The leading covariance block does not change during a sweep, so
its inverse N is computed once per permutation and the determinant is
updated in O(1) per entry.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import Config
from errors import ArgumentError, BinmomError, BinmomWarning, DegenerateIntervalError, DeterminantDriftError
from moments import CrossMomentMatrix, as_matrix, validate_cross_moments
from utils import make_rng, seed_sequence

MAX_EXTRA_SWEEPS = 100


@dataclass(frozen=True)
class GenConfig:
    dim: int
    rho: float = 1.0
    permutation_steps: Optional[int] = None
    sweeps: int = Config.SWEEPS
    refresh_sweeps: int = Config.DET_REFRESH_SWEEPS
    seed: Optional[int] = None

    def __post_init__(self):
        if self.dim < 2:
            raise ArgumentError("the generator needs d >= 2")
        if not 0.0 <= self.rho <= 1.0:
            raise ArgumentError(f"difficulty rho = {self.rho} outside [0, 1]")
        if self.sweeps < 1 or self.refresh_sweeps < 1:
            raise ArgumentError("sweep counts must be >= 1")
        if self.permutation_steps is not None and self.permutation_steps < 1:
            raise ArgumentError("permutation steps must be >= 1")

    @property
    def steps(self) -> int:
        if self.permutation_steps is not None:
            return self.permutation_steps
        return Config.PERMUTATIONS_PER_DIM * self.dim


@dataclass
class GenerationReport:
    replacements: int = 0
    skipped: int = 0
    refreshes: int = 0
    extra_sweeps: int = 0
    max_drift: float = 0.0
    drifts: List[float] = field(default_factory=list)


def shrink_interval(lo: float, hi: float, rho: float) -> Tuple[float, float]:
    """(a^rho, b^rho): the midpoint at rho = 0, the full interval at rho = 1"""
    return (0.5 * ((1.0 + rho) * lo + (1.0 - rho) * hi),
            0.5 * ((1.0 - rho) * lo + (1.0 + rho) * hi))


def _interval(m_i: float, m_d: float, w_i: float, u_i: float, n_ii: float, schur: float) -> Tuple[float, float]:
    """Admissible values of m_id given the covariance column w, u = N w and the Schur complement"""
    centre = w_i - u_i / n_ii
    radius = math.sqrt(max((u_i / n_ii) ** 2 + schur / n_ii, 0.0))
    offset = m_i * m_d
    lo = max(m_i + m_d - 1.0, 0.0, offset + centre - radius)
    hi = min(m_i, m_d, offset + centre + radius)
    return lo, hi


def _split(M: np.ndarray):
    m = np.diag(M)
    cov = M - np.outer(m, m)
    block = cov[:-1, :-1]
    inverse = np.linalg.inv(block)
    w = cov[:-1, -1].copy()
    u = inverse @ w
    schur = float(cov[-1, -1] - w @ u)
    return m, inverse, float(np.linalg.det(block)), w, u, schur


def replacement_bounds(M, i: int) -> Tuple[float, float]:
    """Interval (a_i, b_i) for entry (i, d) of the last column, zero-based i < d - 1"""
    M = as_matrix(M)
    d = M.shape[0]
    if not 0 <= i < d - 1:
        raise ArgumentError(f"replacement index {i} outside 0..{d - 2}")
    m, inverse, _, w, u, schur = _split(M)
    lo, hi = _interval(m[i], m[-1], w[i], u[i], inverse[i, i], schur)
    if lo >= hi:
        raise DegenerateIntervalError(f"empty replacement interval for entry ({i + 1}, {d}): [{lo:.6g}, {hi:.6g}]")
    return lo, hi


def _det_change(det_block: float, n_ii: float, t_i: float, old_y: float, new_y: float) -> float:
    return det_block * (n_ii * (old_y * old_y - new_y * new_y) + 2.0 * t_i * (old_y - new_y))


def det_update(M, i: int, old_x: float, new_x: float) -> float:
    """Determinant of the covariance after m_id moves from old_x to new_x"""
    M = np.array(as_matrix(M), dtype=float)
    d = M.shape[0]
    if not 0 <= i < d - 1:
        raise ArgumentError(f"replacement index {i} outside 0..{d - 2}")
    M[i, -1] = M[-1, i] = old_x
    m, inverse, det_block, w, u, schur = _split(M)
    offset = m[i] * m[-1]
    t_i = u[i] - inverse[i, i] * w[i]
    return det_block * schur + _det_change(det_block, inverse[i, i], t_i, old_x - offset, new_x - offset)


def determinant_drift(running: float, exact: float) -> float:
    return abs(running - exact) / abs(exact) if exact != 0.0 else abs(running)


def check_determinant(running: float, exact: float, tol: Optional[float] = None) -> float:
    """Relative drift of a running determinant; raises once it exceeds tol"""
    tol = Config.DET_REL_TOL if tol is None else tol
    drift = determinant_drift(running, exact)
    if not drift <= tol:
        raise DeterminantDriftError(f"determinant drifted by {drift:.3g} (tolerance {tol:.3g})")
    return drift


class _MomentChain:
    """Working state of one generator run"""

    def __init__(self, cfg: GenConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.report = GenerationReport()
        d = cfg.dim
        m = rng.random(d)
        while np.any(m <= 0.0):
            m = rng.random(d)
        self.M = np.outer(m, m)
        np.fill_diagonal(self.M, m)
        self._reset()

    def _reset(self):
        self.m, self.inverse, self.det_block, self.w, self.u, schur = _split(self.M)
        self.det = self.det_block * schur

    def permute(self):
        order = self.rng.permutation(self.cfg.dim)
        self.M = self.M[np.ix_(order, order)]
        self._reset()

    def sweep(self):
        d = self.cfg.dim
        m, w, u, inverse = self.m, self.w, self.u, self.inverse
        m_d = m[-1]
        for i in self.rng.permutation(d - 1):
            n_ii = inverse[i, i]
            schur = self.det / self.det_block
            lo, hi = _interval(m[i], m_d, w[i], u[i], n_ii, schur)
            if lo >= hi:
                self.report.skipped += 1
                continue
            lo, hi = shrink_interval(lo, hi, self.cfg.rho)
            x = lo if hi <= lo else float(self.rng.uniform(lo, hi))
            y = x - m[i] * m_d
            t_i = u[i] - n_ii * w[i]
            self.det += _det_change(self.det_block, n_ii, t_i, w[i], y)
            u += (y - w[i]) * inverse[:, i]
            w[i] = y
            self.M[i, -1] = self.M[-1, i] = x
            self.report.replacements += 1

    def refresh(self):
        m = self.m
        exact = float(np.linalg.det(self.M - np.outer(m, m)))
        drift = determinant_drift(self.det, exact)
        self.report.refreshes += 1
        self.report.drifts.append(drift)
        self.report.max_drift = max(self.report.max_drift, drift)
        try:
            check_determinant(self.det, exact)
        except DeterminantDriftError as err:
            warnings.warn(f"{err}; recomputed", BinmomWarning, stacklevel=3)
        self._reset()

    def run(self) -> np.ndarray:
        cfg = self.cfg
        for _ in range(cfg.steps):
            self.permute()
            for sweep in range(1, cfg.sweeps + 1):
                self.sweep()
                if sweep % cfg.refresh_sweeps == 0:
                    self.refresh()
        # an entry drawn next to an interval end can leave the covariance nearly singular
        while not validate_cross_moments(self.M).valid:
            if self.report.extra_sweeps >= MAX_EXTRA_SWEEPS:
                raise BinmomError("generator could not leave the boundary of the feasible set")
            self.sweep()
            self.report.extra_sweeps += 1
        return 0.5 * (self.M + self.M.T)


def generate_with_report(cfg: GenConfig, rng=None) -> Tuple[CrossMomentMatrix, GenerationReport]:
    chain = _MomentChain(cfg, make_rng(cfg.seed if rng is None else rng))
    matrix = chain.run()
    return CrossMomentMatrix(matrix), chain.report


def random_cross_moment_matrix(cfg: GenConfig, rng=None) -> CrossMomentMatrix:
    """Approximately uniform valid cross-moment matrix of the given difficulty"""
    matrix, _ = generate_with_report(cfg, rng)
    return matrix


def generate_many(cfg: GenConfig, count: int, base_seed: int = Config.BASE_SEED) -> List[CrossMomentMatrix]:
    """count matrices, matrix k seeded from (base seed, d, k) alone"""
    return [random_cross_moment_matrix(cfg, make_rng(seed_sequence(base_seed, cfg.dim, k)))
            for k in range(count)]
