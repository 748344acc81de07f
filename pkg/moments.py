"""
Cross-moments of binary random vectors.

Domain types (cross-moment matrices, dense probability tables, mean and
correlation specifications), the Fréchet-Hoeffding bounds, the exact
enumeration oracle, the Bahadur expansion and the l^p distance bound.
Every other module is checked against the functions in here.

Index sets are zero-based: component 1 is index 0.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, NamedTuple, Optional, Tuple

import numpy as np

from config import Config
from errors import ArgumentError, InfeasibleCoefficientsError, PreconditionError
from utils import all_subsets, check_cap, enumerate_states, index_set, symmetric_part


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of validate_cross_moments; no violations means valid"""
    violations: Tuple[str, ...]
    min_eigenvalue: float

    @property
    def valid(self) -> bool:
        return not self.violations


@dataclass(frozen=True, eq=False)
class CrossMomentMatrix:
    """Symmetric matrix of pairwise cross-moments, means on the diagonal"""
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def validated(cls, matrix) -> "CrossMomentMatrix":
        """Build and refuse anything validate_cross_moments flags"""
        entries = matrix.entries if isinstance(matrix, cls) else matrix
        report = validate_cross_moments(entries)
        if not report.valid:
            raise PreconditionError("invalid cross-moment matrix: " + "; ".join(report.violations))
        return cls(entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def covariance(self) -> np.ndarray:
        m = self.mean
        return symmetric_part(self.entries - np.outer(m, m))

    def independence(self) -> np.ndarray:
        """M*: same mean, uncorrelated entries"""
        m = self.mean
        star = np.outer(m, m)
        np.fill_diagonal(star, m)
        return star

    def correlations(self) -> np.ndarray:
        s = np.sqrt(self.mean * (1.0 - self.mean))
        corr = self.covariance() / np.outer(s, s)
        np.fill_diagonal(corr, 1.0)
        return corr


def as_matrix(matrix) -> np.ndarray:
    if isinstance(matrix, CrossMomentMatrix):
        return np.array(matrix.entries)
    return np.asarray(matrix, dtype=float)


@dataclass(frozen=True, eq=False)
class DensePmf:
    """Probability table over B^d, lexicographic with component 1 as least significant bit"""
    probs: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).ravel()
        dim = int(round(math.log2(probs.size))) if probs.size else -1
        if dim < 1 or 2 ** dim != probs.size:
            raise ArgumentError(f"table of size {probs.size} is not 2^d for d >= 1")
        check_cap(dim)
        if np.any(probs < -1e-12):
            raise ArgumentError("probability table has negative entries")
        if abs(probs.sum() - 1.0) > Config.PMF_SUM_TOL * max(1, probs.size / 1024):
            raise ArgumentError(f"probability table sums to {probs.sum()!r}")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "dim", dim)

    def states(self) -> np.ndarray:
        return enumerate_states(self.dim)

    def mean(self) -> np.ndarray:
        return self.probs @ self.states()

    def cross_moments(self) -> np.ndarray:
        return pmf_cross_moments(self)


@dataclass(frozen=True, eq=False)
class CorrelationSpec:
    """Mean vector plus correlation matrix; feasible iff the induced M is valid"""
    mean: np.ndarray
    corr: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        corr = np.array(self.corr, dtype=float)
        if corr.shape != (mean.size, mean.size):
            raise ArgumentError("correlation matrix does not match the mean vector")
        if np.max(np.abs(corr - corr.T)) > Config.SYMMETRY_TOL:
            raise ArgumentError("correlation matrix is not symmetric")
        if np.any(np.abs(np.diag(corr) - 1.0) > Config.SYMMETRY_TOL) or np.any(np.abs(corr) > 1.0):
            raise ArgumentError("correlation matrix needs unit diagonal and entries in [-1, 1]")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "corr", corr)

    def to_cross_moments(self) -> Tuple[np.ndarray, FeasibilityReport]:
        s = np.sqrt(self.mean * (1.0 - self.mean))
        matrix = self.corr * np.outer(s, s) + np.outer(self.mean, self.mean)
        return matrix, validate_cross_moments(matrix)

    @property
    def feasible(self) -> bool:
        return self.to_cross_moments()[1].valid


def frechet_bounds(indices: Iterable[int], m) -> Tuple[float, float]:
    """Sharp bounds on m_I given the first-order marginals"""
    m = np.asarray(m, dtype=float)
    subset = sorted(index_set(indices, m.size))
    if not subset:
        raise ArgumentError("frechet_bounds needs a non-empty index set")
    marg = m[subset]
    if np.any((marg <= 0.0) | (marg >= 1.0)):
        raise ArgumentError("marginals must lie in (0, 1)")
    lo = max(float(marg.sum()) - len(subset) + 1.0, 0.0)
    hi = float(marg.min())
    return lo, hi


def validate_cross_moments(matrix) -> FeasibilityReport:
    """List every violated condition of a cross-moment matrix"""
    M = as_matrix(matrix)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ArgumentError(f"cross-moment matrix must be square, got shape {M.shape}")
    if np.max(np.abs(M - M.T)) > Config.SYMMETRY_TOL:
        raise ArgumentError("cross-moment matrix is not symmetric")
    M = symmetric_part(M)
    m = np.diag(M)
    d = m.size
    violations = []
    for i in range(d):
        if not 0.0 < m[i] < 1.0:
            violations.append(f"m_{i + 1}{i + 1} = {m[i]:.6g} outside (0, 1)")
    tol = Config.SYMMETRY_TOL
    for i in range(d):
        for j in range(i + 1, d):
            lo = max(m[i] + m[j] - 1.0, 0.0)
            hi = min(m[i], m[j])
            if M[i, j] > hi + tol:
                violations.append(f"m_{i + 1}{j + 1} = {M[i, j]:.6g} > min(m_{i + 1},m_{j + 1}) = {hi:.6g}")
            if M[i, j] < lo - tol:
                violations.append(f"m_{i + 1}{j + 1} = {M[i, j]:.6g} < max(m_{i + 1}+m_{j + 1}-1,0) = {lo:.6g}")
    cov = symmetric_part(M - np.outer(m, m))
    min_eig = float(np.linalg.eigvalsh(cov)[0])
    if min_eig <= Config.PD_TOL:
        violations.append(f"covariance not positive definite (smallest eigenvalue {min_eig:.3g})")
    return FeasibilityReport(tuple(violations), min_eig)


def oracle_moments(pmf: DensePmf, indices: Iterable[int]) -> float:
    """P(Gamma_I = 1) by brute-force enumeration; 1 for the empty set"""
    subset = sorted(index_set(indices, pmf.dim))
    if not subset:
        return 1.0
    hits = np.all(pmf.states()[:, subset] == 1, axis=1)
    return float(pmf.probs[hits].sum())


def pmf_cross_moments(pmf: DensePmf) -> np.ndarray:
    states = pmf.states().astype(float)
    return states.T @ (pmf.probs[:, None] * states)


def product_pmf(m) -> DensePmf:
    """Independent Bernoulli components with means m"""
    m = np.asarray(m, dtype=float)
    states = enumerate_states(m.size)
    probs = np.prod(np.where(states == 1, m, 1.0 - m), axis=1)
    return DensePmf(probs)


def _standardized(states: np.ndarray, m: np.ndarray) -> np.ndarray:
    return (states - m) / np.sqrt(m * (1.0 - m))


def _basis(z: np.ndarray, subset) -> np.ndarray:
    if not subset:
        return np.ones(z.shape[0])
    return np.prod(z[:, list(subset)], axis=1)


def bahadur_coefficients(pmf: DensePmf) -> Dict[frozenset, float]:
    """Generalized correlation coefficients c_I for every I"""
    m = pmf.mean()
    if np.any((m <= 0.0) | (m >= 1.0)):
        raise PreconditionError("Bahadur coefficients need every mean strictly inside (0, 1)")
    z = _standardized(pmf.states(), m)
    return {frozenset(s): float(pmf.probs @ _basis(z, s)) for s in all_subsets(pmf.dim)}


def bahadur_pmf(m, coeffs: Dict[Iterable[int], float]) -> DensePmf:
    """Rebuild a pmf from its mean and correlation coefficients"""
    m = np.asarray(m, dtype=float)
    if m.ndim != 1 or np.any((m <= 0.0) | (m >= 1.0)):
        raise ArgumentError("mean vector must lie in (0, 1)^d")
    states = enumerate_states(m.size)
    z = _standardized(states, m)
    expansion = np.ones(states.shape[0])
    for key, value in coeffs.items():
        subset = sorted(index_set(key, m.size))
        if len(subset) >= 2 and value != 0.0:
            expansion += value * _basis(z, subset)
    probs = np.prod(np.where(states == 1, m, 1.0 - m), axis=1) * expansion
    if probs.min() < -1e-12:
        raise InfeasibleCoefficientsError(
            f"coefficients give a negative mass {probs.min():.3g}")
    probs = np.clip(probs, 0.0, None)
    return DensePmf(probs / probs.sum())


def random_pmf(dim: int, rng: np.random.Generator, concentration: float = 1.0) -> DensePmf:
    """Strictly positive pmf drawn from a symmetric Dirichlet"""
    probs = rng.dirichlet(np.full(2 ** dim, concentration))
    probs = np.maximum(probs, 1e-300)
    return DensePmf(probs / probs.sum())


def random_pmf_with_mean(m, rng: np.random.Generator, strength: float = 0.9) -> DensePmf:
    """Strictly positive pmf with prescribed mean and random higher-order structure"""
    m = np.asarray(m, dtype=float)
    states = enumerate_states(m.size)
    z = _standardized(states, m)
    weights = np.prod(np.where(states == 1, m, 1.0 - m), axis=1)
    noise = rng.standard_normal(states.shape[0])
    expansion = np.zeros(states.shape[0])
    for subset in all_subsets(m.size):
        if len(subset) >= 2:
            u = _basis(z, subset)
            expansion += (weights @ (noise * u)) * u
    low = expansion.min()
    scale = strength / -low if low < 0 else 0.0
    probs = weights * (1.0 + scale * expansion)
    return DensePmf(probs / probs.sum())


class LpDistanceCheck(NamedTuple):
    lhs: float
    bound: float


def _check_same_mean(pi: DensePmf, omega: DensePmf):
    if pi.dim != omega.dim:
        raise ArgumentError("distributions live on different dimensions")
    if np.max(np.abs(pi.mean() - omega.mean())) > Config.SAME_MEAN_TOL:
        raise PreconditionError("the l^p bound requires equal mean vectors")


def lp_distance_check(pi: DensePmf, omega: DensePmf, p: float) -> LpDistanceCheck:
    """l^p distance of two same-mean pmfs and its correlation-coefficient bound"""
    if p < 1:
        raise ArgumentError("p must be at least 1")
    _check_same_mean(pi, omega)
    lhs = float(np.sum(np.abs(pi.probs - omega.probs) ** p))
    c_pi = bahadur_coefficients(pi)
    c_omega = bahadur_coefficients(omega)
    damp = 1.0 - min(p, 2.0)
    bound = sum(2.0 ** (damp * len(key)) * abs(c_pi[key] - c_omega[key]) ** p for key in c_pi)
    return LpDistanceCheck(lhs, float(bound))


def lp_tail_bound(pi: DensePmf, omega: DensePmf, p: float) -> Tuple[float, float, Optional[float]]:
    """(r, (1+r)^d - dr - 1, sharper bound when all second-order moments agree)"""
    _check_same_mean(pi, omega)
    c_pi = bahadur_coefficients(pi)
    c_omega = bahadur_coefficients(omega)
    d = pi.dim
    largest = max((abs(c_pi[k] - c_omega[k]) ** (p / len(k)) for k in c_pi if k), default=0.0)
    r = 2.0 ** (1.0 - min(p, 2.0)) * largest
    tail = (1.0 + r) ** d - d * r - 1.0
    pairs_agree = all(abs(c_pi[k] - c_omega[k]) <= Config.SAME_MEAN_TOL for k in c_pi if len(k) == 2)
    sharper = tail - 0.5 * d * (d - 1) * r ** 2 if pairs_agree else None
    return r, tail, sharper
