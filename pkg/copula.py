"""
Gaussian copula family: threshold a multivariate normal at a_i = Phi^{-1}(m_i).

The bivariate normal distribution function follows the Drezner-Wesolowsky
single-integral reduction with Genz's Gauss-Legendre rules (6, 12 or 20
nodes depending on |rho|), accurate to about 1e-15.
"""

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np
from scipy.special import ndtr, ndtri

from config import Config
from errors import ArgumentError, BinmomWarning, PreconditionError
from moments import CrossMomentMatrix
from utils import make_rng, symmetric_part

TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=3)
def _half_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes[:n // 2], weights[:n // 2]


def _upper_orthant(h: float, k: float, r: float) -> float:
    """P(X > h, Y > k) for a standard bivariate normal with correlation r"""
    if h == math.inf or k == math.inf:
        return 0.0
    if h == -math.inf:
        return 1.0 if k == -math.inf else float(ndtr(-k))
    if k == -math.inf:
        return float(ndtr(-h))
    abs_r = abs(r)
    x, w = _half_rule(6 if abs_r < 0.3 else 12 if abs_r < 0.75 else 20)
    hk = h * k
    if abs_r < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(r)
        total = 0.0
        for sn in (np.sin(asr * (1.0 - x) / 2.0), np.sin(asr * (1.0 + x) / 2.0)):
            total += float(np.sum(w * np.exp((sn * hk - hs) / (1.0 - sn * sn))))
        return min(max(total * asr / (2.0 * TWO_PI) + float(ndtr(-h) * ndtr(-k)), 0.0), 1.0)

    if r < 0:
        k, hk = -k, -hk
    bvn = 0.0
    if abs_r < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        asr = -(bs / as_ + hk) / 2.0
        if asr > -100.0:
            bvn = a * math.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_)
        if hk > -100.0:
            b = math.sqrt(bs)
            sp = math.sqrt(TWO_PI) * float(ndtr(-b / a))
            bvn -= math.exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
        a /= 2.0
        for sign in (-1.0, 1.0):
            xs = (a + a * sign * x) ** 2
            rs = np.sqrt(1.0 - xs)
            terms = (np.exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs
                     - np.exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + 5.0 * d * xs)))
            bvn += float(a * np.sum(w * terms))
        bvn = -bvn / TWO_PI
    if r > 0:
        bvn += float(ndtr(-max(h, k)))
    elif h >= k:
        bvn = -bvn
    else:
        gap = float(ndtr(k) - ndtr(h)) if h < 0 else float(ndtr(-h) - ndtr(-k))
        bvn = gap - bvn
    return min(max(bvn, 0.0), 1.0)


def bvn_cdf(h: float, k: float, rho: float) -> float:
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation rho"""
    h, k, rho = float(h), float(k), float(rho)
    if rho >= 1.0:
        return float(ndtr(min(h, k)))
    if rho <= -1.0:
        return max(0.0, float(ndtr(h) + ndtr(k)) - 1.0)
    return _upper_orthant(-h, -k, rho)


def bvn_pdf(h: float, k: float, rho: float) -> float:
    det = 1.0 - rho * rho
    return math.exp(-(h * h - 2.0 * rho * h * k + k * k) / (2.0 * det)) / (TWO_PI * math.sqrt(det))


@dataclass(frozen=True, eq=False)
class GaussianCopulaFamily:
    """Thresholds a plus latent correlation Sigma; the Cholesky factor is cached"""
    thresholds: np.ndarray
    latent_corr: np.ndarray
    repaired: bool = False
    shift: float = 0.0
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        thresholds = np.array(self.thresholds, dtype=float)
        sigma = np.array(self.latent_corr, dtype=float)
        if sigma.shape != (thresholds.size, thresholds.size):
            raise ArgumentError("latent correlation does not match the thresholds")
        if np.max(np.abs(sigma - sigma.T)) > Config.SYMMETRY_TOL or np.any(np.diag(sigma) != 1.0):
            raise ArgumentError("latent correlation must be symmetric with unit diagonal")
        try:
            factor = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as err:
            raise PreconditionError(f"latent correlation is not positive definite: {err}") from err
        for name, value in (("thresholds", thresholds), ("latent_corr", sigma), ("factor", factor)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dim(self) -> int:
        return self.thresholds.size

    @property
    def mean(self) -> np.ndarray:
        return ndtr(self.thresholds)

    def to_dict(self) -> Dict:
        return {
            "kind": "gaussian-copula",
            "dim": self.dim,
            "thresholds": self.thresholds.tolist(),
            "sigma": self.latent_corr.tolist(),
            "repaired": self.repaired,
            "shift": self.shift
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "GaussianCopulaFamily":
        return cls(np.array(data["thresholds"], dtype=float), np.array(data["sigma"], dtype=float),
                   bool(data.get("repaired", False)), float(data.get("shift", 0.0)))


def fit_pair(a_i: float, a_j: float, m_ij: float, start: float = 0.0) -> Tuple[float, bool]:
    """Latent correlation with Phi_2(a_i, a_j; sigma) = m_ij; flag set when clamped"""
    edge = 1.0 - Config.COPULA_EDGE
    if m_ij >= bvn_cdf(a_i, a_j, edge):
        return edge, True
    if m_ij <= bvn_cdf(a_i, a_j, -edge):
        return -edge, True
    lo, hi = -edge, edge
    sigma = min(max(start, lo), hi)
    for _ in range(200):
        gap = bvn_cdf(a_i, a_j, sigma) - m_ij
        if abs(gap) <= 1e-14:
            break
        if gap < 0:
            lo = sigma
        else:
            hi = sigma
        slope = bvn_pdf(a_i, a_j, sigma)
        candidate = sigma - gap / slope if slope > 0 else lo - 1.0
        sigma = candidate if lo < candidate < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-15:
            break
    return sigma, False


def repair_correlation(sigma: np.ndarray) -> Tuple[np.ndarray, float, bool]:
    """Shrink towards the identity until positive definite: (Sigma + |l| I) / (1 + |l|)"""
    sigma = symmetric_part(np.asarray(sigma, dtype=float))
    smallest = float(np.linalg.eigvalsh(sigma)[0])
    if smallest > Config.PD_TOL:
        return sigma, 0.0, False
    shift = abs(smallest - Config.REPAIR_MARGIN)
    repaired = (sigma + shift * np.eye(sigma.shape[0])) / (1.0 + shift)
    np.fill_diagonal(repaired, 1.0)
    return repaired, shift, True


def fit_gc(M) -> Tuple[GaussianCopulaFamily, bool, float]:
    """Pairwise Newton for the latent correlations, then eigenvalue-shift repair"""
    target = CrossMomentMatrix.validated(M)
    m = target.mean
    thresholds = ndtri(m)
    start = np.clip(target.correlations(), -Config.COPULA_START_CLAMP, Config.COPULA_START_CLAMP)
    d = target.dim
    sigma = np.eye(d)
    clamped = []
    for i in range(d):
        for j in range(i + 1, d):
            value, at_edge = fit_pair(thresholds[i], thresholds[j], target.entries[i, j], start[i, j])
            sigma[i, j] = sigma[j, i] = value
            if at_edge:
                clamped.append((i + 1, j + 1))
    if clamped:
        warnings.warn(f"copula pairs clamped at the attainable edge: {clamped}", BinmomWarning, stacklevel=2)
    sigma, shift, repaired = repair_correlation(sigma)
    if repaired:
        warnings.warn(f"latent correlation repaired with shift {shift:.3g}", BinmomWarning, stacklevel=2)
    family = GaussianCopulaFamily(thresholds, sigma, repaired, shift)
    return family, repaired, shift


def sample_gc_many(family: GaussianCopulaFamily, n: int, rng) -> np.ndarray:
    rng = make_rng(rng)
    z = rng.standard_normal((n, family.dim))
    latent = z @ family.factor.T
    return (latent <= family.thresholds).astype(np.uint8)


def sample_gc(family: GaussianCopulaFamily, rng) -> np.ndarray:
    """One dichotomized draw gamma_i = 1{x_i <= a_i}"""
    return sample_gc_many(family, 1, rng)[0]


def gc_moments(family: GaussianCopulaFamily) -> np.ndarray:
    """Cross-moments in closed form: Phi(a_i) and Phi_2(a_i, a_j; sigma_ij)"""
    d = family.dim
    a = family.thresholds
    moments = np.diag(ndtr(a))
    for i in range(d):
        for j in range(i + 1, d):
            moments[i, j] = moments[j, i] = bvn_cdf(a[i], a[j], family.latent_corr[i, j])
    return moments
