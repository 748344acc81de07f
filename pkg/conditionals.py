"""
The mu-conditionals family: component i is Bernoulli with probability
mu(a_ii + sum_{j<i} a_ij x_j) given the components before it.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm

from config import Config
from errors import ArgumentError
from moments import DensePmf
from utils import binary_vector, check_cap, enumerate_states, make_rng

LINK_KINDS = ("logistic", "truncated-linear", "probit", "cloglog")


@dataclass(frozen=True)
class LinkFunction:
    """Monotone map from the real line to [0, 1] with inverse and derivative"""
    kind: str

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ArgumentError(f"unknown link '{self.kind}', expected one of {LINK_KINDS}")

    @property
    def bijective(self) -> bool:
        return self.kind != "truncated-linear"

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "logistic":
            sat = Config.LOGISTIC_SATURATION
            return np.where(x > sat, 1.0, np.where(x < -sat, 0.0, expit(x)))
        if self.kind == "probit":
            return norm.cdf(x)
        if self.kind == "cloglog":
            return -np.expm1(-np.exp(x))
        return np.clip(x, 0.0, 1.0)

    def inverse(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "logistic":
            return logit(p)
        if self.kind == "probit":
            return norm.ppf(p)
        if self.kind == "cloglog":
            return np.log(-np.log1p(-p))
        return np.clip(p, 0.0, 1.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "logistic":
            p = self.eval(x)
            return p * (1.0 - p)
        if self.kind == "probit":
            return norm.pdf(x)
        if self.kind == "cloglog":
            return np.exp(x - np.exp(x))
        # flat outside (0, 1) and on the boundary
        return np.where((x > 0.0) & (x < 1.0), 1.0, 0.0)


def get_link(link) -> LinkFunction:
    if isinstance(link, LinkFunction):
        return link
    return LinkFunction(str(link))


@dataclass(frozen=True, eq=False)
class ConditionalsFamily:
    """Lower-triangular parameter matrix A plus link mu"""
    params: np.ndarray
    link: LinkFunction

    def __post_init__(self):
        params = np.array(self.params, dtype=float)
        if params.ndim != 2 or params.shape[0] != params.shape[1] or params.shape[0] < 1:
            raise ArgumentError(f"parameter matrix must be square, got shape {params.shape}")
        if np.any(np.triu(params, 1) != 0.0):
            raise ArgumentError("parameter matrix must be lower triangular")
        if not np.all(np.isfinite(params)):
            raise ArgumentError("parameter matrix has non-finite entries")
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "link", get_link(self.link))

    @property
    def dim(self) -> int:
        return self.params.shape[0]

    def to_dict(self) -> Dict:
        return {
            "kind": "conditionals",
            "dim": self.dim,
            "link": self.link.kind,
            "rows": [self.params[i, :i + 1].tolist() for i in range(self.dim)]
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ConditionalsFamily":
        dim = int(data["dim"])
        rows = data["rows"]
        if len(rows) != dim:
            raise ArgumentError(f"expected {dim} parameter rows, got {len(rows)}")
        params = np.zeros((dim, dim))
        for i, row in enumerate(rows):
            if len(row) != i + 1:
                raise ArgumentError(f"row {i + 1} must hold {i + 1} values")
            params[i, :i + 1] = row
        return cls(params, get_link(data["link"]))


def product_family(m, link="logistic") -> ConditionalsFamily:
    """A = diag(mu^{-1}(m)): the independent Bernoulli family"""
    link = get_link(link)
    return ConditionalsFamily(np.diag(link.inverse(np.asarray(m, dtype=float))), link)


def _walk(family: ConditionalsFamily, states: np.ndarray, uniforms: Optional[np.ndarray] = None):
    """Sequential draw on a batch; fills states from uniforms when given"""
    params = family.params
    probs = np.ones(states.shape[0])
    for i in range(family.dim):
        eta = params[i, i] + states[:, :i] @ params[i, :i]
        c = family.link.eval(eta)
        if uniforms is not None:
            states[:, i] = uniforms[:, i] < c
        probs = probs * np.where(states[:, i] == 1, c, 1.0 - c)
    return states, probs


def sample(family: ConditionalsFamily, rng) -> Tuple[np.ndarray, float]:
    """One draw plus its probability, one uniform per component in index order"""
    rng = make_rng(rng)
    uniforms = rng.random((1, family.dim))
    states, probs = _walk(family, np.zeros((1, family.dim), dtype=np.uint8), uniforms)
    return states[0], float(probs[0])


def sample_many(family: ConditionalsFamily, n: int, rng) -> Tuple[np.ndarray, np.ndarray]:
    """n draws consuming the stream exactly as n calls of sample would"""
    rng = make_rng(rng)
    uniforms = rng.random((n, family.dim))
    return _walk(family, np.zeros((n, family.dim), dtype=np.uint8), uniforms)


def pmf(family: ConditionalsFamily, gamma) -> float:
    gamma = binary_vector(gamma, family.dim)
    _, probs = _walk(family, gamma[None, :].copy())
    return float(probs[0])


def pmf_many(family: ConditionalsFamily, states) -> np.ndarray:
    """Probabilities of a batch of states, one per row"""
    states = np.array(states, dtype=np.uint8, ndmin=2)
    if states.shape[1] != family.dim:
        raise ArgumentError(f"states have {states.shape[1]} components, expected {family.dim}")
    _, probs = _walk(family, states)
    return probs


def log_pmf(family: ConditionalsFamily, gamma) -> float:
    with np.errstate(divide="ignore"):
        return float(np.log(pmf(family, gamma)))


def full_pmf(family: ConditionalsFamily) -> DensePmf:
    """Mass of every state of B^d by enumeration"""
    states = enumerate_states(family.dim).copy()
    _, probs = _walk(family, states)
    return DensePmf(probs)


def conditional_probability(family: ConditionalsFamily, prefix, i: int) -> float:
    """P(x_i = 1 | x_0..x_{i-1}) for zero-based i"""
    prefix = np.asarray(prefix, dtype=float)[:i]
    eta = family.params[i, i] + prefix @ family.params[i, :i]
    return float(family.link.eval(eta))


def family_moments(family: ConditionalsFamily, mode: str = "exact", n: Optional[int] = None,
                   rng=None) -> np.ndarray:
    """Cross-moment matrix by enumeration or from n Monte Carlo draws"""
    if mode == "exact":
        check_cap(family.dim)
        table = full_pmf(family)
        states = table.states().astype(float)
        return states.T @ (table.probs[:, None] * states)
    if mode not in ("monte-carlo", "mc"):
        raise ArgumentError(f"unknown moment mode '{mode}'")
    n = Config.N_EST if n is None else int(n)
    if n < 1:
        raise ArgumentError("Monte Carlo moments need n >= 1")
    rng = make_rng(rng)
    total = np.zeros((family.dim, family.dim))
    done = 0
    while done < n:
        size = min(Config.MC_CHUNK, n - done)
        draws, _ = sample_many(family, size, rng)
        draws = draws.astype(float)
        total += draws.T @ draws
        done += size
    return total / n
