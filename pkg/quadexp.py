"""
Exponential quadratic family q(x) = exp(h + x^T A x) on B^d with A lower triangular.

Full conditionals are logistic regressions on the other components and
one component can be summed out exactly. Summing out with a second-order
expansion of log cosh keeps the family closed, which gives a cascade that
turns the model into a logistic conditionals family.
"""

from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import expit, logsumexp

from conditionals import ConditionalsFamily
from config import Config
from errors import ArgumentError, PreconditionError
from moments import DensePmf
from utils import binary_vector, check_cap, enumerate_states, make_rng

LOG_2 = float(np.log(2.0))


@dataclass(frozen=True, eq=False)
class QuadExpFamily:
    """
    Lower-triangular A. carried_log_norm holds the constant produced by
    approximate marginal steps; the exact normalizer is always recomputed
    by enumeration.
    """
    params: np.ndarray
    carried_log_norm: Optional[float] = None
    marginalized: Tuple[int, ...] = ()
    _log_norm: list = field(default_factory=list, init=False, repr=False)

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
        object.__setattr__(self, "marginalized", tuple(int(k) for k in self.marginalized))

    @property
    def dim(self) -> int:
        return self.params.shape[0]

    @property
    def log_norm(self) -> float:
        """h = -log sum_x exp(x^T A x), enumerated once and cached"""
        if not self._log_norm:
            self._log_norm.append(qe_log_norm(self))
        return self._log_norm[0]

    def to_dict(self) -> Dict:
        data = {
            "kind": "quadexp",
            "dim": self.dim,
            "rows": [self.params[i, :i + 1].tolist() for i in range(self.dim)]
        }
        if self.carried_log_norm is not None:
            data["carried_log_norm"] = self.carried_log_norm
        if self.marginalized:
            data["marginalized"] = list(self.marginalized)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "QuadExpFamily":
        dim = int(data["dim"])
        rows = data["rows"]
        if len(rows) != dim:
            raise ArgumentError(f"expected {dim} parameter rows, got {len(rows)}")
        params = np.zeros((dim, dim))
        for i, row in enumerate(rows):
            if len(row) != i + 1:
                raise ArgumentError(f"row {i + 1} must hold {i + 1} values")
            params[i, :i + 1] = row
        carried = data.get("carried_log_norm")
        return cls(params, None if carried is None else float(carried), tuple(data.get("marginalized", ())))


class CoxCoefficients(NamedTuple):
    """log cosh(a/2 + x/2) ~ c1 + c2 x + c3 x^2 near x = 0"""
    c1: float
    c2: float
    c3: float


def qe_energies(family: QuadExpFamily, states: np.ndarray) -> np.ndarray:
    states = states.astype(float)
    return np.einsum("ni,ij,nj->n", states, family.params, states)


def qe_log_norm(family: QuadExpFamily) -> float:
    check_cap(family.dim)
    return -float(logsumexp(qe_energies(family, enumerate_states(family.dim))))


def qe_pmf(family: QuadExpFamily, gamma) -> float:
    gamma = binary_vector(gamma, family.dim)
    return float(np.exp(family.log_norm + qe_energies(family, gamma[None, :])[0]))


def qe_full_pmf(family: QuadExpFamily) -> DensePmf:
    check_cap(family.dim)
    log_mass = qe_energies(family, enumerate_states(family.dim))
    probs = np.exp(log_mass - logsumexp(log_mass))
    return DensePmf(probs / probs.sum())


def qe_moments(family: QuadExpFamily) -> np.ndarray:
    return qe_full_pmf(family).cross_moments()


def _conditional_eta(params: np.ndarray, gamma: np.ndarray, i: int) -> float:
    gamma = gamma.astype(float)
    return float(params[i, i] + params[i, :i] @ gamma[:i] + params[i + 1:, i] @ gamma[i + 1:])


def qe_conditional(family: QuadExpFamily, gamma, i: int) -> float:
    """P(x_i = 1 | x_{-i}); the value of gamma at i is ignored"""
    gamma = binary_vector(gamma, family.dim)
    if not 0 <= i < family.dim:
        raise ArgumentError(f"component {i} outside 0..{family.dim - 1}")
    return float(expit(_conditional_eta(family.params, gamma, i)))


def qe_marginal_unnorm(family: QuadExpFamily, gamma_head, include_normalizer: bool = True) -> float:
    """Log mass of the first d-1 components with the last one summed out exactly"""
    d = family.dim
    head = binary_vector(gamma_head, d - 1).astype(float) if d > 1 else np.zeros(0)
    params = family.params
    quadratic = float(head @ params[:d - 1, :d - 1] @ head)
    eta = params[d - 1, d - 1] + params[d - 1, :d - 1] @ head
    value = quadratic + float(np.logaddexp(0.0, eta))
    return family.log_norm + value if include_normalizer else value


def cox_coeffs(a_dd: float) -> CoxCoefficients:
    half = 0.5 * float(a_dd)
    # log cosh without overflow
    log_cosh = abs(half) + float(np.log1p(np.exp(-2.0 * abs(half)))) - LOG_2
    tanh = float(np.tanh(half))
    sech2 = 1.0 - tanh * tanh
    return CoxCoefficients(log_cosh, tanh / 2.0, sech2 / 8.0)


def cox_marginal_step(family: QuadExpFamily) -> QuadExpFamily:
    """Approximately sum out the last component; the result stays exponential quadratic"""
    d = family.dim
    if d < 2:
        raise PreconditionError("cox_marginal_step needs d >= 2")
    params = family.params
    a_dd = params[d - 1, d - 1]
    coupling = params[d - 1, :d - 1]
    coeffs = cox_coeffs(a_dd)
    reduced = params[:d - 1, :d - 1].copy()
    reduced[np.diag_indices(d - 1)] += (coeffs.c2 + 0.5) * coupling + coeffs.c3 * coupling ** 2
    outer = coeffs.c3 * np.outer(coupling, coupling)
    reduced += 2.0 * np.tril(outer, -1)
    base = family.carried_log_norm
    if base is None:
        base = family.log_norm if d <= Config.ENUMERATION_CAP else 0.0
    carried = base + LOG_2 + coeffs.c1 + 0.5 * a_dd
    return QuadExpFamily(reduced, carried, family.marginalized + (d - 1,))


def derive_logistic_family(family: QuadExpFamily) -> ConditionalsFamily:
    """
    Row k of the logistic family is row k of the level-k model: the conditional
    of the last component of that model given the ones before it.
    """
    d = family.dim
    params = np.zeros((d, d))
    current = family
    for k in range(d - 1, -1, -1):
        params[k, :k + 1] = current.params[k, :k + 1]
        if k > 0:
            current = cox_marginal_step(current)
    return ConditionalsFamily(params, "logistic")


def qe_sample_many(family: QuadExpFamily, n: int, rng) -> np.ndarray:
    """Exact draws by inverting the enumerated distribution"""
    rng = make_rng(rng)
    table = qe_full_pmf(family)
    cumulative = np.cumsum(table.probs)
    codes = np.searchsorted(cumulative, rng.random(n) * cumulative[-1], side="right")
    codes = np.minimum(codes, cumulative.size - 1)
    return table.states()[codes].copy()
