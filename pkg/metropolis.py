"""
Independent Metropolis-Hastings with a fitted family as the proposal.

Small problems can be checked exactly: the transition kernel is
enumerated over B^d, and its lag-one auto-covariance is split into the
structural term 1/2 (M^pi - M^q) plus a residual bounded by the total
variation between target and proposal.
"""

from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Tuple, Union

import numpy as np

from conditionals import ConditionalsFamily, pmf_many, sample_many
from config import Config
from copula import GaussianCopulaFamily
from errors import ArgumentError, ContractViolationError, PreconditionError
from moments import DensePmf
from quadexp import QuadExpFamily, qe_energies, qe_sample_many
from utils import binary_vector, check_cap, enumerate_states, make_rng, state_index

Proposal = Union[ConditionalsFamily, QuadExpFamily]


@dataclass(frozen=True)
class TargetDensity:
    """Unnormalized target; log_masses maps an (n, d) batch of states to log pi~"""
    log_masses: Callable[[np.ndarray], np.ndarray]
    dim: int

    def log_mass(self, gamma) -> float:
        gamma = binary_vector(gamma, self.dim)
        return float(self.log_masses(gamma[None, :])[0])

    def eval(self, gamma) -> float:
        return float(np.exp(self.log_mass(gamma)))

    @classmethod
    def from_quadexp(cls, family: QuadExpFamily) -> "TargetDensity":
        return cls(lambda states: qe_energies(family, states), family.dim)

    @classmethod
    def from_pmf(cls, table: DensePmf) -> "TargetDensity":
        if np.any(table.probs <= 0.0):
            raise ContractViolationError("target must put positive mass on every state")
        log_probs = np.log(table.probs)
        weights = 1 << np.arange(table.dim, dtype=np.int64)
        return cls(lambda states: log_probs[np.asarray(states, dtype=np.int64) @ weights], table.dim)


@dataclass
class ChainStats:
    acceptance_rate: float
    lag1_autocov: np.ndarray
    n_samples: int
    mean: np.ndarray

    def to_dict(self) -> Dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "n_samples": self.n_samples,
            "mean": self.mean.tolist(),
            "lag1_autocov": self.lag1_autocov.tolist()
        }


class AutocovDecomposition(NamedTuple):
    lhs: np.ndarray
    structural: np.ndarray
    residual: np.ndarray
    bound: float

    @property
    def holds(self) -> bool:
        return bool(np.max(np.abs(self.residual)) <= self.bound)


def _require_positive(*values: float):
    if any(not v > 0.0 for v in values):
        raise ContractViolationError(f"acceptance needs positive masses, got {values}")


def acceptance(target: TargetDensity, q_gamma: float, q_x: float, x, gamma) -> float:
    """min{1, pi~(gamma) q(x) / (pi~(x) q(gamma))} in log space"""
    _require_positive(q_gamma, q_x)
    log_target_gamma = target.log_mass(gamma)
    log_target_x = target.log_mass(x)
    if not (np.isfinite(log_target_gamma) and np.isfinite(log_target_x)):
        raise ContractViolationError("target mass is zero at the current or proposed state")
    log_ratio = log_target_gamma + np.log(q_x) - log_target_x - np.log(q_gamma)
    return float(np.exp(min(0.0, log_ratio)))


def _proposal_sampler(proposal: Proposal) -> Tuple[Callable, Callable]:
    if isinstance(proposal, GaussianCopulaFamily):
        raise ArgumentError("the Gaussian copula family has no point-wise pmf and cannot propose")
    if isinstance(proposal, ConditionalsFamily):
        def draw(n, rng):
            states, probs = sample_many(proposal, n, rng)
            with np.errstate(divide="ignore"):
                return states, np.log(probs)
        return draw, lambda states: np.log(pmf_many(proposal, states))
    if isinstance(proposal, QuadExpFamily):
        def log_q(states):
            return proposal.log_norm + qe_energies(proposal, states)

        def draw(n, rng):
            states = qe_sample_many(proposal, n, rng)
            return states, log_q(states)
        return draw, log_q
    raise ArgumentError(f"unsupported proposal type {type(proposal).__name__}")


def _lag1_autocov(chain: np.ndarray) -> np.ndarray:
    d = chain.shape[1]
    if chain.shape[0] < 2:
        return np.zeros((d, d))
    values = chain.astype(float)
    centred = values - values.mean(axis=0)
    return centred[1:].T @ centred[:-1] / (values.shape[0] - 1)


def run_chain(target: TargetDensity, proposal: Proposal, steps: int, rng,
              burn_in: float = Config.BURN_IN_FRACTION) -> Tuple[np.ndarray, ChainStats]:
    """Independent-proposal chain; the first burn_in fraction of the steps is dropped"""
    if steps < 1:
        raise ArgumentError("a chain needs at least one step")
    if proposal.dim != target.dim:
        raise ArgumentError(f"proposal has dimension {proposal.dim}, target {target.dim}")
    rng = make_rng(rng)
    draw, _ = _proposal_sampler(proposal)
    states, log_q = draw(steps + 1, rng)
    log_t = np.asarray(target.log_masses(states), dtype=float)
    if not np.all(np.isfinite(log_q)) or not np.all(np.isfinite(log_t)):
        raise ContractViolationError("zero mass at a proposed state")
    log_u = np.log(rng.random(steps))

    chain = np.empty((steps, target.dim), dtype=np.uint8)
    current = 0
    accepted = 0
    for t in range(steps):
        proposed = t + 1
        log_ratio = log_t[proposed] + log_q[current] - log_t[current] - log_q[proposed]
        if log_u[t] < log_ratio:
            current = proposed
            accepted += 1
        chain[t] = states[current]

    kept = chain[int(burn_in * steps):]
    stats = ChainStats(
        acceptance_rate=accepted / steps,
        lag1_autocov=_lag1_autocov(kept),
        n_samples=int(kept.shape[0]),
        mean=kept.astype(float).mean(axis=0) if kept.size else np.zeros(target.dim)
    )
    return kept, stats


def mh_kernel(target: DensePmf, proposal: DensePmf) -> np.ndarray:
    """K[x, gamma]: one-step transition probabilities, rejection mass on the diagonal"""
    if target.dim != proposal.dim:
        raise ArgumentError("target and proposal live on different dimensions")
    check_cap(target.dim, Config.KERNEL_MAX_DIM)
    if np.any(target.probs <= 0.0) or np.any(proposal.probs <= 0.0):
        raise ContractViolationError("the enumerated kernel needs strictly positive pmfs")
    log_pi = np.log(target.probs)
    log_q = np.log(proposal.probs)
    log_ratio = (log_pi[None, :] + log_q[:, None]) - (log_pi[:, None] + log_q[None, :])
    kernel = proposal.probs[None, :] * np.exp(np.minimum(0.0, log_ratio))
    np.fill_diagonal(kernel, 0.0)
    np.fill_diagonal(kernel, 1.0 - kernel.sum(axis=1))
    return kernel


def autocov_decomposition_check(target: DensePmf, proposal: DensePmf) -> AutocovDecomposition:
    """E[Gamma X^T] - m m^T under the kernel, split as 1/2 (M^pi - M^q) + R"""
    if np.max(np.abs(target.mean() - proposal.mean())) > Config.SAME_MEAN_TOL:
        raise PreconditionError("target and proposal must share the mean vector")
    kernel = mh_kernel(target, proposal)
    states = enumerate_states(target.dim).astype(float)
    m = target.mean()
    joint = target.probs[:, None] * kernel
    lhs = states.T @ joint.T @ states - np.outer(m, m)
    structural = 0.5 * (target.cross_moments() - proposal.cross_moments())
    bound = float(np.sum(np.abs(target.probs - proposal.probs))) + 1e-10
    return AutocovDecomposition(lhs, structural, lhs - structural, bound)


def transition_probability(kernel: np.ndarray, x, gamma) -> float:
    return float(kernel[state_index(x), state_index(gamma)])
