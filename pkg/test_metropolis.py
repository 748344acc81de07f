#!/usr/bin/env python3
"""
Tests for the independent Metropolis-Hastings bridge and its exact kernel checks
"""

import os
import sys

import numpy as np
import pytest

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from conditionals import product_family
from copula import GaussianCopulaFamily
from errors import ArgumentError, ContractViolationError, EnumerationCapError, PreconditionError
from metropolis import (TargetDensity, acceptance, autocov_decomposition_check, mh_kernel, run_chain,
                        transition_probability)
from moment_fit import FitConfig, fit
from moments import DensePmf, bahadur_pmf, product_pmf, random_pmf, random_pmf_with_mean
from quadexp import QuadExpFamily, derive_logistic_family, qe_full_pmf, qe_moments
from testkit import run_all_tests
from utils import enumerate_states


def _random_quadexp(dim, rng, coupling):
    params = np.tril(rng.uniform(-coupling, coupling, (dim, dim)), -1)
    params[np.diag_indices(dim)] = rng.uniform(-0.5, 0.5, dim)
    return QuadExpFamily(params)


def test_acceptance_examples():
    uniform = TargetDensity.from_pmf(product_pmf([0.5, 0.5]))
    assert acceptance(uniform, 0.25, 0.25, [0, 0], [1, 1]) == 1.0

    skewed = TargetDensity.from_pmf(DensePmf([0.2, 0.4, 0.2, 0.2]))
    assert acceptance(skewed, 0.25, 0.25, [0, 0], [1, 0]) == 1.0
    assert acceptance(skewed, 0.25, 0.25, [1, 0], [0, 0]) == pytest.approx(0.5)


def test_acceptance_needs_positive_masses():
    target = TargetDensity.from_pmf(product_pmf([0.5, 0.5]))
    with pytest.raises(ContractViolationError):
        acceptance(target, 0.25, 0.0, [0, 0], [1, 1])
    with pytest.raises(ContractViolationError):
        TargetDensity.from_pmf(DensePmf([0.5, 0.5, 0.0, 0.0]))


def test_detailed_balance_of_the_acceptance_rule():
    rng = np.random.default_rng(109)
    pi = random_pmf(3, rng)
    q = random_pmf(3, rng)
    target = TargetDensity.from_pmf(pi)
    states = enumerate_states(3)
    for a, x in enumerate(states):
        for b, gamma in enumerate(states):
            forward = pi.probs[a] * q.probs[b] * acceptance(target, q.probs[b], q.probs[a], x, gamma)
            backward = pi.probs[b] * q.probs[a] * acceptance(target, q.probs[a], q.probs[b], gamma, x)
            assert abs(forward - backward) <= 1e-12


def test_kernel_detailed_balance_and_row_sums():
    rng = np.random.default_rng(113)
    for dim in (1, 2, 3, 4):
        pi = random_pmf(dim, rng)
        kernel = mh_kernel(pi, random_pmf(dim, rng))
        flow = pi.probs[:, None] * kernel
        assert np.max(np.abs(flow - flow.T)) <= 1e-12
        assert np.max(np.abs(kernel.sum(axis=1) - 1.0)) <= 1e-12
        assert np.all(kernel >= 0.0)


def test_kernel_cap():
    table = product_pmf([0.5] * 7)
    with pytest.raises(EnumerationCapError):
        mh_kernel(table, table)


def test_transition_probability_lookup():
    pi = DensePmf([0.1, 0.2, 0.3, 0.4])
    q = product_pmf([0.5, 0.5])
    kernel = mh_kernel(pi, q)
    # from (1, 1) to (0, 0): q = 1/4, target ratio 0.1 / 0.4
    assert transition_probability(kernel, [1, 1], [0, 0]) == pytest.approx(0.25 * 0.25)
    assert transition_probability(kernel, [0, 0], [1, 1]) == pytest.approx(0.25)


def test_decomposition_when_target_equals_proposal():
    pi = random_pmf(3, np.random.default_rng(127))
    check = autocov_decomposition_check(pi, pi)
    assert np.max(np.abs(check.lhs)) <= 1e-14
    assert np.max(np.abs(check.residual)) <= 1e-14
    assert check.holds


def test_decomposition_d2_example():
    pi = bahadur_pmf([0.5, 0.5], {(0, 1): 0.3})
    q = product_pmf([0.5, 0.5])
    check = autocov_decomposition_check(pi, q)
    assert np.max(np.abs(check.structural + check.residual - check.lhs)) <= 1e-12
    assert check.structural[0, 1] == pytest.approx(0.5 * 0.3 * 0.25)
    assert check.holds


def test_decomposition_bound_on_random_pairs():
    rng = np.random.default_rng(131)
    for _ in range(50):
        m = rng.uniform(0.15, 0.85, 4)
        check = autocov_decomposition_check(random_pmf_with_mean(m, rng), random_pmf_with_mean(m, rng))
        assert check.holds


def test_decomposition_refuses_different_means():
    with pytest.raises(PreconditionError):
        autocov_decomposition_check(product_pmf([0.5, 0.5]), product_pmf([0.5, 0.6]))


def test_chain_with_exact_proposal_always_accepts():
    family = _random_quadexp(4, np.random.default_rng(137), coupling=0.8)
    samples, stats = run_chain(TargetDensity.from_quadexp(family), family, 2000, 139)
    assert stats.acceptance_rate == 1.0
    assert samples.shape == (1800, 4) and stats.n_samples == 1800
    assert stats.lag1_autocov.shape == (4, 4)
    assert stats.to_dict()["n_samples"] == 1800


def test_matched_proposal_accepts_more_than_a_distant_one():
    family = _random_quadexp(4, np.random.default_rng(149), coupling=0.3)
    target = TargetDensity.from_quadexp(family)
    _, matched = run_chain(target, derive_logistic_family(family), 20_000, 151)
    _, distant = run_chain(target, product_family([0.05] * 4), 20_000, 151)
    assert 0.0 <= distant.acceptance_rate < matched.acceptance_rate <= 1.0


def test_chain_argument_checks():
    family = _random_quadexp(3, np.random.default_rng(157), coupling=0.5)
    target = TargetDensity.from_quadexp(family)
    with pytest.raises(ArgumentError):
        run_chain(target, GaussianCopulaFamily([0.0, 0.0, 0.0], np.eye(3)), 100, 1)
    with pytest.raises(ArgumentError):
        run_chain(target, product_family([0.5, 0.5]), 100, 1)
    with pytest.raises(ArgumentError):
        run_chain(target, family, 0, 1)


def test_chain_with_pmf_target():
    pi = random_pmf(3, np.random.default_rng(163), concentration=3.0)
    samples, stats = run_chain(TargetDensity.from_pmf(pi), product_family(pi.mean()), 1000, 167, burn_in=0.0)
    assert samples.shape == (1000, 3)
    assert 0.0 < stats.acceptance_rate <= 1.0


@pytest.mark.slow
def test_chain_marginals_match_the_target():
    family = _random_quadexp(4, np.random.default_rng(173), coupling=0.6)
    proposal, _ = fit(qe_moments(family), "logistic", FitConfig(estimator="exact"))
    samples, stats = run_chain(TargetDensity.from_quadexp(family), proposal, 100_000, 179)
    expected = qe_full_pmf(family).mean()
    sigma = np.sqrt(expected * (1.0 - expected) / stats.n_samples)
    # allow for the autocorrelation of a chain that rejects
    assert np.all(np.abs(samples.mean(axis=0) - expected) <= 5.0 * sigma / stats.acceptance_rate)


if __name__ == "__main__":
    sys.exit(0 if run_all_tests(globals(), "Metropolis-Hastings tests") else 1)
