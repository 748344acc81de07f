#!/usr/bin/env python3
"""
Tests for the figure of merit, the experiment loop, quantile bands and result files
"""

import math
import os
import sys
import tempfile
import warnings
import xml.etree.ElementTree as ET

import numpy as np
import pytest

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from bench import (ExperimentConfig, ExperimentRecord, aggregate_quantiles, emit, failures, figure_of_merit,
                   matrix_seed, norm_agreement, run_matrix, parse_csv, run_experiment, write_csv, write_svg)
from config import Config
from database import ResultStore
from errors import ArgumentError, BinmomWarning, UndefinedMeritError
from testkit import run_all_tests

TARGET = np.array([[0.5, 0.35], [0.35, 0.5]])


def _records(taus, d=3, family="logistic", rho=0.5):
    return [ExperimentRecord(d, rho, family, k, tau, 1.0, False, 1000 + k) for k, tau in enumerate(taus)]


def _tiny_config(**overrides):
    settings = dict(dims=(3,), levels=2, matrices=5, families=("logistic",), sweeps=10,
                    permutation_steps=3, seed=7, workers=1)
    settings.update(overrides)
    return ExperimentConfig(**settings)


def test_figure_of_merit_examples():
    independence = np.array([[0.5, 0.25], [0.25, 0.5]])
    halfway = np.array([[0.5, 0.30], [0.30, 0.5]])
    for norm in ("spectral", "frobenius"):
        assert figure_of_merit(TARGET, TARGET, norm) == 1.0
        assert figure_of_merit(TARGET, independence, norm) == 0.0
    assert figure_of_merit(TARGET, halfway, "spectral") == pytest.approx(0.5)
    assert figure_of_merit(TARGET, [[0.5, 0.1], [0.1, 0.5]], "spectral") < 0.0


def test_figure_of_merit_errors():
    with pytest.raises(UndefinedMeritError):
        figure_of_merit([[0.5, 0.25], [0.25, 0.5]], TARGET)
    with pytest.raises(ArgumentError):
        figure_of_merit(TARGET, np.eye(3))
    with pytest.raises(ArgumentError):
        figure_of_merit(TARGET, TARGET, "nuclear")


def test_matrix_seed_is_stable_and_distinct():
    assert matrix_seed(1, 10, 2, 3) == matrix_seed(1, 10, 2, 3)
    seeds = {matrix_seed(1, 10, k, i) for k in range(3) for i in range(20)}
    assert len(seeds) == 60


def test_experiment_config_validation():
    with pytest.raises(ArgumentError):
        ExperimentConfig(dims=(1,))
    with pytest.raises(ArgumentError):
        ExperimentConfig(families=("probit",))
    with pytest.raises(ArgumentError):
        ExperimentConfig(norm="nuclear")
    with pytest.raises(ArgumentError):
        ExperimentConfig(matrices=0)
    with pytest.raises(ArgumentError):
        ExperimentConfig.from_dict({"dims": [3], "colour": "red"})
    cfg = ExperimentConfig.from_dict({"dims": [3, 4], "levels": 5})
    assert cfg.dims == (3, 4)
    assert np.allclose(cfg.rhos, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_quantile_bands():
    bands = aggregate_quantiles(_records([1.0, 0.25, 0.75, 0.0, 0.5]), omegas=20)
    assert len(bands) == 1
    band = bands[0]
    assert band.count == 5
    assert band.median == 0.5
    assert band.omegas[0] == 0.0 and band.omegas[-1] == 0.5
    assert (band.lower[-1], band.upper[-1]) == (0.0, 1.0)
    assert np.all(np.diff(band.lower) <= 0.0)
    assert np.all(np.diff(band.upper) >= 0.0)
    assert np.all(band.lower <= band.median) and np.all(band.upper >= band.lower)


def test_quantile_bands_skip_failed_and_empty_cells():
    records = _records([0.4, math.nan, 0.6])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bands = aggregate_quantiles(records, omegas=5, dims=(3,), families=("logistic", "gaussian-copula"),
                                    rhos=(0.5,))
    assert [(band.family, band.count) for band in bands] == [("logistic", 2)]
    assert any(issubclass(w.category, BinmomWarning) for w in caught)


def test_csv_with_no_records_is_header_only():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "records.csv")
        emit([], "csv", path)
        with open(path, encoding="utf-8") as handle:
            assert handle.read() == ",".join(Config.CSV_HEADER) + "\n"
        assert parse_csv(path) == []


def test_csv_round_trip():
    records = _records([0.91, 0.5, 1.0 / 3.0]) + _records([0.2], family="gaussian-copula", rho=0.25)
    records[-1].repaired = True
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "nested", "records.csv")
        write_csv(records, path)
        parsed = parse_csv(path)
    assert parsed == sorted(records, key=ExperimentRecord.sort_key)
    assert parsed[0].repaired


def test_csv_rejects_foreign_header():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "records.csv")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("a,b,c\n1,2,3\n")
        with pytest.raises(ArgumentError):
            parse_csv(path)
        with pytest.raises(ArgumentError):
            emit([], "png", path)


def test_svg_is_well_formed_with_one_group_per_layer():
    records = []
    for rho in (0.0, 0.5, 1.0):
        records += _records([0.9, 0.8, 0.95, 0.7], rho=rho)
    bands = aggregate_quantiles(records, omegas=4)
    with tempfile.TemporaryDirectory() as tmp:
        paths = write_svg(bands, tmp)
        assert [os.path.basename(p) for p in paths] == ["tau_logistic.svg"]
        root = ET.parse(paths[0]).getroot()
    ids = {element.get("id") for element in root.iter() if element.get("id")}
    assert {f"band-logistic-3-{layer}" for layer in range(4)} <= ids
    assert "median-logistic-3" in ids


def test_interior_targets_are_fitted_closely():
    records = run_experiment(_tiny_config())
    assert len(records) == 10
    assert not failures(records)
    easy = [r for r in records if r.rho == 0.0]
    assert len(easy) == 5
    assert all(r.tau > 0.99 for r in easy)
    assert all(math.isfinite(r.tau_alt) for r in records)


def test_experiment_is_reproducible_across_worker_counts():
    cfg = _tiny_config(families=("logistic", "truncated-linear", "gaussian-copula"), matrices=3)
    serial = run_experiment(cfg)
    again = run_experiment(cfg)
    parallel = run_experiment(_tiny_config(families=cfg.families, matrices=3, workers=2))
    assert [r.to_row() for r in serial] == [r.to_row() for r in again] == [r.to_row() for r in parallel]
    assert [r.sort_key() for r in serial] == sorted(r.sort_key() for r in serial)
    with tempfile.TemporaryDirectory() as tmp:
        first, second = os.path.join(tmp, "a.csv"), os.path.join(tmp, "b.csv")
        write_csv(serial, first)
        write_csv(parallel, second)
        with open(first, "rb") as a, open(second, "rb") as b:
            assert a.read() == b.read()


def test_norm_agreement():
    records = _records([0.1, 0.5, 0.9, 0.7])
    for record, alt in zip(records, (0.2, 0.6, 0.95, 0.8)):
        record.tau_alt = alt
    assert norm_agreement(records) == pytest.approx(1.0)
    assert norm_agreement(records[:2]) is None


def test_result_store_round_trip():
    records = _records([0.9, 0.4])
    records.append(ExperimentRecord(3, 0.5, "logistic", 2, math.nan, math.nan, False, 1002, error="generation: x"))
    store = ResultStore(":memory:")
    run_id = store.start_run("unit", "{}")
    assert store.save_records(run_id, records) == 3
    loaded = store.load_records(run_id)
    store.close()
    assert loaded[:2] == records[:2]
    assert loaded[2].failed and math.isnan(loaded[2].tau)


@pytest.mark.slow
def test_logistic_beats_linear_on_hard_targets():
    cfg = ExperimentConfig(dims=(10,), levels=11, matrices=50, families=("logistic", "truncated-linear"),
                           sweeps=50, permutation_steps=20, seed=11, workers=1)
    assert cfg.rhos[9] == pytest.approx(0.9)
    records = [r for index in range(cfg.matrices) for r in run_matrix(cfg, 10, 9, index)]
    logistic = [r.tau for r in records if r.family == "logistic" and math.isfinite(r.tau)]
    linear = [r.tau for r in records if r.family == "truncated-linear" and math.isfinite(r.tau)]
    assert len(logistic) >= 45 and len(linear) >= 45
    assert np.median(logistic) > np.median(linear)


@pytest.mark.slow
def test_family_ordering_across_difficulty():
    cfg = ExperimentConfig(dims=(10,), levels=5, matrices=20, workers=1)
    records = run_experiment(cfg)

    def median(rho, family):
        taus = [r.tau for r in records if r.rho == rho and r.family == family and math.isfinite(r.tau)]
        assert len(taus) >= 10
        return float(np.median(taus))

    for rho in cfg.rhos:
        if rho <= 0.3:
            assert median(rho, "logistic") >= 0.9
        if rho >= 0.7:
            assert median(rho, "logistic") >= median(rho, "gaussian-copula") >= median(rho, "truncated-linear")


if __name__ == "__main__":
    sys.exit(0 if run_all_tests(globals(), "benchmark tests") else 1)
