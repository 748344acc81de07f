"""
Benchmark harness: how much of a random target's correlation does each
family reproduce?

For every (d, rho, matrix) a target is generated, each family is fitted and
its achieved cross-moments M^q are compared with the target through the
figure of merit tau = (|M - M*| - |M - M^q|) / |M - M*|, where M* is the
independence matrix with the same mean. Results go to CSV, to SVG band
plots and optionally to SQLite.
"""

import csv
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import matplotlib
import numpy as np
from scipy.stats import spearmanr

from conditionals import family_moments
from config import Config
from copula import fit_gc, gc_moments
from errors import ArgumentError, BinmomError, BinmomWarning, UndefinedMeritError
from matrix_gen import GenConfig, random_cross_moment_matrix
from moment_fit import FitConfig, fit
from moments import CrossMomentMatrix, as_matrix
from utils import make_rng, seed_sequence, symmetric_part

matplotlib.use("Agg")
import matplotlib.pyplot as plt

NORMS = ("spectral", "frobenius")
BENCH_FAMILIES = ("logistic", "truncated-linear", "gaussian-copula")


@dataclass(frozen=True)
class ExperimentConfig:
    dims: Tuple[int, ...] = Config.BENCH_DIMS
    levels: int = Config.BENCH_LEVELS
    matrices: int = Config.BENCH_MATRICES
    families: Tuple[str, ...] = Config.BENCH_FAMILIES
    n_fit: int = Config.N_FIT
    n_est: int = Config.N_EST
    norm: str = Config.BENCH_NORM
    seed: int = Config.BASE_SEED
    workers: int = Config.WORKERS
    exact_max_dim: int = Config.EXACT_MAX_DIM
    sweeps: int = Config.SWEEPS
    permutation_steps: Optional[int] = None
    omegas: int = Config.BENCH_OMEGAS

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "families", tuple(self.families))
        if not self.dims or min(self.dims) < 2:
            raise ArgumentError("dims must be a non-empty list of integers >= 2")
        if min(self.levels, self.matrices, self.n_fit, self.n_est, self.workers, self.sweeps, self.omegas) < 1:
            raise ArgumentError("levels, matrices, sample sizes, sweeps and workers must be >= 1")
        unknown = [f for f in self.families if f not in BENCH_FAMILIES]
        if unknown or not self.families:
            raise ArgumentError(f"unknown families {unknown}, expected a subset of {BENCH_FAMILIES}")
        if self.norm not in NORMS:
            raise ArgumentError(f"unknown norm '{self.norm}', expected one of {NORMS}")

    @property
    def rhos(self) -> np.ndarray:
        if self.levels == 1:
            return np.array([1.0])
        return np.linspace(0.0, 1.0, self.levels)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["dims"] = list(self.dims)
        data["families"] = list(self.families)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ArgumentError(f"unknown experiment settings {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


@dataclass
class ExperimentRecord:
    d: int
    rho: float
    family: str
    matrix_index: int
    tau: float
    lambda_min: float
    repaired: bool
    seed: int
    wall_time: float = field(default=0.0, compare=False)
    error: str = field(default="", compare=False)
    tau_alt: float = field(default=math.nan, compare=False)

    @property
    def failed(self) -> bool:
        return bool(self.error)

    def sort_key(self):
        return self.d, self.rho, self.family, self.matrix_index

    def to_row(self) -> List[str]:
        return [str(self.d), repr(float(self.rho)), self.family, str(self.matrix_index),
                repr(float(self.tau)), repr(float(self.lambda_min)), "1" if self.repaired else "0",
                str(self.seed)]

    @classmethod
    def from_row(cls, row: Sequence[str]) -> "ExperimentRecord":
        if len(row) != len(Config.CSV_HEADER):
            raise ArgumentError(f"CSV row has {len(row)} fields, expected {len(Config.CSV_HEADER)}")
        d, rho, family, index, tau, lam, repaired, seed = row
        return cls(int(d), float(rho), family, int(index), float(tau), float(lam), repaired == "1", int(seed))


@dataclass
class QuantileBand:
    d: int
    family: str
    rho: float
    count: int
    median: float
    omegas: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def _matrix_norm(matrix: np.ndarray, norm: str) -> float:
    if norm == "spectral":
        return float(np.max(np.abs(np.linalg.eigvalsh(symmetric_part(matrix)))))
    if norm == "frobenius":
        return float(np.linalg.norm(matrix, "fro"))
    raise ArgumentError(f"unknown norm '{norm}', expected one of {NORMS}")


def figure_of_merit(M, Mq, norm: str = "spectral") -> float:
    """1 when M^q = M, 0 when M^q only reproduces independence, negative when worse"""
    target = CrossMomentMatrix(as_matrix(M))
    achieved = symmetric_part(as_matrix(Mq))
    if achieved.shape != target.entries.shape:
        raise ArgumentError("achieved and target cross-moments differ in dimension")
    gap = target.entries - target.independence()
    denominator = _matrix_norm(gap, norm)
    if denominator == 0.0:
        raise UndefinedMeritError("target has no correlation: M equals its independence matrix")
    return (denominator - _matrix_norm(target.entries - achieved, norm)) / denominator


def matrix_seed(base_seed: int, d: int, rho_index: int, matrix_index: int) -> int:
    """Integer seed of one benchmark matrix; the record stores it"""
    state = seed_sequence(base_seed, d, rho_index, matrix_index).generate_state(1, dtype=np.uint32)
    return int(state[0])


def achieved_moments(family_name: str, M: np.ndarray, cfg: ExperimentConfig, rng) -> Tuple[np.ndarray, float, bool]:
    """Fit one family and return (M^q, smallest homotopy lambda, repaired flag)"""
    d = M.shape[0]
    if family_name == "gaussian-copula":
        family, repaired, _ = fit_gc(M)
        return gc_moments(family), 1.0, repaired
    fit_cfg = FitConfig(n_samples=cfg.n_fit, exact_max_dim=cfg.exact_max_dim)
    family, report = fit(M, family_name, fit_cfg, rng)
    if d <= cfg.exact_max_dim:
        moments = family_moments(family, "exact")
    else:
        moments = family_moments(family, "monte-carlo", cfg.n_est, rng)
    return moments, report.lambda_min, False


def run_matrix(cfg: ExperimentConfig, d: int, rho_index: int, matrix_index: int) -> List[ExperimentRecord]:
    """Every family on one generated target; failures become records with tau = nan"""
    rho = float(cfg.rhos[rho_index])
    seed = matrix_seed(cfg.seed, d, rho_index, matrix_index)
    gen = GenConfig(dim=d, rho=rho, permutation_steps=cfg.permutation_steps, sweeps=cfg.sweeps)
    records = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BinmomWarning)
        try:
            M = random_cross_moment_matrix(gen, make_rng(seed)).entries
        except (BinmomError, np.linalg.LinAlgError) as err:
            return [ExperimentRecord(d, rho, name, matrix_index, math.nan, math.nan, False, seed,
                                     error=f"generation: {err}") for name in cfg.families]
        alt_norm = "frobenius" if cfg.norm == "spectral" else "spectral"
        for family_index, name in enumerate(cfg.families):
            started = time.perf_counter()
            rng = make_rng(seed_sequence(seed, family_index))
            try:
                moments, lam, repaired = achieved_moments(name, M, cfg, rng)
                tau = figure_of_merit(M, moments, cfg.norm)
                tau_alt = figure_of_merit(M, moments, alt_norm)
                records.append(ExperimentRecord(d, rho, name, matrix_index, tau, lam, repaired, seed,
                                                time.perf_counter() - started, tau_alt=tau_alt))
            except (BinmomError, np.linalg.LinAlgError) as err:
                records.append(ExperimentRecord(d, rho, name, matrix_index, math.nan, math.nan, False, seed,
                                                time.perf_counter() - started, error=str(err)))
    return records


def _run_task(task) -> List[ExperimentRecord]:
    cfg_data, d, rho_index, matrix_index = task
    return run_matrix(ExperimentConfig.from_dict(cfg_data), d, rho_index, matrix_index)


def run_experiment(cfg: ExperimentConfig, progress=None) -> List[ExperimentRecord]:
    """All (d, rho, matrix) cells; record order does not depend on the worker count"""
    cfg_data = cfg.to_dict()
    tasks = [(cfg_data, d, k, idx) for d in cfg.dims for k in range(cfg.levels) for idx in range(cfg.matrices)]
    records: List[ExperimentRecord] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for done, batch in enumerate(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))), 1):
                records.extend(batch)
                if progress:
                    progress(done, len(tasks))
    else:
        for done, task in enumerate(tasks, 1):
            records.extend(_run_task(task))
            if progress:
                progress(done, len(tasks))
    records.sort(key=ExperimentRecord.sort_key)
    return records


def aggregate_quantiles(records: Iterable[ExperimentRecord], omegas: int = Config.BENCH_OMEGAS,
                        dims: Sequence[int] = (), families: Sequence[str] = (),
                        rhos: Sequence[float] = ()) -> List[QuantileBand]:
    """Median and (tau_floor((0.5-w)n), tau_ceil((0.5+w)n)) per (d, family, rho) cell"""
    cells: Dict[Tuple[int, str, float], List[float]] = {}
    for record in records:
        cells.setdefault((record.d, record.family, record.rho), [])
        if math.isfinite(record.tau):
            cells[(record.d, record.family, record.rho)].append(record.tau)
    for key in [(d, f, r) for d in dims for f in families for r in rhos]:
        cells.setdefault(key, [])

    grid = np.linspace(0.0, 0.5, omegas)
    bands = []
    for (d, family, rho), values in sorted(cells.items()):
        if not values:
            warnings.warn(f"no finite tau for d={d}, family={family}, rho={rho:.3f}; cell omitted",
                          BinmomWarning, stacklevel=2)
            continue
        taus = np.sort(np.array(values))
        n = taus.size
        low = np.clip(np.floor((0.5 - grid) * n).astype(int), 1, n)
        high = np.clip(np.ceil((0.5 + grid) * n).astype(int), 1, n)
        bands.append(QuantileBand(d, family, rho, n, float(np.median(taus)), grid,
                                  taus[low - 1], taus[high - 1]))
    return bands


def write_csv(records: Iterable[ExperimentRecord], path: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(Config.CSV_HEADER)
        for record in sorted(records, key=ExperimentRecord.sort_key):
            writer.writerow(record.to_row())


def parse_csv(path: str) -> List[ExperimentRecord]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != Config.CSV_HEADER:
            raise ArgumentError(f"{path}: unexpected CSV header {header}")
        return [ExperimentRecord.from_row(row) for row in reader if row]


def write_svg(bands: Sequence[QuantileBand], directory: str) -> List[str]:
    """One file per family, one panel per d, gray quantile bands under the median"""
    os.makedirs(directory, exist_ok=True)
    written = []
    for family in sorted({band.family for band in bands}):
        own = [band for band in bands if band.family == family]
        dims = sorted({band.d for band in own})
        fig, axes = plt.subplots(1, len(dims), figsize=(4.5 * len(dims), 4), squeeze=False)
        for ax, d in zip(axes[0], dims):
            cell = sorted((band for band in own if band.d == d), key=lambda band: band.rho)
            rhos = np.array([band.rho for band in cell])
            n_layers = cell[0].omegas.size
            for layer in range(n_layers - 1, -1, -1):
                lower = np.array([band.lower[layer] for band in cell])
                upper = np.array([band.upper[layer] for band in cell])
                shade = 0.35 + 0.6 * layer / max(n_layers - 1, 1)
                patch = ax.fill_between(rhos, lower, upper, color=str(shade), linewidth=0)
                patch.set_gid(f"band-{family}-{d}-{layer}")
            line, = ax.plot(rhos, [band.median for band in cell], color="black", linewidth=1.2)
            line.set_gid(f"median-{family}-{d}")
            ax.set_xlim(0.0, 1.0)
            ax.set_ylim(0.0, 1.0)
            ax.set_xlabel("difficulty rho")
            ax.set_ylabel("tau")
            ax.set_title(f"{Config.get_family_label(family)}, d = {d}", fontsize=9)
        fig.tight_layout()
        path = os.path.join(directory, f"tau_{Config.FAMILIES[family]['short']}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


def emit(items, fmt: str, path: str):
    """Write records as CSV, or quantile bands as SVG figures into the directory path"""
    if fmt == "csv":
        return write_csv(items, path)
    if fmt == "svg":
        return write_svg(items, path)
    raise ArgumentError(f"unknown output format '{fmt}', expected csv or svg")


def norm_agreement(records: Iterable[ExperimentRecord]) -> Optional[float]:
    """Spearman rank correlation of tau under the two norms"""
    pairs = [(r.tau, r.tau_alt) for r in records if math.isfinite(r.tau) and math.isfinite(r.tau_alt)]
    if len(pairs) < 3:
        return None
    first, second = zip(*pairs)
    statistic, _ = spearmanr(first, second)
    return float(statistic)


def failures(records: Iterable[ExperimentRecord]) -> List[ExperimentRecord]:
    return [record for record in records if record.failed]
