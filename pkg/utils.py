from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from config import Config
from errors import ArgumentError, EnumerationCapError


def check_cap(dim: int, cap: Optional[int] = None):
    """Refuse enumeration of the binary space beyond the cap"""
    cap = Config.ENUMERATION_CAP if cap is None else cap
    if dim > cap:
        raise EnumerationCapError(f"dimension {dim} exceeds enumeration cap {cap}")


@lru_cache(maxsize=32)
def _states(dim: int) -> np.ndarray:
    codes = np.arange(2 ** dim, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(dim, dtype=np.int64)) & 1
    states = bits.astype(np.uint8)
    states.setflags(write=False)
    return states


def enumerate_states(dim: int) -> np.ndarray:
    """All of B^d as a (2^d, d) array; component 1 is the least significant bit"""
    check_cap(dim)
    return _states(dim)


def state_index(gamma) -> int:
    """Row of gamma in the table returned by enumerate_states"""
    bits = np.asarray(gamma, dtype=np.int64)
    return int(np.sum(bits << np.arange(bits.size, dtype=np.int64)))


def binary_vector(bits, dim: Optional[int] = None) -> np.ndarray:
    """Coerce to a 0/1 uint8 vector of the expected length"""
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size < 1:
        raise ArgumentError("a binary vector must be a non-empty 1-d sequence")
    if not np.all((arr == 0) | (arr == 1)):
        raise ArgumentError("binary vector entries must be 0 or 1")
    if dim is not None and arr.size != dim:
        raise ArgumentError(f"binary vector has length {arr.size}, expected {dim}")
    return arr.astype(np.uint8)


def index_set(indices: Iterable[int], dim: Optional[int] = None) -> frozenset:
    """Zero-based index set, validated against the dimension"""
    result = frozenset(int(i) for i in indices)
    if dim is not None and any(i < 0 or i >= dim for i in result):
        raise ArgumentError(f"index set {sorted(result)} outside 0..{dim - 1}")
    return result


def all_subsets(dim: int):
    """Every subset of {0..d-1} as a sorted tuple, by increasing size"""
    from itertools import combinations
    for size in range(dim + 1):
        yield from combinations(range(dim), size)


def seed_sequence(*keys: int) -> np.random.SeedSequence:
    """Splittable seed from (base seed, key, key, ...)"""
    return np.random.SeedSequence([int(k) for k in keys])


def make_rng(seed=None) -> np.random.Generator:
    """numpy Generator from an int, a SeedSequence or an existing Generator"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def symmetric_part(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def read_matrix(path: str, tol: Optional[float] = None) -> np.ndarray:
    """Read the shared matrix text format: `d`, then d rows of d floats"""
    tol = Config.MATRIX_FILE_SYMMETRY_TOL if tol is None else tol
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line.split() for line in handle if line.strip()]
    if not lines or len(lines[0]) != 1:
        raise ArgumentError(f"{path}: first line must hold the dimension")
    dim = int(lines[0][0])
    rows = lines[1:]
    if len(rows) != dim or any(len(row) != dim for row in rows):
        raise ArgumentError(f"{path}: expected {dim} rows of {dim} values")
    matrix = np.array([[float(v) for v in row] for row in rows])
    if np.max(np.abs(matrix - matrix.T)) > tol:
        raise ArgumentError(f"{path}: matrix is not symmetric")
    return symmetric_part(matrix)


def write_matrix(path: str, matrix: Sequence[Sequence[float]]):
    """Write the shared matrix text format with round-trip float precision"""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{matrix.shape[0]}\n")
        for row in matrix:
            handle.write(" ".join(repr(float(v)) for v in row) + "\n")
