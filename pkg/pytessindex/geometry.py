"""Tessellation of the unit sphere.

A tessellating vector is stored as integer levels in ``[-base, base]``; the real vector it
denotes is ``levels / base`` and its tile is every direction closer to it (in angular
distance) than to any other tessellating vector. ``base == 1`` is the ternary set
``{-1, 0, 1}^k - {0}^k``, for which the projection is exact. Larger bases are projected
approximately by coordinate-wise rounding.

Every function here is pure and safe to call from several threads at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pytessindex.constants import BRUTE_FORCE_MAX_BITS, FLOAT_TOLERANCE, TERNARY_BASE
from pytessindex.exceptions import TessConfigError, TessDomainError
from pytessindex.helpers import as_vector


@dataclass(frozen=True, eq=False)
class DenseFactor:
    """Latent factor of a user or an item.

    Attributes:
        id (int): non-negative identifier, unique within its side (users or items)
        values (np.ndarray): read-only vector of k >= 2 finite values, not all zero
    """

    id: int
    values: np.ndarray

    def __post_init__(self):
        if isinstance(self.id, bool) or int(self.id) != self.id or self.id < 0:
            raise TessDomainError(f"factor id must be a non-negative integer, got {self.id!r}")

        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise TessDomainError(f"factor {self.id}: values must be one-dimensional")
        if values.shape[0] < 2:
            raise TessDomainError(f"factor {self.id}: dimension k must be at least 2, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise TessDomainError(f"factor {self.id}: values must be finite")
        if not np.any(values):
            raise TessDomainError(f"factor {self.id}: the zero vector has no direction")

        values.setflags(write=False)
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DenseFactor):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.id, self.values.tobytes()))


@dataclass(frozen=True, eq=False)
class TessVector:
    """Tessellating vector kept as unnormalized integer levels.

    Attributes:
        levels (np.ndarray): read-only integer vector with entries in [-base, base], not all zero
        base (int): number of positive levels D; 1 for the ternary set
    """

    levels: np.ndarray
    base: int = TERNARY_BASE

    def __post_init__(self):
        levels = check_levels(self.levels, self.base)
        if not np.any(levels):
            raise TessDomainError("the all-zero level vector is not a tessellating vector")

        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "base", int(self.base))

    @property
    def k(self) -> int:
        return self.levels.shape[0]

    @property
    def nonzeros(self) -> int:
        return int(np.count_nonzero(self.levels))

    @property
    def is_ternary(self) -> bool:
        return self.base == TERNARY_BASE

    @property
    def direction(self) -> np.ndarray:
        """The real vector ``levels / base`` (unnormalized)."""
        return self.levels / self.base

    @property
    def unit(self) -> np.ndarray:
        """The tessellating direction on the unit sphere."""
        direction = self.direction
        return direction / np.linalg.norm(direction)

    def __eq__(self, other):
        if not isinstance(other, TessVector):
            return NotImplemented
        return self.base == other.base and np.array_equal(self.levels, other.levels)

    def __hash__(self):
        return hash((self.base, self.levels.tobytes()))


def check_base(base) -> int:
    """Validates a level count D.

    Raises:
        TessConfigError: D is not a positive integer
    """
    if isinstance(base, bool) or not isinstance(base, (int, np.integer)) or base < 1:
        raise TessConfigError(f"base D must be a positive integer, got {base!r}")
    return int(base)


def check_levels(levels, base: int = TERNARY_BASE) -> np.ndarray:
    """Validates a raw level vector: a non-empty integer vector with entries in [-base, base].

    Raises:
        TessConfigError: base is not a positive integer
        TessDomainError: wrong shape, non-integer or out-of-range level
    """
    base = check_base(base)
    levels = np.array(levels)
    if levels.ndim != 1 or levels.shape[0] == 0:
        raise TessDomainError("levels must be a non-empty one-dimensional vector")
    if not np.all(np.equal(np.mod(levels, 1), 0)):
        raise TessDomainError(f"levels must be integers, got {levels.tolist()}")
    levels = levels.astype(np.int64)
    if np.any(np.abs(levels) > base):
        raise TessDomainError(f"levels must lie in [-{base}, {base}], got {levels.tolist()}")
    return levels


def _nonzero_vector(z) -> np.ndarray:
    vector = as_vector(z, name="factor")
    if not np.all(np.isfinite(vector)):
        raise TessDomainError("factor values must be finite")
    if not np.any(vector):
        raise TessDomainError("the zero vector has no direction")
    return vector


def _nonzero_rows(matrix) -> np.ndarray:
    rows = np.asarray(matrix, dtype=np.float64)
    if rows.ndim != 2:
        raise TessDomainError(f"expected a matrix of factors, got shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise TessDomainError("factor values must be finite")
    if rows.shape[0] and not np.all(np.any(rows != 0, axis=1)):
        raise TessDomainError("the zero vector has no direction")
    return rows


def angular_distance(x, y) -> float:
    """One minus the cosine similarity of two non-zero vectors.

    Returns:
        float: distance in [0, 2]

    Raises:
        TessDomainError: zero vector or dimension mismatch
    """
    first = as_vector(x, name="x")
    second = as_vector(y, name="y")
    if first.shape != second.shape:
        raise TessDomainError(f"dimension mismatch: {first.shape[0]} != {second.shape[0]}")

    norms = np.linalg.norm(first) * np.linalg.norm(second)
    if norms == 0:
        raise TessDomainError("angular distance is undefined at the origin")

    cosine = float(np.dot(first, second) / norms)
    return 1.0 - min(1.0, max(-1.0, cosine))


def tess_ternary_batch(matrix) -> np.ndarray:
    """Exact ternary projection of every row of ``matrix``.

    Rows are sorted by descending magnitude (stable, so equal magnitudes keep index
    order), the scaled cumulative sums ``cumsum / sqrt(i)`` are formed and the support is
    the prefix ending at their first maximum. Supported coordinates take the sign of the
    factor, the others 0. Rows need not have unit norm.

    Args:
        matrix: n x k array of non-zero rows

    Returns:
        np.ndarray: n x k int64 matrix of levels in {-1, 0, 1}
    """
    rows = _nonzero_rows(matrix)
    count, k = rows.shape
    levels = np.zeros((count, k), dtype=np.int64)
    if count == 0:
        return levels

    magnitudes = np.abs(rows)
    order = np.argsort(-magnitudes, axis=1, kind="stable")
    ranked = np.take_along_axis(magnitudes, order, axis=1)
    scaled = np.cumsum(ranked, axis=1) / np.sqrt(np.arange(1, k + 1))
    support = np.argmax(scaled, axis=1) + 1

    keep = np.arange(k)[np.newaxis, :] < support[:, np.newaxis]
    signs = np.sign(np.take_along_axis(rows, order, axis=1)).astype(np.int64)
    np.put_along_axis(levels, order, np.where(keep, signs, 0), axis=1)
    return levels


def tess_ternary(z) -> TessVector:
    """Closest ternary tessellating vector of ``z`` in O(k log k), without storing the set.

    Raises:
        TessDomainError: z is the zero vector
    """
    vector = _nonzero_vector(z)
    return TessVector(levels=tess_ternary_batch(vector[np.newaxis, :])[0], base=TERNARY_BASE)


def tess_dary_batch(matrix, base: int) -> np.ndarray:
    """Approximate D-ary projection of every row of ``matrix``.

    Each row is scaled to unit norm, multiplied by D and rounded coordinate-wise to the
    nearer integer, halves going up. A row that rounds to all zeros keeps one level of
    sign(z) on its largest-magnitude coordinate (lowest index on ties).

    Returns:
        np.ndarray: n x k int64 matrix of levels in [-D, D]
    """
    base = check_base(base)
    rows = _nonzero_rows(matrix)
    if rows.shape[0] == 0:
        return np.zeros(rows.shape, dtype=np.int64)

    scaled = base * (rows / np.linalg.norm(rows, axis=1, keepdims=True))
    up = np.ceil(scaled)
    down = np.floor(scaled)
    levels = np.where(up - scaled <= scaled - down, up, down)
    levels = np.clip(levels, -base, base).astype(np.int64)

    empty = np.flatnonzero(~np.any(levels, axis=1))
    if empty.size:
        columns = np.argmax(np.abs(rows[empty]), axis=1)
        levels[empty, columns] = np.sign(rows[empty, columns]).astype(np.int64)
    return levels


def tess_dary(z, base: int) -> TessVector:
    """Tessellating vector of the D-ary set within O(k / D**2) of the optimum, in O(k).

    Raises:
        TessDomainError: z is the zero vector
        TessConfigError: D < 1
    """
    base = check_base(base)
    vector = _nonzero_vector(z)
    return TessVector(levels=tess_dary_batch(vector[np.newaxis, :], base)[0], base=base)


def tile_count(k: int, base: int = TERNARY_BASE) -> int:
    """Number of tessellating vectors M = (2D + 1)**k - 1."""
    return (2 * check_base(base) + 1) ** k - 1


def _check_enumerable(k: int, base: int) -> None:
    bits = k * math.log2(2 * base + 1)
    if bits > BRUTE_FORCE_MAX_BITS:
        raise TessConfigError(
            f"tessellating set for k={k}, D={base} has {tile_count(k, base)} vectors; "
            f"exhaustive search is limited to {BRUTE_FORCE_MAX_BITS:g} bits"
        )


@lru_cache(maxsize=64)
def _tessellating_table(k: int, base: int):
    grid = np.array(list(itertools.product(range(-base, base + 1), repeat=k)), dtype=np.int64)
    grid = grid[np.any(grid != 0, axis=1)]
    norms = np.linalg.norm(grid, axis=1)
    grid.setflags(write=False)
    norms.setflags(write=False)
    return grid, norms


def tessellating_levels(k: int, base: int = TERNARY_BASE) -> np.ndarray:
    """All level vectors of the tessellating set, in ascending lexicographic order.

    Raises:
        TessConfigError: the set is too large to enumerate
    """
    base = check_base(base)
    _check_enumerable(k, base)
    return _tessellating_table(k, base)[0]


def _distances_to_set(vector: np.ndarray, base: int):
    _check_enumerable(vector.shape[0], base)
    grid, norms = _tessellating_table(vector.shape[0], base)
    cosines = (grid @ vector) / (norms * np.linalg.norm(vector))
    return grid, 1.0 - np.clip(cosines, -1.0, 1.0)


def brute_force_tess(z, base: int = TERNARY_BASE) -> TessVector:
    """Exact closest tessellating vector by scanning the whole set.

    Distances within the float tolerance count as ties. Among ties the vector with the
    largest level sum wins, so that multiples of one direction resolve to the finest
    representative, then the lexicographically smallest levels.

    Raises:
        TessDomainError: z is the zero vector
        TessConfigError: D < 1 or the set is too large to enumerate
    """
    base = check_base(base)
    vector = _nonzero_vector(z)
    grid, distances = _distances_to_set(vector, base)

    tied = np.flatnonzero(distances <= distances.min() + FLOAT_TOLERANCE)
    if tied.size > 1:
        weights = np.abs(grid[tied]).sum(axis=1)
        tied = tied[weights == weights.max()]
    return TessVector(levels=grid[tied[0]], base=base)


def neighbor_distance(nonzeros: int, k: int) -> float:
    """Distance from a ternary tessellating vector with ``nonzeros`` non-zero levels to its nearest neighbour.

    With a free coordinate the nearest neighbours switch one 0 on, at ``1 - sqrt(t / (t + 1))``.
    A fully supported vector can only switch one level off, at ``1 - sqrt((k - 1) / k)``.
    """
    if k < 2 or not 1 <= nonzeros <= k:
        raise TessDomainError(f"no ternary neighbours for t={nonzeros}, k={k}")
    support = min(nonzeros, k - 1)
    return 1.0 - math.sqrt(support / (support + 1))


def nearest_neighbors(a: TessVector) -> list:
    """Ternary tessellating vectors at the nearest-neighbour distance from ``a``.

    Returns:
        list: TessVector neighbours in ascending lexicographic order
    """
    if not a.is_ternary:
        raise TessConfigError("nearest neighbours are defined for the ternary set only")
    if a.k < 2:
        raise TessDomainError("nearest neighbours need k >= 2")

    found = []
    free = np.flatnonzero(a.levels == 0)
    if free.size:
        for position in free:
            for level in (-1, 1):
                levels = a.levels.copy()
                levels[position] = level
                found.append(levels)
    else:
        for position in range(a.k):
            levels = a.levels.copy()
            levels[position] = 0
            found.append(levels)

    found.sort(key=lambda levels: tuple(levels.tolist()))
    return [TessVector(levels=levels, base=TERNARY_BASE) for levels in found]


def nearest_neighbor_distance(a: TessVector) -> float:
    """Smallest angular distance from ``a`` to any other direction of its tessellating set, by exhaustive scan."""
    _, distances = _distances_to_set(a.unit, a.base)
    others = distances[distances > FLOAT_TOLERANCE]
    return float(others.min())
