"""Sparse embeddings of factors through tile-specific permutations.

A factor ``z`` is projected to its tessellating vector ``a`` and its coordinates are then
written into a p-dimensional vector at positions chosen by reading ``a`` one level at a
time (a parse tree of window 1). Each read level moves an index counter through an
action ``f(previous_index; level, step, k)``:

* one-hot: coordinate t lands in block t, at offset ``base - level``; ``p = (2D + 1) k``;
* counter: ``+1`` jumps to ``k j``, ``-1`` to ``k (k + j)`` and ``0`` advances by one;
  ``p = 2 k**2 + k + 1``.

Zero-valued coordinates keep their mapped slot, so an embedding always has k entries and
the same multiset of values (and norm) as the factor it came from.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from pytessindex.constants import DEFAULT_THRESHOLD, TERNARY_BASE
from pytessindex.exceptions import (
    TessConfigError,
    TessDomainError,
    TessNotSupported,
    TessParseError,
)
from pytessindex.geometry import (
    DenseFactor,
    TessVector,
    check_base,
    check_levels,
    tess_dary,
    tess_dary_batch,
    tess_ternary,
    tess_ternary_batch,
)
from pytessindex.helpers import as_vector, chunked, resolve_threads
from pytessindex.logger import get_logger

logger = get_logger(__name__)

ParseAction = Callable[[int, int, int, int], int]


class Scheme(str, Enum):
    one_hot = "one_hot"
    counter = "counter"


@dataclass(frozen=True)
class EncodingConfig:
    """How factors become sparse embeddings.

    Attributes:
        scheme (Scheme): permutation scheme
        base (int): tessellation level count D (1 = ternary, projected exactly)
        delta (int): parse-tree window size; only 1 is available
        threshold (float): coordinates with smaller magnitude are zeroed before tessellation
    """

    scheme: Scheme = Scheme.counter
    base: int = TERNARY_BASE
    delta: int = 1
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        except ValueError:
            raise TessConfigError(f"unknown scheme: {self.scheme!r}")
        object.__setattr__(self, "base", check_base(self.base))

        if self.delta != 1:
            raise TessConfigError(f"only parse trees with window 1 are available, got delta={self.delta}")
        if not np.isfinite(self.threshold) or self.threshold < 0:
            raise TessConfigError(f"threshold must be a non-negative number, got {self.threshold!r}")
        if self.scheme is Scheme.counter and self.base != TERNARY_BASE:
            raise TessConfigError("the counter scheme reads ternary tessellating vectors only (base 1)")
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def levels_per_block(self) -> int:
        return 2 * self.base + 1

    def dim_p(self, k: int) -> int:
        """Ambient dimension of the embeddings of k-dimensional factors."""
        if self.scheme is Scheme.one_hot:
            return self.levels_per_block * k
        return 2 * k * k + k + 1

    def tessellate(self, matrix) -> np.ndarray:
        if self.base == TERNARY_BASE:
            return tess_ternary_batch(matrix)
        return tess_dary_batch(matrix, self.base)

    def tess_function(self) -> Callable:
        if self.base == TERNARY_BASE:
            return tess_ternary
        base = self.base
        return lambda z: tess_dary(z, base)


@dataclass(frozen=True, eq=False)
class SparseEmbedding:
    """A p-dimensional sparse vector, stored as ascending indices and their values."""

    id: int
    dim_p: int
    indices: np.ndarray
    values: np.ndarray

    @classmethod
    def from_entries(cls, id: int, dim_p: int, entries: Iterable) -> "SparseEmbedding":
        """Builds a validated embedding from ``(index, value)`` pairs.

        Raises:
            TessDomainError: indices not strictly increasing or outside [0, dim_p)
        """
        pairs = list(entries)
        indices = np.array([index for index, _ in pairs], dtype=np.int64)
        values = np.array([value for _, value in pairs], dtype=np.float64)
        if dim_p < 1:
            raise TessDomainError(f"dimension p must be positive, got {dim_p}")
        if indices.size and (indices[0] < 0 or indices[-1] >= dim_p or np.any(np.diff(indices) <= 0)):
            raise TessDomainError(f"embedding {id}: indices must be strictly increasing within [0, {dim_p})")
        indices.setflags(write=False)
        values.setflags(write=False)
        return cls(id=int(id), dim_p=int(dim_p), indices=indices, values=values)

    @property
    def entries(self) -> list:
        return [(int(index), float(value)) for index, value in zip(self.indices, self.values)]

    def nonzero_indices(self) -> np.ndarray:
        return self.indices[self.values != 0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def dot(self, other: "SparseEmbedding") -> float:
        if self.dim_p != other.dim_p:
            raise TessDomainError(f"dimension mismatch: {self.dim_p} != {other.dim_p}")
        _, mine, theirs = np.intersect1d(self.indices, other.indices, assume_unique=True, return_indices=True)
        return float(np.dot(self.values[mine], other.values[theirs]))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim_p, dtype=np.float64)
        dense[self.indices] = self.values
        return dense

    def __eq__(self, other):
        if not isinstance(other, SparseEmbedding):
            return NotImplemented
        return (
            self.id == other.id
            and self.dim_p == other.dim_p
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.id, self.dim_p, self.indices.tobytes(), self.values.tobytes()))


def one_hot_action(base: int = TERNARY_BASE) -> ParseAction:
    """Parse action placing coordinate j (1-based) at offset ``base - level`` of block j - 1."""
    width = 2 * check_base(base) + 1

    def action(previous: int, level: int, step: int, k: int) -> int:
        return width * (step - 1) + (base - level)

    return action


def counter_action(previous: int, level: int, step: int, k: int) -> int:
    """Parse action of the counter scheme."""
    if level == 1:
        return k * step
    if level == 0:
        return previous + 1
    if level == -1:
        return k * (k + step)
    raise TessConfigError(f"counter actions are defined for levels -1, 0 and 1, got {level}")


def walk_parse_tree(levels, action: ParseAction) -> np.ndarray:
    """Reads ``levels`` left to right and returns the index chosen for every coordinate."""
    sequence = [int(level) for level in levels]
    k = len(sequence)
    position = 0
    indices = np.empty(k, dtype=np.int64)
    for step, level in enumerate(sequence, start=1):
        position = action(position, level, step, k)
        indices[step - 1] = position
    return indices


def parse_tree_indices(levels, cfg: EncodingConfig) -> np.ndarray:
    """Vectorised parse-tree walk over a matrix of level rows.

    Returns:
        np.ndarray: n x k matrix, entry (r, t) is the embedding index of coordinate t of row r
    """
    levels = np.asarray(levels, dtype=np.int64)
    count, k = levels.shape

    if cfg.scheme is Scheme.one_hot:
        return cfg.levels_per_block * np.arange(k, dtype=np.int64) + (cfg.base - levels)

    if np.any(np.abs(levels) > 1):
        raise TessConfigError("the counter scheme reads ternary tessellating vectors only")

    steps = np.arange(1, k + 1, dtype=np.int64)
    jumps = np.where(levels == 1, k * steps, np.where(levels == -1, k * (k + steps), 0))
    # step of the most recent non-zero level at or before each step, 0 when none
    anchors = np.maximum.accumulate(np.where(levels != 0, steps, 0), axis=1)
    landing = np.concatenate([np.zeros((count, 1), dtype=np.int64), jumps], axis=1)
    return np.take_along_axis(landing, anchors, axis=1) + (steps - anchors)


def apply_threshold(matrix, threshold: float) -> np.ndarray:
    """Zeroes coordinates with magnitude below ``threshold``.

    The largest-magnitude coordinate of each row (lowest index on ties) is always kept so
    that no row collapses to the origin.
    """
    rows = np.array(matrix, dtype=np.float64)
    if threshold <= 0 or rows.size == 0:
        return rows
    magnitudes = np.abs(rows)
    keep = magnitudes >= threshold
    keep[np.arange(rows.shape[0]), np.argmax(magnitudes, axis=1)] = True
    rows[~keep] = 0.0
    return rows


def _embedding_from_positions(id: int, dim_p: int, positions: np.ndarray, values: np.ndarray) -> SparseEmbedding:
    order = np.argsort(positions)
    indices = positions[order]
    if np.any(np.diff(indices) == 0):
        raise TessDomainError(f"embedding {id}: two coordinates were mapped to one index")
    return SparseEmbedding.from_entries(id, dim_p, zip(indices.tolist(), values[order].tolist()))


def _factor_parts(z):
    if isinstance(z, DenseFactor):
        return z.id, z.values
    return 0, as_vector(z, name="factor")


def one_hot_encode(z, a: TessVector) -> SparseEmbedding:
    """Maps coordinate t to index ``(2D + 1) t + (D - level_t)``.

    Raises:
        TessDomainError: z and a differ in dimension
    """
    id, values = _factor_parts(z)
    if values.shape[0] != a.k:
        raise TessDomainError(f"dimension mismatch: factor has {values.shape[0]}, tessellating vector {a.k}")
    positions = walk_parse_tree(a.levels, one_hot_action(a.base))
    return _embedding_from_positions(id, (2 * a.base + 1) * a.k, positions, values)


def counter_encode(z, a: TessVector) -> SparseEmbedding:
    """Maps coordinates through the counter parse tree; ``p = 2 k**2 + k + 1``.

    Raises:
        TessConfigError: a is not a ternary tessellating vector
        TessDomainError: dimension mismatch or k < 2
    """
    if not a.is_ternary:
        raise TessConfigError("the counter scheme reads ternary tessellating vectors only")
    id, values = _factor_parts(z)
    if values.shape[0] != a.k:
        raise TessDomainError(f"dimension mismatch: factor has {values.shape[0]}, tessellating vector {a.k}")
    if a.k < 2:
        raise TessDomainError("the counter scheme needs k >= 2")
    positions = walk_parse_tree(a.levels, counter_action)
    return _embedding_from_positions(id, 2 * a.k * a.k + a.k + 1, positions, values)


def encode_batch(ids: Sequence[int], matrix, cfg: EncodingConfig) -> list:
    """Embeds every row of ``matrix`` (threshold, tessellate, permute).

    Args:
        ids: one id per row
        matrix: n x k factor values
        cfg (EncodingConfig): encoding configuration

    Returns:
        list: SparseEmbedding per row, in row order
    """
    rows = apply_threshold(matrix, cfg.threshold)
    if rows.ndim != 2:
        raise TessDomainError(f"expected a matrix of factors, got shape {rows.shape}")
    if len(ids) != rows.shape[0]:
        raise TessDomainError(f"{len(ids)} ids for {rows.shape[0]} rows")
    if rows.shape[0] == 0:
        return []

    positions = parse_tree_indices(cfg.tessellate(rows), cfg)
    order = np.argsort(positions, axis=1)
    indices = np.take_along_axis(positions, order, axis=1)
    values = np.take_along_axis(rows, order, axis=1)
    indices.setflags(write=False)
    values.setflags(write=False)

    dim_p = cfg.dim_p(rows.shape[1])
    return [
        SparseEmbedding(id=int(id), dim_p=dim_p, indices=indices[row], values=values[row])
        for row, id in enumerate(ids)
    ]


def encode(z, cfg: EncodingConfig, tess: Optional[Callable] = None) -> SparseEmbedding:
    """Embeds one factor.

    Args:
        z: DenseFactor or vector
        cfg (EncodingConfig): encoding configuration
        tess: tessellation function ``z -> TessVector``; defaults to the one implied by ``cfg.base``
    """
    id, values = _factor_parts(z)
    if tess is None:
        return encode_batch([id], values[np.newaxis, :], cfg)[0]

    thresholded = apply_threshold(values[np.newaxis, :], cfg.threshold)[0]
    a = tess(thresholded)
    if cfg.scheme is Scheme.one_hot:
        return one_hot_encode(DenseFactor(id, thresholded), a)
    return counter_encode(DenseFactor(id, thresholded), a)


def encode_factors(factors: Sequence[DenseFactor], cfg: EncodingConfig, threads: Optional[int] = 1) -> list:
    """Embeds a list of factors, fanning out over a thread pool.

    Returns:
        list: embeddings ordered by factor id
    """
    ordered = sorted(factors, key=lambda factor: factor.id)
    if not ordered:
        return []
    ids = [factor.id for factor in ordered]
    matrix = np.vstack([factor.values for factor in ordered])

    workers = resolve_threads(threads)
    parts = chunked(len(ordered), workers)
    logger.debug(f"Embedding {len(ordered)} factors in {len(parts)} chunk(s)")
    if len(parts) == 1:
        return encode_batch(ids, matrix, cfg)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        chunks = executor.map(lambda part: encode_batch(ids[part], matrix[part], cfg), parts)
        return [embedding for chunk in chunks for embedding in chunk]


def perm_of(a, cfg: EncodingConfig) -> np.ndarray:
    """Full one-hot permutation of the zero-padded factor ``[z; 0]``.

    Entry i is the destination index of source slot i. The k data slots go where
    one_hot_encode puts them; padding slots fill the free offsets of each block in
    ascending order, block by block.

    Args:
        a: a TessVector, or a raw level sequence in [-cfg.base, cfg.base] (all-zero allowed)
        cfg: encoding configuration

    Raises:
        TessNotSupported: counter scheme (it defines an index map, not a canonical permutation)
        TessConfigError: base of ``a`` differs from ``cfg.base``
        TessDomainError: a raw level is not an integer in [-cfg.base, cfg.base]
    """
    if cfg.scheme is not Scheme.one_hot:
        raise TessNotSupported("a canonical full permutation exists for the one-hot scheme only")
    if isinstance(a, TessVector):
        if a.base != cfg.base:
            raise TessConfigError(f"tessellating vector base {a.base} does not match configured base {cfg.base}")
        levels = a.levels
    else:
        levels = check_levels(a, cfg.base)

    k = levels.shape[0]
    width = cfg.levels_per_block
    data = walk_parse_tree(levels, one_hot_action(cfg.base))
    slots = np.arange(width * k, dtype=np.int64).reshape(k, width)
    padding = slots[slots != data[:, np.newaxis]]
    return np.concatenate([data, padding])


def _count_inversions(sequence: list) -> int:
    if len(sequence) < 2:
        return 0
    middle = len(sequence) // 2
    left = sequence[:middle]
    right = sequence[middle:]
    count = _count_inversions(left) + _count_inversions(right)

    i = j = 0
    for position in range(len(sequence)):
        if j >= len(right) or (i < len(left) and left[i] <= right[j]):
            sequence[position] = left[i]
            i += 1
        else:
            sequence[position] = right[j]
            count += len(left) - i
            j += 1
    return count


def kendall_tau(p1, p2) -> int:
    """Kendall-Tau distance: number of discordant pairs, i.e. adjacent transpositions between the orders.

    Raises:
        TessDomainError: lengths differ or an input repeats a value
    """
    first = np.asarray(p1).ravel()
    second = np.asarray(p2).ravel()
    if first.shape != second.shape:
        raise TessDomainError(f"length mismatch: {first.shape[0]} != {second.shape[0]}")
    if np.unique(first).size != first.size or np.unique(second).size != second.size:
        raise TessDomainError("kendall_tau expects permutations (no repeated values)")

    return _count_inversions(second[np.argsort(first, kind="stable")].tolist())


def format_embedding(embedding: SparseEmbedding) -> str:
    entries = ",".join(f"{index}:{value!r}" for index, value in embedding.entries)
    return f"{embedding.id}\t{embedding.dim_p}\t{entries}"


def write_embeddings(path: str, embeddings: Iterable[SparseEmbedding]) -> None:
    """Writes one ``id<TAB>p<TAB>idx:val,...`` line per embedding, ordered by id."""
    with open(path, "w", encoding="utf-8", newline="\n") as outfile:
        for embedding in sorted(embeddings, key=lambda item: item.id):
            outfile.write(format_embedding(embedding) + "\n")


def parse_embedding(line: str, path: str = None, line_number: int = None) -> SparseEmbedding:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 3:
        raise TessParseError(f"expected 3 tab-separated fields, got {len(fields)}", path, line_number)
    try:
        id = int(fields[0])
        dim_p = int(fields[1])
        entries = []
        if fields[2]:
            for item in fields[2].split(","):
                index, value = item.split(":")
                entries.append((int(index), float(value)))
        return SparseEmbedding.from_entries(id, dim_p, entries)
    except (ValueError, TessDomainError) as ex:
        raise TessParseError(str(ex), path, line_number)


def read_embeddings(path: str) -> list:
    """Reads an embedding file written by write_embeddings."""
    embeddings = []
    with open(path, "r", encoding="utf-8") as infile:
        for line_number, line in enumerate(infile, start=1):
            if line.strip():
                embeddings.append(parse_embedding(line, path, line_number))
    return embeddings
