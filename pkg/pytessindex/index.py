"""Inverted-index candidate generation and exact top-k rescoring.

Each embedding index posts the items whose embedding is non-zero there. A user's
candidates are the union of the postings of its own non-zero indices; only those items
are scored, with exact inner products of the original dense factors.

The index is immutable once built, so any number of threads may query it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np

from pytessindex.constants import DEFAULT_KAPPA, SNAPSHOT_MAGIC
from pytessindex.csvhandler import parse_factor_rows, write_factor_rows
from pytessindex.encoding import SparseEmbedding
from pytessindex.exceptions import (
    TessConfigError,
    TessDomainError,
    TessInputError,
    TessParseError,
)
from pytessindex.geometry import DenseFactor
from pytessindex.helpers import as_vector
from pytessindex.logger import get_logger

logger = get_logger(__name__)

_HEADER = re.compile(r"^" + re.escape(SNAPSHOT_MAGIC) + r" p=(\d+) n=(\d+)$")


@dataclass(frozen=True)
class QueryConfig:
    kappa: int = DEFAULT_KAPPA

    def __post_init__(self):
        if isinstance(self.kappa, bool) or int(self.kappa) != self.kappa or self.kappa < 1:
            raise TessConfigError(f"kappa must be a positive integer, got {self.kappa!r}")
        object.__setattr__(self, "kappa", int(self.kappa))


@dataclass(frozen=True)
class RetrievalResult:
    """Outcome of one query.

    Attributes:
        candidate_ids (frozenset): items kept by the index
        topk (tuple): (id, score) pairs, score descending, ties by ascending id
        discard_rate (float): fraction of items never scored
    """

    candidate_ids: frozenset
    topk: tuple
    discard_rate: float

    @property
    def speedup(self) -> float:
        """Implied speed-up ``1 / (1 - discard_rate)``; infinite when nothing is scored."""
        if self.discard_rate >= 1.0:
            return float("inf")
        return 1.0 / (1.0 - self.discard_rate)


class InvertedIndex:
    """Posting lists over embedding indices plus the dense item factors for rescoring."""

    def __init__(self, dim_p: int, postings: Dict[int, np.ndarray], item_factors: Dict[int, DenseFactor]):
        self.dim_p = int(dim_p)
        self.postings = {}
        for index in sorted(postings):
            ids = np.array(postings[index], dtype=np.int64)
            ids.setflags(write=False)
            self.postings[int(index)] = ids
        self.item_factors = dict(sorted(item_factors.items()))

        self.item_ids = np.array(list(self.item_factors), dtype=np.int64)
        self.item_ids.setflags(write=False)
        if self.item_factors:
            self.item_matrix = np.vstack([factor.values for factor in self.item_factors.values()])
        else:
            self.item_matrix = np.zeros((0, 0), dtype=np.float64)
        self.item_matrix.setflags(write=False)
        self._rows = {int(id): row for row, id in enumerate(self.item_ids)}

    @property
    def item_count(self) -> int:
        return len(self.item_factors)

    @property
    def k(self) -> int:
        return self.item_matrix.shape[1]

    def posting(self, index: int) -> np.ndarray:
        return self.postings.get(int(index), np.zeros(0, dtype=np.int64))

    def rows_of(self, ids) -> np.ndarray:
        try:
            return np.array([self._rows[int(id)] for id in ids], dtype=np.int64)
        except KeyError as ex:
            raise TessInputError(f"item {ex.args[0]} is not indexed")

    def __repr__(self):
        return f"InvertedIndex(dim_p={self.dim_p}, items={self.item_count}, postings={len(self.postings)})"


def build_index(items: Iterable[tuple], dim_p: Optional[int] = None) -> InvertedIndex:
    """Builds the index from ``(factor, embedding)`` pairs.

    Exact-zero embedding values are not posted.

    Args:
        items: iterable of (DenseFactor, SparseEmbedding) with matching ids
        dim_p (int, optional): ambient dimension, required only for an empty item list

    Raises:
        TessInputError: duplicate ids, mismatched ids, dimensions or factor sizes
    """
    pairs = sorted(items, key=lambda pair: pair[0].id)
    factors = {}
    postings = {}
    ks = set()

    for factor, embedding in pairs:
        if factor.id != embedding.id:
            raise TessInputError(f"factor {factor.id} is paired with embedding {embedding.id}")
        if factor.id in factors:
            raise TessInputError(f"duplicate item id {factor.id}")
        if dim_p is None:
            dim_p = embedding.dim_p
        elif embedding.dim_p != dim_p:
            raise TessInputError(f"item {factor.id}: embedding dimension {embedding.dim_p} != {dim_p}")
        ks.add(factor.k)
        if len(ks) > 1:
            raise TessInputError(f"item {factor.id}: factor dimension {factor.k} differs from the others")

        factors[factor.id] = factor
        for index in embedding.nonzero_indices().tolist():
            postings.setdefault(index, []).append(factor.id)

    index = InvertedIndex(dim_p=dim_p or 0, postings=postings, item_factors=factors)
    logger.debug(f"Built {index!r}")
    return index


def retrieve_candidates(idx: InvertedIndex, user_emb: SparseEmbedding) -> frozenset:
    """Union of the postings of the user's non-zero indices.

    Raises:
        TessInputError: embedding dimension differs from the index
    """
    if user_emb.dim_p != idx.dim_p:
        raise TessInputError(f"user embedding dimension {user_emb.dim_p} != index dimension {idx.dim_p}")

    lists = [idx.postings[index] for index in user_emb.nonzero_indices().tolist() if index in idx.postings]
    if not lists:
        return frozenset()
    return frozenset(np.unique(np.concatenate(lists)).tolist())


def inner_products(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """Row-wise dot products, accumulated coordinate by coordinate from the left.

    Each row's result depends on that row and ``vector`` only, so scoring a subset of rows
    gives bit-identical scores to scoring all of them.
    """
    if matrix.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    totals = matrix[:, 0] * vector[0]
    for column in range(1, vector.shape[0]):
        totals = totals + matrix[:, column] * vector[column]
    return totals


def rank_items(user, item_ids: np.ndarray, item_matrix: np.ndarray, kappa: int) -> tuple:
    """Top-``kappa`` (id, score) pairs by exact inner product, ties by ascending id."""
    vector = as_vector(user, name="user")
    if item_matrix.shape[0] and item_matrix.shape[1] != vector.shape[0]:
        raise TessDomainError(f"dimension mismatch: user has {vector.shape[0]}, items {item_matrix.shape[1]}")

    scores = inner_products(item_matrix, vector)
    order = np.lexsort((item_ids, -scores))[:kappa]
    return tuple((int(item_ids[row]), float(scores[row])) for row in order)


def discard_rate(candidates: int, n_items: int) -> float:
    """Fraction of the n_items left unscored, the correctly rounded ``(n_items - candidates) / n_items``.

    An empty index discards everything.
    """
    if n_items <= 0:
        return 1.0
    return (n_items - candidates) / n_items


def score_topk(user, candidates: Iterable[int], idx: InvertedIndex, cfg: QueryConfig) -> RetrievalResult:
    """Scores the candidates only and keeps the best ``cfg.kappa``.

    Raises:
        TessInputError: a candidate is not indexed
    """
    if not isinstance(cfg, QueryConfig):
        cfg = QueryConfig(kappa=cfg)
    candidate_ids = frozenset(int(id) for id in candidates)
    ids = np.array(sorted(candidate_ids), dtype=np.int64)
    rows = idx.rows_of(ids)
    matrix = idx.item_matrix[rows] if rows.size else np.zeros((0, idx.k), dtype=np.float64)

    topk = rank_items(user, ids, matrix, cfg.kappa)
    return RetrievalResult(
        candidate_ids=candidate_ids, topk=topk, discard_rate=discard_rate(len(candidate_ids), idx.item_count)
    )


def true_topk(user, idx: InvertedIndex, cfg: QueryConfig) -> tuple:
    """Exact top-``cfg.kappa`` over every indexed item.

    Raises:
        TessInputError: the index is empty
    """
    if idx.item_count == 0:
        raise TessInputError("ground truth needs at least one indexed item")
    return rank_items(user, idx.item_ids, idx.item_matrix, cfg.kappa)


def save_index(path: str, idx: InvertedIndex) -> None:
    """Writes the snapshot: header, ``idx:id,id,...`` posting lines, then the item factor CSV."""
    with open(path, "w", encoding="utf-8", newline="") as outfile:
        outfile.write(f"{SNAPSHOT_MAGIC} p={idx.dim_p} n={idx.item_count}\n")
        for index, ids in idx.postings.items():
            outfile.write(f"{index}:{','.join(str(id) for id in ids.tolist())}\n")
        write_factor_rows(outfile, idx.item_factors.values(), idx.k)
    logger.debug(f"Saved {idx!r} to {path}")


def load_index(path: str) -> InvertedIndex:
    """Reads a snapshot written by save_index.

    Raises:
        TessParseError: malformed header, posting lines or factors
    """
    with open(path, "r", encoding="utf-8", newline="") as infile:
        lines = infile.read().splitlines(keepends=True)

    if not lines:
        raise TessParseError("empty snapshot", path, 1)
    header = _HEADER.match(lines[0].rstrip("\r\n"))
    if header is None:
        raise TessParseError(f"snapshot must start with '{SNAPSHOT_MAGIC} p=<p> n=<N>'", path, 1)
    dim_p, count = int(header.group(1)), int(header.group(2))

    postings = {}
    line_number = 2
    for line in lines[1:]:
        text = line.rstrip("\r\n")
        if text == "id" or text.startswith("id,"):
            break
        index, separator, ids = text.partition(":")
        try:
            if not separator:
                raise ValueError("missing ':'")
            index = int(index)
            posted = [int(id) for id in ids.split(",")] if ids else []
        except ValueError as ex:
            raise TessParseError(f"bad posting line: {ex}", path, line_number)
        if not 0 <= index < max(dim_p, 1) or index in postings:
            raise TessParseError(f"posting index {index} out of range or repeated", path, line_number)
        if any(later <= earlier for earlier, later in zip(posted, posted[1:])):
            raise TessParseError(f"posting list of index {index} must be strictly ascending", path, line_number)
        postings[index] = posted
        line_number += 1

    _, factors = parse_factor_rows(iter(lines[line_number - 1 :]), path=path, first_line=line_number)
    item_factors = {factor.id: factor for factor in factors}
    if len(item_factors) != count:
        raise TessParseError(f"header announces {count} items, found {len(item_factors)}", path, 1)
    for index, posted in postings.items():
        missing = set(posted) - set(item_factors)
        if missing:
            raise TessParseError(f"posting list of index {index} names unknown items {sorted(missing)}", path)

    return InvertedIndex(dim_p=dim_p, postings=postings, item_factors=item_factors)
