"""Hashing baselines reduced to candidate-set generators.

Four families are available: sign random projections (SRP), SuperBit (orthogonalised
projections), concomitant rank-order hashing (index of the largest projection out of l)
and PCA-trees (median splits along principal directions). Each family is boosted by
building T independent tables; a query's candidates are the items sharing its exact code
in at least one table.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from pytessindex.constants import (
    DEFAULT_ARITY,
    DEFAULT_BITS,
    DEFAULT_DEPTH,
    DEFAULT_SEED,
    DEFAULT_TABLES,
    POWER_ITERATION_MAX_STEPS,
    POWER_ITERATION_TOLERANCE,
)
from pytessindex.exceptions import TessConfigError, TessInputError, TessStateError
from pytessindex.geometry import DenseFactor
from pytessindex.helpers import as_vector
from pytessindex.logger import get_logger

logger = get_logger(__name__)

# codes are packed into signed 64-bit integers
MAX_SIGN_BITS = 62


class HashKind(str, Enum):
    srp = "srp"
    superbit = "superbit"
    concomitant = "concomitant"
    pca_tree = "pca_tree"


@dataclass(frozen=True)
class HashScheme:
    """Parameters of one boosted hashing baseline.

    Attributes:
        kind (HashKind): hash family
        bits_or_depth (int): code bits (srp, superbit), projections are ``arity_l`` for concomitant, tree depth for pca_tree
        tables (int): number of independent tables T
        arity_l (int): number of projections l of the concomitant code
        seed (int): 64-bit seed of every random draw
    """

    kind: HashKind
    bits_or_depth: int = DEFAULT_BITS
    tables: int = DEFAULT_TABLES
    arity_l: int = DEFAULT_ARITY
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", HashKind(self.kind))
        except ValueError:
            raise TessConfigError(f"unknown hash kind: {self.kind!r}")
        if self.bits_or_depth < 1:
            raise TessConfigError(f"bits_or_depth must be at least 1, got {self.bits_or_depth}")
        if self.tables < 1:
            raise TessConfigError(f"tables must be at least 1, got {self.tables}")
        if self.kind is HashKind.concomitant and self.arity_l < 2:
            raise TessConfigError(f"concomitant hashing needs arity_l >= 2, got {self.arity_l}")
        if self.kind in (HashKind.srp, HashKind.superbit) and self.bits_or_depth > MAX_SIGN_BITS:
            raise TessConfigError(f"at most {MAX_SIGN_BITS} code bits are supported, got {self.bits_or_depth}")
        if not 0 <= self.seed < 2**64:
            raise TessConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @classmethod
    def default(cls, kind: HashKind, seed: int = DEFAULT_SEED) -> "HashScheme":
        kind = HashKind(kind)
        width = DEFAULT_DEPTH if kind is HashKind.pca_tree else DEFAULT_BITS
        return cls(kind=kind, bits_or_depth=width, seed=seed)


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _factor_matrix(items) -> np.ndarray:
    if len(items) and isinstance(items[0], DenseFactor):
        return np.vstack([item.values for item in items])
    return np.atleast_2d(np.asarray(items, dtype=np.float64))


def _check_dims(matrix: np.ndarray, directions: np.ndarray) -> None:
    if matrix.shape[1] != directions.shape[1]:
        raise TessInputError(f"dimension mismatch: factor has {matrix.shape[1]}, projections {directions.shape[1]}")


def srp_hyperplanes(k: int, bits: int, seed) -> np.ndarray:
    """``bits`` x k hyperplane normals drawn i.i.d. standard normal."""
    return _generator(seed).standard_normal((bits, k))


def superbit_hyperplanes(k: int, bits: int, seed) -> np.ndarray:
    """Gaussian directions orthonormalised in batches of at most k.

    Each batch is the Gram-Schmidt orthonormalisation of its draws (QR with the signs of
    R's diagonal folded back into Q). Nearly dependent draws are redrawn.
    """
    rng = _generator(seed)
    blocks = []
    remaining = bits
    while remaining > 0:
        size = min(k, remaining)
        draws = rng.standard_normal((size, k))
        q, r = np.linalg.qr(draws.T)
        diagonal = np.diag(r)
        if np.min(np.abs(diagonal)) < 1e-10 * max(1.0, np.max(np.abs(diagonal))):
            logger.debug("Degenerate SuperBit draw, redrawing")
            continue
        blocks.append((q * np.sign(diagonal)).T)
        remaining -= size
    return np.vstack(blocks)


def sign_bits(matrix, hyperplanes: np.ndarray) -> np.ndarray:
    """Bit i of row r is set iff hyperplane i has a non-negative projection of row r."""
    rows = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    _check_dims(rows, hyperplanes)
    return rows @ hyperplanes.T >= 0


def srp_codes(matrix, hyperplanes: np.ndarray) -> np.ndarray:
    weights = np.left_shift(np.int64(1), np.arange(hyperplanes.shape[0], dtype=np.int64))
    return sign_bits(matrix, hyperplanes).astype(np.int64) @ weights


def srp_code(z, hyperplanes: np.ndarray) -> int:
    """b-bit sign code of z, bit i in position i.

    Raises:
        TessInputError: dimension mismatch
    """
    return int(srp_codes(as_vector(z)[np.newaxis, :], hyperplanes)[0])


def concomitant_projections(k: int, arity: int, seed) -> np.ndarray:
    return _generator(seed).standard_normal((arity, k))


def concomitant_codes(matrix, projections: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    _check_dims(rows, projections)
    return np.argmax(rows @ projections.T, axis=1).astype(np.int64)


def concomitant_code(z, projections: np.ndarray) -> int:
    """Index of the largest projection (lowest index on ties), in [0, l).

    Raises:
        TessInputError: dimension mismatch
    """
    return int(concomitant_codes(as_vector(z)[np.newaxis, :], projections)[0])


def _power_iteration(matrix: np.ndarray, rng: np.random.Generator) -> tuple:
    vector = rng.standard_normal(matrix.shape[0])
    vector /= np.linalg.norm(vector)
    for _ in range(POWER_ITERATION_MAX_STEPS):
        image = matrix @ vector
        length = np.linalg.norm(image)
        if length == 0:
            return vector, 0.0
        image /= length
        converged = np.linalg.norm(image - vector) < POWER_ITERATION_TOLERANCE
        vector = image
        if converged:
            break
    return vector, float(vector @ matrix @ vector)


def principal_directions(matrix, count: int, seed) -> np.ndarray:
    """Leading ``count`` eigenvectors of the covariance of the rows, by power iteration with deflation."""
    rows = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    rng = _generator(seed)
    centered = rows - rows.mean(axis=0)
    covariance = centered.T @ centered / max(rows.shape[0], 1)

    directions = []
    for _ in range(count):
        vector, value = _power_iteration(covariance, rng)
        directions.append(vector)
        covariance = covariance - value * np.outer(vector, vector)
    return np.array(directions).reshape(count, rows.shape[1])


@dataclass(frozen=True, eq=False)
class PCATree:
    """Complete binary tree in heap order: node n has children 2n + 1 and 2n + 2.

    A point goes left when its projection on the node direction is below the threshold.
    """

    depth: int
    directions: np.ndarray
    thresholds: np.ndarray

    @property
    def leaf_count(self) -> int:
        return 2**self.depth


def pca_tree_build(items, depth: int, seed) -> PCATree:
    """Builds a PCA-tree: a node at level d splits its items at the median projection on
    the d-th principal direction of their covariance.

    Nodes with fewer than two items split along coordinate axis d.

    Raises:
        TessConfigError: depth negative or larger than k
    """
    matrix = _factor_matrix(items)
    k = matrix.shape[1]
    if depth < 0 or depth > k:
        raise TessConfigError(f"PCA-tree depth must lie in [0, {k}], got {depth}")

    rng = _generator(seed)
    nodes = 2**depth - 1
    directions = np.zeros((nodes, k), dtype=np.float64)
    thresholds = np.zeros(nodes, dtype=np.float64)

    members = {0: np.arange(matrix.shape[0])}
    for node in range(nodes):
        level = int(np.floor(np.log2(node + 1)))
        member = members.pop(node)
        rows = matrix[member]
        if rows.shape[0] >= 2:
            direction = principal_directions(rows, level + 1, rng)[level]
        else:
            direction = np.eye(k)[level]
        projections = rows @ direction
        threshold = float(np.median(projections)) if rows.shape[0] else 0.0

        directions[node] = direction
        thresholds[node] = threshold
        left = projections < threshold
        members[2 * node + 1] = member[left]
        members[2 * node + 2] = member[~left]

    return PCATree(depth=depth, directions=directions, thresholds=thresholds)


def pca_tree_leaves(matrix, tree: PCATree) -> np.ndarray:
    """Leaf id of every row: its left/right path read as bits, root first."""
    rows = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if tree.depth:
        _check_dims(rows, tree.directions)
    nodes = np.zeros(rows.shape[0], dtype=np.int64)
    for _ in range(tree.depth):
        projections = np.einsum("ij,ij->i", rows, tree.directions[nodes])
        nodes = 2 * nodes + np.where(projections < tree.thresholds[nodes], 1, 2)
    return nodes - (tree.leaf_count - 1)


def pca_tree_leaf(z, tree: PCATree) -> int:
    return int(pca_tree_leaves(as_vector(z)[np.newaxis, :], tree)[0])


class Hasher:
    """One table's hash function: maps factor rows to integer codes."""

    def codes(self, matrix) -> np.ndarray:
        raise NotImplementedError

    def code(self, z) -> int:
        return int(self.codes(as_vector(z)[np.newaxis, :])[0])


class SignHasher(Hasher):
    """SRP and SuperBit codes, depending on how the hyperplanes were drawn."""

    def __init__(self, hyperplanes: np.ndarray):
        self.hyperplanes = hyperplanes

    def codes(self, matrix) -> np.ndarray:
        return srp_codes(matrix, self.hyperplanes)


class ConcomitantHasher(Hasher):

    def __init__(self, projections: np.ndarray):
        self.projections = projections

    def codes(self, matrix) -> np.ndarray:
        return concomitant_codes(matrix, self.projections)


class PCATreeHasher(Hasher):

    def __init__(self, tree: PCATree):
        self.tree = tree

    def codes(self, matrix) -> np.ndarray:
        return pca_tree_leaves(matrix, self.tree)


def make_hashers(scheme: HashScheme, items) -> List[Hasher]:
    """Draws the T hash functions of a scheme; table t uses the t-th child of the seed.

    PCA-trees are data dependent: table 0 is fit on all items and every further table on a
    bootstrap sample of them, so boosting yields distinct partitions.

    Raises:
        TessConfigError: pca_tree depth larger than k
        TessInputError: no items to fit a pca_tree on
    """
    matrix = _factor_matrix(items)
    k = matrix.shape[1]
    hashers = []
    for table, child in enumerate(np.random.SeedSequence(scheme.seed).spawn(scheme.tables)):
        rng = np.random.default_rng(child)
        if scheme.kind is HashKind.srp:
            hashers.append(SignHasher(srp_hyperplanes(k, scheme.bits_or_depth, rng)))
        elif scheme.kind is HashKind.superbit:
            hashers.append(SignHasher(superbit_hyperplanes(k, scheme.bits_or_depth, rng)))
        elif scheme.kind is HashKind.concomitant:
            hashers.append(ConcomitantHasher(concomitant_projections(k, scheme.arity_l, rng)))
        else:
            if matrix.shape[0] == 0:
                raise TessInputError("a PCA-tree needs at least one item")
            sample = matrix
            if table > 0:
                sample = matrix[rng.integers(0, matrix.shape[0], size=matrix.shape[0])]
            hashers.append(PCATreeHasher(pca_tree_build(sample, scheme.bits_or_depth, rng)))
    return hashers


class BucketIndex:
    """Per table, a map from hash code to the ascending ids of the items with that code.

    Every item appears exactly once per table. Built once, then read-only.
    """

    def __init__(
        self,
        scheme: HashScheme,
        hashers: Optional[Sequence[Hasher]] = None,
        tables: Optional[Sequence[Dict[int, np.ndarray]]] = None,
    ):
        self.scheme = scheme
        self.hashers = list(hashers) if hashers is not None else None
        self.tables = list(tables) if tables is not None else None

    @property
    def is_built(self) -> bool:
        return (
            self.hashers is not None
            and self.tables is not None
            and len(self.hashers) == len(self.tables) == self.scheme.tables
        )

    def build(self, items: Sequence[DenseFactor]) -> "BucketIndex":
        """Draws the hash functions and buckets every item in every table.

        Raises:
            TessInputError: duplicate item ids
        """
        items = sorted(items, key=lambda item: item.id)
        ids = np.array([item.id for item in items], dtype=np.int64)
        if np.unique(ids).size != ids.size:
            raise TessInputError("duplicate item ids")
        matrix = _factor_matrix(items) if items else np.zeros((0, 0), dtype=np.float64)

        self.hashers = make_hashers(self.scheme, matrix)
        self.tables = []
        for hasher in self.hashers:
            codes = hasher.codes(matrix) if ids.size else np.zeros(0, dtype=np.int64)
            order = np.lexsort((ids, codes))
            keys, starts = np.unique(codes[order], return_index=True)
            bounds = np.append(starts, ids.size)
            table = {}
            for position, code in enumerate(keys.tolist()):
                posted = ids[order[bounds[position] : bounds[position + 1]]]
                posted.setflags(write=False)
                table[code] = posted
            self.tables.append(table)
        logger.debug(f"Built {self!r}")
        return self

    def bucket_sizes(self) -> List[int]:
        return [len(table) for table in self.tables or []]

    def __repr__(self):
        return f"BucketIndex(kind={self.scheme.kind.value}, tables={self.scheme.tables}, buckets={self.bucket_sizes()})"


def build_buckets(items: Sequence[DenseFactor], scheme: HashScheme) -> BucketIndex:
    return BucketIndex(scheme).build(items)


def boosted_candidates(z, scheme: HashScheme, buckets: BucketIndex) -> frozenset:
    """Union over the tables of the items whose code exactly matches the query's.

    Raises:
        TessStateError: the tables are not built, or were built for another scheme
    """
    if not buckets.is_built:
        raise TessStateError("bucket index used before it was built")
    if buckets.scheme != scheme:
        raise TessStateError(f"bucket index was built for {buckets.scheme}, queried with {scheme}")

    vector = as_vector(z, name="query")
    found = [table.get(hasher.code(vector)) for hasher, table in zip(buckets.hashers, buckets.tables)]
    found = [ids for ids in found if ids is not None and ids.size]
    if not found:
        return frozenset()
    return frozenset(np.concatenate(found).tolist())
