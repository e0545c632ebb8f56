"""Factor data and the benchmark: recovery accuracy against discard rate.

For every user a method proposes a candidate set. The discard rate is the fraction of
items outside it and the recovery accuracy the fraction of the user's true top-kappa
items (exact inner products over all items) inside it. Results are aggregated into a
report with a discard-rate histogram.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from pytessindex.baselines import BucketIndex, HashKind, HashScheme, boosted_candidates
from pytessindex.constants import (
    DEFAULT_ARITY,
    DEFAULT_BENCH_THRESHOLD,
    DEFAULT_BITS,
    DEFAULT_DEPTH,
    DEFAULT_KAPPA,
    DEFAULT_SEED,
    DEFAULT_TABLES,
    HISTOGRAM_BINS,
)
from pytessindex.csvhandler import CSVFactorHandler
from pytessindex.encoding import EncodingConfig, Scheme, encode, encode_factors
from pytessindex.exceptions import TessConfigError, TessDomainError, TessInputError
from pytessindex.geometry import DenseFactor
from pytessindex.helpers import chunked, resolve_threads
from pytessindex.index import build_index, discard_rate, rank_items, retrieve_candidates
from pytessindex.logger import get_logger

logger = get_logger(__name__)

USERS_SIDE = 0
ITEMS_SIDE = 1


@dataclass(frozen=True)
class FactorSet:
    """User and item factors of one model, ``R = U V^T``."""

    users: tuple
    items: tuple
    k: int

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(sorted(self.users, key=lambda factor: factor.id)))
        object.__setattr__(self, "items", tuple(sorted(self.items, key=lambda factor: factor.id)))
        for side, factors in (("user", self.users), ("item", self.items)):
            ids = [factor.id for factor in factors]
            if len(set(ids)) != len(ids):
                raise TessInputError(f"duplicate {side} ids")
            if any(factor.k != self.k for factor in factors):
                raise TessInputError(f"every {side} factor must have k={self.k}")

    @property
    def item_ids(self) -> np.ndarray:
        return np.array([item.id for item in self.items], dtype=np.int64)

    @property
    def item_matrix(self) -> np.ndarray:
        if not self.items:
            return np.zeros((0, self.k), dtype=np.float64)
        return np.vstack([item.values for item in self.items])


def _row_generator(seed: int, side: int, row: int) -> np.random.Generator:
    # counter-based stream per (side, row), independent of how many rows are drawn
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(side, row))))


def gen_synthetic(n_users: int, n_items: int, k: int, seed: int = DEFAULT_SEED) -> FactorSet:
    """Draws i.i.d. standard normal user and item factors.

    Row r of side s (0 users, 1 items) comes from a Philox stream keyed by ``(seed, s, r)``,
    so a factor does not depend on the sizes requested.

    Raises:
        TessConfigError: a count is not positive or k < 2
    """
    for name, value in (("n_users", n_users), ("n_items", n_items)):
        if value < 1:
            raise TessConfigError(f"{name} must be positive, got {value}")
    if k < 2:
        raise TessConfigError(f"k must be at least 2, got {k}")

    users = [DenseFactor(row, _row_generator(seed, USERS_SIDE, row).standard_normal(k)) for row in range(n_users)]
    items = [DenseFactor(row, _row_generator(seed, ITEMS_SIDE, row).standard_normal(k)) for row in range(n_items)]
    logger.debug(f"Generated {n_users} users and {n_items} items with k={k}, seed={seed}")
    return FactorSet(users=users, items=items, k=k)


def read_factors(path: str) -> List[DenseFactor]:
    return CSVFactorHandler(path, logger=logger).load_data()


def save_factors(path: str, factors: Sequence[DenseFactor]) -> None:
    CSVFactorHandler(path, logger=logger).save_data(factors)


def load_factors(users_path: str, items_path: str) -> FactorSet:
    """Reads user and item factor CSV files.

    Raises:
        TessParseError: a file is malformed
        TessInputError: the two files disagree on k
    """
    users_handler = CSVFactorHandler(users_path, logger=logger)
    items_handler = CSVFactorHandler(items_path, logger=logger)
    users = users_handler.load_data()
    items = items_handler.load_data()
    if users_handler.k != items_handler.k:
        raise TessInputError(f"users have k={users_handler.k} but items have k={items_handler.k}")
    return FactorSet(users=users, items=items, k=users_handler.k)


def recovery_accuracy(true_ids: Iterable[int], candidates: Iterable[int]) -> float:
    """Fraction of the true top-kappa ids found among the candidates.

    Raises:
        TessDomainError: no true ids
    """
    truth = set(true_ids)
    if not truth:
        raise TessDomainError("recovery accuracy needs at least one true id")
    return len(truth & set(candidates)) / len(truth)


class Method(str, Enum):
    tessindex = "tessindex"
    srp = "srp"
    superbit = "superbit"
    concomitant = "concomitant"
    pca_tree = "pca_tree"


@dataclass(frozen=True)
class BenchParams:
    """Tunables of one benchmark run; each method reads the fields it needs."""

    kappa: int = DEFAULT_KAPPA
    encoding: EncodingConfig = field(
        default_factory=lambda: EncodingConfig(scheme=Scheme.counter, threshold=DEFAULT_BENCH_THRESHOLD)
    )
    bits: int = DEFAULT_BITS
    tables: int = DEFAULT_TABLES
    arity: int = DEFAULT_ARITY
    depth: int = DEFAULT_DEPTH
    seed: int = DEFAULT_SEED
    threads: Optional[int] = 1

    def __post_init__(self):
        if self.kappa < 1:
            raise TessConfigError(f"kappa must be positive, got {self.kappa}")

    def hash_scheme(self, method: Method) -> HashScheme:
        kind = HashKind(Method(method).value)
        width = self.depth if kind is HashKind.pca_tree else self.bits
        return HashScheme(kind=kind, bits_or_depth=width, tables=self.tables, arity_l=self.arity, seed=self.seed)

    def describe(self, method: Method) -> Dict[str, str]:
        """Parameters relevant to ``method``, as report text."""
        described = {"kappa": str(self.kappa), "seed": str(self.seed)}
        method = Method(method)
        if method is Method.tessindex:
            described.update(
                scheme=self.encoding.scheme.value, base=str(self.encoding.base), threshold=repr(self.encoding.threshold)
            )
        else:
            described.update(tables=str(self.tables))
            if method in (Method.srp, Method.superbit):
                described.update(bits=str(self.bits))
            elif method is Method.concomitant:
                described.update(arity=str(self.arity))
            else:
                described.update(depth=str(self.depth))
        return dict(sorted(described.items()))


class CandidateGenerator:
    """Proposes candidate item ids for a user."""

    name = "custom"

    def candidates(self, user: DenseFactor) -> frozenset:
        raise NotImplementedError


class TessIndexGenerator(CandidateGenerator):
    """Candidates from the inverted index over sparse tessellation embeddings."""

    name = Method.tessindex.value

    def __init__(self, items: Sequence[DenseFactor], cfg: EncodingConfig, threads: Optional[int] = 1):
        self.cfg = cfg
        embeddings = encode_factors(items, cfg, threads=threads)
        ordered = sorted(items, key=lambda item: item.id)
        self.index = build_index(zip(ordered, embeddings), dim_p=cfg.dim_p(ordered[0].k) if ordered else None)

    def candidates(self, user: DenseFactor) -> frozenset:
        return retrieve_candidates(self.index, encode(user, self.cfg))


class BucketGenerator(CandidateGenerator):
    """Candidates from boosted exact-match hash buckets."""

    def __init__(self, items: Sequence[DenseFactor], scheme: HashScheme):
        self.name = scheme.kind.value
        self.scheme = scheme
        self.buckets = BucketIndex(scheme).build(items)

    def candidates(self, user: DenseFactor) -> frozenset:
        return boosted_candidates(user, self.scheme, self.buckets)


def make_generator(method: Method, factors: FactorSet, params: BenchParams) -> CandidateGenerator:
    method = Method(method)
    if method is Method.tessindex:
        return TessIndexGenerator(factors.items, params.encoding, threads=params.threads)
    return BucketGenerator(factors.items, params.hash_scheme(method))


def ground_truth(factors: FactorSet, kappa: int = DEFAULT_KAPPA) -> Dict[int, frozenset]:
    """True top-kappa item ids of every user by exact inner product, ties by ascending id.

    Raises:
        TessInputError: there are no items
    """
    if not factors.items:
        raise TessInputError("ground truth needs at least one item")
    item_ids = factors.item_ids
    item_matrix = factors.item_matrix
    return {
        user.id: frozenset(id for id, _ in rank_items(user, item_ids, item_matrix, kappa)) for user in factors.users
    }


def histogram_edges() -> np.ndarray:
    """Edges ``j / HISTOGRAM_BINS`` of the discard-rate histogram, each the correctly rounded ratio."""
    return np.arange(HISTOGRAM_BINS + 1, dtype=np.float64) / HISTOGRAM_BINS


@dataclass(frozen=True)
class UserResult:
    user_id: int
    recovery_accuracy: float
    discard_rate: float
    candidates: int


@dataclass(frozen=True)
class BenchReport:
    """Per-user rows and their aggregates for one method."""

    method: str
    params: Dict[str, str]
    n_items: int
    per_user: tuple
    mean_accuracy: float
    std_accuracy: float
    mean_discard: float
    std_discard: float
    mean_speedup: float
    mean_candidates: float
    histogram: tuple
    bin_accuracy: tuple

    @property
    def bin_edges(self) -> np.ndarray:
        return histogram_edges()

    @classmethod
    def summarize(cls, method: str, params: Dict[str, str], n_items: int, rows: Sequence[UserResult]) -> "BenchReport":
        """Aggregates per-user rows.

        The speed-up of a user is ``1 / (1 - eta)`` with eta capped at ``1 - 1 / n_items``.
        Histogram bins are right-closed, ``[0, 0.05], (0.05, 0.1], ...``.
        """
        rows = tuple(sorted(rows, key=lambda row: row.user_id))
        accuracy = np.array([row.recovery_accuracy for row in rows], dtype=np.float64)
        discard = np.array([row.discard_rate for row in rows], dtype=np.float64)
        counts = np.array([row.candidates for row in rows], dtype=np.float64)

        capped = np.minimum(discard, 1.0 - 1.0 / n_items)
        bins = np.minimum(np.searchsorted(histogram_edges()[1:], discard, side="left"), HISTOGRAM_BINS - 1)
        histogram = np.bincount(bins, minlength=HISTOGRAM_BINS)
        bin_accuracy = tuple(
            float(accuracy[bins == slot].mean()) if histogram[slot] else None for slot in range(HISTOGRAM_BINS)
        )

        def mean(values):
            return float(values.mean()) if values.size else 0.0

        def std(values):
            return float(values.std()) if values.size else 0.0

        return cls(
            method=method,
            params=dict(params),
            n_items=n_items,
            per_user=rows,
            mean_accuracy=mean(accuracy),
            std_accuracy=std(accuracy),
            mean_discard=mean(discard),
            std_discard=std(discard),
            mean_speedup=mean(1.0 / (1.0 - capped)),
            mean_candidates=mean(counts),
            histogram=tuple(int(count) for count in histogram),
            bin_accuracy=bin_accuracy,
        )


def _evaluate_users(users: Sequence[DenseFactor], generator: CandidateGenerator, truth, n_items: int) -> list:
    rows = []
    for user in users:
        candidates = generator.candidates(user)
        rows.append(
            UserResult(
                user_id=user.id,
                recovery_accuracy=recovery_accuracy(truth[user.id], candidates),
                discard_rate=discard_rate(len(candidates), n_items),
                candidates=len(candidates),
            )
        )
    return rows


def run_benchmark(
    factors: FactorSet,
    method: Union[Method, str, CandidateGenerator],
    params: Optional[BenchParams] = None,
    truth: Optional[Dict[int, frozenset]] = None,
) -> BenchReport:
    """Evaluates one method on every user.

    Args:
        factors (FactorSet): users and items
        method: a Method name, or any object with ``candidates(user)``
        params (BenchParams, optional): tunables, defaults to BenchParams()
        truth (dict, optional): precomputed ground_truth, shared between methods

    Returns:
        BenchReport: per-user rows ordered by user id and their aggregates
    """
    params = params or BenchParams()
    if not factors.items:
        raise TessInputError("the benchmark needs at least one item")
    if truth is None:
        truth = ground_truth(factors, params.kappa)

    if hasattr(method, "candidates"):
        generator = method
        described = {"kappa": str(params.kappa), "seed": str(params.seed)}
    else:
        generator = make_generator(method, factors, params)
        described = params.describe(method)
    name = getattr(generator, "name", type(generator).__name__)
    logger.info(f"Benchmarking {name} on {len(factors.users)} users and {len(factors.items)} items")

    users = list(factors.users)
    n_items = len(factors.items)
    workers = resolve_threads(params.threads)
    parts = chunked(len(users), workers)
    if len(parts) <= 1:
        rows = _evaluate_users(users, generator, truth, n_items)
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            chunks = executor.map(lambda part: _evaluate_users(users[part], generator, truth, n_items), parts)
            rows = [row for chunk in chunks for row in chunk]

    report = BenchReport.summarize(name, described, n_items, rows)
    logger.info(
        f"{name}: mean discard {report.mean_discard:.4f}, mean recovery accuracy {report.mean_accuracy:.4f}"
    )
    return report


PER_USER_HEADER = ["user_id", "recovery_accuracy", "discard_rate", "candidates"]


def _per_user_row(row: UserResult) -> list:
    return [str(row.user_id), repr(row.recovery_accuracy), repr(row.discard_rate), str(row.candidates)]


def write_report(path: str, report: BenchReport) -> None:
    """Writes the text report: ``[params]``, ``[per_user]``, ``[aggregates]``, ``[histogram]``."""
    edges = report.bin_edges.tolist()
    with open(path, "w", encoding="utf-8", newline="\n") as outfile:
        outfile.write("[params]\n")
        outfile.write(f"method={report.method}\n")
        for key, value in report.params.items():
            outfile.write(f"{key}={value}\n")
        outfile.write(f"n_items={report.n_items}\n")

        outfile.write("\n[per_user]\n")
        outfile.write(",".join(PER_USER_HEADER) + "\n")
        for row in report.per_user:
            outfile.write(",".join(_per_user_row(row)) + "\n")

        outfile.write("\n[aggregates]\n")
        outfile.write(f"users={len(report.per_user)}\n")
        outfile.write(f"mean_recovery_accuracy={report.mean_accuracy!r}\n")
        outfile.write(f"std_recovery_accuracy={report.std_accuracy!r}\n")
        outfile.write(f"mean_discard_rate={report.mean_discard!r}\n")
        outfile.write(f"std_discard_rate={report.std_discard!r}\n")
        outfile.write(f"mean_speedup={report.mean_speedup!r}\n")
        outfile.write(f"mean_candidates={report.mean_candidates!r}\n")

        outfile.write("\n[histogram]\n")
        outfile.write("low,high,users,mean_recovery_accuracy\n")
        for slot, count in enumerate(report.histogram):
            accuracy = report.bin_accuracy[slot]
            shown = "-" if accuracy is None else repr(accuracy)
            outfile.write(f"{edges[slot]!r},{edges[slot + 1]!r},{count},{shown}\n")


def write_per_user_csv(path: str, report: BenchReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as outfile:
        writer = csv.writer(outfile, lineterminator="\n")
        writer.writerow(PER_USER_HEADER)
        for row in report.per_user:
            writer.writerow(_per_user_row(row))
