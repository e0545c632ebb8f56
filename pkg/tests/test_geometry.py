import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pytessindex.exceptions import TessConfigError, TessDomainError
from pytessindex.geometry import (
    DenseFactor,
    TessVector,
    angular_distance,
    brute_force_tess,
    nearest_neighbor_distance,
    nearest_neighbors,
    neighbor_distance,
    tess_dary,
    tess_dary_batch,
    tess_ternary,
    tess_ternary_batch,
    tessellating_levels,
    tile_count,
)

TOLERANCE = 1e-12


def random_unit_vectors(rng: np.random.Generator, count: int, k: int) -> np.ndarray:
    vectors = rng.standard_normal((count, k))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


factor_values = st.lists(
    st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False), min_size=2, max_size=6
).filter(lambda values: max(abs(value) for value in values) > 1e-6)


def test_dense_factor_validation():
    factor = DenseFactor(7, [0.6, 0.8])
    assert factor.k == 2
    assert not factor.values.flags.writeable
    assert factor == DenseFactor(7, np.array([0.6, 0.8]))

    for id, values in [(-1, [1.0, 0.0]), (1, [1.0]), (1, [0.0, 0.0]), (1, [np.nan, 1.0]), (1, [[1.0, 2.0]])]:
        with pytest.raises(TessDomainError):
            DenseFactor(id, values)


def test_tess_vector_validation():
    a = TessVector([2, 0, -1], base=2)
    assert a.k == 3
    assert a.nonzeros == 2
    assert not a.is_ternary
    np.testing.assert_allclose(a.direction, [1.0, 0.0, -0.5])
    assert abs(np.linalg.norm(a.unit) - 1.0) < TOLERANCE

    with pytest.raises(TessDomainError):
        TessVector([0, 0])
    with pytest.raises(TessDomainError):
        TessVector([2, 0])
    with pytest.raises(TessDomainError):
        TessVector([0.5, 1])
    with pytest.raises(TessConfigError):
        TessVector([1, 0], base=0)


@pytest.mark.parametrize(
    "x, y, expected",
    [
        ([1, 0], [1, 0], 0.0),
        ([1, 0], [-1, 0], 2.0),
        ([1, 0], [0.6, 0.8], 0.4),
    ],
)
def test_angular_distance(x, y, expected):
    assert abs(angular_distance(x, y) - expected) < TOLERANCE


def test_angular_distance_errors():
    with pytest.raises(TessDomainError):
        angular_distance([0, 0], [1, 0])
    with pytest.raises(TessDomainError):
        angular_distance([1, 0, 0], [1, 0])


@pytest.mark.parametrize(
    "z, levels",
    [
        ([1, 0], [1, 0]),
        ([0.6, 0.8], [1, 1]),
        ([5, -1], [1, 0]),
        ([0.0, -3.0, 0.1], [0, -1, 0]),
    ],
)
def test_tess_ternary_examples(z, levels):
    a = tess_ternary(z)
    assert a.base == 1
    assert a.levels.tolist() == levels


def test_tess_ternary_accepts_factor():
    assert tess_ternary(DenseFactor(3, [0.6, 0.8])).levels.tolist() == [1, 1]


def test_tess_ternary_zero_vector():
    with pytest.raises(TessDomainError):
        tess_ternary([0.0, 0.0])


def test_tess_ternary_equal_magnitudes_are_stable():
    # two-way tie in magnitude; support grows, so both are kept
    assert tess_ternary([1.0, -1.0, 0.2]).levels.tolist() == [1, -1, 0]


def test_tess_ternary_scale_invariance():
    rng = np.random.default_rng(3)
    for z in rng.standard_normal((200, 7)):
        expected = tess_ternary(z).levels
        for scale in (1e-6, 0.5, 3.0, 1e6):
            assert np.array_equal(tess_ternary(scale * z).levels, expected)


@settings(max_examples=200, deadline=None)
@given(factor_values)
def test_tess_ternary_is_optimal(values):
    a = tess_ternary(values)
    assert set(a.levels.tolist()) <= {-1, 0, 1}
    assert a.nonzeros >= 1
    best = brute_force_tess(values)
    assert angular_distance(values, a.direction) <= angular_distance(values, best.direction) + TOLERANCE


@pytest.mark.slow
def test_tess_ternary_matches_brute_force():
    rng = np.random.default_rng(1)
    started = time.perf_counter()
    for k in range(2, 9):
        for z in random_unit_vectors(rng, 1000, k):
            exact = angular_distance(z, tess_ternary(z).direction)
            optimum = angular_distance(z, brute_force_tess(z).direction)
            assert abs(exact - optimum) <= TOLERANCE
    assert time.perf_counter() - started < 10.0


def test_tess_ternary_batch_matches_single():
    rng = np.random.default_rng(5)
    matrix = rng.standard_normal((50, 6))
    batch = tess_ternary_batch(matrix)
    for row, z in enumerate(matrix):
        assert np.array_equal(batch[row], tess_ternary(z).levels)


@pytest.mark.parametrize(
    "z, base, levels",
    [
        ([1, 0], 2, [2, 0]),
        ([0.6, 0.8], 2, [1, 2]),
        ([10.0, 0.0, 0.0], 3, [3, 0, 0]),
    ],
)
def test_tess_dary_examples(z, base, levels):
    a = tess_dary(z, base)
    assert a.base == base
    assert a.levels.tolist() == levels


def test_tess_dary_rounds_ties_up():
    assert tess_dary([0.75, 0.6614], 2).levels[0] == 2
    # D z = 0.5 exactly on every coordinate
    assert tess_dary([0.5, 0.5, 0.5, 0.5], 1).levels.tolist() == [1, 1, 1, 1]
    # -0.5 rounds up to 0 everywhere, then the fallback keeps the first coordinate
    assert tess_dary([-0.5, -0.5, -0.5, -0.5], 1).levels.tolist() == [-1, 0, 0, 0]


def test_tess_dary_all_zero_fallback():
    # 100 equal coordinates: 1 / sqrt(100) = 0.1 < 1 / (2 D) for D = 1, everything rounds to 0
    z = np.full(100, -1.0)
    z[3] = -1.0000001
    levels = tess_dary(z, 1).levels
    assert levels[3] == -1
    assert np.count_nonzero(levels) == 1


def test_tess_dary_errors():
    with pytest.raises(TessConfigError):
        tess_dary([1.0, 0.0], 0)
    with pytest.raises(TessDomainError):
        tess_dary([0.0, 0.0], 2)


def test_tess_dary_batch_matches_single():
    rng = np.random.default_rng(8)
    matrix = rng.standard_normal((40, 5))
    batch = tess_dary_batch(matrix, 3)
    for row, z in enumerate(matrix):
        assert np.array_equal(batch[row], tess_dary(z, 3).levels)


@pytest.mark.slow
def test_tess_dary_error_bound():
    rng = np.random.default_rng(2)
    started = time.perf_counter()
    worst = 0.0
    for k in (2, 3, 4):
        for base in (2, 3, 4):
            for z in random_unit_vectors(rng, 500, k):
                approximate = angular_distance(z, tess_dary(z, base).direction)
                optimum = angular_distance(z, brute_force_tess(z, base).direction)
                excess = approximate - optimum
                assert excess >= -TOLERANCE
                assert excess <= 4 * k / base**2
                worst = max(worst, excess * base**2 / k)
    print(f"\nempirical constant of the D-ary bound: {worst:.4f}")
    assert time.perf_counter() - started < 30.0


@pytest.mark.parametrize(
    "z, base, levels",
    [
        ([0.6, 0.8], 1, [1, 1]),
        ([1, 0, 0], 1, [1, 0, 0]),
        ([1, 0, 0], 2, [2, 0, 0]),
        ([1, 0, 0], 3, [3, 0, 0]),
        ([0.9806, -0.1961], 1, [1, 0]),
    ],
)
def test_brute_force_examples(z, base, levels):
    assert brute_force_tess(z, base).levels.tolist() == levels


def test_brute_force_refuses_large_sets():
    with pytest.raises(TessConfigError):
        brute_force_tess(np.ones(13))
    with pytest.raises(TessConfigError):
        tessellating_levels(9, 4)


def test_tessellating_levels():
    levels = tessellating_levels(2)
    assert len(levels) == tile_count(2) == 8
    assert [tuple(row) for row in levels.tolist()] == sorted(tuple(row) for row in levels.tolist())
    assert not np.any(np.all(levels == 0, axis=1))
    assert tile_count(4, 2) == 5**4 - 1
    assert len(tessellating_levels(3, 2)) == tile_count(3, 2)


def test_neighbor_distance_law():
    # exhaustive scan of the 80 ternary tessellating vectors for k = 4
    k = 4
    for levels in tessellating_levels(k):
        a = TessVector(levels)
        assert abs(nearest_neighbor_distance(a) - neighbor_distance(a.nonzeros, k)) <= TOLERANCE


def test_neighbor_distance_values():
    assert abs(neighbor_distance(1, 4) - (1 - math.sqrt(1 / 2))) < TOLERANCE
    assert abs(neighbor_distance(3, 4) - (1 - math.sqrt(3 / 4))) < TOLERANCE
    # fully supported vectors can only drop a level
    assert abs(neighbor_distance(4, 4) - (1 - math.sqrt(3 / 4))) < TOLERANCE
    with pytest.raises(TessDomainError):
        neighbor_distance(0, 4)
    with pytest.raises(TessDomainError):
        neighbor_distance(5, 4)


def test_nearest_neighbors_match_brute_force():
    grid = tessellating_levels(4)
    units = grid / np.linalg.norm(grid, axis=1, keepdims=True)
    for row, levels in enumerate(grid):
        a = TessVector(levels)
        distances = 1.0 - units @ units[row]
        distances[row] = np.inf
        closest = {tuple(grid[other]) for other in np.flatnonzero(distances <= distances.min() + TOLERANCE)}
        assert {tuple(b.levels.tolist()) for b in nearest_neighbors(a)} == closest


def test_nearest_neighbors_examples():
    neighbors = nearest_neighbors(TessVector([1, 0]))
    assert [b.levels.tolist() for b in neighbors] == [[1, -1], [1, 1]]
    neighbors = nearest_neighbors(TessVector([1, -1]))
    assert [b.levels.tolist() for b in neighbors] == [[0, -1], [1, 0]]
    with pytest.raises(TessConfigError):
        nearest_neighbors(TessVector([2, 0], base=2))


@pytest.mark.slow
def test_tess_ternary_scaling():
    rng = np.random.default_rng(4)
    timings = {}
    for k in (8, 64, 512):
        matrix = rng.standard_normal((2000, k))
        started = time.perf_counter()
        for _ in range(3):
            tess_ternary_batch(matrix)
        timings[k] = time.perf_counter() - started

    def cost(k):
        return k * math.log2(k)

    for k in (64, 512):
        assert timings[k] / timings[8] <= 2 * cost(k) / cost(8)
