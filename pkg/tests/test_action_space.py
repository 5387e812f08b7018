import math

import numpy as np
import pytest

from app.core.errors import ArgumentError, ConfigurationError, InvalidActionError
from app.domain.models import Allocation
from app.services.action_space import (
    action_count,
    action_index,
    allocation_at,
    allocation_from_bandwidths,
    enumerate_actions,
    make_grid,
    project_knn,
    rank_by_distance,
    squared_distance,
)
from app.services.baselines import equal_allocation


def _bandwidths(allocations):
    return [allocation.bandwidths for allocation in allocations]


def test_action_count_of_common_grids():
    assert action_count(make_grid(10, 0.2, 3)) == 1176
    assert action_count(make_grid(3, 1, 3)) == 1
    assert action_count(make_grid(4, 1, 3)) == 3


def test_action_count_equals_enumeration_for_small_grids():
    for slices in range(1, 5):
        for units in range(slices, 21):
            grid = make_grid(units, 1, slices)
            actions = enumerate_actions(grid)
            assert len(actions) == action_count(grid) == math.comb(units - 1, slices - 1)


def test_enumeration_is_lexicographic_in_multipliers():
    assert _bandwidths(enumerate_actions(make_grid(4, 1, 3))) == [(1, 1, 2), (1, 2, 1), (2, 1, 1)]
    assert _bandwidths(enumerate_actions(make_grid(2, 1, 2))) == [(1, 1)]

    multipliers = [a.multipliers for a in enumerate_actions(make_grid(10, 0.2, 3))]
    assert len(multipliers) == 1176
    assert multipliers == sorted(multipliers)
    assert all(sum(k) == 50 and min(k) >= 1 for k in multipliers)


def test_invalid_grids_are_configuration_errors():
    with pytest.raises(ConfigurationError):
        make_grid(2, 1, 3)
    with pytest.raises(ConfigurationError):
        make_grid(10, 0.3, 3)
    with pytest.raises(ConfigurationError):
        make_grid(10, 0, 3)


def test_action_index_inverts_enumeration():
    grid = make_grid(4, 1, 3)
    assert action_index(Allocation(multipliers=(1, 1, 2), resolution=1), grid) == 0
    assert action_index(Allocation(multipliers=(2, 1, 1), resolution=1), grid) == 2
    assert action_index(Allocation(multipliers=(1, 1), resolution=1), make_grid(2, 1, 2)) == 0

    big = make_grid(10, 0.2, 3)
    for index, allocation in enumerate(enumerate_actions(big)):
        assert action_index(allocation, big) == index
        assert allocation_at(index, big) == allocation


def test_action_index_rejects_off_lattice_allocations():
    grid = make_grid(4, 1, 3)
    with pytest.raises(InvalidActionError):
        action_index(Allocation(multipliers=(1, 1, 1), resolution=1), grid)
    with pytest.raises(InvalidActionError):
        action_index(Allocation(multipliers=(0, 2, 2), resolution=1), grid)
    with pytest.raises(InvalidActionError):
        allocation_from_bandwidths([1.5, 1.5, 1.0], grid)


def test_project_knn_small_grid_examples():
    grid = make_grid(4, 1, 3)
    assert _bandwidths(project_knn([1.6, 1.2, 1.2], grid, 1)) == [(2, 1, 1)]
    assert _bandwidths(project_knn([1, 2, 1], grid, 1)) == [(1, 2, 1)]
    assert _bandwidths(project_knn([1.6, 1.2, 1.2], grid, 3)) == [(2, 1, 1), (1, 2, 1), (1, 1, 2)]


def test_project_knn_rejects_bad_k_and_shape():
    grid = make_grid(4, 1, 3)
    with pytest.raises(ArgumentError):
        project_knn([1, 1, 2], grid, 4)
    with pytest.raises(ArgumentError):
        project_knn([1, 1, 2], grid, 0)
    with pytest.raises(ArgumentError):
        project_knn([1, 3], grid, 1)


BRUTE_FORCE_GRIDS = [(4, 1, 3), (10, 1, 3), (10, 0.2, 3)]


def _brute_force_distances(grid, proto):
    actions = enumerate_actions(grid)
    points = np.array([a.bandwidths for a in actions], dtype=np.float64)
    return actions, ((points - np.asarray(proto)) ** 2).sum(axis=1)


@pytest.mark.parametrize("grid_args", BRUTE_FORCE_GRIDS)
def test_project_knn_agrees_with_brute_force_scan(grid_args):
    grid = make_grid(*grid_args)
    total = grid_args[0]
    rng = np.random.default_rng(11)
    for proto in rng.uniform(-1.0, total + 1.0, size=(1000, 3)):
        actions, distances = _brute_force_distances(grid, proto)
        nearest = distances.min()
        tied = [a for a, d in zip(actions, distances) if d <= nearest + 1e-12 * max(1.0, nearest)]
        best = min(tied, key=lambda a: a.multipliers)
        assert project_knn(proto, grid, 1)[0] == best


@pytest.mark.parametrize("grid_args", BRUTE_FORCE_GRIDS)
@pytest.mark.parametrize("k", [2, 3, 10])
def test_project_knn_with_k_returns_the_k_nearest(grid_args, k):
    grid = make_grid(*grid_args)
    k = min(k, action_count(grid))
    total = grid_args[0]
    rng = np.random.default_rng(12)
    for proto in rng.uniform(-1.0, total + 1.0, size=(200, 3)):
        actions, distances = _brute_force_distances(grid, proto)
        neighbours = project_knn(proto, grid, k)
        assert len(set(neighbours)) == k
        chosen = [distances[actions.index(a)] for a in neighbours]
        others = [d for a, d in zip(actions, distances) if a not in neighbours]
        if others:
            assert max(chosen) <= min(others) + 1e-9
        assert all(later >= earlier - 1e-9 for earlier, later in zip(chosen, chosen[1:]))


def test_rank_by_distance_prefers_the_truly_nearest_point():
    assert rank_by_distance(np.array([0.5000000004, 0.4999999996]), 1).tolist() == [1]
    assert rank_by_distance(np.array([0.5000000004, 0.4999999996, 3.0]), 2).tolist() == [1, 0]


def test_rank_by_distance_breaks_float_noise_ties_by_index():
    distances = np.array([3.0, 2.0 + 4e-16, 2.0, 2.0 + 8e-16])
    assert rank_by_distance(distances, 1).tolist() == [1]
    assert rank_by_distance(distances, 4).tolist() == [1, 2, 3, 0]


def test_project_knn_outputs_sorted_by_distance():
    grid = make_grid(10, 0.2, 3)
    proto = [2.93, 4.41, 2.77]
    neighbours = project_knn(proto, grid, 25)
    distances = [squared_distance(proto, a) for a in neighbours]
    assert all(later >= earlier - 1e-9 for earlier, later in zip(distances, distances[1:]))
    assert len(set(neighbours)) == 25


def test_projection_is_identity_on_valid_actions():
    grid = make_grid(10, 0.2, 3)
    for allocation in enumerate_actions(grid):
        assert project_knn(allocation.bandwidths, grid, 1) == [allocation]


def test_equal_allocation_uses_lexicographic_tie_break():
    assert equal_allocation(make_grid(10, 0.2, 3)).bandwidths == (3.2, 3.4, 3.4)
    assert equal_allocation(make_grid(3, 1, 3)).bandwidths == (1, 1, 1)
    assert equal_allocation(make_grid(4, 1, 4)).bandwidths == (1, 1, 1, 1)


def test_allocation_sums_exactly_on_the_lattice():
    grid = make_grid(10, 0.2, 3)
    for allocation in enumerate_actions(grid)[:50]:
        assert sum(allocation.multipliers) == grid.total_units
        assert sum(allocation.bandwidths) == pytest.approx(10.0, abs=1e-9)
