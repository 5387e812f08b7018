"""Discrete bandwidth-allocation lattice: counting, enumeration, indexing and
nearest-neighbour projection of continuous proto-actions."""

from __future__ import annotations

import itertools
import math

from functools import lru_cache
from typing import Sequence

import numpy as np

from pydantic import ValidationError

from app.core.errors import ArgumentError, CapacityError, ConfigurationError, InvalidActionError
from app.domain.models import Allocation, AllocationGrid
from app.util.constants import ENUMERATION_GUARD

# Relative gap below which two squared distances tie; ties go to the
# lexicographically smaller allocation.
TIE_TOLERANCE = 1e-12


def make_grid(total_bandwidth: float, resolution: float, slice_count: int) -> AllocationGrid:
    try:
        return AllocationGrid(
            total_bandwidth=total_bandwidth,
            resolution=resolution,
            slice_count=slice_count,
        )
    except ValidationError as exc:
        raise ConfigurationError(f"invalid allocation grid: {exc.errors()[0]['msg']}") from exc


def action_count(grid: AllocationGrid) -> int:
    return math.comb(grid.total_units - 1, grid.slice_count - 1)


def _compositions(total_units: int, parts: int):
    # Cut points in lexicographic order give multiplier vectors in lexicographic order.
    for cuts in itertools.combinations(range(1, total_units), parts - 1):
        bounds = (0, *cuts, total_units)
        yield tuple(bounds[i + 1] - bounds[i] for i in range(parts))


@lru_cache(maxsize=16)
def lattice_multipliers(grid: AllocationGrid) -> np.ndarray:
    """All multiplier vectors of the grid as a read-only (|A|, N) int matrix."""
    count = action_count(grid)
    if count > ENUMERATION_GUARD:
        raise CapacityError(
            f"grid has {count} allocations, above the enumeration guard of {ENUMERATION_GUARD}"
        )
    matrix = np.fromiter(
        itertools.chain.from_iterable(_compositions(grid.total_units, grid.slice_count)),
        dtype=np.int64,
        count=count * grid.slice_count,
    ).reshape(count, grid.slice_count)
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=16)
def _lattice_bandwidths(grid: AllocationGrid) -> np.ndarray:
    points = lattice_multipliers(grid) * grid.resolution
    points.setflags(write=False)
    return points


def enumerate_actions(grid: AllocationGrid) -> list[Allocation]:
    return [
        Allocation(multipliers=tuple(int(k) for k in row), resolution=grid.resolution)
        for row in lattice_multipliers(grid)
    ]


def allocation_at(index: int, grid: AllocationGrid) -> Allocation:
    matrix = lattice_multipliers(grid)
    if not 0 <= index < matrix.shape[0]:
        raise InvalidActionError(f"action index {index} outside [0, {matrix.shape[0]})")
    return Allocation(
        multipliers=tuple(int(k) for k in matrix[index]), resolution=grid.resolution
    )


def validate_allocation(allocation: Allocation, grid: AllocationGrid) -> None:
    multipliers = allocation.multipliers
    if not math.isclose(allocation.resolution, grid.resolution, rel_tol=1e-12):
        raise InvalidActionError(
            f"allocation resolution {allocation.resolution} differs from grid {grid.resolution}"
        )
    if len(multipliers) != grid.slice_count:
        raise InvalidActionError(
            f"allocation has {len(multipliers)} entries, grid has {grid.slice_count} slices"
        )
    if any(k < 1 for k in multipliers):
        raise InvalidActionError(f"allocation {allocation} gives a slice less than Δ")
    if sum(multipliers) != grid.total_units:
        raise InvalidActionError(
            f"allocation {allocation} does not sum to W={grid.total_bandwidth} MHz"
        )


def allocation_from_bandwidths(bandwidths: Sequence[float], grid: AllocationGrid) -> Allocation:
    multipliers = []
    for width in bandwidths:
        ratio = width / grid.resolution
        rounded = round(ratio)
        if abs(ratio - rounded) > 1e-6:
            raise InvalidActionError(f"bandwidth {width} MHz is not a multiple of Δ")
        multipliers.append(int(rounded))
    allocation = Allocation(multipliers=tuple(multipliers), resolution=grid.resolution)
    validate_allocation(allocation, grid)
    return allocation


def action_index(allocation: Allocation, grid: AllocationGrid) -> int:
    """Rank of the allocation in enumerate_actions order, without enumerating."""
    validate_allocation(allocation, grid)
    n = grid.total_units - 1
    m = grid.slice_count - 1
    cuts = list(itertools.accumulate(allocation.multipliers[:-1]))
    rank = 0
    previous = 0
    for position, cut in enumerate(cuts):
        for value in range(previous + 1, cut):
            rank += math.comb(n - value, m - position - 1)
        previous = cut
    return rank


def knn_indices(proto: Sequence[float], grid: AllocationGrid, k: int) -> np.ndarray:
    count = action_count(grid)
    if k < 1 or k > count:
        raise ArgumentError(f"k={k} must lie in [1, {count}]")
    point = np.asarray(proto, dtype=np.float64)
    if point.shape != (grid.slice_count,):
        raise ArgumentError(
            f"proto-action has shape {point.shape}, expected ({grid.slice_count},)"
        )
    offsets = _lattice_bandwidths(grid) - point
    return rank_by_distance(np.einsum("ij,ij->i", offsets, offsets), k)


def rank_by_distance(distances: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances, ties broken by the smaller index.

    Enumeration order is lexicographic, so the smaller index is the
    lexicographically smaller allocation.
    """
    if k == 1:
        nearest = distances.min()
        return np.flatnonzero(distances <= nearest + _tie_gap(nearest))[:1]
    order = np.argsort(distances, kind="stable")
    ordered = distances[order]
    ranked: list[int] = []
    start = 0
    while len(ranked) < k:
        stop = int(np.searchsorted(ordered, ordered[start] + _tie_gap(ordered[start]), side="right"))
        ranked.extend(sorted(int(index) for index in order[start:stop]))
        start = stop
    return np.asarray(ranked[:k])


def _tie_gap(distance: float) -> float:
    return TIE_TOLERANCE * max(1.0, float(distance))


def project_knn(proto: Sequence[float], grid: AllocationGrid, k: int) -> list[Allocation]:
    return [allocation_at(int(index), grid) for index in knn_indices(proto, grid, k)]


def squared_distance(proto: Sequence[float], allocation: Allocation) -> float:
    offsets = np.asarray(allocation.bandwidths, dtype=np.float64) - np.asarray(proto, dtype=np.float64)
    return float(offsets @ offsets)
