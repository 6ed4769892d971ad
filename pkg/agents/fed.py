"""
fed.py - federated exchange of partial model weights inside groups of LEO agents.

A round: each group elects the member with the best channel quality as edge,
every member contributes the same seeded subset ("slice") of its flat weight
vector, the edge averages the slices and broadcasts the result, and members
overwrite only the sliced positions.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import numpy.typing as npt

from utils.utils_errors import InvalidParameterError
from utils.utils_numerics import make_rng

#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class FlGroup:
    """Members exchanging weights, how often (episodes), and what share of the weights."""

    members: tuple[int, ...]
    period: int = 5
    slice_fraction: float = 0.5

    def __post_init__(self):
        if len(self.members) == 0:
            raise InvalidParameterError("an FL group needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise InvalidParameterError(f"duplicate members in group {self.members}")
        if self.period < 1:
            raise InvalidParameterError(f"period must be >= 1, got {self.period}")
        if not 0.0 < self.slice_fraction <= 1.0:
            raise InvalidParameterError(f"slice fraction must lie in (0, 1], got {self.slice_fraction}")


@dataclass(frozen=True)
class ModelSlice:
    """Strictly increasing flat indices and the weights found there."""

    mask: npt.NDArray[np.int64]
    values: npt.NDArray[np.float64]

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "values", values)
        if mask.ndim != 1 or mask.shape != values.shape:
            raise InvalidParameterError(f"mask {mask.shape} and values {values.shape} must be equal 1-D")
        if mask.size and (np.any(np.diff(mask) <= 0) or mask[0] < 0):
            raise InvalidParameterError("slice indices must be non-negative and strictly increasing")


def partition_groups(
    num_agents: int, group_size: int, period: int = 5, slice_fraction: float = 0.5
) -> list[FlGroup]:
    """Consecutive ids in groups of group_size; the last group takes the remainder."""
    if group_size < 1:
        raise InvalidParameterError(f"group size must be >= 1, got {group_size}")
    return [
        FlGroup(tuple(range(start, min(start + group_size, num_agents))), period, slice_fraction)
        for start in range(0, num_agents, group_size)
    ]


#####################################
# Operations
#####################################


def select_edge(group: FlGroup, channel_quality: Mapping[int, float] | Sequence[float]) -> int:
    """
    Member with the highest channel quality; ties go to the lowest id.

    channel_quality is indexed by agent id (a mapping or a sequence over all agents).
    """
    if not group.members:
        raise InvalidParameterError("cannot elect an edge in an empty group")
    best_id = None
    best_quality = -math.inf
    for member in sorted(group.members):
        quality = float(channel_quality[member])
        if quality > best_quality:
            best_id, best_quality = member, quality
    return best_id if best_id is not None else min(group.members)


def slice_mask(param_count: int, fraction: float, seed: int) -> npt.NDArray[np.int64]:
    """ceil(fraction * P) sorted distinct indices drawn from the seed."""
    if not 0.0 < fraction <= 1.0:
        raise InvalidParameterError(f"slice fraction must lie in (0, 1], got {fraction}")
    count = math.ceil(round(fraction * param_count, 9))
    if count >= param_count:
        return np.arange(param_count, dtype=np.int64)
    rng = make_rng(seed)
    return np.sort(rng.choice(param_count, size=count, replace=False)).astype(np.int64)


def extract_slice(weights, fraction: float, seed: int) -> ModelSlice:
    """Copy the seeded subset of a flat weight vector."""
    weights = np.asarray(weights, dtype=np.float64)
    mask = slice_mask(weights.shape[0], fraction, seed)
    return ModelSlice(mask, weights[mask].copy())


def aggregate(slices: Sequence[ModelSlice], xi: Sequence[float] | None = None) -> ModelSlice:
    """
    Weighted mean of member slices with weights xi / sum(xi).

    Identical member slices are returned unchanged.
    """
    if not slices:
        raise InvalidParameterError("nothing to aggregate")
    first = slices[0]
    for s in slices[1:]:
        if not np.array_equal(s.mask, first.mask):
            raise InvalidParameterError("slice masks differ between members")
    weights = np.ones(len(slices)) if xi is None else np.asarray(xi, dtype=np.float64)
    if weights.shape != (len(slices),) or np.any(weights < 0) or weights.sum() <= 0:
        raise InvalidParameterError(f"invalid aggregation weights {xi}")
    if all(np.array_equal(s.values, first.values) for s in slices[1:]):
        return ModelSlice(first.mask.copy(), first.values.copy())
    weights = weights / weights.sum()
    stacked = np.stack([s.values for s in slices])
    return ModelSlice(first.mask.copy(), weights @ stacked)


def broadcast_merge(local, global_slice: ModelSlice) -> npt.NDArray[np.float64]:
    """Copy of local with the sliced positions overwritten by the global values."""
    merged = np.array(local, dtype=np.float64)
    mask = global_slice.mask
    if mask.size and mask[-1] >= merged.shape[0]:
        raise InvalidParameterError(
            f"slice index {int(mask[-1])} out of range for {merged.shape[0]} weights"
        )
    merged[mask] = global_slice.values
    return merged


#####################################
# One exchange round
#####################################


@dataclass(frozen=True)
class RoundReport:
    group: FlGroup
    edge: int
    exchanged: int


def round_seed(run_seed: int, round_index: int, group_index: int) -> int:
    """Mask seed shared by every member of a group in one round."""
    return int(np.random.SeedSequence([run_seed, round_index, group_index]).generate_state(1)[0])


def federated_round(
    groups: Sequence[FlGroup],
    weights: Mapping[int, npt.NDArray[np.float64]],
    channel_quality: Sequence[float],
    run_seed: int,
    round_index: int,
    xi: Mapping[int, float] | None = None,
) -> tuple[dict[int, npt.NDArray[np.float64]], list[RoundReport]]:
    """
    Exchange one flat weight vector per agent inside every group.

    Returns the merged vectors (agents in no group keep theirs) and one report
    per group naming the elected edge.
    """
    merged = {agent: np.array(w, dtype=np.float64) for agent, w in weights.items()}
    reports = []
    for g_index, group in enumerate(groups):
        edge = select_edge(group, channel_quality)
        if len(group.members) < 2:
            reports.append(RoundReport(group, edge, 0))
            continue
        seed = round_seed(run_seed, round_index, g_index)
        slices = [extract_slice(weights[m], group.slice_fraction, seed) for m in group.members]
        member_xi = None if xi is None else [xi[m] for m in group.members]
        global_slice = aggregate(slices, member_xi)
        for m in group.members:
            merged[m] = broadcast_merge(weights[m], global_slice)
        reports.append(RoundReport(group, edge, int(global_slice.mask.size)))
    return merged, reports
