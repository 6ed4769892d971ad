import numpy as np
import pytest

from agents.fed import (
    FlGroup,
    ModelSlice,
    aggregate,
    broadcast_merge,
    extract_slice,
    federated_round,
    partition_groups,
    round_seed,
    select_edge,
    slice_mask,
)
from utils.utils_errors import InvalidParameterError


def test_single_member_is_edge():
    assert select_edge(FlGroup((4,)), {4: 0.1}) == 4


def test_edge_tie_goes_to_lowest_id():
    assert select_edge(FlGroup((0, 1, 2)), [3.0, 7.0, 7.0]) == 1


def test_edge_matches_argmax_scan():
    rng = np.random.default_rng(0)
    for _ in range(100):
        quality = rng.uniform(size=6)
        members = tuple(sorted(rng.choice(6, size=3, replace=False).tolist()))
        best = max(members, key=lambda m: (quality[m], -m))
        assert select_edge(FlGroup(members), quality) == best


def test_empty_group_rejected():
    with pytest.raises(InvalidParameterError):
        FlGroup(())


def test_partition_by_id_order():
    groups = partition_groups(10, 5)
    assert [g.members for g in groups] == [(0, 1, 2, 3, 4), (5, 6, 7, 8, 9)]
    assert [len(g.members) for g in partition_groups(10, 2)] == [2] * 5
    assert [g.members for g in partition_groups(10, 1)] == [(i,) for i in range(10)]
    assert [g.members for g in partition_groups(5, 2)] == [(0, 1), (2, 3), (4,)]


def test_slice_mask_full_and_half():
    np.testing.assert_array_equal(slice_mask(7, 1.0, 3), np.arange(7))
    a = slice_mask(10, 0.5, 42)
    b = slice_mask(10, 0.5, 42)
    assert a.size == 5
    np.testing.assert_array_equal(a, b)
    assert np.all(np.diff(a) > 0)


def test_slice_masks_change_between_rounds():
    collisions = 0
    for trial in range(100):
        a = slice_mask(200, 0.5, round_seed(trial, 0, 0))
        b = slice_mask(200, 0.5, round_seed(trial, 1, 0))
        collisions += int(np.array_equal(a, b))
    assert collisions == 0


@pytest.mark.parametrize("fraction", [0.0, -0.1, 1.5])
def test_invalid_fraction(fraction):
    with pytest.raises(InvalidParameterError):
        slice_mask(10, fraction, 0)


def test_aggregate_identical_slices_is_fixed_point():
    rng = np.random.default_rng(1)
    s = ModelSlice(np.array([1, 4, 9]), rng.normal(size=3) * 1e-7 + 1 / 3)
    out = aggregate([s, ModelSlice(s.mask, s.values.copy()), ModelSlice(s.mask, s.values.copy())], [0.2, 0.5, 0.3])
    assert out.values.tobytes() == s.values.tobytes()


def test_aggregate_two_member_mean():
    mask = np.array([0])
    out = aggregate([ModelSlice(mask, [0.0]), ModelSlice(mask, [2.0])], [0.5, 0.5])
    assert out.values[0] == 1.0


def test_aggregate_uniform_weights_is_mean():
    rng = np.random.default_rng(2)
    mask = np.arange(0, 40, 2)
    slices = [ModelSlice(mask, rng.normal(size=20)) for _ in range(4)]
    out = aggregate(slices)
    expected = np.array([sum(s.values[j] for s in slices) / 4 for j in range(20)])
    np.testing.assert_allclose(out.values, expected, rtol=1e-14, atol=1e-14)


def test_aggregate_normalizes_weights():
    mask = np.array([0, 1])
    out = aggregate([ModelSlice(mask, [1.0, 0.0]), ModelSlice(mask, [3.0, 4.0])], [1.0, 3.0])
    np.testing.assert_allclose(out.values, [2.5, 3.0])


def test_aggregate_ignores_member_order():
    rng = np.random.default_rng(3)
    mask = np.array([2, 5, 7, 11])
    slices = [ModelSlice(mask, rng.normal(size=4)) for _ in range(5)]
    xi = [0.1, 0.4, 0.2, 0.2, 0.1]
    order = [3, 0, 4, 1, 2]
    out = aggregate(slices, xi)
    shuffled = aggregate([slices[i] for i in order], [xi[i] for i in order])
    np.testing.assert_array_equal(shuffled.mask, out.mask)
    np.testing.assert_allclose(shuffled.values, out.values, rtol=1e-13, atol=1e-15)


def test_aggregate_rejects_mask_mismatch():
    with pytest.raises(InvalidParameterError):
        aggregate([ModelSlice([0, 1], [1.0, 2.0]), ModelSlice([0, 2], [1.0, 2.0])])


def test_broadcast_merge_cases():
    local = np.arange(6, dtype=float)
    np.testing.assert_array_equal(broadcast_merge(local, ModelSlice(np.zeros(0, dtype=int), np.zeros(0))), local)
    full = ModelSlice(np.arange(6), -np.ones(6))
    np.testing.assert_array_equal(broadcast_merge(local, full), -np.ones(6))
    with pytest.raises(InvalidParameterError):
        broadcast_merge(local, ModelSlice([7], [1.0]))


def test_merge_then_extract_round_trip():
    rng = np.random.default_rng(3)
    local = rng.normal(size=50)
    seed = 77
    mask = slice_mask(50, 0.3, seed)
    global_slice = ModelSlice(mask, rng.normal(size=mask.size))
    merged = broadcast_merge(local, global_slice)
    back = extract_slice(merged, 0.3, seed)
    np.testing.assert_array_equal(back.values, global_slice.values)
    untouched = np.setdiff1d(np.arange(50), mask)
    np.testing.assert_array_equal(merged[untouched], local[untouched])


def test_federated_round_merges_inside_groups_only():
    rng = np.random.default_rng(4)
    weights = {i: rng.normal(size=30) for i in range(4)}
    groups = partition_groups(4, 2, slice_fraction=0.5)
    merged, reports = federated_round(groups, weights, [0.1, 0.9, 0.5, 0.2], run_seed=7, round_index=0)
    assert [r.edge for r in reports] == [1, 2]
    assert all(r.exchanged == 15 for r in reports)
    mask = slice_mask(30, 0.5, round_seed(7, 0, 0))
    np.testing.assert_allclose(merged[0][mask], (weights[0][mask] + weights[1][mask]) / 2, rtol=1e-14)
    np.testing.assert_array_equal(merged[0][mask], merged[1][mask])
    other = np.setdiff1d(np.arange(30), mask)
    np.testing.assert_array_equal(merged[0][other], weights[0][other])


def test_singleton_groups_exchange_nothing():
    weights = {0: np.ones(5), 1: np.zeros(5)}
    merged, reports = federated_round(partition_groups(2, 1), weights, [1.0, 2.0], 0, 0)
    np.testing.assert_array_equal(merged[0], np.ones(5))
    np.testing.assert_array_equal(merged[1], np.zeros(5))
    assert [r.exchanged for r in reports] == [0, 0]
