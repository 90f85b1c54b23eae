import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vrtos.oracles import brute_consensus, brute_prox_fused, brute_prox_group, brute_prox_l1
from vrtos.penalties import (
    L1,
    BlockPartition,
    DouglasRachfordProx,
    FusedPairs,
    GroupLasso,
    OverlappingGroupLasso,
    Quadratic,
    ZeroPenalty,
    consensus_projection,
    dr_prox_sum,
    fused_lasso_split,
    load_group_spec,
    overlapping_groups,
    prox_fused_block2_scaled,
    prox_l1_scaled,
    split_alternating_groups,
    total_variation,
)

vec = arrays(np.float64, st.integers(1, 8), elements=st.floats(-10, 10))
steps = st.floats(0.01, 5.0)


def _weights(x, seed):
    return np.random.default_rng(seed).uniform(1.0, 10.0, size=x.shape)


# -- closed forms against brute force ------------------------------------------------


@given(vec, steps, st.integers(0, 2**16))
@settings(max_examples=50, deadline=None)
def test_l1_matches_brute_force(x, gamma, seed):
    d = _weights(x, seed)
    np.testing.assert_allclose(prox_l1_scaled(x, gamma, d), brute_prox_l1(x, gamma, d), atol=1e-6)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_group_matches_brute_force(m):
    # one batched oracle call; per-example calls are slow for m = 3
    rng = np.random.default_rng(m)
    x = rng.normal(scale=3, size=(40, m))
    gamma = rng.uniform(0.01, 3.0, size=40)
    d = np.repeat(rng.uniform(1, 10, size=(40, 1)), m, axis=1)
    pen = GroupLasso([range(m)], m, 1.0)
    closed = np.array([pen.prox(x[t], gamma[t], d[t]) for t in range(40)])
    np.testing.assert_allclose(closed, brute_prox_group(x, gamma, d), atol=1e-6)


@given(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), steps, st.floats(1, 10), st.floats(1, 10))
@settings(max_examples=25, deadline=None)
def test_fused_pair_matches_brute_force(x, gamma, d1, d2):
    z = np.array(prox_fused_block2_scaled(x, gamma, (1 / d1, 1 / d2)))
    brute = brute_prox_fused(np.array([x]), np.array([gamma]), np.array([[d1, d2]]))[0]
    np.testing.assert_allclose(z, brute, atol=1e-6)


@given(arrays(np.float64, st.integers(2, 5), elements=st.floats(-10, 10)), st.integers(0, 2**16))
@settings(max_examples=50, deadline=None)
def test_consensus_matches_brute_force(col, seed):
    d = _weights(col, seed)
    z = consensus_projection(col[:, None], 1 / d[:, None])
    np.testing.assert_allclose(z, brute_consensus(col[None], d[None]), atol=1e-6)


# -- generic prox properties ---------------------------------------------------------


def _penalties(p):
    groups = [list(range(0, min(3, p)))] + ([list(range(3, p))] if p > 3 else [])
    pairs = [(j, j + 1) for j in range(0, p - 1, 2)]
    return [L1(p, 0.7), Quadratic(p, 0.4), GroupLasso(groups, p, 0.9), FusedPairs(pairs, p, 0.6)]


@given(st.integers(2, 7), st.integers(0, 2**16), steps)
@settings(max_examples=60, deadline=None)
def test_prox_is_firmly_nonexpansive(p, seed, gamma):
    # <P x - P y, x - y>_{D^-1} >= ||P x - P y||^2_{D^-1}
    rng = np.random.default_rng(seed)
    x, y = rng.normal(scale=3, size=(2, p))
    for pen in _penalties(p):
        d = rng.uniform(1, 5, size=p)
        if isinstance(pen, GroupLasso):
            d = np.full(p, d[0])
        px, py = pen.prox(x, gamma, d), pen.prox(y, gamma, d)
        assert (px - py) @ ((x - y) / d) >= (px - py) @ ((px - py) / d) - 1e-12


@given(st.integers(2, 7), st.integers(0, 2**16), steps)
@settings(max_examples=60, deadline=None)
def test_prox_minimizes_its_objective(p, seed, gamma):
    # the prox point beats random perturbations of itself
    rng = np.random.default_rng(seed)
    x = rng.normal(scale=3, size=p)
    for pen in _penalties(p):
        d = np.full(p, rng.uniform(1, 5))
        z = pen.prox(x, gamma, d)

        def obj(u):
            return pen.value(u) + np.sum((x - u) ** 2 / d) / (2 * gamma)

        for _ in range(20):
            assert obj(z) <= obj(z + rng.normal(scale=0.1, size=p)) + 1e-12


def test_l1_prox_hand_values():
    np.testing.assert_allclose(
        prox_l1_scaled(np.array([3.0, -0.5, -4.0]), 0.5, np.array([2.0, 2.0, 1.0])),
        [2.0, 0.0, -3.5],
    )


def test_fused_pair_cases():
    # fused, pulled apart in either order
    np.testing.assert_allclose(prox_fused_block2_scaled((1.0, 1.2), 1.0, (1.0, 1.0)), (1.1, 1.1))
    np.testing.assert_allclose(prox_fused_block2_scaled((5.0, 0.0), 1.0, (1.0, 1.0)), (4.0, 1.0))
    np.testing.assert_allclose(prox_fused_block2_scaled((0.0, 5.0), 1.0, (2.0, 1.0)), (0.5, 4.0))


def test_group_lasso_keeps_uncovered_coordinates():
    pen = GroupLasso([[0, 1]], 3, 1.0)
    z = pen.prox(np.array([0.3, 0.4, 7.0]), 1.0)
    np.testing.assert_allclose(z, [0.0, 0.0, 7.0])
    np.testing.assert_allclose(pen.prox(np.array([3.0, 4.0, 0.0]), 1.0), [2.4, 3.2, 0.0])


def test_group_lasso_rejects_overlap():
    with pytest.raises(ValueError, match="disjoint"):
        GroupLasso([[0, 1], [1, 2]], 3)


def test_zero_penalty_is_identity(rng):
    x = rng.normal(size=5)
    z = ZeroPenalty(5).prox(x, 3.0)
    np.testing.assert_array_equal(z, x)
    assert z is not x


def test_prox_segments_matches_full_prox(rng):
    p = 9
    pen = GroupLasso([[0, 1, 2], [5, 6]], p, 0.8)
    d = np.repeat([2.0, 1.0, 1.0, 1.0, 1.0, 3.0, 1.0, 1.0, 1.0], 1)
    d[0:3] = 2.0
    d[5:7] = 3.0
    x = rng.normal(size=p)
    full = pen.prox(x, 0.3, d)
    part = pen.partition
    blocks = np.array([0, 1])  # the two groups
    coords = np.concatenate([part.block(b) for b in blocks])
    starts = np.array([0, 3])
    sub = pen.prox_segments(x[coords], 0.3, d[coords], starts, blocks)
    np.testing.assert_allclose(sub, full[coords])


# -- structure helpers ---------------------------------------------------------------


def test_block_partition_validation():
    with pytest.raises(ValueError, match="overlap"):
        BlockPartition([[0, 1], [1]], 2)
    with pytest.raises(ValueError, match="not covered"):
        BlockPartition([[0]], 2)
    with pytest.raises(ValueError, match="empty"):
        BlockPartition([[0, 1], []], 2)
    part = BlockPartition([[2, 0], [1]], 3)
    assert part.block_of.tolist() == [0, 1, 0]
    assert part.is_constant_on_blocks(np.array([5.0, 1.0, 5.0]))
    assert not part.is_constant_on_blocks(np.array([5.0, 1.0, 4.0]))


def test_overlapping_groups_layout():
    groups = overlapping_groups(30, 10, 2)
    assert [g[0] for g in groups] == [0, 8, 16, 24]
    assert all(len(g) == 10 for g in groups[:-1])
    assert groups[-1].tolist() == list(range(24, 30))
    for a, b in zip(groups, groups[1:]):
        assert len(np.intersect1d(a, b)) == 2
    first, second = split_alternating_groups(groups, 30)
    assert len(first) == 2 and len(second) == 2


@given(st.integers(12, 80), st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_split_sums_to_overlapping_penalty(p, seed):
    x = np.random.default_rng(seed).normal(size=p)
    ogl = OverlappingGroupLasso(overlapping_groups(p, 10, 2), p, 0.3)
    g1, g2 = ogl.split()
    assert g1.value(x) + g2.value(x) == pytest.approx(ogl.value(x), rel=1e-12)


def test_split_rejects_wide_overlap():
    with pytest.raises(ValueError):
        split_alternating_groups(overlapping_groups(30, 10, 6), 30)


@given(st.integers(2, 40), st.integers(0, 2**16))
@settings(max_examples=30)
def test_fused_split_sums_to_total_variation(p, seed):
    x = np.random.default_rng(seed).normal(size=p)
    a, b = fused_lasso_split(p, 1.0)
    assert a.value(x) + b.value(x) == pytest.approx(total_variation(x), rel=1e-12)


def test_consensus_projection_rejects_bad_weights():
    with pytest.raises(ValueError):
        consensus_projection(np.ones((2, 3)), np.array([[1.0], [0.0]]))


def test_load_group_spec(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"groups": [[0, 1], [2]], "strength": 0.5}))
    groups, lam = load_group_spec(path)
    assert [g.tolist() for g in groups] == [[0, 1], [2]]
    assert lam == 0.5
    with pytest.raises(ValueError):
        load_group_spec({"strength": 1})


# -- Douglas-Rachford prox of a sum ----------------------------------------------------


def test_dr_with_zero_second_term_is_exact(rng):
    x = rng.normal(size=6)
    z, _ = dr_prox_sum(x, 0.4, L1(6, 1.0), ZeroPenalty(6), iters=1)
    np.testing.assert_allclose(z, prox_l1_scaled(x, 0.4, np.ones(6)), atol=1e-15)


def test_dr_converges_to_prox_of_sum(rng):
    # l1 + ridge has the closed form soft(x, gamma lam) / (1 + gamma mu)
    x = rng.normal(scale=2, size=10)
    gamma, lam, mu = 0.7, 0.5, 2.0
    z, _ = dr_prox_sum(x, gamma, L1(10, lam), Quadratic(10, mu), iters=300)
    expected = prox_l1_scaled(x, gamma * lam, np.ones(10)) / (1 + gamma * mu)
    np.testing.assert_allclose(z, expected, atol=1e-10)


def test_dr_warm_start_counts_and_improves(rng):
    x = rng.normal(scale=2, size=10)
    g, h = GroupLasso([range(5), range(5, 10)], 10, 0.5), L1(10, 0.3)
    exact, _ = dr_prox_sum(x, 0.5, g, h, iters=2000)
    cold = DouglasRachfordProx(g, h, iters=3, warm_start=False)
    warm = DouglasRachfordProx(g, h, iters=3)
    for _ in range(20):
        zc, zw = cold(x, 0.5), warm(x, 0.5)
    assert warm.n_prox == cold.n_prox == 20 * 3 * 2
    assert np.linalg.norm(zw - exact) < np.linalg.norm(zc - exact)
    assert np.linalg.norm(zw - exact) < 1e-8
