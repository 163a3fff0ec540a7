import itertools

import numpy as np
import pytest

from sing import matching
from sing.matching import (
    chordal_distance, chordal_matrix, greedy_match, joint_rank_test, permutation_null,
    reorder_by_match,
)


def test_chordal_distance_cases(rng):
    x = rng.standard_normal(5)
    assert chordal_distance(x, x) == pytest.approx(0, abs=1e-14)
    assert chordal_distance(x, -2 * x) == pytest.approx(0, abs=1e-14)
    assert chordal_distance([1, 0], [0, 1]) == 2
    with pytest.raises(ValueError):
        chordal_distance([0, 0], [1, 0])


def test_chordal_distance_is_projector_distance(rng):
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    Px = np.outer(x, x) / (x @ x)
    Py = np.outer(y, y) / (y @ y)
    assert chordal_distance(x, y) == pytest.approx(np.sum((Px - Py) ** 2))
    assert chordal_matrix(x[:, None], y[:, None])[0, 0] == pytest.approx(chordal_distance(x, y))


def test_identical_matrices_match_identically(rng):
    M = rng.standard_normal((10, 3))
    pairs, dist = greedy_match(M, M)
    assert sorted(map(tuple, pairs)) == [(0, 0), (1, 1), (2, 2)]
    assert np.allclose(dist, 0)


def test_permuted_and_flipped_columns(rng):
    Mx = rng.standard_normal((12, 4))
    perm = [2, 0, 3, 1]
    My = Mx[:, perm] * np.array([1, -1, -1, 1])
    pairs, dist = greedy_match(Mx, My)
    for i, j in pairs:
        assert perm[j] == i
    assert np.allclose(dist, 0, atol=1e-12)


def _min_first_bruteforce(D):
    """Among all pairings, the lexicographically smallest sorted distance profile."""
    best = None
    for perm in itertools.permutations(range(D.shape[1])):
        prof = sorted(D[i, j] for i, j in enumerate(perm))
        if best is None or prof < best[0]:
            best = (prof, perm)
    return best


def test_greedy_equals_exhaustive_min_first(rng):
    for seed in range(20):
        r = np.random.default_rng(seed)
        shared = r.standard_normal(8)
        Mx = np.column_stack([shared, r.standard_normal((8, 2))])
        My = np.column_stack([r.standard_normal((8, 2)), shared + 0.05 * r.standard_normal(8)])
        pairs, dist = greedy_match(Mx, My)
        prof, perm = _min_first_bruteforce(chordal_matrix(Mx, My))
        assert np.allclose(dist, prof)
        assert all(perm[i] == j for i, j in pairs)


def test_greedy_distances_non_decreasing(rng):
    _, dist = greedy_match(rng.standard_normal((9, 5)), rng.standard_normal((9, 3)))
    assert len(dist) == 3
    assert np.all(np.diff(dist) >= 0)


def test_reorder_by_match():
    pairs = np.array([[2, 0], [0, 1]])
    ox, oy = reorder_by_match(np.zeros((3, 3)), np.zeros((3, 4)), pairs)
    assert list(ox) == [2, 0, 1]
    assert list(oy) == [0, 1, 2, 3]


def planted_pair(seed, n=48, k_shared=2, rx=6, ry=7):
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal((n, k_shared))
    Mx = np.column_stack([shared, rng.standard_normal((n, rx - k_shared))])
    My = np.column_stack([rng.standard_normal((n, ry - k_shared)), shared])
    return Mx[:, rng.permutation(rx)], My[:, rng.permutation(ry)]


def test_joint_rank_planted_two():
    hits = sum(joint_rank_test(*planted_pair(s), T=200, alpha=0.01, seed=s).r_J == 2
               for s in range(20))
    assert hits >= 18


def test_joint_rank_null():
    zeros = 0
    for s in range(40):
        rng = np.random.default_rng(1000 + s)
        zeros += joint_rank_test(rng.standard_normal((48, 5)), rng.standard_normal((48, 5)),
                                 T=200, alpha=0.01, seed=s).r_J == 0
    assert zeros >= 38


def test_all_distances_above_null_give_p_one(rng, monkeypatch):
    monkeypatch.setattr(matching, "permutation_null", lambda Mx, My, T, seed: np.zeros(T))
    res = matching.joint_rank_test(rng.standard_normal((8, 2)), rng.standard_normal((8, 2)), T=100)
    assert np.all(res.p_values == 1)
    assert res.r_J == 0


def test_permutation_null_deterministic(rng):
    Mx, My = planted_pair(1)
    assert np.array_equal(permutation_null(Mx, My, 50, 3), permutation_null(Mx, My, 50, 3))


def test_joint_rank_validation(rng):
    M = rng.standard_normal((10, 2))
    with pytest.raises(ValueError):
        joint_rank_test(M, M, T=10)
    with pytest.raises(ValueError):
        joint_rank_test(M, M, alpha=1.0)
    with pytest.raises(ValueError):
        joint_rank_test(np.column_stack([M, np.ones(10)]), M)
