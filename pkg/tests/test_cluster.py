import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ctgraph.cluster import ClusterModel, assign, fit_clusters, load_clusters, objective, save_clusters, structural_features


def _blobs(rng, n=40):
    lab = np.arange(n) % 2
    x = rng.normal(0, 0.3, size=(n, 2)) + np.where(lab[:, None] == 1, 5.0, -5.0)
    return x, lab


def test_single_cluster_is_weighted_mean(rng):
    x = rng.normal(size=(12, 3))
    w = rng.uniform(0.5, 2.0, size=12)
    m = fit_clusters(x, 1, weights=w)
    assert np.all(m.assignment == 0)
    np.testing.assert_allclose(m.centroids[0], (w[:, None] * x).sum(0) / w.sum(), atol=1e-12)


def test_blobs_recovered_and_locally_optimal(rng):
    x, lab = _blobs(rng)
    m = fit_clusters(x, 2, seed=3)
    same = np.array_equal(m.assignment, lab) or np.array_equal(m.assignment, 1 - lab)
    assert same
    w = np.ones(len(x))
    best = objective(x, w, m.centroids, m.assignment)
    # flipping any single point to the other cluster (with refit means) never helps
    for i in range(len(x)):
        a = m.assignment.copy()
        a[i] = 1 - a[i]
        cents = np.stack([x[a == j].mean(0) for j in range(2)])
        assert objective(x, w, cents, a) > best


def test_k_equals_n_zero_objective(rng):
    x = rng.normal(size=(7, 2))
    m = fit_clusters(x, 7)
    assert sorted(m.assignment.tolist()) == list(range(7))
    assert objective(x, np.ones(7), m.centroids, m.assignment) == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("k", [0, 8])
def test_invalid_k(k):
    with pytest.raises(ValueError):
        fit_clusters(np.zeros((7, 2)), k)


def test_nonpositive_weights():
    with pytest.raises(ValueError):
        fit_clusters(np.zeros((3, 2)), 1, weights=np.array([1.0, 0.0, 1.0]))


def test_deterministic_given_seed(rng):
    x = rng.normal(size=(50, 3))
    a, b = fit_clusters(x, 4, seed=9), fit_clusters(x, 4, seed=9)
    assert np.array_equal(a.assignment, b.assignment) and np.array_equal(a.centroids, b.centroids)


def test_objective_trace_non_increasing(rng):
    m = fit_clusters(rng.normal(size=(80, 2)), 5, seed=1)
    assert np.all(np.diff(m.objective_trace) <= 1e-9)


def test_assign_exact_centroid_and_tie():
    m = ClusterModel(np.array([[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]), np.zeros(1, np.int64))
    assert assign(m, np.array([5.0, 5.0])) == 2
    assert assign(m, np.array([1.0, 0.0])) == 0


def test_assign_held_out_sample(rng):
    x, lab = _blobs(rng)
    m = fit_clusters(x, 2, seed=0)
    probe = rng.normal(0, 0.3, size=(10, 2)) + 5.0
    d = ((probe[:, None] - m.centroids[None]) ** 2).sum(-1)
    assert np.array_equal(assign(m, probe), d.argmin(1))
    assert np.all(assign(m, probe) == m.assignment[lab == 1][0])


def test_assign_wrong_width():
    m = ClusterModel(np.zeros((2, 3)), np.zeros(1, np.int64))
    with pytest.raises(ValueError):
        assign(m, np.zeros(2))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (15, 2), elements=st.floats(-10, 10)), st.integers(1, 5), st.integers(0, 100))
def test_fit_invariants(x, k, seed):
    m = fit_clusters(x, k, seed=seed)
    assert m.assignment.min() >= 0 and m.assignment.max() < k
    for j in range(k):
        members = x[m.assignment == j]
        if len(members):
            np.testing.assert_allclose(m.centroids[j], members.mean(0), atol=1e-9)


def test_save_load(tmp_path, rng):
    m = fit_clusters(rng.normal(size=(20, 2)), 3)
    save_clusters(tmp_path / "c", m)
    back = load_clusters(tmp_path / "c")
    assert np.array_equal(back.assignment, m.assignment) and np.array_equal(back.centroids, m.centroids)


def test_structural_features():
    f = structural_features(3, np.array([0, 0]), np.array([1, 1]), np.array([0.0, 21600.0]))
    np.testing.assert_allclose(f[0], [np.log(3.0), 0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(f[2], [0.0, 0.0, 0.0])
