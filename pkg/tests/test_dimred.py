import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from ldavae.dimred import ProjectionError, conditional_probabilities, pca_project, sign_fix, tsne_project
from oracles import cluster_agreement, two_means


def test_pca_collinear_points():
    t = np.linspace(-2, 3, 11)
    with pytest.warns(RuntimeWarning, match="degenerate"):
        p = pca_project(np.column_stack([t, t]))
    np.testing.assert_allclose(p.meta["components"][0], np.ones(2) / np.sqrt(2), atol=1e-12)
    assert abs(p.meta["explained_variance"][1]) <= 1e-12


def test_pca_matches_dense_eigen_oracle():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 6)) @ rng.normal(size=(6, 6))
    p = pca_project(X)
    Xc = X - X.mean(axis=0)
    vals, vecs = np.linalg.eigh(Xc.T @ Xc / (len(X) - 1))
    top = sign_fix(vecs[:, ::-1][:, :2].T)
    np.testing.assert_allclose(p.meta["explained_variance"], vals[::-1][:2], rtol=1e-8)
    np.testing.assert_allclose(p.meta["components"], top, atol=1e-8)
    np.testing.assert_allclose(p.points, Xc @ top.T, atol=1e-8)


def test_pca_isotropic_cloud_variances_agree():
    X = np.random.default_rng(1).normal(size=(10_000, 2))
    v = pca_project(X - X.mean(axis=0)).meta["explained_variance"]
    assert v[1] >= 0.9 * v[0]


matrices = hnp.arrays(np.float64, st.tuples(st.integers(3, 12), st.integers(2, 5)),
                      elements=st.floats(-10, 10))


@settings(max_examples=60)
@given(matrices, st.floats(-100, 100))
def test_pca_orthonormal_and_translation_invariant(X, shift):
    if np.linalg.svd(X - X.mean(0), compute_uv=False)[1] < 1e-3:
        return  # the second direction is not identifiable
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = pca_project(X)
        b = pca_project(X + shift)
    C = a.meta["components"]
    np.testing.assert_allclose(C @ C.T, np.eye(2), atol=1e-10)
    np.testing.assert_allclose(a.points, b.points, atol=1e-10)
    assert a.meta["explained_variance"][0] >= a.meta["explained_variance"][1]


def test_pca_errors():
    with pytest.raises(ProjectionError):
        pca_project(np.ones((1, 3)))
    with pytest.raises(ProjectionError):
        pca_project(np.ones((4, 1)))


def _two_blobs(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 10))
    X[n // 2:] += 10.0
    return X, np.repeat([0, 1], n // 2)


@pytest.fixture(scope="module")
def blob_tsne():
    X, y = _two_blobs()
    return X, y, tsne_project(X, perplexity=30, iterations=500, seed=0)


def test_tsne_separates_blobs_and_reduces_kl(blob_tsne):
    X, y, proj = blob_tsne
    traj = proj.meta["kl_trajectory"]
    assert proj.meta["kl"] >= 0 and np.all(traj >= 0)
    assert proj.meta["kl"] < traj[0]
    assert cluster_agreement(two_means(proj.points), y) >= 0.95
    assert proj.points.shape == (len(X), 2)


def test_bandwidth_search_hits_target_entropy(blob_tsne):
    X, _, proj = blob_tsne
    np.testing.assert_array_less(np.abs(proj.meta["entropy"] - np.log(30)), 1e-5)
    P, H = conditional_probabilities(X[:50], 7.5)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.diag(P) == 0)
    np.testing.assert_array_less(np.abs(H - np.log(7.5)), 1e-5)


def test_tsne_deterministic_per_seed():
    X, _ = _two_blobs(40, 3)
    a = tsne_project(X, perplexity=5, iterations=100, seed=2)
    b = tsne_project(X, perplexity=5, iterations=100, seed=2)
    np.testing.assert_array_equal(a.points, b.points)


def test_tsne_errors():
    X = np.random.default_rng(0).normal(size=(10, 3))
    with pytest.raises(ProjectionError):
        tsne_project(X[:3], perplexity=2)
    with pytest.raises(ProjectionError):
        tsne_project(X, perplexity=10)
    with pytest.raises(ProjectionError):
        tsne_project(X, perplexity=9.5)


def test_projection_exports():
    p = pca_project(np.random.default_rng(0).normal(size=(5, 3)))
    lines = p.to_csv([1, 0, 1, 1, 0]).splitlines()
    assert lines[0] == "x,y,label" and len(lines) == 6 and lines[1].endswith(",1")
    blob = json.loads(p.to_json())
    assert blob["method"] == "pca" and len(blob["points"]) == 5
    assert set(blob["meta"]) >= {"components", "explained_variance"}
