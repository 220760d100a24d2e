import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldavae.features import (KINDS, ClassifierError, FeatureMatrix, concat_features, fit_classifier,
                             load_classifier, load_features_csv, RandomForest, save_classifier,
                             save_features_csv)


def _blobs(n_per_class, seed):
    # unit-variance 2-D blobs whose centres sit 4 sigma either side of the boundary
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n_per_class, 2)) + [-4.0, 0.0],
                   rng.normal(size=(n_per_class, 2)) + [4.0, 0.0]])
    y = np.repeat([0, 1], n_per_class)
    return X, y


@pytest.fixture(scope="module")
def blob_split():
    return _blobs(500, 0), _blobs(200, 1)


@pytest.mark.parametrize("kind", KINDS)
def test_every_classifier_separates_blobs(kind, blob_split):
    (X, y), (Xt, yt) = blob_split
    model = fit_classifier(kind, X, y, seed=0)
    labels, scores = model.predict(Xt)
    assert np.mean(labels == yt) >= 0.95
    assert set(np.unique(labels)) <= {0, 1}
    if kind != "SVM":
        assert np.all((scores >= 0) & (scores <= 1))


def test_concat_examples():
    phi = np.array([[0.3, 0.7], [1.0, 0.0]])
    fm = concat_features(np.arange(6.0).reshape(2, 3), phi)
    assert fm.values.shape == (2, 5) and fm.n_vae == 3 and fm.n_lda == 2
    zero = concat_features(np.zeros((2, 3)), phi)
    np.testing.assert_array_equal(zero.values[1], [0, 0, 0, 1.0, 0.0])
    np.testing.assert_array_equal(zero.lda, phi)
    with pytest.raises(ClassifierError):
        concat_features(np.zeros((3, 3)), phi)
    with pytest.raises(ClassifierError):
        concat_features(np.zeros((2, 3)), [[0.5, 0.4], [1.0, 0.0]])


def test_lr_two_separable_points():
    X, y = np.array([[-1.0], [1.0]]), np.array([0, 1])
    m = fit_classifier("LR", X, y)
    np.testing.assert_array_equal(m.predict(X)[0], y)


def test_knn_memorizes_training_points():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 4))
    y = rng.integers(0, 2, 60)
    y[:2] = [0, 1]
    m = fit_classifier("KNN", X, y, hyper={"k": 1})
    np.testing.assert_array_equal(m.predict(X)[0], y)


def test_nb_boundary_at_zero_for_symmetric_classes():
    X = np.array([[-1.5], [-1.0], [-0.5], [0.5], [1.0], [1.5]])
    y = np.array([0, 0, 0, 1, 1, 1])
    m = fit_classifier("NB", X, y)
    _, s = m.predict(np.array([[-1e-3], [0.0], [1e-3]]))
    assert s[0] < 0.5 < s[2]
    assert s[1] == pytest.approx(0.5, abs=1e-12)


def test_rf_single_class_predicts_constant():
    X = np.random.default_rng(0).normal(size=(20, 3))
    rf = RandomForest(seed=0, n_trees=5).fit(X, np.ones(20, dtype=int))
    labels, scores = rf.predict(np.random.default_rng(1).normal(size=(7, 3)))
    assert labels.tolist() == [1] * 7 and np.all(scores == 1.0)
    with pytest.raises(ClassifierError):
        fit_classifier("RF", X, np.zeros(20, dtype=int))


def test_lr_tie_breaks_to_fake():
    m = fit_classifier("LR", np.array([[-1.0], [1.0]]), np.array([0, 1]))
    m.w[:] = 0.0
    m.b = 0.0
    labels, scores = m.predict(np.array([[3.0]]))
    assert scores[0] == 0.5 and labels[0] == 1


def test_dimension_and_input_errors():
    X, y = _blobs(10, 0)
    m = fit_classifier("KNN", X, y)
    with pytest.raises(ClassifierError):
        m.predict(np.zeros((2, 3)))
    with pytest.raises(ClassifierError):
        fit_classifier("XGB", X, y)
    with pytest.raises(ClassifierError):
        fit_classifier("LR", X, np.full(len(y), 2))
    with pytest.raises(ClassifierError):
        fit_classifier("LR", np.full_like(X, np.nan), y)


@pytest.mark.parametrize("kind", ["RF", "MLP"])
def test_seed_determinism(kind):
    X, y = _blobs(60, 3)
    a = fit_classifier(kind, X, y, seed=5).predict(X)[1]
    b = fit_classifier(kind, X, y, seed=5).predict(X)[1]
    np.testing.assert_array_equal(a, b)


@settings(max_examples=25)
@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_knn_invariant_to_positive_scaling(c, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] + 0.3 * rng.normal(size=40) > 0).astype(int)
    y[:2] = [0, 1]
    Q = rng.normal(size=(15, 3))
    a = fit_classifier("KNN", X, y).predict(Q)[0]
    b = fit_classifier("KNN", c * X, y).predict(c * Q)[0]
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("kind", KINDS)
def test_classifier_persistence_round_trip(kind, tmp_path):
    X, y = _blobs(30, 4)
    hyper = {"n_trees": 5} if kind == "RF" else {"epochs": 5} if kind in ("MLP", "LR", "SVM") else None
    m = fit_classifier(kind, X, y, hyper=hyper, seed=1)
    save_classifier(m, tmp_path / "m.json")
    back = load_classifier(tmp_path / "m.json")
    assert back.kind == kind
    np.testing.assert_array_equal(back.predict(X)[1], m.predict(X)[1])


def test_features_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    phi = rng.dirichlet(np.ones(3), size=4)
    fm = concat_features(rng.normal(size=(4, 2)), phi)
    save_features_csv(tmp_path / "f.csv", fm, np.array([1, 0, 0, 1]))
    header = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert header == "vae_0,vae_1,lda_0,lda_1,lda_2,label"
    back, labels = load_features_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.values, fm.values)
    assert (back.n_vae, back.n_lda) == (2, 3) and labels.tolist() == [1, 0, 0, 1]
    assert isinstance(back, FeatureMatrix)
