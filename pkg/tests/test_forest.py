"""Regression forest: determinism, serialization byte-identity, fit quality."""
import numpy as np
import pytest

from segalloc import forest
from segalloc.forest import (LinearQualityModel, QualityRegressionForest,
                             SchemaMismatchError, load_model, model_from_dict,
                             model_to_dict, predict_scores, save_model)


def regression_data(n=300, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 9))
    # smooth monotone target of two columns, within [0, 1]
    y = np.clip(0.6 * X[:, 2] + 0.4 * X[:, 7], 0.0, 1.0)
    keys = [f"k{i:04d}" for i in range(n)]
    return X, y, keys


def test_fit_learns_smooth_target():
    X, y, keys = regression_data()
    m = QualityRegressionForest(seed=0)
    m.fit(X, y, keys=keys)
    rng = np.random.default_rng(1)
    Xt = rng.random((200, 9))
    yt = np.clip(0.6 * Xt[:, 2] + 0.4 * Xt[:, 7], 0.0, 1.0)
    pred = m.predict(Xt)
    assert np.abs(pred - yt).mean() < 0.08
    assert np.corrcoef(pred, yt)[0, 1] > 0.95


def test_predictions_clipped_to_unit_interval():
    X, y, keys = regression_data(100)
    m = QualityRegressionForest(seed=0)
    m.fit(X, y * 0.0 + 1.0, keys=keys)  # constant label 1
    assert (m.predict(np.random.default_rng(2).random((50, 9))) <= 1.0).all()
    m.fit(X, y * 0.0, keys=keys)
    assert (m.predict(np.random.default_rng(3).random((50, 9))) >= 0.0).all()


def test_single_sample_predict_is_scalar():
    X, y, keys = regression_data(60)
    m = QualityRegressionForest(seed=0)
    m.fit(X, y, keys=keys)
    one = m.predict(X[0])
    assert np.ndim(one) == 0
    assert float(one) == m.predict(X[:1])[0]


def test_mtry_default_is_third_of_features():
    X, y, keys = regression_data(60)
    m = QualityRegressionForest(seed=0)
    m.fit(X, y, keys=keys)
    assert m.mtry_ == 3  # ceil(9 / 3)


def test_seed_determinism_and_input_order_invariance(tmp_path):
    X, y, keys = regression_data(150, seed=4)
    a = QualityRegressionForest(seed=11)
    a.fit(X, y, keys=keys)
    b = QualityRegressionForest(seed=11)
    b.fit(X, y, keys=keys)
    perm = np.random.default_rng(5).permutation(len(y))
    c = QualityRegressionForest(seed=11)
    c.fit(X[perm], y[perm], keys=[keys[i] for i in perm])
    save_model(a, tmp_path / "a.json")
    save_model(b, tmp_path / "b.json")
    save_model(c, tmp_path / "c.json")
    ba = (tmp_path / "a.json").read_bytes()
    assert ba == (tmp_path / "b.json").read_bytes()
    assert ba == (tmp_path / "c.json").read_bytes()
    d = QualityRegressionForest(seed=12)
    d.fit(X, y, keys=keys)
    save_model(d, tmp_path / "d.json")
    assert ba != (tmp_path / "d.json").read_bytes()


def test_json_roundtrip_preserves_predictions(tmp_path):
    X, y, keys = regression_data(120, seed=6)
    m = QualityRegressionForest(seed=0)
    m.fit(X, y, keys=keys)
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    Xt = np.random.default_rng(7).random((80, 9))
    assert (back.predict(Xt) == m.predict(Xt)).all()
    save_model(back, tmp_path / "m2.json")
    assert path.read_bytes() == (tmp_path / "m2.json").read_bytes()


def test_model_dict_format_tag():
    X, y, keys = regression_data(60)
    m = QualityRegressionForest(seed=0)
    m.fit(X, y, keys=keys)
    d = model_to_dict(m)
    assert d["format"] == forest.MODEL_FORMAT
    assert d["prng"] == forest.PRNG_NAME
    d["format"] = "something-else"
    with pytest.raises(ValueError):
        model_from_dict(d)


def test_schema_mismatch_refused():
    X, y, keys = regression_data(60)
    m = QualityRegressionForest(seed=0, feature_schema="mask-v1")
    m.fit(X, y, keys=keys)
    with pytest.raises(SchemaMismatchError):
        predict_scores(m, X, schema="mask-v2")
    assert predict_scores(m, X, schema="mask-v1").shape == (60,)


def test_fit_input_validation():
    X, y, keys = regression_data(60)
    m = QualityRegressionForest(seed=0, min_leaf=5)
    with pytest.raises(ValueError):
        m.fit(X[:6], y[:6], keys=keys[:6])  # fewer than 2 * min_leaf
    with pytest.raises(ValueError):
        m.fit(X, y, keys=["dup"] * len(y))
    bad = y.copy()
    bad[0] = np.nan
    with pytest.raises(ValueError):
        m.fit(X, bad, keys=keys)


def test_unfitted_predict_raises():
    with pytest.raises(Exception):
        QualityRegressionForest().predict(np.zeros((2, 9)))


def test_get_params_roundtrip():
    m = QualityRegressionForest(n_trees=7, min_leaf=3, seed=5)
    p = m.get_params()
    assert p["n_trees"] == 7 and p["min_leaf"] == 3 and p["seed"] == 5
    m2 = QualityRegressionForest(**p)
    assert m2.get_params() == p


# --- linear baseline -------------------------------------------------------

def test_linear_recovers_linear_function():
    rng = np.random.default_rng(8)
    X = rng.random((100, 9))
    w = np.linspace(0.02, 0.1, 9)
    y = X @ w  # stays inside [0, 1]
    m = LinearQualityModel()
    m.fit(X, y)
    assert np.abs(m.predict(X) - y).max() < 1e-6


def test_linear_needs_ten_examples():
    rng = np.random.default_rng(9)
    with pytest.raises(ValueError):
        LinearQualityModel().fit(rng.random((9, 9)), rng.random(9))


def test_linear_clips_predictions():
    rng = np.random.default_rng(10)
    X = rng.random((50, 9))
    y = np.clip(3.0 * X[:, 0] - 1.0, 0.0, 1.0)
    m = LinearQualityModel()
    m.fit(X, y)
    p = m.predict(np.eye(9) * 10.0)
    assert (p >= 0.0).all() and (p <= 1.0).all()
