"""Smoke tests for the python bindings: shapes, a few exact values, and the
save/load round trip. The heavy numerical checks live in the C++ suites."""

import math

import numpy as np
import pytest

import sgcn_lstm as sg


@pytest.fixture(scope="module")
def dataset():
    return sg.generate_synthetic(nodes=6, timesteps=240, seed=11)


def test_generate_synthetic_shapes(dataset):
    speeds = dataset["speeds"]
    edges = dataset["edges"]
    assert speeds.shape == (240, 6)
    assert speeds.dtype == np.float64
    assert (speeds >= 0.0).all()
    assert edges.ndim == 2 and edges.shape[1] == 3
    assert len(dataset["node_ids"]) == 6


def test_generate_synthetic_is_seeded():
    a = sg.generate_synthetic(nodes=5, timesteps=150, seed=3)["speeds"]
    b = sg.generate_synthetic(nodes=5, timesteps=150, seed=3)["speeds"]
    c = sg.generate_synthetic(nodes=5, timesteps=150, seed=4)["speeds"]
    assert (a == b).all()
    assert (a != c).any()


def test_normalized_adjacency_matches_hand_value():
    # Single unit edge: D_hat = diag(2, 2), every entry 1/2.
    edges = np.array([[0.0, 1.0, 1.0]])
    n = sg.normalized_adjacency(edges, num_nodes=2)
    assert n.shape == (2, 2)
    assert np.allclose(n, 0.5, atol=1e-15)
    assert (n == n.T).all()


def test_normalized_adjacency_rejects_bad_input():
    with pytest.raises(sg.DimensionError):
        sg.normalized_adjacency(np.zeros((2, 2)))
    with pytest.raises(sg.ValidationError):
        sg.normalized_adjacency(np.array([[0.0, 1.0, -0.5]]))


def test_combined_loss_hand_value():
    loss, grad = sg.combined_loss(np.array([2.0]), np.array([0.0]), alpha=0.7)
    assert loss == pytest.approx(2.6, abs=1e-15)
    assert grad.shape == (1,)
    assert grad[0] == pytest.approx(1.9, abs=1e-15)


def test_compute_metrics_dict():
    m = sg.compute_metrics(np.array([0.0, 2.0]), np.array([1.0, 1.0]))
    assert m["mae"] == pytest.approx(1.0)
    assert m["mse"] == pytest.approx(1.0)
    assert m["rmse"] == pytest.approx(1.0)
    assert m["n_samples"] == 2
    assert m["mape"] == pytest.approx(100.0)
    assert m["mape_excluded"] == 0


def test_compute_metrics_undefined_mape_maps_to_none():
    m = sg.compute_metrics(np.array([1.0]), np.array([0.0]))
    assert m["mape"] is None


def test_model_fit_predict_and_round_trip(dataset, tmp_path):
    speeds = dataset["speeds"]
    edges = dataset["edges"]
    model = sg.Model(edges, h_g=8, h_l=8, seed=5)
    assert model.num_nodes == 6

    cfg = sg.TrainConfig()
    cfg.max_epochs = 2
    cfg.batch_size = 32
    cfg.seed = 5
    history = model.fit(speeds, seq_len=2, config=cfg)
    assert history["epochs"] == 2
    assert len(history["train_loss"]) == 2
    assert history["stop_reason"] == "max-epochs"
    assert math.isfinite(history["best_val_loss"])
    assert history["test"]["mae"] > 0.0
    assert history["persistence"]["mae"] > 0.0

    forecasts = model.predict_series(speeds)
    assert forecasts.shape == (240 - 2 + 1 - 1, 6)
    assert np.isfinite(forecasts).all()

    path = str(tmp_path / "model.sgcn")
    model.save(path)
    back = sg.Model.load(path, edges)
    assert back.h_g == 8 and back.seq_len == 2
    assert (back.predict_series(speeds) == forecasts).all()


def test_predict_series_requires_a_fitted_scaler(dataset):
    model = sg.Model(dataset["edges"], h_g=4, h_l=4, seed=1)
    with pytest.raises(sg.ValidationError):
        model.predict_series(dataset["speeds"])


def test_exceptions_inherit_from_base_error():
    for exc in (
        sg.ValidationError,
        sg.DimensionError,
        sg.ParseError,
        sg.IoError,
        sg.NumericError,
        sg.IndexError,
    ):
        assert issubclass(exc, sg.Error)
