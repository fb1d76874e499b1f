import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import perturbed_params
from rnncast.core import ModelConfig, init_params
from rnncast.data import WindowedDataset, make_windows
from rnncast.training import (DatasetTooSmallError, NumericError, OptimizerState,
                              bptt_gradients, check_gradients, mse, rmsprop_step, train)


def test_mse_examples():
    assert mse([1, 2], [1, 2]) == 0.0
    assert mse([0], [2]) == 4.0
    assert mse([1, 3], [2, 5]) == 2.5
    with pytest.raises(ValueError):
        mse([], [])


def test_mse_matches_loop():
    rng = np.random.default_rng(0)
    for _ in range(100):
        p, a = rng.normal(size=17), rng.normal(size=17)
        assert abs(mse(p, a) - oracles.mse_loop(p.tolist(), a.tolist())) <= 1e-12


def test_rmsprop_zero_gradient():
    state = OptimizerState([np.full(3, 0.5)])
    p = [np.array([1.0, -2.0, 3.0])]
    out = rmsprop_step(p, [np.zeros(3)], state)
    assert out[0].tolist() == [1.0, -2.0, 3.0]
    np.testing.assert_allclose(state.v[0], 0.45, rtol=1e-15)


def test_rmsprop_two_steps():
    state = OptimizerState([np.zeros(1)], learning_rate=0.001, rho=0.9, epsilon=1e-7)
    p1 = rmsprop_step([np.zeros(1)], [np.ones(1)], state)
    assert state.v[0][0] == pytest.approx(0.1, rel=1e-15)
    assert p1[0][0] == pytest.approx(-0.001 / (0.1 + 1e-7) ** 0.5, rel=1e-14)
    assert p1[0][0] == pytest.approx(-0.0031623, abs=5e-8)
    p2 = rmsprop_step(p1, [np.ones(1)], state)
    assert state.v[0][0] == pytest.approx(0.19, rel=1e-14)
    assert p2[0][0] - p1[0][0] == pytest.approx(-0.0022942, abs=5e-8)


def test_rmsprop_shape_mismatch():
    with pytest.raises(ValueError):
        rmsprop_step([np.zeros(2)], [np.zeros(3)], OptimizerState([np.zeros(2)]))


@settings(max_examples=40)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8), st.integers(1, 5))
def test_rmsprop_accumulator_nonnegative(gs, steps):
    g = np.array(gs)
    state = OptimizerState.zeros_like([g])
    p = [np.zeros_like(g)]
    for _ in range(steps):
        p = rmsprop_step(p, [g], state)
        assert np.all(state.v[0] >= 0)


def test_bptt_zero_dense_weights():
    cfg = ModelConfig("LSTM", (3,), 6, seed=2)
    p = perturbed_params(cfg)
    p.dense_w[:] = 0.0
    p.dense_b = 0.4
    rng = np.random.default_rng(0)
    X, y = rng.random((7, 6)), rng.random(7)
    loss, g = bptt_gradients(cfg, p, X, y)
    assert g.dense_b == pytest.approx(2 * np.mean(0.4 - y), abs=1e-15)
    for layer in g.layers:
        assert not layer.W.any() and not layer.U.any() and not layer.b.any()


@pytest.mark.parametrize("arch,hidden", [("LSTM", (2,)), ("GRU", (2,)), ("SimpleRNN", (2,)),
                                         ("StackedGRU", (2, 2)), ("StackedRNN", (2, 2))])
def test_bptt_matches_finite_differences(arch, hidden):
    cfg = ModelConfig(arch, hidden, 4, seed=7)
    p = perturbed_params(cfg, seed=1)
    rng = np.random.default_rng(4)
    report = check_gradients(cfg, p, rng.random((5, 4)), rng.random(5), fd_step=1e-5, tol=1e-4)
    assert report.passed, report.errors


def test_check_gradients_lstm_h4_w8():
    cfg = ModelConfig("LSTM", (4,), 8, seed=3)
    rng = np.random.default_rng(6)
    report = check_gradients(cfg, perturbed_params(cfg, seed=2), rng.random((6, 8)),
                             rng.random(6))
    assert report.passed, report.errors
    assert set(report.errors) == {"layer0.W", "layer0.U", "layer0.b", "dense.w", "dense.b"}


def test_check_gradients_flags_corrupted_block():
    cfg = ModelConfig("LSTM", (3,), 5, seed=3)
    p = perturbed_params(cfg)
    rng = np.random.default_rng(8)
    X, y = rng.random((4, 5)), rng.random(4)
    _, g = bptt_gradients(cfg, p, X, y)
    g.layers[0].U *= 1.10
    report = check_gradients(cfg, p, X, y, gradients=g)
    assert report.flagged == ["layer0.U"]


def test_check_gradients_guard():
    cfg = ModelConfig("LSTM", (150,), 8)
    with pytest.raises(ValueError, match="10000"):
        check_gradients(cfg, init_params(cfg), np.zeros((1, 8)), np.zeros(1))


def test_bptt_non_finite_raises():
    cfg = ModelConfig("SimpleRNN", (2,), 3)
    p = init_params(cfg)
    p.dense_b = np.inf
    with pytest.raises(NumericError):
        bptt_gradients(cfg, p, np.zeros((2, 3)), np.zeros(2), where=" (epoch 1, batch 1)")


def sine_dataset(n=300, period=50, w=8):
    t = np.arange(n)
    return make_windows(0.5 + 0.5 * np.sin(2 * np.pi * t / period), w)


def test_train_reduces_loss_on_sine():
    cfg = ModelConfig("LSTM", (16,), 8, seed=0, epochs=200)
    _, report = train(cfg, sine_dataset())
    assert len(report.train_loss) == len(report.val_loss) == 200
    assert report.train_loss[-1] <= 0.1 * report.train_loss[0]
    assert all(np.isfinite(report.train_loss)) and all(np.isfinite(report.val_loss))


def test_train_is_deterministic():
    cfg = ModelConfig("GRU", (8,), 8, seed=5, epochs=5)
    ds = sine_dataset()
    p1, r1 = train(cfg, ds)
    p2, r2 = train(cfg, ds)
    assert r1.train_loss == r2.train_loss and r1.val_loss == r2.val_loss
    for (_, a), (_, b) in zip(p1.arrays(), p2.arrays()):
        assert a.tobytes() == b.tobytes()


def test_train_shuffle_is_seeded():
    ds = sine_dataset()
    cfg = ModelConfig("SimpleRNN", (4,), 8, seed=5, epochs=3, shuffle=True)
    assert train(cfg, ds)[1].train_loss == train(cfg, ds)[1].train_loss
    plain = ModelConfig("SimpleRNN", (4,), 8, seed=5, epochs=3)
    assert train(cfg, ds)[1].train_loss != train(plain, ds)[1].train_loss


def test_train_validation_tail_is_chronological():
    ds = sine_dataset()
    cfg = ModelConfig("SimpleRNN", (4,), 8, seed=1, epochs=1)
    _, report = train(cfg, ds)
    assert report.n_val == round(len(ds) * 0.1) and report.n_train + report.n_val == len(ds)


def test_validation_does_not_touch_weights():
    # same training windows, different held-out tail: identical weights
    ds = sine_dataset()
    cfg = ModelConfig("LSTM", (4,), 8, seed=1, epochs=2)
    n_val = round(len(ds) * 0.1)
    other = WindowedDataset(ds.inputs.copy(), ds.targets.copy(), 8)
    other.targets[-n_val:] += 5.0
    p1, r1 = train(cfg, ds)
    p2, r2 = train(cfg, other)
    assert r1.train_loss == r2.train_loss and r1.val_loss != r2.val_loss
    for (_, a), (_, b) in zip(p1.arrays(), p2.arrays()):
        assert a.tobytes() == b.tobytes()


def test_train_too_small():
    ds = make_windows(np.linspace(0, 1, 17), 8)
    with pytest.raises(DatasetTooSmallError):
        train(ModelConfig("LSTM", (2,), 8), ds)


def test_train_clip_norm_runs():
    cfg = ModelConfig("SimpleRNN", (4,), 8, seed=0, epochs=2, clip_norm=0.01)
    _, report = train(cfg, sine_dataset())
    assert len(report.train_loss) == 2
