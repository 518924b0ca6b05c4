import math

import numpy as np
import pytest

from aecrack.errors import (
    ConfigMismatchError,
    DimensionMismatchError,
    RowNotNormalizedError,
    UnlabeledDataError,
)
from aecrack.nn import (
    BiLSTMClassifier,
    BiLSTMLayer,
    EarlyStopper,
    LSTMCellParams,
    TrainConfig,
    bilstm_forward,
    bptt_gradients,
    cross_entropy,
    init_model,
    lstm_forward,
    model_forward,
    one_hot,
    predict,
    relu,
    sgdm_step,
    softmax,
    train,
)


def zero_cell(hidden, input_size):
    return LSTMCellParams(W=np.zeros((4 * hidden, input_size)),
                          V=np.zeros((4 * hidden, hidden)),
                          b=np.zeros(4 * hidden))


def random_cell(rng, hidden, input_size, scale=0.5):
    return LSTMCellParams(
        W=scale * rng.standard_normal((4 * hidden, input_size)),
        V=scale * rng.standard_normal((4 * hidden, hidden)),
        b=scale * rng.standard_normal(4 * hidden),
    )


def scalar_lstm_trace(cell, xs):
    """Independent scalar reference for hidden = input = 1."""
    wi, wf, wo, wc = (float(cell.gate(g, "W")[0, 0]) for g in "ifoc")
    vi, vf, vo, vc = (float(cell.gate(g, "V")[0, 0]) for g in "ifoc")
    bi, bf, bo, bc = (float(cell.gate(g, "b")[0]) for g in "ifoc")
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    h = c = 0.0
    out = []
    for x in xs:
        i = sig(wi * x + vi * h + bi)
        f = sig(wf * x + vf * h + bf)
        o = sig(wo * x + vo * h + bo)
        g = math.tanh(wc * x + vc * h + bc)
        c = f * c + i * g
        h = o * math.tanh(c)
        out.append(h)
    return np.array(out)


class TestLSTMForward:
    def test_zero_weights_zero_output(self):
        cell = zero_cell(3, 2)
        out = lstm_forward(cell, np.ones((5, 2)))
        assert out.shape == (5, 3)
        assert np.all(out == 0.0)

    def test_scalar_hand_trace(self, rng):
        cell = random_cell(rng, 1, 1)
        xs = [0.3, -1.2]
        out = lstm_forward(cell, np.array(xs)[:, None])
        expected = scalar_lstm_trace(cell, xs)
        assert np.abs(out[:, 0] - expected).max() < 1e-12

    def test_backward_on_palindrome_reverses_forward(self, rng):
        cell = random_cell(rng, 3, 2)
        half = rng.standard_normal((4, 2))
        xs = np.concatenate([half, half[::-1]])
        fwd = lstm_forward(cell, xs, "forward")
        bwd = lstm_forward(cell, xs, "backward")
        assert np.abs(bwd - fwd[::-1]).max() < 1e-12

    def test_dimension_mismatch(self, rng):
        cell = random_cell(rng, 2, 3)
        with pytest.raises(DimensionMismatchError):
            lstm_forward(cell, np.ones((4, 2)))

    def test_bad_direction(self, rng):
        with pytest.raises(ValueError):
            lstm_forward(random_cell(rng, 2, 2), np.ones((4, 2)), "sideways")


class TestBiLSTM:
    def test_zero_weights_shape(self):
        layer = BiLSTMLayer(forward_cell=zero_cell(3, 2), backward_cell=zero_cell(3, 2))
        out = bilstm_forward(layer, np.ones((6, 2)))
        assert out.shape == (6, 6)
        assert np.all(out == 0.0)
        assert layer.output_size == 6

    def test_hidden_one_width_two(self, rng):
        layer = BiLSTMLayer(forward_cell=random_cell(rng, 1, 2),
                            backward_cell=random_cell(rng, 1, 2))
        assert bilstm_forward(layer, np.ones((4, 2))).shape == (4, 2)

    def test_swapping_cells_swaps_halves(self, rng):
        a = random_cell(rng, 3, 2)
        b = random_cell(rng, 3, 2)
        xs = rng.standard_normal((7, 2))
        out = bilstm_forward(BiLSTMLayer(forward_cell=a, backward_cell=b), xs)
        swapped = bilstm_forward(BiLSTMLayer(forward_cell=b, backward_cell=a),
                                 xs[::-1])[::-1]
        assert np.abs(out[:, :3] - swapped[:, 3:]).max() < 1e-12
        assert np.abs(out[:, 3:] - swapped[:, :3]).max() < 1e-12

    def test_matches_composed_directions(self, rng):
        layer = BiLSTMLayer(forward_cell=random_cell(rng, 4, 3),
                            backward_cell=random_cell(rng, 4, 3))
        xs = rng.standard_normal((9, 3))
        out = bilstm_forward(layer, xs)
        fwd = lstm_forward(layer.forward_cell, xs, "forward")
        bwd = lstm_forward(layer.backward_cell, xs, "backward")
        assert np.abs(out - np.concatenate([fwd, bwd], axis=1)).max() == 0.0


class TestActivations:
    def test_relu_cases(self):
        assert np.array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
        assert np.all(relu(-np.ones(5)) == 0.0)

    def test_relu_idempotent(self, rng):
        v = rng.standard_normal(100)
        assert np.array_equal(relu(relu(v)), relu(v))

    def test_softmax_uniform(self):
        assert np.allclose(softmax(np.zeros(3)), 1.0 / 3.0, atol=1e-15)

    def test_softmax_shift_invariance(self, rng):
        a = rng.standard_normal(5)
        assert np.abs(softmax(a) - softmax(a + 123.456)).max() < 1e-12

    def test_softmax_large_logits_no_overflow(self):
        with np.errstate(over="raise"):
            p = softmax(np.array([1000.0, 0.0, 0.0]))
        assert p[0] == pytest.approx(1.0, abs=1e-15)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_softmax_rows(self, rng):
        p = softmax(rng.standard_normal((10, 3)))
        assert np.abs(p.sum(axis=1) - 1.0).max() < 1e-12
        assert np.all((p > 0) & (p < 1))


class TestCrossEntropy:
    def test_perfect_prediction_zero(self):
        t = one_hot(np.array([0, 1, 2]))
        assert cross_entropy(t, t) == 0.0

    def test_uniform_is_ln3(self):
        p = np.full((4, 3), 1.0 / 3.0)
        t = one_hot(np.array([0, 1, 2, 0]))
        assert cross_entropy(p, t) == pytest.approx(np.log(3.0), abs=1e-12)

    def test_hand_batch(self):
        p = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1]])
        t = one_hot(np.array([0, 1]))
        expected = -(np.log(0.7) + np.log(0.8)) / 2.0
        assert cross_entropy(p, t) == pytest.approx(expected, abs=1e-12)

    def test_row_normalization_enforced(self):
        t = one_hot(np.array([0]))
        bad = np.array([[0.5, 0.5, 0.1]])
        with pytest.raises(RowNotNormalizedError):
            cross_entropy(bad, t)
        almost = np.array([[1.0 / 3.0 + 5e-7, 1.0 / 3.0, 1.0 / 3.0 - 5e-7]])
        cross_entropy(almost, t)  # within tolerance


class TestModelForward:
    def test_zero_theta_uniform(self):
        theta = init_model(5, 16, 4, 8, seed=0)
        theta = theta.with_tensors([np.zeros_like(a) for a in theta.tensors()])
        probs, _ = model_forward(theta, np.random.default_rng(0).standard_normal((3, 4, 16)))
        assert np.allclose(probs, 1.0 / 3.0, atol=1e-15)

    def test_probabilities_sum_to_one(self, rng):
        for k in range(100):
            theta = init_model(5, 8, 4, 8, seed=k)
            probs, _ = model_forward(theta, rng.standard_normal((2, 4, 8)))
            assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-12

    def test_sharpening_dense_weights(self, rng):
        theta = init_model(5, 12, 4, 8, seed=1)
        x = rng.standard_normal((1, 4, 12))
        probs, _ = model_forward(theta, x)
        top = probs.max()
        for factor in (2.0, 4.0, 8.0):
            tensors = theta.tensors()
            tensors[-2] = tensors[-2] * factor
            tensors[-1] = tensors[-1] * factor
            sharper, _ = model_forward(theta.with_tensors(tensors), x)
            assert sharper.max() > top
            top = sharper.max()

    def test_config_mismatch(self, rng):
        theta = init_model(5, 16, 4, 8, seed=0)
        with pytest.raises(ConfigMismatchError):
            model_forward(theta, rng.standard_normal((2, 4, 8)))
        with pytest.raises(ConfigMismatchError):
            model_forward(theta, rng.standard_normal((2, 3, 16)))

    def test_mean_readout_differs_but_normalizes(self, rng):
        x = rng.standard_normal((2, 4, 16))
        last = init_model(5, 16, 4, 8, seed=0, readout="last")
        mean = init_model(5, 16, 4, 8, seed=0, readout="mean")
        pa, _ = model_forward(last, x)
        pb, _ = model_forward(mean, x)
        assert np.abs(pb.sum(axis=1) - 1.0).max() < 1e-12
        assert not np.allclose(pa, pb)


class TestGradients:
    def test_finite_difference_check(self, rng):
        theta = init_model(5, 16, 4, 8, seed=3)
        X = rng.standard_normal((4, 4, 16))
        y = np.array([0, 1, 2, 1])
        grads, loss, _ = bptt_gradients(theta, X, y)
        assert loss > 0
        tensors = [a.copy() for a in theta.tensors()]

        def loss_at():
            probs, _ = model_forward(theta.with_tensors(tensors), X)
            return cross_entropy(probs, one_hot(y))

        h = 1e-5
        max_rel = 0.0
        for arr, grad in zip(tensors, grads):
            flat = arr.ravel()
            gflat = np.asarray(grad).ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                lp = loss_at()
                flat[j] = orig - h
                lm = loss_at()
                flat[j] = orig
                numeric = (lp - lm) / (2 * h)
                rel = abs(gflat[j] - numeric) / max(abs(gflat[j]), abs(numeric), 1e-8)
                max_rel = max(max_rel, rel)
        assert max_rel < 1e-4

    def test_zero_theta_analytic_gradient(self):
        theta = init_model(5, 16, 4, 8, seed=0)
        theta = theta.with_tensors([np.zeros_like(a) for a in theta.tensors()])
        X = np.zeros((2, 4, 16))
        y = np.array([0, 2])
        grads, _, probs = bptt_gradients(theta, X, y)
        expected_bias = (probs - one_hot(y)).mean(axis=0)
        assert np.allclose(grads[-1], expected_bias, atol=1e-15)
        for g in grads[:12]:
            assert np.all(np.asarray(g) == 0.0)

    def test_duplicated_batch_same_gradient(self, rng):
        theta = init_model(5, 8, 4, 8, seed=2)
        X = rng.standard_normal((3, 4, 8))
        y = np.array([0, 1, 2])
        g1, l1, _ = bptt_gradients(theta, X, y)
        g2, l2, _ = bptt_gradients(theta, np.concatenate([X, X]), np.concatenate([y, y]))
        assert l1 == pytest.approx(l2, abs=1e-12)
        for a, b in zip(g1, g2):
            assert np.abs(np.asarray(a) - np.asarray(b)).max() < 1e-12

    def test_mean_readout_gradient(self, rng):
        theta = init_model(5, 10, 4, 8, seed=4, readout="mean")
        X = rng.standard_normal((2, 4, 10))
        y = np.array([1, 2])
        grads, _, _ = bptt_gradients(theta, X, y)
        tensors = [a.copy() for a in theta.tensors()]
        h = 1e-5
        for ti in (0, 6, 12, 13):
            flat = tensors[ti].ravel()
            gflat = np.asarray(grads[ti]).ravel()
            for j in range(0, flat.size, max(1, flat.size // 5)):
                orig = flat[j]
                flat[j] = orig + h
                pp, _ = model_forward(theta.with_tensors(tensors), X)
                lp = cross_entropy(pp, one_hot(y))
                flat[j] = orig - h
                pm, _ = model_forward(theta.with_tensors(tensors), X)
                lm = cross_entropy(pm, one_hot(y))
                flat[j] = orig
                numeric = (lp - lm) / (2 * h)
                assert abs(gflat[j] - numeric) / max(abs(gflat[j]), abs(numeric), 1e-8) < 1e-4


class TestSGDM:
    def _quadratic_grad(self, theta_val):
        return 2.0 * theta_val

    def test_plain_step(self):
        theta = init_model(5, 8, 1, 8, seed=0)
        tensors = [np.zeros_like(a) for a in theta.tensors()]
        tensors[-1] = np.array([1.0, 0.0, 0.0])
        theta = theta.with_tensors(tensors)
        grads = [np.zeros_like(a) for a in theta.tensors()]
        grads[-1] = np.array([2.0, 0.0, 0.0])
        cfg = TrainConfig(learning_rate=0.1, momentum=0.0)
        out, vel = sgdm_step(theta, grads, None, cfg)
        assert out.tensors()[-1][0] == pytest.approx(0.8, abs=1e-15)

    def test_momentum_two_steps_hand_values(self):
        # classical momentum on f(x) = x^2 from x = 1, lr 0.1, mu 0.9:
        # v1 = -0.2, x1 = 0.8; v2 = 0.9*(-0.2) - 0.1*1.6 = -0.34, x2 = 0.46
        theta = init_model(5, 8, 1, 8, seed=0)
        tensors = [np.zeros_like(a) for a in theta.tensors()]
        tensors[-1] = np.array([1.0, 0.0, 0.0])
        theta = theta.with_tensors(tensors)
        cfg = TrainConfig(learning_rate=0.1, momentum=0.9)
        vel = None
        for expected in (0.8, 0.46):
            grads = [np.zeros_like(a) for a in theta.tensors()]
            grads[-1] = np.array([self._quadratic_grad(theta.tensors()[-1][0]), 0.0, 0.0])
            theta, vel = sgdm_step(theta, grads, vel, cfg)
            assert theta.tensors()[-1][0] == pytest.approx(expected, abs=1e-15)

    def test_zero_gradient_velocity_decays(self):
        theta = init_model(5, 8, 1, 8, seed=0)
        zeros = [np.zeros_like(a) for a in theta.tensors()]
        vel = [np.ones_like(a) for a in theta.tensors()]
        cfg = TrainConfig(learning_rate=0.1, momentum=0.9)
        for _ in range(200):
            theta, vel = sgdm_step(theta, zeros, vel, cfg)
        assert max(np.abs(v).max() for v in vel) < 1e-8


class TestEarlyStopper:
    def test_plateau_stops_exactly_after_patience(self):
        stopper = EarlyStopper(patience=30, tolerance=1e-6)
        losses = list(np.linspace(1.0, 0.5, 12)) + [0.5] * 100
        stopped_at = None
        for epoch, loss in enumerate(losses, start=1):
            if stopper.update(loss):
                stopped_at = epoch
                break
        assert stopped_at == 12 + 30
        assert stopper.best_epoch == 12
        assert stopper.best == pytest.approx(0.5)

    def test_improvement_resets_counter(self):
        stopper = EarlyStopper(patience=3, tolerance=1e-6)
        for loss in (1.0, 0.9, 0.9, 0.9, 0.8):
            assert not stopper.update(loss)
        assert stopper.stale == 0

    def test_tiny_improvement_below_tolerance_ignored(self):
        stopper = EarlyStopper(patience=2, tolerance=1e-6)
        assert not stopper.update(1.0)
        assert not stopper.update(1.0 - 1e-9)
        assert stopper.update(1.0 - 2e-9)


def toy_dataset(n_per=100, n_ed=16, noise=0.3, seed=1):
    """Three classes with constant-level rows and a wide margin."""
    r = np.random.default_rng(seed)
    means = 1.5 * np.eye(3)
    X, y = [], []
    for cls in range(3):
        base = means[cls][:, None] * np.ones((3, n_ed))
        for _ in range(n_per):
            X.append(base + noise * r.standard_normal((3, n_ed)))
            y.append(cls)
    X = np.asarray(X)
    y = np.asarray(y)
    order = r.permutation(y.shape[0])
    return X[order], y[order]


def nearest_centroid_accuracy(X, y):
    flat = X.reshape(X.shape[0], -1)
    cents = np.stack([flat[y == c].mean(axis=0) for c in range(3)])
    pred = np.argmin(((flat[:, None, :] - cents[None]) ** 2).sum(-1), axis=1)
    return (pred == y).mean()


class TestTrain:
    def test_toy_problem_reaches_full_accuracy(self):
        X, y = toy_dataset()
        assert nearest_centroid_accuracy(X, y) == 1.0  # margin oracle
        cfg = TrainConfig(minibatch=32, learning_rate=0.05, momentum=0.9,
                          max_epochs=50, patience=50, seed=0)
        theta, history = train(X, y, lambda_id=5, d_lstm=8, cfg=cfg)
        assert len(history["epoch"]) <= 50
        assert history["train_acc"][-1] == 1.0

    def test_constant_val_loss_stops_after_patience(self):
        X, y = toy_dataset(n_per=20)
        # a vanishing learning rate freezes the model, so the validation loss
        # plateaus from the first epoch
        cfg = TrainConfig(minibatch=16, learning_rate=1e-30, momentum=0.0,
                          max_epochs=100, patience=5, seed=0)
        theta, history = train(X, y, lambda_id=5, d_lstm=8, cfg=cfg)
        assert len(history["epoch"]) == 6  # first epoch sets best, 5 stale

    def test_returned_theta_achieves_min_val_loss(self):
        X, y = toy_dataset(n_per=30)
        cfg = TrainConfig(minibatch=16, learning_rate=0.05, momentum=0.9,
                          max_epochs=25, patience=25, seed=3)
        theta, history = train(X, y, lambda_id=5, d_lstm=8, cfg=cfg)
        idx = np.argsort(y)
        Xv, yv = X[idx[::3]], y[idx[::3]]
        # recompute the validation split exactly as train does
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([3, 0x7A])))
        order = rng.permutation(X.shape[0])
        n_val = max(1, int(round(0.2 * X.shape[0])))
        val_idx = order[:n_val]
        probs, _ = model_forward(theta, X[val_idx])
        loss = cross_entropy(probs, one_hot(y[val_idx]))
        assert loss == pytest.approx(min(history["j_val"]), abs=1e-12)

    def test_determinism(self):
        X, y = toy_dataset(n_per=20)
        cfg = TrainConfig(minibatch=16, learning_rate=0.02, momentum=0.9,
                          max_epochs=8, patience=8, seed=11)
        t1, h1 = train(X, y, lambda_id=5, d_lstm=8, cfg=cfg)
        t2, h2 = train(X, y, lambda_id=5, d_lstm=8, cfg=cfg)
        assert h1 == h2
        for a, b in zip(t1.tensors(), t2.tensors()):
            assert np.array_equal(a, b)

    def test_unlabeled_rejected(self):
        X, y = toy_dataset(n_per=10)
        y = y.copy()
        y[0] = -1
        with pytest.raises(UnlabeledDataError):
            train(X, y, lambda_id=5, d_lstm=8)


class TestPredict:
    def test_zero_theta_ties_break_to_first_class(self):
        theta = init_model(5, 8, 4, 8, seed=0)
        theta = theta.with_tensors([np.zeros_like(a) for a in theta.tensors()])
        label, probs = predict(theta, np.ones((4, 8)))
        assert label == 0
        assert np.allclose(probs, 1.0 / 3.0)

    def test_agrees_with_argmax(self, rng):
        theta = init_model(5, 8, 4, 8, seed=9)
        X = rng.standard_normal((1000, 4, 8))
        labels, probs = predict(theta, X)
        again, _ = model_forward(theta, X)
        assert np.array_equal(labels, again.argmax(axis=1))
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-12


class TestClassifierEstimator:
    def test_fit_predict_score(self):
        X, y = toy_dataset(n_per=30)
        clf = BiLSTMClassifier(d_lstm=8, minibatch=16, learning_rate=0.05,
                               max_epochs=30, patience=30, seed=0)
        clf.fit(X, y)
        assert clf.score(X, y) > 0.9
        proba = clf.predict_proba(X[:5])
        assert proba.shape == (5, 3)
        assert np.abs(proba.sum(axis=1) - 1.0).max() < 1e-12
        assert clf.n_epochs_ <= 30

    def test_get_set_params_clone(self):
        from sklearn.base import clone

        clf = BiLSTMClassifier(d_lstm=16, seed=5)
        params = clf.get_params()
        assert params["d_lstm"] == 16
        other = clone(clf)
        assert other.get_params() == params
        other.set_params(d_lstm=8)
        assert other.d_lstm == 8
