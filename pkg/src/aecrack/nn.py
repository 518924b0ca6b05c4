"""Stacked bidirectional LSTM classifier trained from scratch with BPTT.

Architecture: BiLSTM -> elementwise ReLU -> BiLSTM -> dense -> softmax over
three crack classes, cross-entropy loss, SGD with classical momentum, and
early stopping on the validation loss. Gradients are exact reverse-mode
derivatives through both directions of both recurrent layers; everything runs
in float64 numpy so they can be checked against central finite differences.
"""

import copy
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import expit as sigmoid
from sklearn.base import BaseEstimator, ClassifierMixin

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

from .errors import (
    DimensionMismatchError,
    ConfigMismatchError,
    EmptyDatasetError,
    RowNotNormalizedError,
    UnlabeledDataError,
)
from .validation import check_fitted, check_gamma_batch, check_labels

N_CLASSES = 3
GATE_ORDER = ("i", "f", "o", "c")


@dataclass(frozen=True)
class LSTMCellParams:
    """Stacked gate parameters, gate-major in the order i, f, o, c.

    W: (4H, D) input weights, V: (4H, H) recurrent weights, b: (4H,) biases.
    """

    W: np.ndarray
    V: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H4, d = self.W.shape
        if H4 % 4 or self.V.shape != (H4, H4 // 4) or self.b.shape != (H4,):
            raise DimensionMismatchError("inconsistent LSTM cell shapes")

    @property
    def hidden(self) -> int:
        return self.W.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str, tensor: str = "W") -> np.ndarray:
        k = GATE_ORDER.index(name)
        h = self.hidden
        return getattr(self, tensor)[k * h : (k + 1) * h]


@dataclass(frozen=True)
class BiLSTMLayer:
    """Forward and backward cells; output width is 2x the per-direction hidden."""

    forward_cell: LSTMCellParams
    backward_cell: LSTMCellParams

    def __post_init__(self):
        if self.forward_cell.W.shape != self.backward_cell.W.shape:
            raise DimensionMismatchError("direction cells must match in shape")

    @property
    def hidden(self) -> int:
        return self.forward_cell.hidden

    @property
    def output_size(self) -> int:
        return 2 * self.hidden


@dataclass(frozen=True)
class ModelParams:
    """All weights and biases of the classifier plus input metadata."""

    layer1: BiLSTMLayer
    layer2: BiLSTMLayer
    dense_w: np.ndarray
    dense_b: np.ndarray
    lambda_id: int = 5
    n_ed: int = 256
    readout: str = "last"

    def __post_init__(self):
        if self.dense_w.shape != (N_CLASSES, self.layer2.output_size):
            raise DimensionMismatchError("dense layer shape mismatch")
        if self.readout not in ("last", "mean"):
            raise ValueError("readout must be 'last' or 'mean'")

    @property
    def d_lstm(self) -> int:
        """Total memory cells across both layers (N1 + N2)."""
        return self.n1 + self.n2

    @property
    def n1(self) -> int:
        return 2 * self.layer1.hidden

    @property
    def n2(self) -> int:
        return 2 * self.layer2.hidden

    def tensors(self) -> list:
        out = []
        for layer in (self.layer1, self.layer2):
            for cell in (layer.forward_cell, layer.backward_cell):
                out.extend([cell.W, cell.V, cell.b])
        out.extend([self.dense_w, self.dense_b])
        return out

    def with_tensors(self, arrays: list) -> "ModelParams":
        it = iter(arrays)
        layers = []
        for _ in range(2):
            cells = []
            for _ in range(2):
                cells.append(LSTMCellParams(W=next(it), V=next(it), b=next(it)))
            layers.append(BiLSTMLayer(forward_cell=cells[0], backward_cell=cells[1]))
        return replace(self, layer1=layers[0], layer2=layers[1],
                       dense_w=next(it), dense_b=next(it))


def init_cell(rng: np.random.Generator, input_size: int, hidden: int) -> LSTMCellParams:
    """Uniform +-1/sqrt(hidden) weights; forget-gate bias 1, others 0."""
    scale = 1.0 / np.sqrt(hidden)
    W = rng.uniform(-scale, scale, size=(4 * hidden, input_size))
    V = rng.uniform(-scale, scale, size=(4 * hidden, hidden))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return LSTMCellParams(W=W, V=V, b=b)


def init_model(
    lambda_id: int,
    n_ed: int,
    n_inputs: int,
    d_lstm: int,
    seed: int = 0,
    readout: str = "last",
    n1: Optional[int] = None,
) -> ModelParams:
    """Seeded initial parameters with N1 = N2 = d_lstm/2 unless n1 is given.

    Dense weights are Gaussian scaled by 1/sqrt(fan_in); dense bias 0.
    """
    if n1 is None:
        if d_lstm % 4:
            raise ValueError("d_lstm must be divisible by 4 for N1 = N2 halves")
        n1 = d_lstm // 2
    n2 = d_lstm - n1
    if n1 % 2 or n2 % 2 or n1 <= 0 or n2 <= 0:
        raise ValueError("layer widths must be positive and even")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x0E])))
    h1, h2 = n1 // 2, n2 // 2
    layer1 = BiLSTMLayer(
        forward_cell=init_cell(rng, n_inputs, h1),
        backward_cell=init_cell(rng, n_inputs, h1),
    )
    layer2 = BiLSTMLayer(
        forward_cell=init_cell(rng, 2 * h1, h2),
        backward_cell=init_cell(rng, 2 * h1, h2),
    )
    fan_in = 2 * h2
    dense_w = rng.standard_normal((N_CLASSES, fan_in)) / np.sqrt(fan_in)
    dense_b = np.zeros(N_CLASSES)
    return ModelParams(layer1=layer1, layer2=layer2, dense_w=dense_w,
                       dense_b=dense_b, lambda_id=lambda_id, n_ed=n_ed,
                       readout=readout)


def _forward_loop_py(gates, vt, cells, tanh_c, hidden):
    T, B, H4 = gates.shape
    H = H4 // 4
    scratch = np.empty((B, H4))
    s1 = np.empty((B, H))
    c = np.zeros((B, H))
    h = np.zeros((B, H))
    for t in range(T):
        z = gates[t]
        np.matmul(h, vt, out=scratch)
        z += scratch
        sigmoid(z[:, : 3 * H], out=z[:, : 3 * H])
        np.tanh(z[:, 3 * H :], out=z[:, 3 * H :])
        i, f, o, g = z[:, :H], z[:, H : 2 * H], z[:, 2 * H : 3 * H], z[:, 3 * H :]
        c_new = cells[t]
        np.multiply(i, g, out=c_new)
        np.multiply(f, c, out=s1)
        c_new += s1
        c = c_new
        np.tanh(c, out=tanh_c[t])
        np.multiply(o, tanh_c[t], out=hidden[t])
        h = hidden[t]


def _run_cell(cell: LSTMCellParams, xs: np.ndarray):
    """Run one direction over direction-ordered inputs xs (T, B, D).

    The gate buffer is filled by one input-projection GEMM up front; the
    recurrent loop updates it in place, so the cache holds post-activation
    gate values without extra copies. The loop stays in numpy: it is
    dominated by exp/tanh, which numpy vectorizes better than scalar libm
    calls in compiled code.
    """
    T, B, D = xs.shape
    H = cell.hidden
    gates = (xs.reshape(T * B, D) @ cell.W.T).reshape(T, B, 4 * H)
    gates += cell.b
    vt = np.ascontiguousarray(cell.V.T)
    cells = np.empty((T, B, H))
    tanh_c = np.empty((T, B, H))
    hidden = np.empty((T, B, H))
    _forward_loop_py(gates, vt, cells, tanh_c, hidden)
    cache = {"xs": xs, "gates": gates, "cells": cells, "tanh_c": tanh_c,
             "hidden": hidden}
    return hidden, cache


@njit(cache=True)
def _backward_loop_jit(gates, cells, tanh_c, dout, V, dz_all):  # pragma: no cover
    T, B, H = dout.shape
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        z = gates[t]
        tc = tanh_c[t]
        dz = dz_all[t]
        for b in range(B):
            for j in range(H):
                i = z[b, j]
                f = z[b, H + j]
                o = z[b, 2 * H + j]
                g = z[b, 3 * H + j]
                tcv = tc[b, j]
                dhv = dout[t, b, j] + dh[b, j]
                do = dhv * tcv
                dcv = dhv * o * (1.0 - tcv * tcv) + dc[b, j]
                cprev = cells[t - 1, b, j] if t > 0 else 0.0
                dz[b, j] = dcv * g * i * (1.0 - i)
                dz[b, H + j] = dcv * cprev * f * (1.0 - f)
                dz[b, 2 * H + j] = do * o * (1.0 - o)
                dz[b, 3 * H + j] = dcv * i * (1.0 - g * g)
                dc[b, j] = dcv * f
        dh = np.dot(dz, V)


def _backward_loop_py(gates, cells, tanh_c, dout, V, dz_all):
    T, B, H = dout.shape
    dh_next = np.zeros((B, H))
    dc = np.zeros((B, H))
    s1 = np.empty((B, H))
    s2 = np.empty((B, H))
    zeros_c = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        z = gates[t]
        i, f, o, g = z[:, :H], z[:, H : 2 * H], z[:, 2 * H : 3 * H], z[:, 3 * H :]
        tc = tanh_c[t]
        dh = dout[t]
        dh += dh_next
        dz = dz_all[t]
        dzi, dzf = dz[:, :H], dz[:, H : 2 * H]
        dzo, dzg = dz[:, 2 * H : 3 * H], dz[:, 3 * H :]
        np.multiply(dh, tc, out=dzo)
        # dc += dh * o * (1 - tc^2)
        np.multiply(tc, tc, out=s1)
        np.subtract(1.0, s1, out=s1)
        np.multiply(dh, o, out=s2)
        s2 *= s1
        dc += s2
        np.multiply(dc, g, out=dzi)
        np.multiply(dc, i, out=dzg)
        np.multiply(dc, cells[t - 1] if t > 0 else zeros_c, out=dzf)
        dc *= f
        # chain through the gate nonlinearities in place
        np.subtract(1.0, i, out=s1)
        s1 *= i
        dzi *= s1
        np.subtract(1.0, f, out=s1)
        s1 *= f
        dzf *= s1
        np.subtract(1.0, o, out=s1)
        s1 *= o
        dzo *= s1
        np.multiply(g, g, out=s1)
        np.subtract(1.0, s1, out=s1)
        dzg *= s1
        np.matmul(dz, V, out=dh_next)


def _run_cell_backward(cell: LSTMCellParams, cache: dict, dout: np.ndarray,
                       use_jit: Optional[bool] = None):
    """Gradients for one direction; dout is (T, B, H) in direction order.

    The numpy path consumes dout as scratch space. Weight gradients are
    accumulated by two GEMMs at the end instead of per-step outer products.
    """
    xs = cache["xs"]
    gates = cache["gates"]
    cells = cache["cells"]
    tanh_c = cache["tanh_c"]
    hidden = cache["hidden"]
    T, B, H = dout.shape
    dz_all = np.empty((T, B, 4 * H))
    if HAVE_NUMBA if use_jit is None else use_jit:
        _backward_loop_jit(gates, cells, tanh_c, dout, cell.V, dz_all)
    else:
        _backward_loop_py(gates, cells, tanh_c, dout, cell.V, dz_all)
    flat_dz = dz_all.reshape(T * B, 4 * H)
    dW = flat_dz.T @ xs.reshape(T * B, -1)
    # h_prev[0] is zero, so dV only sees steps 1..T-1
    dV = dz_all[1:].reshape((T - 1) * B, 4 * H).T @ hidden[: T - 1].reshape((T - 1) * B, H)
    db = flat_dz.sum(axis=0)
    dx = flat_dz @ cell.W
    grads = LSTMCellParams(W=dW, V=dV, b=db)
    return grads, dx.reshape(T, B, -1)


def lstm_forward(cell: LSTMCellParams, inputs: np.ndarray, direction: str = "forward"):
    """Hidden sequence of one LSTM direction, in original time order.

    inputs may be (T, D) for a single sequence or (T, B, D) batched. The
    backward direction iterates the reversed sequence; zero initial state.
    """
    arr = np.asarray(inputs, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, None, :]
    if arr.shape[2] != cell.input_size:
        raise DimensionMismatchError(
            f"input width {arr.shape[2]} != cell input size {cell.input_size}"
        )
    if direction == "forward":
        hidden, _ = _run_cell(cell, arr)
    elif direction == "backward":
        hidden, _ = _run_cell(cell, arr[::-1])
        hidden = hidden[::-1]
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    return hidden[:, 0, :] if squeeze else hidden


def bilstm_forward(layer: BiLSTMLayer, inputs: np.ndarray) -> np.ndarray:
    """Concatenated forward/backward hidden states per timestep (forward first)."""
    arr = np.asarray(inputs, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, None, :]
    fwd, _ = _run_cell(layer.forward_cell, arr)
    bwd, _ = _run_cell(layer.backward_cell, arr[::-1])
    out = np.concatenate([fwd, bwd[::-1]], axis=2)
    return out[:, 0, :] if squeeze else out


def relu(v: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0)."""
    return np.maximum(v, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis; rows sum to 1."""
    arr = np.asarray(logits, dtype=np.float64)
    shifted = arr - arr.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def one_hot(labels: np.ndarray, k: int = N_CLASSES) -> np.ndarray:
    out = np.zeros((labels.shape[0], k))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def cross_entropy(predictions: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood over one-hot targets.

    Probability rows must sum to 1 within 1e-6; the log argument is clamped
    at 1e-15 so a confident wrong answer stays finite.
    """
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionMismatchError("predictions and targets differ in shape")
    sums = p.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise RowNotNormalizedError("prediction rows must sum to 1 within 1e-6")
    picked = np.clip((p * t).sum(axis=1), 1e-15, None)
    return float(-np.log(picked).mean())


def _bilstm_with_cache(layer: BiLSTMLayer, xs: np.ndarray):
    fwd, cache_f = _run_cell(layer.forward_cell, xs)
    bwd, cache_b = _run_cell(layer.backward_cell, xs[::-1])
    out = np.concatenate([fwd, bwd[::-1]], axis=2)
    return out, (cache_f, cache_b)


def _bilstm_backward(layer: BiLSTMLayer, caches, dout: np.ndarray):
    H = layer.hidden
    grads_f, dx_f = _run_cell_backward(layer.forward_cell, caches[0],
                                       np.ascontiguousarray(dout[:, :, :H]))
    grads_b, dx_b = _run_cell_backward(layer.backward_cell, caches[1],
                                       np.ascontiguousarray(dout[::-1, :, H:]))
    return grads_f, grads_b, dx_f + dx_b[::-1]


def model_forward(theta: ModelParams, gamma: np.ndarray):
    """Class probabilities and cached activations for a batch of matrices.

    gamma is (B, rows, n_ed) or a single (rows, n_ed) matrix; timestep t sees
    the column of descriptor values at index t.
    """
    arr = np.asarray(gamma, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[None]
    n_rows = theta.layer1.forward_cell.input_size
    if arr.shape[1] != n_rows or arr.shape[2] != theta.n_ed:
        raise ConfigMismatchError(
            f"input shape {arr.shape[1:]} does not match model "
            f"(rows={n_rows}, n_ed={theta.n_ed})"
        )
    xs = np.ascontiguousarray(arr.transpose(2, 0, 1))
    out1, cache1 = _bilstm_with_cache(theta.layer1, xs)
    act1 = np.maximum(out1, 0.0)
    out2, cache2 = _bilstm_with_cache(theta.layer2, act1)
    if theta.readout == "last":
        pooled = out2[-1]
    else:
        pooled = out2.mean(axis=0)
    logits = pooled @ theta.dense_w.T + theta.dense_b
    probs = softmax(logits)
    cache = {"cache1": cache1, "cache2": cache2, "out1": out1, "act1": act1,
             "out2": out2, "pooled": pooled, "probs": probs}
    if squeeze:
        return probs[0], cache
    return probs, cache


def bptt_gradients(theta: ModelParams, gamma: np.ndarray, labels: np.ndarray):
    """Exact gradients of the batch-mean cross-entropy w.r.t. every tensor.

    Returns (grads, loss, probs) with grads aligned to theta.tensors().
    """
    arr = check_gamma_batch(gamma)
    y = check_labels(labels, n_events=arr.shape[0])
    probs, cache = model_forward(theta, arr)
    targets = one_hot(y)
    loss = cross_entropy(probs, targets)
    B = arr.shape[0]
    T = theta.n_ed
    dlogits = (probs - targets) / B
    d_dense_w = dlogits.T @ cache["pooled"]
    d_dense_b = dlogits.sum(axis=0)
    dpooled = dlogits @ theta.dense_w
    dout2 = np.zeros_like(cache["out2"])
    if theta.readout == "last":
        dout2[-1] = dpooled
    else:
        dout2[:] = dpooled / T
    g2f, g2b, dact1 = _bilstm_backward(theta.layer2, cache["cache2"], dout2)
    dout1 = dact1 * (cache["out1"] > 0.0)
    g1f, g1b, _ = _bilstm_backward(theta.layer1, cache["cache1"], dout1)
    grads = [g1f.W, g1f.V, g1f.b, g1b.W, g1b.V, g1b.b,
             g2f.W, g2f.V, g2f.b, g2b.W, g2b.V, g2b.b,
             d_dense_w, d_dense_b]
    return grads, loss, probs


@dataclass(frozen=True)
class TrainConfig:
    """Optimization protocol settings."""

    minibatch: int = 64
    learning_rate: float = 1e-3
    momentum: float = 0.97
    max_epochs: int = 220
    patience: int = 30
    tolerance: float = 1e-6
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.minibatch < 1 or self.patience < 1:
            raise ValueError("invalid training configuration")


def sgdm_step(theta: ModelParams, grads: list, velocity: Optional[list],
              cfg: TrainConfig):
    """Classical momentum update: v' = mu*v - lr*g; theta' = theta + v'."""
    tensors = theta.tensors()
    if velocity is None:
        velocity = [np.zeros_like(a) for a in tensors]
    new_v = [cfg.momentum * v - cfg.learning_rate * g
             for v, g in zip(velocity, grads)]
    new_t = [a + v for a, v in zip(tensors, new_v)]
    return theta.with_tensors(new_t), new_v


class EarlyStopper:
    """Halts when the tracked loss has not improved for `patience` epochs.

    An improvement means dropping below the best seen value by more than
    `tolerance`. best_epoch is 1-based.
    """

    def __init__(self, patience: int = 30, tolerance: float = 1e-6):
        self.patience = patience
        self.tolerance = tolerance
        self.best = np.inf
        self.best_epoch = 0
        self.stale = 0
        self.epoch = 0

    def update(self, loss: float) -> bool:
        """Record one epoch's loss; True means stop now."""
        self.epoch += 1
        if loss < self.best - self.tolerance:
            self.best = loss
            self.best_epoch = self.epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def _evaluate_batched(theta: ModelParams, X: np.ndarray, y: np.ndarray,
                      batch: int = 512):
    total = 0.0
    correct = 0
    for start in range(0, X.shape[0], batch):
        xb = X[start : start + batch]
        yb = y[start : start + batch]
        probs, _ = model_forward(theta, xb)
        total += cross_entropy(probs, one_hot(yb)) * xb.shape[0]
        correct += int((probs.argmax(axis=1) == yb).sum())
    return total / X.shape[0], correct / X.shape[0]


def train(
    X: np.ndarray,
    y: np.ndarray,
    lambda_id: int = 5,
    d_lstm: int = 64,
    cfg: TrainConfig = TrainConfig(),
    readout: str = "last",
    val_data=None,
):
    """Train on standardized descriptor matrices; returns (theta*, history).

    Splits train/validation by a seeded shuffle (val_fraction) unless
    val_data=(X_val, y_val) is given. Each epoch runs seeded shuffled
    mini-batches; training loss/accuracy are accumulated over the epoch's
    batches before their updates, validation metrics from a full pass.
    Training halts at max_epochs or when validation loss stops improving for
    `patience` epochs; the returned parameters are the snapshot with the
    lowest validation loss.
    """
    X = check_gamma_batch(X)
    if X.shape[0] == 0:
        raise EmptyDatasetError("empty training set")
    y = check_labels(y, n_events=X.shape[0])
    if np.any(y < 0):
        raise UnlabeledDataError("training requires labels for every event")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, 0x7A])))
    if val_data is None:
        order = rng.permutation(X.shape[0])
        n_val = max(1, int(round(cfg.val_fraction * X.shape[0])))
        val_idx, train_idx = order[:n_val], order[n_val:]
        X_train, y_train = X[train_idx], y[train_idx]
        X_val, y_val = X[val_idx], y[val_idx]
    else:
        X_train, y_train = X, y
        X_val, y_val = val_data
        X_val = check_gamma_batch(X_val)
        y_val = check_labels(y_val, n_events=X_val.shape[0])
    theta = init_model(lambda_id, X.shape[2], X.shape[1], d_lstm,
                       seed=cfg.seed, readout=readout)
    velocity = None
    stopper = EarlyStopper(patience=cfg.patience, tolerance=cfg.tolerance)
    best_theta = theta
    history = {"epoch": [], "j_trn": [], "j_val": [], "train_acc": [], "val_acc": []}
    n = X_train.shape[0]
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, cfg.minibatch):
            idx = order[start : start + cfg.minibatch]
            grads, loss, probs = bptt_gradients(theta, X_train[idx], y_train[idx])
            loss_sum += loss * idx.shape[0]
            correct += int((probs.argmax(axis=1) == y_train[idx]).sum())
            theta, velocity = sgdm_step(theta, grads, velocity, cfg)
        j_trn = loss_sum / n
        train_acc = correct / n
        j_val, val_acc = _evaluate_batched(theta, X_val, y_val)
        history["epoch"].append(epoch)
        history["j_trn"].append(j_trn)
        history["j_val"].append(j_val)
        history["train_acc"].append(train_acc)
        history["val_acc"].append(val_acc)
        improved_to_best = j_val < stopper.best - stopper.tolerance
        stop = stopper.update(j_val)
        if improved_to_best:
            best_theta = copy.deepcopy(theta)
        if stop:
            break
    return best_theta, history


def predict(theta: ModelParams, gamma: np.ndarray):
    """Most probable class per event; ties break toward the lowest index."""
    probs, _ = model_forward(theta, gamma)
    if probs.ndim == 1:
        return int(np.argmax(probs)), probs
    return probs.argmax(axis=1), probs


class BiLSTMClassifier(ClassifierMixin, BaseEstimator):
    """Sklearn-style wrapper around the stacked BiLSTM training loop.

    X is a 3-D array (events, descriptor rows, n_ed) of standardized
    descriptor matrices; y holds integer class labels 0..2.
    """

    def __init__(self, d_lstm=64, minibatch=64, learning_rate=1e-3,
                 momentum=0.97, max_epochs=220, patience=30, tolerance=1e-6,
                 val_fraction=0.2, readout="last", lambda_id=5, seed=0):
        self.d_lstm = d_lstm
        self.minibatch = minibatch
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.max_epochs = max_epochs
        self.patience = patience
        self.tolerance = tolerance
        self.val_fraction = val_fraction
        self.readout = readout
        self.lambda_id = lambda_id
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            minibatch=self.minibatch, learning_rate=self.learning_rate,
            momentum=self.momentum, max_epochs=self.max_epochs,
            patience=self.patience, tolerance=self.tolerance,
            val_fraction=self.val_fraction, seed=self.seed,
        )

    def fit(self, X, y, val_data=None):
        theta, history = train(
            X, y, lambda_id=self.lambda_id, d_lstm=self.d_lstm,
            cfg=self._train_config(), readout=self.readout, val_data=val_data,
        )
        self.params_ = theta
        self.history_ = history
        self.n_epochs_ = len(history["epoch"])
        self.classes_ = np.arange(N_CLASSES)
        return self

    def predict(self, X):
        check_fitted(self, "params_")
        labels, _ = predict(self.params_, X)
        return np.atleast_1d(labels)

    def predict_proba(self, X):
        check_fitted(self, "params_")
        probs, _ = model_forward(self.params_, X)
        return np.atleast_2d(probs)
