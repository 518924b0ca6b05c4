"""Dataset partitioning, accuracy reporting, and the model-parameter sweep."""

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .descriptors import LAMBDA_ROWS
from .errors import DatasetTooSmallError
from .nn import ModelParams, TrainConfig, model_forward, train
from .validation import check_gamma_batch, check_labels

N_CLASSES = 3


def stratified_split(labels: np.ndarray, ratios=(0.72, 0.18, 0.10), seed: int = 0):
    """Disjoint stratified train/val/test index arrays.

    Per class, a seeded permutation is cut at the cumulative-rounded ratio
    boundaries, so sizes match the ratios within one event per class.
    """
    labels = np.asarray(labels)
    if labels.shape[0] < 10:
        raise DatasetTooSmallError("need at least 10 events to split")
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise ValueError("ratios must be three values summing to 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x51])))
    parts = [[], [], []]
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        idx = idx[rng.permutation(idx.shape[0])]
        n = idx.shape[0]
        bounds = np.round(np.cumsum(ratios) * n).astype(int)
        parts[0].append(idx[: bounds[0]])
        parts[1].append(idx[bounds[0] : bounds[1]])
        parts[2].append(idx[bounds[1] : bounds[2]])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts; rows are true classes, columns predicted."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (N_CLASSES, N_CLASSES):
            raise ValueError("confusion matrix must be 3x3")
        object.__setattr__(self, "counts", arr)

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        for t, p in zip(np.asarray(y_true), np.asarray(y_pred)):
            counts[t, p] += 1
        return cls(counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def recalls(self) -> np.ndarray:
        row_sums = self.counts.sum(axis=1)
        out = np.zeros(N_CLASSES)
        nz = row_sums > 0
        out[nz] = np.diag(self.counts)[nz] / row_sums[nz]
        return out


def evaluate(theta: ModelParams, X: np.ndarray, y: np.ndarray):
    """Accuracy and confusion matrix of a frozen model on a labeled set."""
    X = check_gamma_batch(X)
    y = check_labels(y, n_events=X.shape[0])
    preds = []
    for start in range(0, X.shape[0], 512):
        probs, _ = model_forward(theta, X[start : start + 512])
        preds.append(probs.argmax(axis=1))
    matrix = ConfusionMatrix.from_predictions(y, np.concatenate(preds))
    return matrix.accuracy, matrix


def _slice_rows(X_full: np.ndarray, full_names: Sequence[str], lam: int) -> np.ndarray:
    wanted = LAMBDA_ROWS[lam]
    missing = [n for n in wanted if n not in full_names]
    if missing:
        raise ValueError(f"feature cache lacks rows {missing} for lambda {lam}")
    sel = [list(full_names).index(n) for n in wanted]
    return X_full[:, sel, :]


def _standardize_arrays(X_train, *others, floor=1e-12):
    mean = X_train.mean(axis=0)
    std = np.maximum(X_train.std(axis=0), floor)
    return tuple((arr - mean) / std for arr in (X_train, *others))


@dataclass(frozen=True)
class SweepCell:
    lambda_id: int
    d_lstm: int
    seed: int
    train_acc: float = np.nan
    val_acc: float = np.nan
    test_acc: float = np.nan
    epochs_used: int = 0
    j_trn_final: float = np.nan
    j_val_final: float = np.nan
    wall_time: float = 0.0
    failed: bool = False
    error: str = ""


@dataclass
class SweepResult:
    cells: list = field(default_factory=list)

    def select(self, lambda_id=None, d_lstm=None, seed=None):
        out = self.cells
        if lambda_id is not None:
            out = [c for c in out if c.lambda_id == lambda_id]
        if d_lstm is not None:
            out = [c for c in out if c.d_lstm == d_lstm]
        if seed is not None:
            out = [c for c in out if c.seed == seed]
        return out

    def mean_metric(self, metric: str, lambda_id: int, d_lstm: int) -> float:
        cells = [c for c in self.select(lambda_id, d_lstm) if not c.failed]
        if not cells:
            return float("nan")
        return float(np.mean([getattr(c, metric) for c in cells]))


def run_cell(
    X_full: np.ndarray,
    y: np.ndarray,
    full_names: Sequence[str],
    lam: int,
    d_lstm: int,
    cfg: TrainConfig,
    ratios=(0.72, 0.18, 0.10),
    readout: str = "last",
):
    """Train and score one (lambda, d_lstm) cell with the given seed.

    The split and standardization statistics depend only on (labels, seed)
    and the training rows, so a cell's result is independent of which other
    cells are in the grid.
    """
    X = _slice_rows(X_full, full_names, lam)
    idx_tr, idx_va, idx_te = stratified_split(y, ratios, cfg.seed)
    X_tr, X_va, X_te = _standardize_arrays(X[idx_tr], X[idx_va], X[idx_te])
    start = time.perf_counter()
    theta, history = train(
        X_tr, y[idx_tr], lambda_id=lam, d_lstm=d_lstm, cfg=cfg,
        readout=readout, val_data=(X_va, y[idx_va]),
    )
    wall = time.perf_counter() - start
    train_acc, _ = evaluate(theta, X_tr, y[idx_tr])
    val_acc, _ = evaluate(theta, X_va, y[idx_va])
    test_acc, _ = evaluate(theta, X_te, y[idx_te])
    cell = SweepCell(
        lambda_id=lam, d_lstm=d_lstm, seed=cfg.seed,
        train_acc=train_acc, val_acc=val_acc, test_acc=test_acc,
        epochs_used=len(history["epoch"]),
        j_trn_final=history["j_trn"][-1], j_val_final=history["j_val"][-1],
        wall_time=wall,
    )
    return cell, theta, history


def sweep(
    X_full: np.ndarray,
    y: np.ndarray,
    full_names: Sequence[str],
    lambdas: Sequence[int] = (1, 2, 3, 4, 5),
    d_lstms: Sequence[int] = (64,),
    cfg: TrainConfig = TrainConfig(),
    seeds: Sequence[int] = (0,),
    ratios=(0.72, 0.18, 0.10),
    readout: str = "last",
    on_cell=None,
) -> SweepResult:
    """Train one model per (lambda, d_lstm, seed) over a shared feature cache.

    Descriptor extraction is done once by the caller (the full row superset);
    each cell slices the rows it needs. A failing cell is recorded and the
    grid continues.
    """
    X_full = check_gamma_batch(X_full)
    y = check_labels(y, n_events=X_full.shape[0])
    result = SweepResult()
    for lam in lambdas:
        for d in d_lstms:
            for seed in seeds:
                cell_cfg = TrainConfig(
                    minibatch=cfg.minibatch, learning_rate=cfg.learning_rate,
                    momentum=cfg.momentum, max_epochs=cfg.max_epochs,
                    patience=cfg.patience, tolerance=cfg.tolerance,
                    val_fraction=cfg.val_fraction, seed=seed,
                )
                try:
                    cell, theta, history = run_cell(
                        X_full, y, full_names, lam, d, cell_cfg,
                        ratios=ratios, readout=readout,
                    )
                except Exception as exc:  # noqa: BLE001 - grid continues
                    cell = SweepCell(lambda_id=lam, d_lstm=d, seed=seed,
                                     failed=True, error=str(exc))
                    theta, history = None, None
                result.cells.append(cell)
                if on_cell is not None:
                    on_cell(cell, theta, history)
    return result
