"""On-disk formats: waveform files, dataset manifests, feature files,
standardization sidecars, model files, and CSV reports.

All binary formats are little-endian; all CSV floats are written with 17
significant digits so re-parsing reproduces the in-memory values exactly.
"""

import json
import os
import struct
from typing import Optional

import numpy as np

from .descriptors import LAMBDA_ROWS
from .errors import ConfigMismatchError
from .nn import BiLSTMLayer, LSTMCellParams, ModelParams
from .preprocess import RawEvent
from .spectral import TimeSeries
from .synth import CLASS_NAMES, NAME_TO_CLASS

WAVEFORM_MAGIC = b"AEWF"
FEATURE_MAGIC = b"GAMQ"
FEATURE_VERSION = 1
UNLABELED = 255

FMT = "%.17g"


def _fmt(x) -> str:
    return FMT % float(x)


# -- waveforms and manifests -------------------------------------------------

def save_waveform(path, event: RawEvent):
    """Channel-major float64 dump of one multi-channel event."""
    arr = np.stack([ch.samples for ch in event.channels])
    with open(path, "wb") as fh:
        fh.write(WAVEFORM_MAGIC)
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f8").tobytes())


def load_waveform(path, sample_rate: float, event_id: int = 0) -> RawEvent:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != WAVEFORM_MAGIC:
            raise ValueError(f"{path}: not a waveform file (magic {magic!r})")
        try:
            n_channels, length = struct.unpack("<II", fh.read(8))
        except struct.error as exc:
            raise ValueError(f"{path}: truncated waveform header") from exc
        data = np.frombuffer(fh.read(n_channels * length * 8), dtype="<f8")
    if data.shape[0] != n_channels * length:
        raise ValueError(f"{path}: truncated waveform file")
    arr = data.reshape(n_channels, length)
    return RawEvent(
        channels=tuple(TimeSeries(row.copy(), sample_rate) for row in arr),
        event_id=event_id,
    )


def save_dataset(directory, events, sample_rate: float) -> dict:
    """Write AEWF files plus manifest.json; events is any iterable of
    LabeledEvent. Returns the manifest."""
    os.makedirs(directory, exist_ok=True)
    entries = []
    for ev in events:
        name = f"event_{ev.event.event_id:06d}.aewf"
        save_waveform(os.path.join(directory, name), ev.event)
        entries.append({
            "id": ev.event.event_id,
            "label": CLASS_NAMES[ev.label],
            "file": name,
        })
    manifest = {"sample_rate": sample_rate, "events": entries}
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def load_manifest(directory) -> dict:
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


def iter_dataset_dir(directory):
    """Yield (RawEvent, label int, entry) in manifest order."""
    manifest = load_manifest(directory)
    fs = float(manifest["sample_rate"])
    for entry in manifest["events"]:
        event = load_waveform(os.path.join(directory, entry["file"]), fs,
                              event_id=int(entry["id"]))
        yield event, int(NAME_TO_CLASS[entry["label"]]), entry


# -- feature files ------------------------------------------------------------

def save_features(path, data: np.ndarray, labels, lambda_id: int):
    """GAMQ feature file: header then per-event label byte + float64 rows.

    labels may contain None or -1 for unlabeled events (stored as 255).
    """
    arr = np.ascontiguousarray(data, dtype="<f8")
    n, rows, n_ed = arr.shape
    if rows != len(LAMBDA_ROWS[lambda_id]):
        raise ValueError(f"lambda {lambda_id} expects {len(LAMBDA_ROWS[lambda_id])} rows")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<IIII", FEATURE_VERSION, n, rows, n_ed))
        fh.write(struct.pack("<B", lambda_id))
        for k in range(n):
            lab = labels[k] if labels is not None else None
            byte = UNLABELED if lab is None or int(lab) < 0 else int(lab)
            fh.write(struct.pack("<B", byte))
            fh.write(arr[k].tobytes())


def load_features(path):
    """Returns (data (n, rows, n_ed), labels (n,), lambda_id); unlabeled -> -1."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise ValueError(f"{path}: not a feature file (magic {magic!r})")
        version, n, rows, n_ed = struct.unpack("<IIII", fh.read(16))
        if version != FEATURE_VERSION:
            raise ValueError(f"{path}: unsupported feature version {version}")
        (lambda_id,) = struct.unpack("<B", fh.read(1))
        data = np.empty((n, rows, n_ed))
        labels = np.empty(n, dtype=np.int64)
        rec = rows * n_ed * 8
        for k in range(n):
            (byte,) = struct.unpack("<B", fh.read(1))
            labels[k] = -1 if byte == UNLABELED else byte
            data[k] = np.frombuffer(fh.read(rec), dtype="<f8").reshape(rows, n_ed)
    return data, labels, lambda_id


# -- standardization stats ----------------------------------------------------

def save_stats(path, stats: dict):
    doc = {
        name: {"mean": [float(v) for v in entry["mean"]],
               "std": [float(v) for v in entry["std"]]}
        for name, entry in stats.items()
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_stats(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return {
        name: {"mean": np.asarray(entry["mean"]), "std": np.asarray(entry["std"])}
        for name, entry in doc.items()
    }


# -- model files ----------------------------------------------------------------

def _cell_to_doc(cell: LSTMCellParams) -> dict:
    doc = {}
    for gate in ("i", "f", "o", "c"):
        doc[f"W{gate}"] = cell.gate(gate, "W").tolist()
        doc[f"V{gate}"] = cell.gate(gate, "V").tolist()
        doc[f"b{gate}"] = cell.gate(gate, "b").tolist()
    return doc


def _cell_from_doc(doc: dict) -> LSTMCellParams:
    W = np.concatenate([np.asarray(doc[f"W{g}"], dtype=np.float64) for g in "ifoc"])
    V = np.concatenate([np.asarray(doc[f"V{g}"], dtype=np.float64) for g in "ifoc"])
    b = np.concatenate([np.asarray(doc[f"b{g}"], dtype=np.float64) for g in "ifoc"])
    return LSTMCellParams(W=W, V=V, b=b)


def save_model(path, theta: ModelParams, stats: Optional[dict] = None):
    """JSON model file with per-gate weight arrays and inline stats."""
    doc = {
        "version": 1,
        "lambda": theta.lambda_id,
        "n_ed": theta.n_ed,
        "d_lstm": theta.d_lstm,
        "n1": theta.n1,
        "n2": theta.n2,
        "readout": theta.readout,
        "layers": {
            "layer1": {
                "fwd": _cell_to_doc(theta.layer1.forward_cell),
                "bwd": _cell_to_doc(theta.layer1.backward_cell),
            },
            "layer2": {
                "fwd": _cell_to_doc(theta.layer2.forward_cell),
                "bwd": _cell_to_doc(theta.layer2.backward_cell),
            },
            "dense": {"W": theta.dense_w.tolist(), "b": theta.dense_b.tolist()},
        },
        "stats_ref": None if stats is None else {
            name: {"mean": [float(v) for v in entry["mean"]],
                   "std": [float(v) for v in entry["std"]]}
            for name, entry in stats.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_model(path):
    """Returns (ModelParams, stats dict or None)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    layers = doc["layers"]
    theta = ModelParams(
        layer1=BiLSTMLayer(
            forward_cell=_cell_from_doc(layers["layer1"]["fwd"]),
            backward_cell=_cell_from_doc(layers["layer1"]["bwd"]),
        ),
        layer2=BiLSTMLayer(
            forward_cell=_cell_from_doc(layers["layer2"]["fwd"]),
            backward_cell=_cell_from_doc(layers["layer2"]["bwd"]),
        ),
        dense_w=np.asarray(layers["dense"]["W"], dtype=np.float64),
        dense_b=np.asarray(layers["dense"]["b"], dtype=np.float64),
        lambda_id=int(doc["lambda"]),
        n_ed=int(doc["n_ed"]),
        readout=doc.get("readout", "last"),
    )
    if theta.d_lstm != int(doc["d_lstm"]) or theta.n1 != int(doc["n1"]):
        raise ConfigMismatchError("model file metadata disagrees with tensors")
    stats = doc.get("stats_ref")
    if stats is not None:
        stats = {
            name: {"mean": np.asarray(entry["mean"]), "std": np.asarray(entry["std"])}
            for name, entry in stats.items()
        }
    return theta, stats


# -- CSV reports ----------------------------------------------------------------

def save_history_csv(path, history: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,j_trn,j_val,train_acc,val_acc\n")
        for k in range(len(history["epoch"])):
            fh.write(
                f"{history['epoch'][k]},{_fmt(history['j_trn'][k])},"
                f"{_fmt(history['j_val'][k])},{_fmt(history['train_acc'][k])},"
                f"{_fmt(history['val_acc'][k])}\n"
            )


def load_history_csv(path) -> dict:
    history = {"epoch": [], "j_trn": [], "j_val": [], "train_acc": [], "val_acc": []}
    with open(path, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            epoch, j_trn, j_val, tr, va = line.strip().split(",")
            history["epoch"].append(int(epoch))
            history["j_trn"].append(float(j_trn))
            history["j_val"].append(float(j_val))
            history["train_acc"].append(float(tr))
            history["val_acc"].append(float(va))
    return history


def save_sweep_csv(path, result):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lambda,d_lstm,seed,train_acc,val_acc,test_acc,epochs,"
                 "j_trn,j_val,wall_time_s,failed\n")
        for c in result.cells:
            fh.write(
                f"{c.lambda_id},{c.d_lstm},{c.seed},{_fmt(c.train_acc)},"
                f"{_fmt(c.val_acc)},{_fmt(c.test_acc)},{c.epochs_used},"
                f"{_fmt(c.j_trn_final)},{_fmt(c.j_val_final)},"
                f"{_fmt(c.wall_time)},{int(c.failed)}\n"
            )


def save_predictions_csv(path, ids, labels, probs):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,label,p_tensile,p_shear,p_mixed\n")
        for k, event_id in enumerate(ids):
            fh.write(
                f"{event_id},{CLASS_NAMES[labels[k]]},{_fmt(probs[k][0])},"
                f"{_fmt(probs[k][1])},{_fmt(probs[k][2])}\n"
            )
