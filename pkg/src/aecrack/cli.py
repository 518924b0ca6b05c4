"""Command-line pipeline: synthesize, extract features, train, evaluate,
sweep, classify.

Every command is deterministic given its flags; seeds default to the
AECD_SEED environment variable (else 0) and are echoed in the summary.
Summary lines are machine-greppable key=value pairs.

Exit codes: 0 success, 2 usage error, 3 config mismatch, 4 I/O error.
"""

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as aeio
from .descriptors import LAMBDA_ROWS, DescriptorConfig, build_gamma
from .errors import AECrackError, ConfigMismatchError
from .evaluate import evaluate, stratified_split, sweep
from .nn import TrainConfig, model_forward, train
from .preprocess import TransducerModel, select_max_energy_channel
from .spectral import next_pow2
from .synth import CLASS_NAMES, NAME_TO_CLASS, SynthConfig, iter_dataset
from .validation import check_labels

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4


def _default_seed() -> int:
    return int(os.environ.get("AECD_SEED", "0"))


def _say(**pairs):
    print(" ".join(f"{k}={v}" for k, v in pairs.items()))


def _require(args, *names):
    """Required values may come from flags or the config file."""
    for name in names:
        if getattr(args, name) is None:
            raise AECrackError(f"missing required option --{name.replace('_', '-')}")


def _descriptor_config(args) -> DescriptorConfig:
    return DescriptorConfig(
        n_ed=args.ned, se_window=args.se_window, se_hop=args.se_hop,
        stft_window=args.stft_window, stft_hop=args.stft_hop,
        band_lo=args.band_lo, band_hi=args.band_hi,
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        minibatch=args.batch, learning_rate=args.lr, momentum=args.momentum,
        max_epochs=args.epochs, patience=args.patience, seed=args.seed,
    )


def _add_descriptor_flags(p):
    p.add_argument("--ned", type=int, default=256, help="common descriptor length")
    p.add_argument("--se-window", type=int, default=1024)
    p.add_argument("--se-hop", type=int, default=512)
    p.add_argument("--stft-window", type=int, default=1024)
    p.add_argument("--stft-hop", type=int, default=256)
    p.add_argument("--band-lo", type=float, default=5e3)
    p.add_argument("--band-hi", type=float, default=50e3)


def _add_train_flags(p):
    p.add_argument("--d-lstm", type=int, default=64, help="total memory cells N1+N2")
    p.add_argument("--batch", type=int, default=64, help="mini-batch size")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    p.add_argument("--momentum", type=float, default=0.97)
    p.add_argument("--epochs", type=int, default=220, help="maximum epochs")
    p.add_argument("--patience", type=int, default=30)
    p.add_argument("--readout", choices=("last", "mean"), default="last")


def cmd_synth(args) -> int:
    _require(args, "per_class", "out")
    if args.per_class < 1:
        raise AECrackError("--per-class must be at least 1")
    cfg = SynthConfig(seed=args.seed, duration=args.duration,
                      snr_db=args.snr_db)
    manifest = aeio.save_dataset(args.out, iter_dataset(args.per_class, cfg),
                                 cfg.sample_rate)
    _say(command="synth", events=len(manifest["events"]), seed=args.seed,
         out=args.out)
    return EXIT_OK


def _feature_worker(task):
    index, path, sample_rate, label, lam, dcfg_kw, model_path = task
    try:
        event = aeio.load_waveform(path, sample_rate, event_id=index)
        n_bins = next_pow2(len(event.channels[0]))
        if model_path:
            model = TransducerModel.from_json(model_path)
        else:
            model = TransducerModel.resonant(n_bins, sample_rate)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            processed = select_max_energy_channel(event, model, label=label)
        gamma = build_gamma(processed, lam, DescriptorConfig(**dcfg_kw))
    except (ValueError, OSError) as exc:
        return index, None, str(exc)
    return index, gamma.data, label


def cmd_features(args) -> int:
    _require(args, "data", "out")
    lam = 0 if args.lam in ("all", "0") else int(args.lam)
    if lam not in LAMBDA_ROWS:
        raise AECrackError(f"unknown lambda {args.lam!r}")
    dcfg = _descriptor_config(args)
    manifest = aeio.load_manifest(args.data)
    fs = float(manifest["sample_rate"])
    tasks = []
    for k, entry in enumerate(manifest["events"]):
        label = int(NAME_TO_CLASS[entry["label"]]) if entry["label"] in NAME_TO_CLASS else -1
        tasks.append((k, os.path.join(args.data, entry["file"]), fs, label,
                      lam, dcfg.__dict__.copy(), args.tfr_model))
    results = {}
    skipped = 0
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            outcomes = list(pool.map(_feature_worker, tasks, chunksize=8))
    else:
        outcomes = [_feature_worker(task) for task in tasks]
    for index, data, label in outcomes:
        if data is None:
            print(f"warning: skipping event {index}: {label}", file=sys.stderr)
            skipped += 1
            continue
        results[index] = (data, label)
    if not results:
        raise AECrackError("no events could be processed")
    order = sorted(results)
    data = np.stack([results[k][0] for k in order])
    labels = np.array([results[k][1] for k in order])
    aeio.save_features(args.out, data, labels, lam)
    if args.fit_stats:
        names = LAMBDA_ROWS[lam]
        stats = {
            name: {"mean": data[:, i, :].mean(axis=0),
                   "std": np.maximum(data[:, i, :].std(axis=0), 1e-12)}
            for i, name in enumerate(names)
        }
        aeio.save_stats(args.out + ".stats.json", stats)
    _say(command="features", events=data.shape[0], rows=data.shape[1],
         ned=data.shape[2], **{"lambda": lam}, skipped=skipped, out=args.out)
    return EXIT_OK


def _load_features_for_lambda(path, lam=None):
    """Load a feature file and slice it to the requested configuration."""
    data, labels, file_lam = aeio.load_features(path)
    if lam is None:
        if file_lam == 0:
            raise ConfigMismatchError(
                "feature file holds the full row superset; pass --lambda"
            )
        return data, labels, file_lam
    have = LAMBDA_ROWS[file_lam]
    want = LAMBDA_ROWS[lam]
    missing = [n for n in want if n not in have]
    if missing:
        raise ConfigMismatchError(
            f"lambda mismatch: features hold lambda={file_lam} rows {have}, "
            f"requested lambda={lam} needs {missing}"
        )
    sel = [have.index(n) for n in want]
    return data[:, sel, :], labels, lam


def cmd_train(args) -> int:
    _require(args, "features", "out")
    lam = None if args.lam is None else int(args.lam)
    X, y, lam = _load_features_for_lambda(args.features, lam)
    y = check_labels(y, n_events=X.shape[0])
    idx_tr, idx_va, _ = stratified_split(y, (0.8, 0.2, 0.0), args.seed)
    mean = X[idx_tr].mean(axis=0)
    std = np.maximum(X[idx_tr].std(axis=0), 1e-12)
    Xs = (X - mean) / std
    theta, history = train(
        Xs[idx_tr], y[idx_tr], lambda_id=lam, d_lstm=args.d_lstm,
        cfg=_train_config(args), readout=args.readout,
        val_data=(Xs[idx_va], y[idx_va]),
    )
    names = LAMBDA_ROWS[lam]
    stats = {name: {"mean": mean[i], "std": std[i]} for i, name in enumerate(names)}
    aeio.save_model(args.out, theta, stats)
    if args.history:
        aeio.save_history_csv(args.history, history)
    best = int(np.argmin(history["j_val"]))
    _say(command="train", **{"lambda": lam}, d_lstm=args.d_lstm,
         epochs=len(history["epoch"]), best_epoch=best + 1,
         j_val=f"{history['j_val'][best]:.6f}",
         val_acc=f"{history['val_acc'][best]:.4f}", seed=args.seed,
         model=args.out)
    return EXIT_OK


def _prepare_for_model(args):
    theta, stats = aeio.load_model(args.model)
    X, y, _ = _load_features_for_lambda(args.features, theta.lambda_id)
    if X.shape[2] != theta.n_ed:
        raise ConfigMismatchError(
            f"n_ed mismatch: features={X.shape[2]} model={theta.n_ed}"
        )
    if stats is not None:
        names = LAMBDA_ROWS[theta.lambda_id]
        mean = np.stack([stats[n]["mean"] for n in names])
        std = np.stack([stats[n]["std"] for n in names])
        X = (X - mean) / std
    return theta, X, y


def cmd_eval(args) -> int:
    _require(args, "features", "model")
    theta, X, y = _prepare_for_model(args)
    y = check_labels(y, n_events=X.shape[0])
    accuracy, matrix = evaluate(theta, X, y)
    for row, name in zip(matrix.counts, ("tensile", "shear", "mixed")):
        print(f"true_{name}: " + " ".join(str(v) for v in row))
    _say(command="eval", events=X.shape[0], accuracy=f"{accuracy:.6f}",
         trace=int(np.trace(matrix.counts)), total=matrix.total)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write("true,pred_tensile,pred_shear,pred_mixed\n")
            for name, row in zip(("tensile", "shear", "mixed"), matrix.counts):
                fh.write(name + "," + ",".join(str(v) for v in row) + "\n")
    return EXIT_OK


def cmd_classify(args) -> int:
    _require(args, "features", "model", "out")
    theta, X, _ = _prepare_for_model(args)
    probs, _ = model_forward(theta, X)
    labels = probs.argmax(axis=1)
    aeio.save_predictions_csv(args.out, list(range(X.shape[0])), labels, probs)
    counts = {CLASS_NAMES[c]: int((labels == int(c)).sum()) for c in CLASS_NAMES}
    _say(command="classify", events=X.shape[0], out=args.out, **counts)
    return EXIT_OK


def cmd_sweep(args) -> int:
    _require(args, "features", "out")
    data, labels, file_lam = aeio.load_features(args.features)
    labels = check_labels(labels, n_events=data.shape[0])
    full_names = LAMBDA_ROWS[file_lam]
    lambdas = [int(v) for v in args.lambdas.split(",")]
    d_lstms = [int(v) for v in args.d_lstms.split(",")]
    seeds = [int(v) for v in args.seeds.split(",")]
    histories = {}

    def keep_history(cell, theta, history):
        if history is not None and args.history_dir:
            os.makedirs(args.history_dir, exist_ok=True)
            name = f"sweep_l{cell.lambda_id}_d{cell.d_lstm}_s{cell.seed}.csv"
            aeio.save_history_csv(os.path.join(args.history_dir, name), history)
        _say(cell=f"l{cell.lambda_id}_d{cell.d_lstm}_s{cell.seed}",
             val_acc=f"{cell.val_acc:.4f}", test_acc=f"{cell.test_acc:.4f}",
             epochs=cell.epochs_used, failed=int(cell.failed))

    result = sweep(
        data, labels, full_names, lambdas=lambdas, d_lstms=d_lstms,
        cfg=_train_config(args), seeds=seeds, readout=args.readout,
        on_cell=keep_history,
    )
    aeio.save_sweep_csv(args.out, result)
    failed = sum(1 for c in result.cells if c.failed)
    _say(command="sweep", cells=len(result.cells), failed=failed, out=args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="aecrack",
        description="Acoustic-emission crack-event classification pipeline",
    )
    parser.add_argument("--config", default=None,
                        help="JSON file of flag defaults (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)
    children = []
    original_add_parser = sub.add_parser

    def add_parser(*args, **kwargs):
        child = original_add_parser(*args, **kwargs)
        children.append(child)
        return child

    sub.add_parser = add_parser

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--per-class", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--duration", type=int, default=16384)
    p.add_argument("--snr-db", type=float, default=12.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="preprocess waveforms and extract descriptors")
    p.add_argument("--data", default=None, help="dataset directory")
    p.add_argument("--out", default=None, help="output .gamq file")
    p.add_argument("--lambda", dest="lam", default="5",
                   help="input configuration 1..5, or 'all' for the sweep superset")
    p.add_argument("--tfr-model", default=None, help="transducer model JSON")
    p.add_argument("--fit-stats", action="store_true",
                   help="write a standardization sidecar next to the output")
    p.add_argument("--threads", type=int, default=1)
    _add_descriptor_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the BiLSTM classifier")
    p.add_argument("--features", default=None)
    p.add_argument("--out", default=None, help="model JSON path")
    p.add_argument("--history", default=None, help="per-epoch history CSV")
    p.add_argument("--lambda", dest="lam", default=None)
    p.add_argument("--seed", type=int, default=_default_seed())
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a labeled feature file")
    p.add_argument("--features", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--report", default=None, help="confusion matrix CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="emit per-event class probabilities")
    p.add_argument("--features", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sweep", help="train a model per (lambda, d_lstm, seed) cell")
    p.add_argument("--features", default=None, help="feature file (superset rows)")
    p.add_argument("--out", default=None, help="sweep CSV")
    p.add_argument("--lambdas", default="1,2,3,4,5")
    p.add_argument("--d-lstms", default="64")
    p.add_argument("--seeds", default="0")
    p.add_argument("--history-dir", default=None)
    p.add_argument("--seed", type=int, default=_default_seed())
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser, children


def main(argv=None) -> int:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    parser, children = build_parser()
    if known.config:
        try:
            with open(known.config, "r", encoding="utf-8") as fh:
                defaults = json.load(fh)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        except json.JSONDecodeError as exc:
            print(f"error: invalid config JSON: {exc}", file=sys.stderr)
            return EXIT_USAGE
        parser.set_defaults(**defaults)
        # subparser defaults would otherwise clobber the config values
        for child in children:
            child.set_defaults(**defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, IOError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AECrackError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
