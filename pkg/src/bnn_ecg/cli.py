"""Command-line entry point: ``bnn-ecg {train,eval,account,landscape,export}``.

Exit codes: 0 success, 2 usage or invalid argument, 3 data/format error,
4 numeric failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import accounting, weights
from .data import MITBIH_TEST_RATIOS, MITBIH_TOTALS, load_segments, normalize, stratified_split, synthetic_dataset, to_arrays
from .errors import BnnEcgError, FormatError
from .evaluation import evaluate, loss_landscape
from .models import MODEL_NAMES, baseline_spec, build, spec_for
from .training import TrainConfig, train

log = logging.getLogger("bnn_ecg")


def _segments(path, fmt, raw):
    segs = load_segments(path, fmt)
    return segs if raw else [normalize(s) for s in segs]


def _dataset(args):
    if args.data == "synthetic":
        return synthetic_dataset(seed=args.data_seed)
    segs = _segments(args.data, args.format, args.no_normalize)
    counts = {c: sum(s.label == c for s in segs) for c in MITBIH_TOTALS}
    ratio = MITBIH_TEST_RATIOS if args.test_ratio is None and counts == MITBIH_TOTALS else (args.test_ratio or 0.2)
    return stratified_split(segs, ratio, args.seed)


def _eval_samples(args):
    if args.data == "synthetic":
        return to_arrays(synthetic_dataset(seed=args.data_seed).test)
    return to_arrays(_segments(args.data, args.format, args.no_normalize))


def cmd_train(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = _dataset(args)
    for c, n in ds.counts.items():
        log.info("class %s: %s", c, n)
    defaults = TrainConfig()
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        initial_lr=args.lr if args.lr is not None else (1e-3 if args.model == "baseline" else defaults.initial_lr),
        class_weighting=args.class_weighting,
    )
    net = build(args.model, seed=args.seed)
    net, history = train(net, ds, cfg, log=log.info)
    weights.save(net, out / "weights.becg")
    (out / "history.csv").write_text(history.to_csv())
    metrics = evaluate(net, ds.test)
    (out / "metrics.json").write_text(metrics.to_json() + "\n")
    (out / "confusion.csv").write_text(metrics.confusion_csv())
    print(f"test OA {metrics.oa:.4f}; wrote {out}/weights.becg, history.csv, metrics.json")
    return 0


def cmd_eval(args):
    net = weights.load(args.weights)
    metrics = evaluate(net, _eval_samples(args), packed=not args.unpacked)
    text = metrics.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_account(args):
    spec = spec_for(args.model)
    bin_spec = spec if spec.binarized else spec_for("btpn")
    base, binr = accounting.compare(baseline_spec(), bin_spec, args.input_length)
    rep = binr if spec.binarized else base
    payload = rep.to_json() + "\n"
    if args.json:
        Path(args.json).write_text(payload)
    else:
        sys.stdout.write(payload)
    if args.table:
        print(accounting.format_table(base, binr), file=sys.stderr)
    return 0


def cmd_landscape(args):
    net = weights.load(args.weights)
    x, y = _eval_samples(args)
    grid = loss_landscape(net, (x[: args.samples], y[: args.samples]), args.resolution, args.scale, args.seed)
    Path(args.out).write_text(grid.to_csv())
    print(f"center loss {grid.center:.6f}; wrote {args.out}")
    return 0


def cmd_export(args):
    if args.weights:
        net = weights.load(args.weights)
    elif args.model:
        net = build(args.model, seed=args.seed)
    else:
        raise FormatError("export needs --weights or --model")
    blob = weights.dumps(net)
    if weights.dumps(weights.loads(blob)) != blob:
        raise FormatError("weight file did not survive a round trip")
    Path(args.out).write_bytes(blob)
    print(f"wrote {len(blob)} bytes to {args.out}")
    return 0


def _data_args(p):
    p.add_argument("--data", required=True, help="segment file (csv or ecg1), or 'synthetic'")
    p.add_argument("--format", choices=("csv", "ecg1"), default=None)
    p.add_argument("--no-normalize", action="store_true", help="segments are already normalized")
    p.add_argument("--data-seed", type=int, default=20240607, help="seed of the synthetic generator")


def make_parser():
    parser = argparse.ArgumentParser(prog="bnn-ecg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write weights, history and metrics")
    p.add_argument("--model", choices=MODEL_NAMES, required=True)
    _data_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--test-ratio", type=float, default=None)
    p.add_argument("--class-weighting", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="metrics of a weight file on a segment file")
    p.add_argument("--weights", required=True)
    _data_args(p)
    p.add_argument("--out")
    p.add_argument("--unpacked", action="store_true", help="use the float reference path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("account", help="parameter, storage, operation and speedup report")
    p.add_argument("--model", choices=MODEL_NAMES, required=True)
    p.add_argument("--input-length", type=int, default=None)
    p.add_argument("--json")
    p.add_argument("--table", action="store_true", help="also print the comparison table to stderr")
    p.set_defaults(func=cmd_account)

    p = sub.add_parser("landscape", help="loss landscape grid as CSV")
    p.add_argument("--weights", required=True)
    _data_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=21)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("export", help="write a weight file (fresh model or re-encoded)")
    p.add_argument("--weights")
    p.add_argument("--model", choices=MODEL_NAMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except BnnEcgError as exc:
        print(f"bnn-ecg: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"bnn-ecg: error: {exc}", file=sys.stderr)
        return 3
    except FloatingPointError as exc:
        print(f"bnn-ecg: error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
