"""Command line front-end.

Every sub-command accepts ``--config``, ``--seed``, ``--out`` and ``--threads``.
On failure the process exits non-zero and prints one JSON object on stderr::

    {"error": "InvalidInputError", "code": 2, "message": "..."}
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from . import classify, datasets, pivots, pooling
from .config import RunConfig, load_config
from .errors import ConfigError, HokError, InvalidInputError

logger = logging.getLogger("hokpool")

SWEEP_HEADER = ["axis", "value", "mean_class_acc", "map"]
DEFAULT_SWEEP_VALUES = {
    "alpha": [round(0.1 * i, 1) for i in range(1, 11)],
    "k_f": [8, 16, 32, 48, 64],
    "k_t": [1, 5, 10, 15, 20, 25, 30],
    "sigma_t": [0.05, 0.1, 0.2, 0.5, 1.0],
    "zeta2": [0.0, 0.25, 0.5, 0.75],
}


def _emit(text: str, out) -> None:
    if out:
        datasets.atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _need_out(args):
    if not args.out:
        raise ConfigError(f"'{args.command}' writes a binary file; pass --out PATH")
    return args.out


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    return cfg.with_overrides(**overrides) if overrides else cfg


def cmd_synth(args, cfg):
    ds = datasets.synth_generate(
        n_classes=args.classes,
        per_class=args.per_class,
        length_range=(args.min_len, args.max_len),
        noise=args.noise,
        seed=cfg.seed,
    )
    _emit(datasets.dumps_dataset(ds), args.out)


def cmd_pivots_learn(args, cfg):
    ds = datasets.load_dataset(args.dataset)
    if len(ds) == 0:
        raise InvalidInputError(f"{args.dataset}: no sequences to learn pivots from")
    pc = cfg.pivots
    frames = np.vstack([s.scores for s in ds])
    piv = pivots.build_pivot_set(
        frames,
        pc.k_f,
        pc.k_t,
        pc.sigma_t,
        pc.gmm_max_iters,
        seed=cfg.seed,
        source=classify.ids_hash(s.id for s in ds),
    )
    _emit(json.dumps(piv.to_dict(), indent=1) + "\n", args.out)


def cmd_pool(args, cfg):
    ds = datasets.load_dataset(args.dataset)
    meta = {"classes": ds.classes, "dataset": str(args.dataset)}
    if args.kind == "hok":
        if not args.pivots:
            raise ConfigError("'pool hok' needs --pivots PATH")
        piv = pivots.load_pivots(args.pivots)
        fn = lambda s: pooling.hok_descriptor(s, piv, cfg.hok)  # noqa: E731
        meta.update(kind="hok", config_hash=cfg.hok.config_hash(), pivots=piv.fingerprint())
    elif args.kind == "second":
        so = cfg.second_order
        fn = lambda s: pooling.second_order_descriptor(s, so.sigma, so.epsilon)  # noqa: E731
        meta.update(kind="second_order", sigma=so.sigma, epsilon=so.epsilon)
    else:
        fn = pooling.average_pool
        meta.update(kind="average")
    descs = pooling.pool_batch(ds.sequences, fn, cfg.threads)
    values = np.vstack([d.values for d in descs]) if descs else np.zeros((0, 0))
    datasets.save_descriptors(_need_out(args), values, [s.id for s in ds], ds.labels, meta)
    logger.info("wrote %d %s descriptors of length %d", len(descs), meta["kind"], values.shape[1])


def cmd_train(args, cfg):
    values, ids, labels, meta = datasets.load_descriptors(args.descriptors)
    n_classes = len(meta.get("classes", [])) or None
    model = classify.train_linear(
        values, labels, cfg.classifier.lam, cfg.classifier.epochs, seed=cfg.seed, n_classes=n_classes
    )
    out_meta = {k: meta[k] for k in ("kind", "classes", "config_hash") if k in meta}
    datasets.save_model(_need_out(args), model, out_meta)


def cmd_eval_cv(args, cfg):
    ds = datasets.load_dataset(args.dataset)
    if args.folds is not None:
        cfg = cfg.with_overrides(folds=args.folds)
    if args.descriptor is not None:
        cfg = cfg.with_overrides(descriptor=args.descriptor)
    report = classify.cross_validate(ds.sequences, cfg, class_names=ds.classes)
    doc = report.to_dict()
    doc["config"] = cfg.to_dict()
    _emit(json.dumps(doc, indent=1) + "\n", args.out)


def cmd_sweep(args, cfg):
    ds = datasets.load_dataset(args.dataset)
    if args.values:
        cast = int if args.axis in ("k_f", "k_t") else float
        values = [cast(v) for v in args.values.split(",")]
    else:
        values = DEFAULT_SWEEP_VALUES[args.axis]
    rows = classify.sweep(ds.sequences, cfg, args.axis, values, class_names=ds.classes)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration JSON")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", metavar="PATH", help="output file (stdout for text outputs when omitted)")
    common.add_argument("--threads", type=int, help="worker threads for batch pooling")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hokpool", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate the reversed-pair synthetic dataset")
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--per-class", type=int, default=40)
    p.add_argument("--min-len", type=int, default=30)
    p.add_argument("--max-len", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.3)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pivots", help="pivot learning")
    psub = p.add_subparsers(dest="action", required=True)
    q = psub.add_parser("learn", parents=[common], help="fit score pivots on every frame of DATASET")
    q.add_argument("dataset")
    q.set_defaults(func=cmd_pivots_learn)

    p = sub.add_parser("pool", parents=[common], help="compute per-sequence descriptors")
    p.add_argument("kind", choices=["hok", "second", "avg"])
    p.add_argument("dataset")
    p.add_argument("--pivots", metavar="PATH", help="pivot JSON (required for hok)")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("train", parents=[common], help="train the linear classifier on a descriptor file")
    p.add_argument("descriptors")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluation")
    esub = p.add_subparsers(dest="action", required=True)
    q = esub.add_parser("cv", parents=[common], help="stratified k-fold cross-validation")
    q.add_argument("dataset")
    q.add_argument("--folds", type=int)
    q.add_argument("--descriptor", choices=["hok", "second_order", "average", "hok+second_order"])
    q.set_defaults(func=cmd_eval_cv)

    p = sub.add_parser("sweep", parents=[common], help="cross-validated sweep over one hyper-parameter")
    p.add_argument("dataset")
    p.add_argument("--axis", choices=sorted(DEFAULT_SWEEP_VALUES), default="alpha")
    p.add_argument("--values", help="comma-separated grid (default depends on the axis)")
    p.set_defaults(func=cmd_sweep)
    return parser


def _fail(kind: str, code: int, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "code": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _run_config(args)
        args.func(args, cfg)
    except HokError as exc:
        return _fail(type(exc).__name__, exc.exit_code, str(exc))
    except FileNotFoundError as exc:
        return _fail("FileNotFoundError", 11, f"{exc.filename}: {exc.strerror}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
