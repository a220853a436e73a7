"""Command-line entry point: ``seco train|eval|selftest|dump-similarity``.

Exit codes: 0 ok, 1 selftest failure, 2 bad arguments or config, 3 bad
snapshot.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import selftest
from .config import load_config
from .errors import InvalidConfigError, SecoError, SnapshotError, UninitializedPrototypeError
from .metrics import class_table_csv
from .prototypes import similarity_matrix
from .reservoir import TagReservoir
from .scenario import generate_scenario
from .snapshot import load_snapshot, save_snapshot
from .trainer import TrainState, evaluate, train

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_USAGE = 2
EXIT_SNAPSHOT = 3

REPORT_FILE = "report.jsonl"
STATE_FILE = "state.json"
SIMILARITY_DIR = "similarity"


def write_similarity_csv(sim, path):
    K = len(sim)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class"] + [str(l) for l in range(1, K + 1)])
        for l, row in enumerate(sim, start=1):
            writer.writerow([str(l)] + [f"{v:.6f}" for v in row])


def _fmt(v):
    return "-" if v is None else f"{v:.4f}"


def _load_config_or_exit(parser, path):
    if not os.path.isfile(path):
        parser.error(f"config file not found: {path}")
    try:
        return load_config(path)
    except (InvalidConfigError, OSError) as exc:
        parser.error(f"invalid config {path}: {exc}")


def cmd_train(args, parser):
    cfg = _load_config_or_exit(parser, args.config)
    if args.seed is not None:
        cfg.scenario.seed = args.seed
        cfg.hyper.seed = args.seed
    if args.disable_lig:
        cfg.hyper.use_lig = False
    if args.disable_lil:
        cfg.hyper.use_lil = False
    if args.disable_rectify:
        cfg.hyper.use_rectify = False
    try:
        os.makedirs(os.path.join(args.out, SIMILARITY_DIR), exist_ok=True)
    except OSError as exc:
        parser.error(f"cannot create output directory {args.out}: {exc}")

    def on_epoch(record, state):
        ev = record["eval"]
        print(
            f"epoch {record['epoch']:3d}  total={record['losses']['total']:.4f}  "
            f"miou={_fmt(ev['miou'])}  max_offdiag={_fmt(ev['max_offdiag_similarity'])}"
        )
        if ev["prototype_similarity"] is not None:
            name = f"epoch_{record['epoch']:03d}.csv"
            write_similarity_csv(ev["prototype_similarity"], os.path.join(args.out, SIMILARITY_DIR, name))

    report, state = train(cfg, callback=on_epoch)
    with open(os.path.join(args.out, REPORT_FILE), "w") as fh:
        for line in report.lines():
            fh.write(line + "\n")
    save_snapshot(state, cfg, os.path.join(args.out, STATE_FILE))
    print(f"wrote {len(report.records)} epoch records to {os.path.join(args.out, REPORT_FILE)}")
    return EXIT_OK


def _snapshot_or_exit(path):
    try:
        return load_snapshot(path)
    except SnapshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def cmd_eval(args, parser):
    cfg = _load_config_or_exit(parser, args.config)
    loaded = _snapshot_or_exit(args.snapshot)
    if loaded is None:
        return EXIT_SNAPSHOT
    params, teacher, bank, snap_cfg, step = loaded
    sc, ss = cfg.scenario, snap_cfg.scenario
    if (sc.num_classes, sc.feature_dim, sc.embed_dim) != (ss.num_classes, ss.feature_dim, ss.embed_dim):
        print("error: snapshot shapes do not match the config", file=sys.stderr)
        return EXIT_SNAPSHOT
    state = TrainState(params, teacher, bank, TagReservoir(1, sc.embed_dim), step)
    ev = evaluate(state, generate_scenario(sc, "test"), cfg)
    if args.json:
        print(json.dumps(ev, sort_keys=True))
        return EXIT_OK
    print(f"step {step}  mIoU {_fmt(ev['miou'])}")
    print(class_table_csv(np.array(ev["confusion_matrix"])), end="")
    for p in ev["pairs"]:
        a, b = p["pair"]
        print(f"pair {a}-{b}  mean confusion ratio {_fmt(p['mean_confusion_ratio'])}")
    return EXIT_OK


def cmd_selftest(args, parser):
    failed = []
    for result in selftest.run_all():
        print(result.line())
        if not result.passed:
            failed.append(result.name)
    if failed:
        print(f"selftest failed: {', '.join(failed)}")
        return EXIT_SELFTEST
    print("selftest passed")
    return EXIT_OK


def cmd_dump_similarity(args, parser):
    loaded = _snapshot_or_exit(args.snapshot)
    if loaded is None:
        return EXIT_SNAPSHOT
    bank = loaded[2]
    try:
        sim = similarity_matrix(bank)
    except UninitializedPrototypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SNAPSHOT
    try:
        write_similarity_csv(sim.tolist(), args.out)
    except OSError as exc:
        parser.error(f"cannot write {args.out}: {exc}")
    print(f"wrote {len(sim)}x{len(sim)} similarity matrix to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="seco", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a synthetic scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--disable-lig", action="store_true")
    p.add_argument("--disable-lil", action="store_true")
    p.add_argument("--disable-rectify", action="store_true")
    p.set_defaults(func=cmd_train, parser=p)

    p = sub.add_parser("eval", help="evaluate a snapshot on the held-out split")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval, parser=p)

    p = sub.add_parser("selftest", help="gradient checks and oracles")
    p.set_defaults(func=cmd_selftest, parser=p)

    p = sub.add_parser("dump-similarity", help="write the prototype similarity CSV")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_similarity, parser=p)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args.parser)
    except SecoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
