"""Command-line frontend: ``parexplain {learn,explain,eval,synth}``.

Results go to stdout, diagnostics to stderr. Exit codes: 0 success, 1 user
error (bad flags, unreadable or malformed input), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import seeding, synth
from .dataset import DataError, Dataset, load_csv, load_schema
from .detector import fit_isolation_forest, tune_threshold
from .evaluation import (
    hitrate_report,
    noise_sweep,
    perturb_normals,
    pof_report,
    rules_accuracy,
)
from .explain import DEFAULT_K, explain, render_text, to_machine
from .learner import learn
from .mining import LearningConfig, RuleBook
from .predicates import DISCRETIZERS

logger = logging.getLogger("parexplain")

EVAL_MODES = ("rules-accuracy", "hitrate", "pof", "noise")
DETECTORS = ("iforest", "labels")


class UsageError(Exception):
    """Bad combination of flags or values; exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parexplain", description="Explain tabular anomalies with predicate-based association rules.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("learn", help="learn a rulebook from normal training data")
    p.add_argument("--train", required=True, type=Path, help="training CSV (assumed normal)")
    p.add_argument("--schema", type=Path, help="name,kind sidecar; inferred from cells when omitted")
    p.add_argument("--theta", type=_unit_interval, help="minimum support (default max(10/|D|, 0.01))")
    p.add_argument("--gamma", type=_unit_interval, default=0.9, help="minimum confidence")
    p.add_argument("--lambda", dest="lam", type=_positive_float, default=5.0, help="confidence weight in the score")
    p.add_argument("--max-antecedents", type=_positive_int, default=4)
    p.add_argument("--discretizer", choices=DISCRETIZERS, default="dependency")
    p.add_argument("--bins", type=_positive_int, default=10, help="bins for the uniform/kmeans discretizers")
    p.add_argument("--label-column", help="0/1 label column: dropped, and rows labelled 1 are skipped")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path, help="model file to write")

    p = sub.add_parser("explain", help="explain instances with a learned rulebook")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--input", required=True, type=Path, help="CSV of instances (extra columns ignored)")
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--format", choices=("text", "machine"), default="text")

    p = sub.add_parser("eval", help="run an evaluation protocol")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--test", required=True, type=Path, help="test CSV with a 0/1 label column")
    p.add_argument("--train", type=Path, help="training CSV (needed by iforest, hitrate and noise)")
    p.add_argument("--mode", required=True, choices=EVAL_MODES)
    p.add_argument("--detector", choices=DETECTORS, default="labels")
    p.add_argument("--label-column", default="label")
    p.add_argument("--k", type=_positive_int, default=DEFAULT_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--records", type=Path, help="per-instance CSV to write")
    p.add_argument("--report", type=Path, help="JSON summary to write")

    p = sub.add_parser("synth", help="generate a synthetic fixture with planted anomalies")
    p.add_argument("--scenario", choices=synth.SCENARIOS, default="water-tank")
    p.add_argument("--rows", type=_positive_int, default=1000)
    p.add_argument("--anomalies", type=_nonneg_int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path, help="CSV to write; ground truth goes next to it")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _parse_labels(raw: Sequence[str], column: str) -> np.ndarray:
    out = []
    for i, cell in enumerate(raw):
        if cell not in ("0", "1"):
            raise DataError(f"row {i}, column {column!r}: label must be 0 or 1, got {cell!r}")
        out.append(int(cell))
    return np.array(out, dtype=np.int64)


def _load_labeled(path: Path, schema, column: str) -> tuple[Dataset, np.ndarray]:
    data, extras = load_csv(path, schema=schema, extra_columns=[column])
    return data, _parse_labels(extras[column], column)


def _load_train(path: Path | None, schema, needed_for: str) -> Dataset:
    if path is None:
        raise UsageError(f"--train is required for {needed_for}")
    return load_csv(path, schema=schema)


def _iforest_flags(train: Dataset, test: Dataset, labels: np.ndarray, seed: int) -> list[int]:
    model = fit_isolation_forest(train, seed=seeding.derive(seed, "iforest"))
    scores = model.score_samples(test)
    t = tune_threshold(scores, labels)
    logger.info("iforest threshold %.6f", t)
    return [int(i) for i in np.flatnonzero(scores > t)]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_learn(args) -> int:
    schema = load_schema(args.schema) if args.schema else None
    if args.label_column:
        data, labels = _load_labeled(args.train, schema, args.label_column)
        train = data.take(np.flatnonzero(labels == 0))
    else:
        train = load_csv(args.train, schema=schema)
    config = LearningConfig(
        theta=args.theta,
        gamma=args.gamma,
        lam=args.lam,
        max_antecedents=args.max_antecedents,
        discretizer=args.discretizer,
        bins=args.bins,
        seed=args.seed,
    )
    start = time.perf_counter()
    rb = learn(train, config)
    elapsed = time.perf_counter() - start
    rb.save(args.out)
    print(f"rules: {len(rb.rules)}")
    print(f"predicates: {len(rb.predicates)}")
    print(f"wall time (secs): {elapsed:.3f}")
    print(f"model: {args.out}")
    return 0


def cmd_explain(args) -> int:
    rb = RuleBook.load(args.model)
    data = load_csv(args.input, schema=rb.schema)
    if args.format == "machine":
        out = [{"row": i, **to_machine(explain(rb, x, args.k), rb)} for i, x in enumerate(data)]
        print(json.dumps(out, indent=1))
    else:
        blocks = [render_text(explain(rb, x, args.k), rb, label=f"row {i}:") for i, x in enumerate(data)]
        print("\n".join(blocks))
    return 0


def cmd_eval(args) -> int:
    rb = RuleBook.load(args.model)
    test, labels = _load_labeled(args.test, rb.schema, args.label_column)
    needs_train = args.detector == "iforest" or args.mode in ("hitrate", "noise")
    train = _load_train(args.train, rb.schema, f"--mode {args.mode} --detector {args.detector}") if needs_train else None

    if args.mode == "hitrate":
        normals = test.take(np.flatnonzero(labels == 0))
        if len(normals) == 0:
            raise UsageError("hitrate mode needs normal (label 0) test rows to perturb")
        perturbed = perturb_normals(normals, seeding.derive(args.seed, "perturb"), reference=train)
        if args.detector == "labels":
            flagged = None
        else:
            pool = Dataset.from_rows(rb.schema, normals.rows + [p.instance for p in perturbed])
            pool_labels = np.array([0] * len(normals) + [1] * len(perturbed))
            hits = set(_iforest_flags(train, pool, pool_labels, args.seed))
            flagged = [len(normals) + i in hits for i in range(len(perturbed))]
        report = hitrate_report(rb, perturbed, flagged, args.k)
    elif args.mode == "noise":
        if args.detector == "labels":
            def flag(_train, _test):
                return [int(i) for i in np.flatnonzero(labels == 1)]
        else:
            def flag(dirty, data):
                return _iforest_flags(dirty, data, labels, args.seed)
        report = noise_sweep(train, test, labels, flag, rb.config, args.seed, k=args.k)
    else:
        if args.detector == "labels":
            flagged = [int(i) for i in np.flatnonzero(labels == 1)]
        else:
            flagged = _iforest_flags(train, test, labels, args.seed)
        runner = rules_accuracy if args.mode == "rules-accuracy" else pof_report
        report = runner(rb, test, labels, flagged, args.k)
        if args.mode == "rules-accuracy":
            extra = pof_report(rb, test, labels, flagged, args.k)
            report.pof_tp, report.pof_fp = extra.pof_tp, extra.pof_fp

    report.notes.setdefault("detector", args.detector)
    report.notes.setdefault("seed", args.seed)
    print("\n".join(report.lines()))
    if args.records:
        report.write_records(args.records)
    if args.report:
        Path(args.report).write_text(json.dumps(report.summary(), indent=1) + "\n")
    return 0


def cmd_synth(args) -> int:
    if args.anomalies > args.rows:
        raise UsageError("--anomalies cannot exceed --rows")
    data = synth.generate(args.scenario, args.rows, args.anomalies, args.seed)
    sidecar = synth.write(data, args.out)
    print(f"rows: {len(data.data)} (anomalies: {int(data.labels.sum())})")
    print(f"data: {args.out}")
    print(f"ground truth: {sidecar}")
    return 0


COMMANDS = {"learn": cmd_learn, "explain": cmd_explain, "eval": cmd_eval, "synth": cmd_synth}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DataError, ValueError, OSError, KeyError) as exc:
        # ValueError covers config validation and malformed model files
        print(f"parexplain {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        print(f"parexplain {args.command}: internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
