"""Command-line front end: one subcommand per pipeline stage.

Exit status is 0 on success, 1 on bad input (usage, missing or malformed
files) and 2 on an internal error.  Identical inputs, flags and seed give
byte-identical outputs at any ``--jobs``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .dataset import (DEFAULT_TRAIN_FRACTION, ClassMap, LabelledCorpus, format_ordering, rank_features,
                      read_labels, simplify, split_indices, write_ranking)
from .features import (FeatureMatrix, descriptors_from_json, descriptors_to_json, enumerate_descriptors,
                       evaluate_matrix, EXTRA_FEATURES)
from .heuristics import PredictionSet, brown, read_predictions, sotd, write_predictions
from .ml import (EvaluationReport, TimingTable, TrainedModel, assign_targets, baselines,
                 check_limit_schedule, evaluate, histogram_csv, knn_train, natural_key, training_labels,
                 write_targets)
from .parse import ParseError, load_corpus
from .poly import PolynomialError


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UserError(f"{self.prog}: {message}")


FORMATS = """\
file formats:
  corpus       directory of problem files (.txt/.poly native, .smt2 SMT-LIB; read in
               filename order, id = file stem), a single problem file, or a .jsonl
               file with one {"id", "vars": [...], "polys": [...]} object per line.
               Native files: first line "vars: x1, x2, x3", then one polynomial per
               line such as "3*x1^2*x2 - x3/2"; "#" starts a comment.
  features     CSV "problem_id,<col>,...": columns are descriptor serials (or extra
               feature names); values are integers or decimals, "inf" allowed.
  descriptors  JSON list of {serial, base, chain, row, formula} objects.
  labels       CSV "problem_id,class,ordering"; ordering "x1>x2>x3" lists the
               first-eliminated variable first; class numbers the orderings of the
               sorted variables in lexicographic order of positions, from 1.
  timings      CSV "problem_id,ordering,time_s,status", status ok|timeout; every
               problem lists each ordering of its variables exactly once.
  predictions  JSON list of {problem_id, method, orderings: [...], scores: {...}},
               or with --format csv: "problem_id,method,orderings" with orderings
               joined by ";".
  model        versioned JSON (standardization, training points, k, CV scores).
  ranking      CSV "rank,serial,formula,F".
"""


def _add_common(p: argparse.ArgumentParser, seed: bool = False, jobs: bool = False, fmt: bool = False):
    if seed:
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    if jobs:
        p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    if fmt:
        p.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default json)")


def _split_args(p: argparse.ArgumentParser, default: str, choices: Sequence[str]):
    p.add_argument("--split", choices=choices, default=default,
                   help=f"which rows to use (default {default}); the split is seeded by --seed")
    p.add_argument("--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION,
                   help="training share of the seeded split (default 4612/6117)")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="cadfeat", description="Algebraic features and variable-ordering heuristics "
                                              "for cylindrical algebraic decomposition.",
                  epilog=FORMATS, formatter_class=argparse.RawDescriptionHelpFormatter)
    top.add_argument("--version", action="version", version=f"cadfeat {__version__}")
    sub = top.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def cmd(name, help_text, formats):
        return sub.add_parser(name, help=help_text.replace("%", "%%"), description=help_text,
                              epilog="file formats:\n" + formats,
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    p = cmd("featurize", "Evaluate every generated feature on a corpus.",
            "  corpus in: directory, problem file or .jsonl (see `cadfeat -h`)\n"
            "  features out: CSV problem_id,<serial>,...\n"
            "  descriptors out: JSON list of {serial, base, chain, row, formula}\n")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True, help="feature matrix CSV")
    p.add_argument("--descriptors", help="also write the descriptor list here")
    p.add_argument("--vars", type=int, help="required number of variables")
    p.add_argument("--h-reading", choices=("sign", "product"), default="sign",
                   help="sign-weighted total degree: sgn(d_v)*sum (default) or d_v*sum")
    p.add_argument("--extras", action="store_true",
                   help="append " + ", ".join(EXTRA_FEATURES) + " columns")
    _add_common(p, jobs=True)

    p = cmd("simplify", "Drop constant features and merge identical ones.",
            "  features in/out: CSV problem_id,<serial>,...\n"
            "  report out: JSON {original_columns, removed_constant, constant_values, merge_groups}\n")
    p.add_argument("features")
    p.add_argument("-o", "--output", required=True, help="simplified feature CSV")
    p.add_argument("--report", required=True, help="merge report JSON")

    p = cmd("rank", "Rank features by ANOVA F-value against the class labels.",
            "  features in: CSV problem_id,<serial>,...\n"
            "  labels in: CSV problem_id,class,ordering\n"
            "  ranking out: CSV rank,serial,formula,F\n")
    p.add_argument("features")
    p.add_argument("--labels", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--descriptors", help="descriptor JSON for formulas (default: regenerate)")
    _split_args(p, "train", ("train", "all"))
    _add_common(p, seed=True)

    for name, text in (("brown", "Predict orderings with Brown's heuristic."),
                       ("sotd", "Predict orderings with the sum-of-total-degrees heuristic.")):
        p = cmd(name, text,
                "  corpus in: directory, problem file or .jsonl\n"
                "  predictions out: JSON list of {problem_id, method, orderings, scores}\n"
                "                   or CSV problem_id,method,orderings (';'-joined)\n")
        p.add_argument("corpus")
        p.add_argument("-o", "--output", help="predictions file (default stdout)")
        if name == "sotd":
            p.add_argument("--multiplicity", action="store_true",
                           help="count repeated projection polynomials every time they occur")
            p.add_argument("--max-vars", type=int, default=6, help="refuse problems with more variables")
            _add_common(p, jobs=True)
        _add_common(p, fmt=True)

    p = cmd("label", "Turn CAD timings into training labels and target sets.",
            "  timings in: CSV problem_id,ordering,time_s,status\n"
            "  labels out: CSV problem_id,class,ordering (lowest class among fastest)\n"
            "  targets out: JSON list of {problem_id, targets, min_time_s}\n")
    p.add_argument("timings")
    p.add_argument("-o", "--output", required=True, help="labels CSV")
    p.add_argument("--targets", help="also write all tied fastest orderings here")
    p.add_argument("--limits", help="comma-separated time-limit schedule to validate, e.g. 4,8,16,32,64")

    p = cmd("train", "Train a distance-weighted KNN classifier with cross-validated k.",
            "  features in: CSV problem_id,<serial>,...\n"
            "  labels in: CSV problem_id,class,ordering\n"
            "  ranking in: CSV rank,serial,formula,F (with --top-k)\n"
            "  model out: versioned JSON\n")
    p.add_argument("features")
    p.add_argument("--labels", required=True)
    p.add_argument("-o", "--output", required=True, help="model JSON")
    p.add_argument("--ranking", help="ranking CSV used with --top-k")
    p.add_argument("--top-k", type=int, help="keep only the K best-ranked features")
    p.add_argument("--grid", default="1-30", help="k values, e.g. 1-30 or 1,3,5 (default 1-30)")
    p.add_argument("--folds", type=int, default=5)
    _split_args(p, "train", ("train", "all"))
    _add_common(p, seed=True)

    p = cmd("predict", "Predict one ordering per problem with a trained model.",
            "  model in: JSON from `train`\n"
            "  features in: CSV problem_id,<serial>,...\n"
            "  predictions out: JSON or CSV as for brown/sotd\n")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("-o", "--output", help="predictions file (default stdout)")
    p.add_argument("--split", choices=("test", "all"), default="test",
                   help="test: only problems the model was not trained on (default)")
    _add_common(p, fmt=True)

    p = cmd("evaluate", "Score predictions against timings, on the problems all files share.",
            "  predictions in: JSON or CSV (by extension)\n"
            "  timings in: CSV problem_id,ordering,time_s,status\n"
            "  report out: JSON {meta, methods: [...]} or CSV method,problems,accuracy,total_time_s\n")
    p.add_argument("--pred", action="append", required=True, help="predictions file; repeatable")
    p.add_argument("--timings", required=True)
    p.add_argument("-o", "--output", help="report file (default stdout)")
    _add_common(p, fmt=True)

    p = cmd("report", "Write summary tables with baselines and 1%-bin histograms, "
                      "on the problems all files share.",
            "  predictions in: JSON or CSV (by extension)\n"
            "  timings in: CSV problem_id,ordering,time_s,status\n"
            "  out dir: summary.csv, summary.json, histogram_<method>.csv (bin_start_percent,count)\n")
    p.add_argument("--pred", action="append", default=[], help="predictions file; repeatable")
    p.add_argument("--timings", required=True)
    p.add_argument("-o", "--output", required=True, help="output directory")
    return top


# -- helpers -------------------------------------------------------------

def _need(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UserError(f"no such file or directory: {path}")
    return p


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _predictions_text(records: List[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(records, indent=1) + "\n"
    lines = ["problem_id,method,orderings"]
    for r in records:
        lines.append(f"{r['problem_id']},{r['method']},{';'.join(r['orderings'])}")
    return "\n".join(lines) + "\n"


def _write_predictions(records: List[dict], path: Optional[str], fmt: str) -> None:
    if path is not None and fmt == "json":
        write_predictions(records, path)
    else:
        _emit(_predictions_text(records, fmt), path)


def _read_predictions(path: str) -> Dict[str, PredictionSet]:
    p = _need(path)
    if p.suffix == ".csv":
        out = {}
        with open(p, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            if next(reader, None) != ["problem_id", "method", "orderings"]:
                raise UserError(f"{path}:1: header must be problem_id,method,orderings")
            for lineno, row in enumerate(reader, 2):
                if len(row) != 3:
                    raise UserError(f"{path}:{lineno}: expected 3 fields")
                if row[0] in out:
                    raise UserError(f"{path}:{lineno}: duplicate prediction for {row[0]!r}")
                out[row[0]] = PredictionSet([tuple(o.split(">")) for o in row[2].split(";")], method=row[1])
        return out
    try:
        return read_predictions(p)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UserError(f"{path}: malformed predictions ({exc})") from None


def _load_corpus(path: str):
    _need(path)
    return load_corpus(path)


def _descriptors(path: Optional[str], n_vars: int):
    if path:
        descs = descriptors_from_json(_need(path).read_text(encoding="utf-8"))
    else:
        descs = enumerate_descriptors(n_vars)
    return {d.serial: d for d in descs}


def _labelled(features: str, labels: str) -> LabelledCorpus:
    matrix = FeatureMatrix.from_csv(_need(features))
    lab = read_labels(_need(labels))
    missing = [pid for pid in matrix.problem_ids if pid not in lab]
    if missing:
        raise UserError(f"{labels}: no label for problem {missing[0]!r}")
    names = sorted({v for _, o in lab.values() for v in o}, key=natural_key)
    cm = ClassMap(tuple(names))
    classes = []
    for pid in matrix.problem_ids:
        c, ordering = lab[pid]
        if cm.class_of(ordering) != c:
            raise UserError(f"{labels}: class {c} of {pid!r} does not match ordering {format_ordering(ordering)}")
        classes.append(c)
    return LabelledCorpus(matrix, classes, cm)


def _rows(n: int, which: str, fraction: float, seed: int) -> List[int]:
    if which == "all":
        return list(range(n))
    return split_indices(n, fraction, seed)[0]


def _grid(text: str) -> List[int]:
    out = set()
    for part in text.split(","):
        part = part.strip()
        try:
            if "-" in part:
                lo, hi = part.split("-")
                out.update(range(int(lo), int(hi) + 1))
            else:
                out.add(int(part))
        except ValueError:
            raise UserError(f"bad --grid entry {part!r}") from None
    if not out or min(out) < 1:
        raise UserError("--grid needs positive k values")
    return sorted(out)


def _check_jobs(jobs: int) -> int:
    if jobs < 1:
        raise UserError("--jobs must be at least 1")
    return jobs


# -- subcommands ---------------------------------------------------------

def cmd_featurize(a) -> None:
    corpus = _load_corpus(a.corpus)
    if not corpus:
        raise UserError(f"{a.corpus}: empty corpus")
    n = corpus[0].nvars
    for pr in corpus:
        if pr.nvars != n or (a.vars is not None and pr.nvars != a.vars):
            raise UserError(f"problem {pr.id!r} has {pr.nvars} variables, expected {a.vars or n}")
    descs = enumerate_descriptors(n)
    extras = tuple(EXTRA_FEATURES) if a.extras else ()
    matrix = evaluate_matrix(descs, corpus, a.h_reading, _check_jobs(a.jobs), extras)
    matrix.to_csv(a.output)
    if a.descriptors:
        _emit(descriptors_to_json(descs), a.descriptors)


def cmd_simplify(a) -> None:
    matrix = FeatureMatrix.from_csv(_need(a.features))
    simplified, report = simplify(matrix)
    simplified.to_csv(a.output)
    _emit(report.to_json(), a.report)


def cmd_rank(a) -> None:
    corpus = _labelled(a.features, a.labels)
    corpus = corpus.take_rows(_rows(len(corpus.labels), a.split, a.train_fraction, a.seed))
    ranking = rank_features(corpus)
    descs = _descriptors(a.descriptors, len(corpus.class_map.variables))
    write_ranking(ranking, descs, a.output)


def _sotd_one(args):
    pr, dedup, max_vars = args
    return sotd(pr, dedup, max_vars).to_json(pr.id)


def cmd_brown(a) -> None:
    records = [brown(pr).to_json(pr.id) for pr in _load_corpus(a.corpus)]
    _write_predictions(records, a.output, a.format)


def cmd_sotd(a) -> None:
    corpus = _load_corpus(a.corpus)
    for pr in corpus:
        if pr.nvars > a.max_vars:
            raise UserError(f"problem {pr.id!r} has {pr.nvars} variables; sotd is limited to {a.max_vars}")
    work = [(pr, not a.multiplicity, a.max_vars) for pr in corpus]
    if _check_jobs(a.jobs) > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=a.jobs) as pool:
            records = list(pool.map(_sotd_one, work))
    else:
        records = [_sotd_one(w) for w in work]
    _write_predictions(records, a.output, a.format)


def cmd_label(a) -> None:
    table = TimingTable.read(_need(a.timings))
    if a.limits:
        try:
            schedule = [float(x) for x in a.limits.split(",")]
        except ValueError:
            raise UserError(f"bad --limits {a.limits!r}") from None
        check_limit_schedule(table, schedule)
    targets = assign_targets(table)
    with open(a.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["problem_id", "class", "ordering"])
        for pid in table.problem_ids:
            cm = table.class_map(pid)
            c = training_labels({pid: targets[pid]}, cm)[pid]
            w.writerow([pid, c, format_ordering(cm.ordering_of(c))])
    if a.targets:
        write_targets(targets, a.targets)


def cmd_train(a) -> None:
    corpus = _labelled(a.features, a.labels)
    if a.top_k is not None:
        if not a.ranking:
            raise UserError("--top-k needs --ranking")
        if a.top_k < 1:
            raise UserError("--top-k must be positive")
        with open(_need(a.ranking), newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["rank", "serial", "formula", "F"]:
                raise UserError(f"{a.ranking}:1: header must be rank,serial,formula,F")
            serials = [r["serial"] for r in reader][:a.top_k]
        by_name = {str(c): c for c in corpus.matrix.columns}
        unknown = [s for s in serials if s not in by_name]
        if unknown:
            raise UserError(f"ranked feature {unknown[0]} is not a column of {a.features}")
        corpus = LabelledCorpus(corpus.matrix.select([by_name[s] for s in serials]),
                                corpus.labels, corpus.class_map)
    rows = _rows(len(corpus.labels), a.split, a.train_fraction, a.seed)
    train = corpus.take_rows(rows)
    X = train.matrix.to_numpy()
    keep = [c for j, c in enumerate(train.matrix.columns) if X[:, j].std() > 0]
    dropped = [c for c in train.matrix.columns if c not in set(keep)]
    if not keep:
        raise UserError("every selected feature is constant on the training rows")
    train = LabelledCorpus(train.matrix.select(keep), train.labels, train.class_map)
    model = knn_train(train, grid=_grid(a.grid), folds=a.folds, seed=a.seed)
    model.meta.update({"split": a.split, "train_fraction": a.train_fraction,
                       "dropped_constant_on_train": dropped})
    model.save(a.output)


def cmd_predict(a) -> None:
    try:
        model = TrainedModel.load(_need(a.model))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UserError(f"{a.model}: malformed model ({exc})") from None
    matrix = FeatureMatrix.from_csv(_need(a.features))
    by_name = {str(c): c for c in matrix.columns}
    missing = [c for c in model.columns if str(c) not in by_name]
    if missing:
        raise UserError(f"{a.features} lacks model feature {missing[0]}")
    matrix = matrix.select([by_name[str(c)] for c in model.columns])
    trained = set(model.problem_ids)
    rows = [i for i, pid in enumerate(matrix.problem_ids) if a.split == "all" or pid not in trained]
    if not rows:
        raise UserError("no problems to predict")
    matrix = matrix.take_rows(rows)
    orderings = model.predict(matrix.to_numpy())
    records = [PredictionSet([o], method="knn", meta={"k": model.k}).to_json(pid)
               for pid, o in zip(matrix.problem_ids, orderings)]
    _write_predictions(records, a.output, a.format)


def _results(pred_paths: Sequence[str], table: TimingTable):
    """Evaluate each predictions file on the problems every file covers."""
    targets = assign_targets(table)
    loaded = []
    for path in pred_paths:
        preds = _read_predictions(path)
        if not preds:
            raise UserError(f"{path}: no predictions")
        loaded.append(preds)
    common = set.intersection(*(set(p) for p in loaded)) if loaded else set(table.problem_ids)
    if not common:
        raise UserError("prediction files share no problems")
    for path, preds in zip(pred_paths, loaded):
        if len(preds) != len(common):
            print(f"note: {path}: scoring {len(common)} of {len(preds)} problems (those shared by all files)",
                  file=sys.stderr)
    results = [evaluate({pid: p for pid, p in preds.items() if pid in common}, table, targets)
               for preds in loaded]
    names = [r.method for r in results]
    if len(set(names)) != len(names):
        for r, path in zip(results, pred_paths):
            r.method = f"{r.method}:{Path(path).stem}"
    ids = [pid for pid in table.problem_ids if pid in common]
    return results, ids


def cmd_evaluate(a) -> None:
    table = TimingTable.read(_need(a.timings))
    results, _ = _results(a.pred, table)
    report = EvaluationReport(results)
    _emit(report.to_json() if a.format == "json" else report.to_csv(), a.output)


def cmd_report(a) -> None:
    table = TimingTable.read(_need(a.timings))
    results, ids = _results(a.pred, table)
    report = EvaluationReport(results + baselines(table, ids))
    out = Path(a.output)
    out.mkdir(parents=True, exist_ok=True)
    _emit(report.to_csv(), str(out / "summary.csv"))
    _emit(report.to_json(), str(out / "summary.json"))
    for r in report.results:
        _emit(histogram_csv(r), str(out / f"histogram_{r.method.replace(':', '_')}.csv"))


COMMANDS = {
    "featurize": cmd_featurize, "simplify": cmd_simplify, "rank": cmd_rank, "brown": cmd_brown,
    "sotd": cmd_sotd, "label": cmd_label, "train": cmd_train, "predict": cmd_predict,
    "evaluate": cmd_evaluate, "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (UserError, ParseError, PolynomialError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        print("internal error", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
