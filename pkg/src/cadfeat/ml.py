"""Timing labels, a distance-weighted KNN classifier and tie-aware evaluation.

Timings are per (problem, ordering).  The target orderings of a problem are
all orderings attaining its minimum time; the single training label is the
lowest class index among them.  A heuristic may predict several orderings,
in which case a problem's accuracy is the share of its predictions that are
targets and its time is the mean time over its predictions.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dataset import ClassMap, LabelledCorpus, Standardizer, format_ordering, parse_ordering
from .heuristics import PredictionSet

Ordering = Tuple[str, ...]

TIMING_HEADER = ["problem_id", "ordering", "time_s", "status"]
STATUSES = ("ok", "timeout")
DEFAULT_GRID = tuple(range(1, 31))
MODEL_FORMAT = "cadfeat-knn"
MODEL_VERSION = 1


def natural_key(name: str):
    """Sort key putting x2 before x10."""
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


# -- timings -------------------------------------------------------------

@dataclass(frozen=True)
class TimingRecord:
    problem_id: str
    ordering: Ordering
    time_s: float
    status: str = "ok"


def read_timings(path) -> List[TimingRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TIMING_HEADER:
            raise ValueError(f"{path}:1: header must be {','.join(TIMING_HEADER)}")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            pid, ordering, t, status = row
            try:
                rec = TimingRecord(pid, parse_ordering(ordering), float(t), status.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if rec.status not in STATUSES:
                raise ValueError(f"{path}:{lineno}: status must be ok or timeout, got {status!r}")
            if not math.isfinite(rec.time_s) or rec.time_s <= 0:
                raise ValueError(f"{path}:{lineno}: time_s must be a positive number, got {t!r}")
            out.append(rec)
    return out


def write_timings(records: Iterable[TimingRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        for r in records:
            w.writerow([r.problem_id, format_ordering(r.ordering), repr(float(r.time_s)), r.status])


class TimingTable:
    """Validated timings: every problem has each ordering of its variables once."""

    def __init__(self, records: Iterable[TimingRecord]):
        self.times: Dict[str, Dict[Ordering, float]] = {}
        self.status: Dict[str, Dict[Ordering, str]] = {}
        for r in records:
            if r.time_s <= 0:
                raise ValueError(f"{r.problem_id}: nonpositive time {r.time_s} for {format_ordering(r.ordering)}")
            per = self.times.setdefault(r.problem_id, {})
            if r.ordering in per:
                raise ValueError(f"{r.problem_id}: duplicate record for {format_ordering(r.ordering)}")
            per[r.ordering] = float(r.time_s)
            self.status.setdefault(r.problem_id, {})[r.ordering] = r.status
        for pid, per in self.times.items():
            names = sorted(next(iter(per)), key=natural_key)
            cm = ClassMap(tuple(names))
            missing = [o for o in cm.orderings if o not in per]
            extra = [o for o in per if o not in set(cm.orderings)]
            if extra:
                raise ValueError(f"{pid}: {format_ordering(extra[0])} is not an ordering of {','.join(names)}")
            if missing:
                raise ValueError(f"{pid}: missing ordering {format_ordering(missing[0])}")

    @classmethod
    def read(cls, path) -> "TimingTable":
        try:
            return cls(read_timings(path))
        except ValueError as exc:
            msg = str(exc)
            raise ValueError(msg if msg.startswith(str(path)) else f"{path}: {msg}") from None

    @property
    def problem_ids(self) -> List[str]:
        return list(self.times)

    def class_map(self, pid: str) -> ClassMap:
        return ClassMap(tuple(sorted(next(iter(self.times[pid])), key=natural_key)))

    def min_time(self, pid: str) -> float:
        return min(self.times[pid].values())

    def max_time(self, pid: str) -> float:
        return max(self.times[pid].values())


def check_limit_schedule(table: TimingTable, schedule: Sequence[float]) -> None:
    """Check timeouts against a doubling time-limit protocol.

    For each problem the limit in force is the first schedule value at which
    some ordering completes (the last value if none does).  Timeouts must
    record exactly that limit and completed runs must not exceed it.  A
    single fixed limit is the one-element schedule.
    """
    schedule = sorted(float(s) for s in schedule)
    if not schedule or schedule[0] <= 0:
        raise ValueError("limit schedule must contain positive values")
    for pid, per in table.times.items():
        ok = [t for o, t in per.items() if table.status[pid][o] == "ok"]
        if ok:
            fastest = min(ok)
            limit = next((s for s in schedule if fastest <= s), None)
            if limit is None:
                raise ValueError(f"{pid}: completed time {fastest} exceeds the final limit {schedule[-1]}")
        else:
            limit = schedule[-1]
        for o, t in per.items():
            if table.status[pid][o] == "timeout" and t != limit:
                raise ValueError(f"{pid}: timeout for {format_ordering(o)} records {t}, limit in force is {limit}")
            if table.status[pid][o] == "ok" and t > limit:
                raise ValueError(f"{pid}: {format_ordering(o)} took {t} > limit {limit} yet is marked ok")


# -- targets -------------------------------------------------------------

@dataclass(frozen=True)
class TargetLabel:
    problem_id: str
    targets: Tuple[Ordering, ...]
    min_time_s: float


def assign_targets(table: TimingTable) -> Dict[str, TargetLabel]:
    """All orderings attaining each problem's minimum time (exact equality)."""
    out = {}
    for pid, per in table.times.items():
        best = min(per.values())
        order = table.class_map(pid).orderings
        out[pid] = TargetLabel(pid, tuple(o for o in order if per[o] == best), best)
    return out


def training_labels(targets: Mapping[str, TargetLabel], class_map: ClassMap) -> Dict[str, int]:
    """Single class per problem: the lowest class index among its targets."""
    return {pid: min(class_map.class_of(o) for o in t.targets) for pid, t in targets.items()}


def write_targets(targets: Mapping[str, TargetLabel], path) -> None:
    recs = [{"problem_id": t.problem_id, "targets": [format_ordering(o) for o in t.targets],
             "min_time_s": t.min_time_s} for t in targets.values()]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(recs, fh, indent=1)
        fh.write("\n")


# -- KNN -----------------------------------------------------------------

def _distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    # direct differences, so an exact match gives exactly 0
    out = np.empty((len(queries), len(points)))
    step = max(1, int(2e7 // max(1, points.size)))
    for i in range(0, len(queries), step):
        diff = queries[i:i + step, None, :] - points[None, :, :]
        out[i:i + step] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def _neighbours(dist: np.ndarray, labels: np.ndarray, kmax: int) -> Tuple[np.ndarray, np.ndarray]:
    """Distances and classes of the ``kmax`` nearest points, ordered by (distance, class).

    Training points that agree on both are interchangeable, so the result
    does not depend on the order of the training set.
    """
    kmax = min(kmax, dist.shape[1])
    cls = np.broadcast_to(labels, dist.shape)
    order = np.lexsort((cls, dist), axis=-1)[:, :kmax]
    return np.take_along_axis(dist, order, 1), labels[order]


def _vote(nd: np.ndarray, nc: np.ndarray, k: int, nclasses: int) -> np.ndarray:
    """Predicted class (1-based) from the first ``k`` neighbours, weights 1/d.

    If any of them is at distance 0, only those exact matches vote, one vote
    each.  Ties go to the lowest class.
    """
    d, c = nd[:, :k], nc[:, :k]
    zero = d == 0
    exact = zero.any(axis=1)
    with np.errstate(divide="ignore"):
        w = np.where(exact[:, None], zero.astype(float), 1.0 / np.where(zero, 1.0, d))
    votes = np.zeros((len(d), nclasses + 1))
    np.add.at(votes, (np.arange(len(d))[:, None], c), w)
    votes[:, 0] = -1.0
    return votes.argmax(axis=1)


def knn_predict_classes(points: np.ndarray, labels: Sequence[int], queries: np.ndarray, k: int) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    labels = np.asarray(labels, dtype=int)
    if queries.shape[1] != points.shape[1]:
        raise ValueError(f"expected {points.shape[1]} features, got {queries.shape[1]}")
    if k < 1:
        raise ValueError("k must be at least 1")
    nd, nc = _neighbours(_distances(queries, points), labels, k)
    return _vote(nd, nc, k, int(labels.max()))


def macro_f1(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    """Unweighted mean F1 over the classes occurring in either argument."""
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    scores = []
    for c in np.union1d(y_true, y_pred):
        tp = np.sum((y_true == c) & (y_pred == c))
        fp = np.sum((y_true != c) & (y_pred == c))
        fn = np.sum((y_true == c) & (y_pred != c))
        scores.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return float(np.mean(scores))


def stratified_folds(labels: Sequence[int], folds: int, seed: int = 0) -> List[np.ndarray]:
    """Seeded stratified partition of row indices into ``folds`` test folds.

    Each class is shuffled and dealt round-robin, continuing from where the
    previous class stopped, so fold sizes differ by at most one.  A class
    with fewer members than folds is simply absent from some folds.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    parts: List[List[int]] = [[] for _ in range(folds)]
    pos = 0
    for c in np.unique(labels):
        for i in rng.permutation(np.flatnonzero(labels == c)):
            parts[pos % folds].append(int(i))
            pos += 1
    return [np.array(sorted(p), dtype=int) for p in parts]


def cross_validate(X: np.ndarray, y: Sequence[int], grid: Sequence[int] = DEFAULT_GRID,
                   folds: int = 5, seed: int = 0) -> Dict[int, float]:
    """Mean macro F1 across stratified folds for each k in ``grid``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    grid = sorted(set(int(k) for k in grid))
    if not grid:
        raise ValueError("empty k grid")
    if grid[0] < 1:
        raise ValueError("k values must be at least 1")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if len(y) < folds:
        raise ValueError(f"{len(y)} training points cannot fill {folds} folds")
    nclasses = int(y.max())
    scores = {k: [] for k in grid}
    for test in stratified_folds(y, folds, seed):
        train = np.setdiff1d(np.arange(len(y)), test)
        nd, nc = _neighbours(_distances(X[test], X[train]), y[train], grid[-1])
        for k in grid:
            scores[k].append(macro_f1(y[test], _vote(nd, nc, min(k, len(train)), nclasses)))
    return {k: float(np.mean(v)) for k, v in scores.items()}


@dataclass
class TrainedModel:
    """KNN with 1/distance weighting over standardized features."""

    k: int
    mean: np.ndarray
    scale: np.ndarray
    points: np.ndarray  # standardized training rows
    labels: np.ndarray  # 1-based classes
    columns: List = field(default_factory=list)
    variables: Tuple[str, ...] = ()
    problem_ids: List[str] = field(default_factory=list)
    cv_scores: Dict[int, float] = field(default_factory=dict)
    meta: Dict[str, object] = field(default_factory=dict)
    weighting: str = "distance"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.points.ndim != 2 or len(self.points) != len(self.labels):
            raise ValueError("points and labels disagree")

    @property
    def nfeatures(self) -> int:
        return self.points.shape[1]

    def predict_classes(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.nfeatures:
            raise ValueError(f"expected {self.nfeatures} features, got {X.shape[1]}")
        Z = (X - self.mean) / self.scale
        return knn_predict_classes(self.points, self.labels, Z, min(self.k, len(self.labels)))

    def predict(self, X) -> List[Ordering]:
        cm = ClassMap(self.variables)
        return [cm.ordering_of(int(c)) for c in self.predict_classes(X)]

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "k": self.k,
            "weighting": self.weighting,
            "standardization": {"mean": self.mean.tolist(), "scale": self.scale.tolist()},
            "columns": self.columns,
            "variables": list(self.variables),
            "problem_ids": self.problem_ids,
            "points": self.points.tolist(),
            "labels": self.labels.tolist(),
            "cv_scores": {str(k): v for k, v in self.cv_scores.items()},
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "TrainedModel":
        if rec.get("format") != MODEL_FORMAT:
            raise ValueError("not a KNN model file")
        if rec.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {rec.get('version')!r}")
        if rec.get("weighting", "distance") != "distance":
            raise ValueError(f"unsupported weighting {rec['weighting']!r}")
        nf = len(rec["columns"]) if rec["columns"] else len(rec["standardization"]["mean"])
        return cls(
            k=int(rec["k"]),
            mean=np.array(rec["standardization"]["mean"], dtype=float),
            scale=np.array(rec["standardization"]["scale"], dtype=float),
            points=np.array(rec["points"], dtype=float).reshape(-1, nf),
            labels=np.array(rec["labels"], dtype=int),
            columns=list(rec["columns"]),
            variables=tuple(rec["variables"]),
            problem_ids=list(rec.get("problem_ids", [])),
            cv_scores={int(k): v for k, v in rec.get("cv_scores", {}).items()},
            meta=dict(rec.get("meta", {})),
        )

    def save(self, path) -> None:
        text = json.dumps(self.to_json(), indent=1) + "\n"
        d = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".model-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def knn_train(train, labels: Optional[Sequence[int]] = None, grid: Sequence[int] = DEFAULT_GRID,
              folds: int = 5, seed: int = 0, variables: Sequence[str] = ()) -> TrainedModel:
    """Fit standardization on ``train`` and choose k by cross-validated macro F1.

    ``train`` is a LabelledCorpus or a 2-D array with ``labels``.  Ties in the
    CV score go to the smaller k.
    """
    columns: List = []
    ids: List[str] = []
    if isinstance(train, LabelledCorpus):
        X = train.matrix.to_numpy()
        y = np.array(train.labels, dtype=int)
        columns, ids = list(train.matrix.columns), list(train.matrix.problem_ids)
        variables = train.class_map.variables
    else:
        X = np.asarray(train, dtype=float)
        y = np.asarray(labels, dtype=int)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("need a non-empty 2-D training set with one label per row")
    if len(np.unique(y)) < 2:
        raise ValueError("degenerate training set: a single class")
    st = Standardizer.fit(X)
    Z = st.transform(X)
    scores = cross_validate(Z, y, grid, folds, seed)
    best = max(scores.values())
    k = min(k for k, s in scores.items() if s == best)
    meta = {"folds": folds, "seed": seed, "standardized": "training mean and population sd",
            "selection": "mean macro F1, ties to smaller k"}
    return TrainedModel(k, st.mean, st.scale, Z, y, columns, tuple(variables), ids, scores, meta)


# -- evaluation ----------------------------------------------------------

@dataclass
class ProblemScore:
    accuracy: float  # percent
    time_s: float
    increase_percent: float


@dataclass
class MethodResult:
    method: str
    per_problem: Dict[str, ProblemScore]

    @property
    def accuracy(self) -> float:
        if not self.per_problem:
            return 0.0
        return math.fsum(s.accuracy for s in self.per_problem.values()) / len(self.per_problem)

    @property
    def total_time_s(self) -> float:
        return math.fsum(s.time_s for s in self.per_problem.values())

    def histogram(self) -> List[Tuple[int, int]]:
        """Counts of percentage increase over the minimum in 1% bins; empty bins omitted."""
        counts: Dict[int, int] = {}
        for s in self.per_problem.values():
            b = int(math.floor(s.increase_percent))
            counts[b] = counts.get(b, 0) + 1
        return sorted(counts.items())

    def summary(self) -> dict:
        return {"method": self.method, "problems": len(self.per_problem),
                "accuracy": self.accuracy, "total_time_s": self.total_time_s}


def evaluate(predictions: Mapping[str, PredictionSet], table: TimingTable,
             targets: Optional[Mapping[str, TargetLabel]] = None, method: str = "") -> MethodResult:
    """Tie-aware accuracy and time of a predictor on the problems it predicts."""
    if targets is None:
        targets = assign_targets(table)
    unknown = [pid for pid in predictions if pid not in table.times]
    if unknown:
        raise ValueError(f"no timings for problem {unknown[0]!r}")
    per = {}
    for pid, ps in predictions.items():
        times = table.times[pid]
        bad = [o for o in ps.orderings if o not in times]
        if bad:
            raise ValueError(f"{pid}: predicted {format_ordering(bad[0])} has no timing")
        tset = set(targets[pid].targets)
        hits = sum(1 for o in ps.orderings if o in tset)
        t = math.fsum(times[o] for o in ps.orderings) / len(ps.orderings)
        best = targets[pid].min_time_s
        per[pid] = ProblemScore(100.0 * hits / len(ps.orderings), t, (t - best) / best * 100.0)
    return MethodResult(method or _method_of(predictions), per)


def _method_of(predictions: Mapping[str, PredictionSet]) -> str:
    methods = {p.method for p in predictions.values()}
    return methods.pop() if len(methods) == 1 else "mixed"


def baselines(table: TimingTable, problem_ids: Optional[Sequence[str]] = None) -> List[MethodResult]:
    """Virtual best, virtual worst and random (every ordering predicted) rows."""
    ids = list(problem_ids) if problem_ids is not None else table.problem_ids
    targets = assign_targets(table)
    best, worst, rand = {}, {}, {}
    for pid in ids:
        times = table.times[pid]
        order = table.class_map(pid).orderings
        hi = max(times.values())
        best[pid] = PredictionSet(list(targets[pid].targets), method="virtual-best")
        worst[pid] = PredictionSet([o for o in order if times[o] == hi], method="virtual-worst")
        rand[pid] = PredictionSet(order, method="random")
    return [evaluate(p, table, targets) for p in (best, worst, rand)]


@dataclass
class EvaluationReport:
    results: List[MethodResult]
    meta: Dict[str, object] = field(default_factory=lambda: {
        "accuracy": "per-problem share of predicted orderings that are targets, averaged uniformly over problems",
        "time": "per-problem mean time over predicted orderings, summed over problems",
    })

    def to_json(self) -> str:
        rec = {
            "meta": self.meta,
            "methods": [dict(r.summary(),
                             histogram=[{"bin_start_percent": b, "count": c} for b, c in r.histogram()],
                             per_problem={pid: {"accuracy": s.accuracy, "time_s": s.time_s,
                                                "increase_percent": s.increase_percent}
                                          for pid, s in r.per_problem.items()})
                        for r in self.results],
        }
        return json.dumps(rec, indent=1) + "\n"

    def to_csv(self) -> str:
        lines = ["method,problems,accuracy,total_time_s"]
        for r in self.results:
            lines.append(f"{r.method},{len(r.per_problem)},{r.accuracy!r},{r.total_time_s!r}")
        return "\n".join(lines) + "\n"


def histogram_csv(result: MethodResult) -> str:
    return "bin_start_percent,count\n" + "".join(f"{b},{c}\n" for b, c in result.histogram())
