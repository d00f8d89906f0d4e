"""Feature simplification, ANOVA F-value ranking, standardization and splits."""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .features import FeatureMatrix

INF = float("inf")

# 4612 training problems out of 6117
DEFAULT_TRAIN_FRACTION = 4612 / 6117


def _serial_key(s):
    return (isinstance(s, str), s)


# -- orderings and classes -----------------------------------------------

def format_ordering(ordering: Sequence[str]) -> str:
    return ">".join(ordering)


def parse_ordering(text: str) -> Tuple[str, ...]:
    names = tuple(part.strip() for part in text.split(">"))
    if any(not n for n in names) or len(set(names)) != len(names):
        raise ValueError(f"bad ordering {text!r}")
    return names


@dataclass(frozen=True)
class ClassMap:
    """Bijection between class indices 1..n! and variable orderings.

    Orderings are tuples of variable names, first-eliminated first, listed in
    lexicographic order of the variable positions.
    """

    variables: Tuple[str, ...]

    @property
    def orderings(self) -> List[Tuple[str, ...]]:
        return list(itertools.permutations(self.variables))

    def __len__(self) -> int:
        return len(self.orderings)

    def class_of(self, ordering: Sequence[str]) -> int:
        try:
            return self.orderings.index(tuple(ordering)) + 1
        except ValueError:
            raise ValueError(f"{format_ordering(ordering)} is not an ordering of {self.variables}") from None

    def ordering_of(self, c: int) -> Tuple[str, ...]:
        if not 1 <= c <= len(self):
            raise ValueError(f"class {c} out of range 1..{len(self)}")
        return self.orderings[c - 1]


@dataclass
class LabelledCorpus:
    matrix: FeatureMatrix
    labels: List[int]
    class_map: ClassMap

    def __post_init__(self):
        if len(self.labels) != len(self.matrix.problem_ids):
            raise ValueError("one label per problem required")
        for c in self.labels:
            self.class_map.ordering_of(c)

    def take_rows(self, rows: Sequence[int]) -> "LabelledCorpus":
        return LabelledCorpus(self.matrix.take_rows(rows), [self.labels[i] for i in rows], self.class_map)

    def write_labels(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["problem_id", "class", "ordering"])
            for pid, c in zip(self.matrix.problem_ids, self.labels):
                w.writerow([pid, c, format_ordering(self.class_map.ordering_of(c))])


def read_labels(path) -> Dict[str, Tuple[int, Tuple[str, ...]]]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["problem_id", "class", "ordering"]:
            raise ValueError(f"{path}: header must be problem_id,class,ordering")
        for lineno, row in enumerate(reader, 2):
            try:
                out[row["problem_id"]] = (int(row["class"]), parse_ordering(row["ordering"]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


# -- simplification ------------------------------------------------------

@dataclass
class MergeReport:
    """What :func:`simplify` removed, with enough detail to undo it."""

    removed_constant: List
    merge_groups: List[Tuple[object, List]]  # (representative, members incl. representative)
    original_columns: List
    constant_values: Dict = field(default_factory=dict)

    def to_json(self) -> str:
        from .features import format_value

        return json.dumps({
            "original_columns": self.original_columns,
            "removed_constant": self.removed_constant,
            "constant_values": {str(k): format_value(v) for k, v in self.constant_values.items()},
            "merge_groups": [{"representative": r, "members": m} for r, m in self.merge_groups],
        }, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MergeReport":
        from .features import parse_value

        rec = json.loads(text)
        by_str = {str(c): c for c in rec["original_columns"]}
        return cls(
            removed_constant=rec["removed_constant"],
            merge_groups=[(g["representative"], g["members"]) for g in rec["merge_groups"]],
            original_columns=rec["original_columns"],
            constant_values={by_str[k]: parse_value(v) for k, v in rec["constant_values"].items()},
        )


def simplify(matrix: FeatureMatrix) -> Tuple[FeatureMatrix, MergeReport]:
    """Drop constant columns and merge columns that are equal on every problem.

    Equality is exact.  Each merged group is represented by its lowest serial;
    surviving columns keep their original relative order.
    """
    if len(matrix.problem_ids) < 2:
        raise ValueError("simplify needs at least 2 problems")
    removed, constants = [], {}
    groups: Dict[Tuple, List] = {}
    for j, serial in enumerate(matrix.columns):
        # int, Fraction and float compare and hash by exact value
        col = tuple(matrix.column(j))
        if all(x == col[0] for x in col):
            removed.append(serial)
            constants[serial] = matrix.values[0][j]
            continue
        groups.setdefault(col, []).append(serial)
    merge_groups = []
    for members in groups.values():
        members = sorted(members, key=_serial_key)
        merge_groups.append((members[0], members))
    position = {s: j for j, s in enumerate(matrix.columns)}
    merge_groups.sort(key=lambda g: position[g[0]])
    kept = [rep for rep, _ in merge_groups]
    report = MergeReport(removed, merge_groups, list(matrix.columns), constants)
    return matrix.select(kept), report


def reconstruct(simplified: FeatureMatrix, report: MergeReport,
                descriptors: Optional[Dict] = None) -> FeatureMatrix:
    """Rebuild the pre-simplification matrix from its simplified form."""
    rep_of = {m: rep for rep, members in report.merge_groups for m in members}
    pos = {c: j for j, c in enumerate(simplified.columns)}
    values = []
    for row in simplified.values:
        out = []
        for c in report.original_columns:
            if c in rep_of:
                out.append(row[pos[rep_of[c]]])
            else:
                out.append(report.constant_values[c])
        values.append(out)
    descriptors = descriptors if descriptors is not None else simplified.descriptors
    return FeatureMatrix(list(simplified.problem_ids), list(report.original_columns), values,
                         {c: descriptors[c] for c in report.original_columns if c in descriptors})


# -- F-values ------------------------------------------------------------

def f_value(column: Sequence, labels: Sequence[int]) -> float:
    """One-way ANOVA F statistic of ``column`` grouped by ``labels``.

    Computed exactly over the rationals and returned as a float.  Returns
    ``inf`` when the within-class term vanishes but the between-class term
    does not, and 0.0 when both vanish.
    """
    if len(column) != len(labels):
        raise ValueError("column and labels differ in length")
    groups: Dict[int, List[Fraction]] = {}
    for x, c in zip(column, labels):
        groups.setdefault(c, []).append(Fraction(x))
    n, k = len(column), len(groups)
    if k < 2:
        raise ValueError("need at least 2 non-empty classes")
    if n <= k:
        raise ValueError("need more samples than classes")
    grand = sum(sum(g) for g in groups.values()) / n
    between = within = Fraction(0)
    for g in groups.values():
        mean = sum(g) / len(g)
        between += len(g) * (mean - grand) ** 2
        within += sum((x - mean) ** 2 for x in g)
    between /= k - 1
    within /= n - k
    if within == 0:
        return INF if between > 0 else 0.0
    return float(between / within)


def rank_features(corpus: LabelledCorpus) -> List[Tuple[object, float]]:
    """Columns by descending F-value, ties by ascending serial."""
    scores = [(serial, f_value(corpus.matrix.column(j), corpus.labels))
              for j, serial in enumerate(corpus.matrix.columns)]
    return sorted(scores, key=lambda t: (-t[1], _serial_key(t[0])))


def write_ranking(ranking, descriptors: Dict, path) -> None:
    from .features import format_value

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "serial", "formula", "F"])
        for r, (serial, F) in enumerate(ranking, 1):
            d = descriptors.get(serial)
            w.writerow([r, serial, d.formula() if d is not None else serial, format_value(F)])


# -- standardization and splitting ---------------------------------------

@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        sd = X.std(axis=0)
        bad = np.flatnonzero(sd == 0)
        if bad.size:
            raise ValueError(f"zero-variance column(s) {bad.tolist()}; run simplify first")
        return cls(X.mean(axis=0), sd)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean.shape[0]:
            raise ValueError(f"expected {self.mean.shape[0]} features, got {X.shape[-1]}")
        return (X - self.mean) / self.scale


def standardize(train: Union[FeatureMatrix, np.ndarray],
                apply_to: Union[FeatureMatrix, np.ndarray]) -> Union[FeatureMatrix, np.ndarray]:
    """Shift and scale ``apply_to`` by the column mean and sd of ``train``."""
    X = train.to_numpy() if isinstance(train, FeatureMatrix) else train
    st = Standardizer.fit(X)
    if isinstance(apply_to, FeatureMatrix):
        Z = st.transform(apply_to.to_numpy())
        return FeatureMatrix(list(apply_to.problem_ids), list(apply_to.columns),
                             Z.tolist(), dict(apply_to.descriptors))
    return st.transform(apply_to)


def split_indices(n: int, train_fraction: float, seed: int = 0) -> Tuple[List[int], List[int]]:
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * train_fraction))
    return sorted(perm[:n_train].tolist()), sorted(perm[n_train:].tolist())


def split(corpus, train_fraction: float = DEFAULT_TRAIN_FRACTION, seed: int = 0):
    """Reproducible disjoint train/test split of a sequence or a LabelledCorpus.

    Row order within each part follows the original order.
    """
    if isinstance(corpus, LabelledCorpus):
        n = len(corpus.labels)
    elif isinstance(corpus, FeatureMatrix):
        n = len(corpus.problem_ids)
    else:
        n = len(corpus)
    train, test = split_indices(n, train_fraction, seed)
    if isinstance(corpus, (LabelledCorpus, FeatureMatrix)):
        return corpus.take_rows(train), corpus.take_rows(test)
    return [corpus[i] for i in train], [corpus[i] for i in test]
