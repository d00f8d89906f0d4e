"""Algorithmic generation of algebraic features of polynomial systems.

Every feature is a composition ``g4 . g3 . g2 . g1 . h`` where ``h`` maps a
monomial (labelled by polynomial ``p`` and monomial ``m``) to a degree
quantity and the ``g_i`` are one each of max, sum, average and sign.  Which
classes aggregate over ``m`` and ``p`` comes from a fixed 12-row table; all
4! placements of the classes and all 2n base maps are enumerated.

When two different classes aggregate, the one placed earlier in the chain
aggregates over monomials and the later one over polynomials, so every
chain evaluates to a well-defined scalar.

Values are exact (``int`` or ``Fraction``).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .poly import ProblemInstance

MAX, AV, SUM, SGN = "max", "av", "sum", "sgn"
CLASSES = (MAX, AV, SUM, SGN)

VARIABLE_DEGREE = "VariableDegree"
SIGN_WEIGHTED = "SignWeightedTotalDegree"

# (max, av, sum, sgn) index assignments.  Row 9 is (p, 0, m, 1); see README.
DISTRIBUTIONS: Tuple[Dict[str, str], ...] = tuple(
    dict(zip(CLASSES, row)) for row in [
        ("pm", "0", "0", "0"),
        ("p", "m", "0", "0"),
        ("p", "0", "m", "0"),
        ("0", "pm", "0", "0"),
        ("0", "p", "m", "0"),
        ("0", "0", "pm", "0"),
        ("pm", "0", "0", "1"),
        ("p", "m", "0", "1"),
        ("p", "0", "m", "1"),
        ("0", "pm", "0", "1"),
        ("0", "p", "m", "1"),
        ("0", "0", "pm", "1"),
    ]
)


@dataclass(frozen=True)
class BaseMap:
    kind: str
    v: int  # 1-based variable index

    def formula(self) -> str:
        if self.kind == VARIABLE_DEGREE:
            return f"d_{self.v}"
        return f"sgn(d_{self.v})·(Σ_v' d_v')"


@dataclass(frozen=True)
class ChainFunction:
    cls: str
    index: str  # 'p', 'm', 'pm', '0'; sgn uses '1' (applied) or '0'

    @property
    def is_identity(self) -> bool:
        return self.index == "0"


@dataclass(frozen=True)
class FeatureDescriptor:
    serial: int
    base: BaseMap
    chain: Tuple[ChainFunction, ChainFunction, ChainFunction, ChainFunction]
    row: int  # 1-based row of DISTRIBUTIONS

    def ops(self) -> Tuple[Tuple[str, str], ...]:
        """Non-identity chain steps, innermost first."""
        return tuple((g.cls, g.index) for g in self.chain if not g.is_identity)

    def canonical(self) -> Tuple:
        return (self.base, self.ops())

    def formula(self) -> str:
        return _render(self.base, self.ops())

    def to_json(self) -> dict:
        return {
            "serial": self.serial,
            "base": {"kind": self.base.kind, "v": self.base.v},
            "chain": [{"cls": g.cls, "index": g.index} for g in self.chain],
            "formula": self.formula(),
        }

    @classmethod
    def from_json(cls, rec: dict, row: int = 0) -> "FeatureDescriptor":
        return cls(
            serial=int(rec["serial"]),
            base=BaseMap(rec["base"]["kind"], int(rec["base"]["v"])),
            chain=tuple(ChainFunction(g["cls"], g["index"]) for g in rec["chain"]),
            row=row,
        )


def base_maps(n_vars: int) -> List[BaseMap]:
    return [BaseMap(kind, v) for kind in (VARIABLE_DEGREE, SIGN_WEIGHTED) for v in range(1, n_vars + 1)]


def _chain_for(row: Dict[str, str], perm: Sequence[str]) -> Tuple[ChainFunction, ...]:
    aggregating = [c for c in perm if c != SGN and row[c] != "0"]
    index = {c: "0" for c in CLASSES}
    index[SGN] = row[SGN]
    if len(aggregating) == 1:
        index[aggregating[0]] = "pm"
    else:
        first, second = aggregating
        index[first], index[second] = "m", "p"
    return tuple(ChainFunction(c, index[c]) for c in perm)


def enumerate_descriptors(n_vars: int) -> List[FeatureDescriptor]:
    """All ``4! * 2n * 12`` descriptors, row-major, then placement, then base map."""
    if n_vars < 1:
        raise ValueError("n_vars must be positive")
    out = []
    bases = base_maps(n_vars)
    for r, row in enumerate(DISTRIBUTIONS, 1):
        for perm in itertools.permutations(CLASSES):
            chain = _chain_for(row, perm)
            for base in bases:
                out.append(FeatureDescriptor(len(out), base, chain, r))
    return out


# -- evaluation ----------------------------------------------------------

def _sgn(x) -> int:
    return (x > 0) - (x < 0)


def _h_values(exps: List[List[Tuple[int, ...]]], base: BaseMap, h_reading: str) -> List[List[int]]:
    v = base.v - 1
    if base.kind == VARIABLE_DEGREE:
        return [[e[v] for e in poly] for poly in exps]
    if h_reading == "product":
        return [[e[v] * sum(e) for e in poly] for poly in exps]
    return [[_sgn(e[v]) * sum(e) for e in poly] for poly in exps]


def _aggregate(cls: str, values):
    if cls == MAX:
        return max(values)
    total = sum(values)
    if cls == SUM:
        return total
    f = Fraction(total, len(values))
    return f.numerator if f.denominator == 1 else f


def _apply(ops, h: List[List[int]]):
    state = h
    level = 2
    for cls, index in ops:
        if cls == SGN:
            if level == 2:
                state = [[_sgn(x) for x in row] for row in state]
            elif level == 1:
                state = [_sgn(x) for x in state]
            else:
                state = _sgn(state)
        elif index == "m":
            state = [_aggregate(cls, row) for row in state]
            level = 1
        elif index == "p":
            if level != 1:
                raise ValueError("p-aggregation before m-aggregation")
            state = _aggregate(cls, state)
            level = 0
        else:  # pm
            state = _aggregate(cls, [_aggregate(cls, row) for row in state])
            level = 0
    if level != 0:
        raise ValueError("chain does not reduce to a scalar")
    return state


H_READINGS = ("sign", "product")


def evaluate_base(base: BaseMap, pr: ProblemInstance, m: int, p: int, h_reading: str = "sign"):
    """``h^{m,p}`` for one monomial; ``m`` and ``p`` are 1-based labels."""
    if not 1 <= p <= len(pr.polynomials):
        raise IndexError(f"p={p} out of range")
    monos = pr.polynomials[p - 1].monomials()
    if not 1 <= m <= len(monos):
        raise IndexError(f"m={m} out of range")
    if not 1 <= base.v <= pr.nvars:
        raise IndexError(f"v={base.v} out of range")
    return _h_values([[monos[m - 1].exponents]], base, h_reading)[0][0]


def evaluate_feature(d: FeatureDescriptor, pr: ProblemInstance, h_reading: str = "sign"):
    if h_reading not in H_READINGS:
        raise ValueError(f"unknown h reading {h_reading!r}")
    if d.base.v > pr.nvars:
        raise ValueError(f"descriptor uses x_{d.base.v} but the problem has {pr.nvars} variables")
    return _apply(d.ops(), _h_values(pr.exponent_table(), d.base, h_reading))


def evaluate_problem(descs: Sequence[FeatureDescriptor], pr: ProblemInstance,
                     h_reading: str = "sign", extras: Sequence[str] = ()) -> List:
    """Values of every descriptor on one problem; shares work between equal chains."""
    exps = pr.exponent_table()
    h_cache: Dict[BaseMap, List[List[int]]] = {}
    cache: Dict[Tuple, object] = {}
    row = []
    for d in descs:
        if d.base.v > pr.nvars:
            raise ValueError(f"descriptor uses x_{d.base.v} but the problem has {pr.nvars} variables")
        key = d.canonical()
        if key not in cache:
            if d.base not in h_cache:
                h_cache[d.base] = _h_values(exps, d.base, h_reading)
            cache[key] = _apply(key[1], h_cache[d.base])
        row.append(cache[key])
    row.extend(EXTRA_FEATURES[name](pr) for name in extras)
    return row


def _n_polys(pr: ProblemInstance) -> int:
    return len(pr.polynomials)


def _max_total_degree(pr: ProblemInstance) -> int:
    return max(sum(e) for poly in pr.exponent_table() for e in poly)


# Problem-level counts that do not come from a per-variable base map.
EXTRA_FEATURES = {
    "extra:P": _n_polys,
    "extra:max_total_degree": _max_total_degree,
}


# -- rendering -----------------------------------------------------------

def _op_text(cls: str, index: str) -> str:
    sym = {MAX: "max", AV: "av", SUM: "Σ"}[cls]
    if index == "pm":
        return f"{sym}_p {sym}_m"
    return f"{sym}_{index}"


def _render(base: BaseMap, ops) -> str:
    expr = base.formula()
    for cls, index in ops:
        if cls == SGN:
            expr = f"sgn({expr})"
        else:
            expr = f"{_op_text(cls, index)} {expr}"
    return expr


def _gloss(base: BaseMap, ops, name: str) -> Optional[str]:
    vd = base.kind == VARIABLE_DEGREE
    glosses = {
        (True, ((MAX, "pm"),)): f"maximum degree of {name} over all monomials",
        (True, ((SGN, "1"), (AV, "pm"))):
            f"the proportion of monomials containing variable {name}, averaged across all polynomials",
        (True, ((SUM, "m"), (SGN, "1"), (AV, "p"))): f"fraction of polynomials in which {name} occurs",
        (True, ((SGN, "1"), (SUM, "pm"))): f"number of monomials containing {name}",
        (False, ((MAX, "pm"),)): f"largest total degree of a monomial containing {name}",
        (False, ((AV, "m"), (SUM, "p"))):
            f"mean total degree of monomials containing {name} (non-containing ones count as 0), "
            f"summed over polynomials",
        (False, ((MAX, "m"), (SUM, "p"))):
            f"per polynomial, the largest total degree of a monomial containing {name}, "
            f"summed over polynomials",
    }
    return glosses.get((vd, tuple(ops)))


def describe(d: FeatureDescriptor, names: Optional[Sequence[str]] = None) -> Dict[str, Optional[str]]:
    """Formula string and, for a few recognized shapes, a plain-English gloss."""
    name = names[d.base.v - 1] if names else f"x_{d.base.v}"
    return {"formula": d.formula(), "gloss": _gloss(d.base, d.ops(), name)}


# -- matrices ------------------------------------------------------------

def format_value(x) -> str:
    """Decimal rendering with at most 17 significant digits; 'inf' for infinity."""
    if isinstance(x, float):
        if x == float("inf"):
            return "inf"
        return repr(x)
    if isinstance(x, int) or (isinstance(x, Fraction) and x.denominator == 1):
        return str(int(x))
    return repr(float(x))


def parse_value(text: str):
    if text == "inf":
        return float("inf")
    f = Fraction(text)
    return f.numerator if f.denominator == 1 else f


@dataclass
class FeatureMatrix:
    """Problems x features table of exact values.

    ``columns`` holds descriptor serials (or extra-feature names);
    ``descriptors`` maps serials to descriptors where known.
    """

    problem_ids: List[str]
    columns: List
    values: List[List]
    descriptors: Dict[int, FeatureDescriptor]

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.problem_ids), len(self.columns)

    def column(self, j: int) -> List:
        return [row[j] for row in self.values]

    def to_numpy(self):
        import numpy as np

        return np.array([[float(x) for x in row] for row in self.values], dtype=float).reshape(self.shape)

    def select(self, columns: Sequence) -> "FeatureMatrix":
        pos = {c: j for j, c in enumerate(self.columns)}
        idx = [pos[c] for c in columns]
        return FeatureMatrix(
            list(self.problem_ids), list(columns),
            [[row[j] for j in idx] for row in self.values],
            {c: self.descriptors[c] for c in columns if c in self.descriptors},
        )

    def take_rows(self, rows: Sequence[int]) -> "FeatureMatrix":
        return FeatureMatrix([self.problem_ids[i] for i in rows], list(self.columns),
                             [list(self.values[i]) for i in rows], dict(self.descriptors))

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["problem_id"] + [str(c) for c in self.columns])
            for pid, row in zip(self.problem_ids, self.values):
                w.writerow([pid] + [format_value(x) for x in row])

    @classmethod
    def from_csv(cls, path, descriptors: Optional[Dict[int, FeatureDescriptor]] = None) -> "FeatureMatrix":
        import csv

        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or not rows[0] or rows[0][0] != "problem_id":
            raise ValueError(f"{path}: header must start with 'problem_id'")
        columns = [int(c) if c.lstrip("-").isdigit() else c for c in rows[0][1:]]
        ids, values = [], []
        for lineno, row in enumerate(rows[1:], 2):
            if len(row) != len(columns) + 1:
                raise ValueError(f"{path}:{lineno}: expected {len(columns) + 1} fields, got {len(row)}")
            ids.append(row[0])
            try:
                values.append([parse_value(x) for x in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
        descriptors = descriptors or {}
        return cls(ids, columns, values, {c: descriptors[c] for c in columns if c in descriptors})


def _evaluate_chunk(args):
    descs, problems, h_reading, extras = args
    return [evaluate_problem(descs, pr, h_reading, extras) for pr in problems]


def evaluate_matrix(descs: Sequence[FeatureDescriptor], corpus: Sequence[ProblemInstance],
                    h_reading: str = "sign", jobs: int = 1,
                    extras: Sequence[str] = ()) -> FeatureMatrix:
    """Evaluate every descriptor on every problem (rows follow ``corpus`` order)."""
    if not corpus:
        raise ValueError("empty corpus")
    nvars = {pr.nvars for pr in corpus}
    if len(nvars) != 1:
        raise ValueError(f"mixed variable counts in corpus: {sorted(nvars)}")
    for name in extras:
        if name not in EXTRA_FEATURES:
            raise ValueError(f"unknown extra feature {name!r}")
    descs = list(descs)
    corpus = list(corpus)
    if jobs > 1 and len(corpus) > 1:
        from concurrent.futures import ProcessPoolExecutor

        size = -(-len(corpus) // jobs)
        chunks = [corpus[i:i + size] for i in range(0, len(corpus), size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_evaluate_chunk, [(descs, c, h_reading, tuple(extras)) for c in chunks])
            values = [row for part in parts for row in part]
    else:
        values = [evaluate_problem(descs, pr, h_reading, extras) for pr in corpus]
    return FeatureMatrix(
        [pr.id for pr in corpus],
        [d.serial for d in descs] + list(extras),
        values,
        {d.serial: d for d in descs},
    )


def descriptors_to_json(descs: Sequence[FeatureDescriptor]) -> str:
    return json.dumps([d.to_json() for d in descs], indent=1, ensure_ascii=False) + "\n"


def descriptors_from_json(text: str) -> List[FeatureDescriptor]:
    return [FeatureDescriptor.from_json(rec) for rec in json.loads(text)]
