"""Human-made variable-ordering heuristics: Brown and sotd.

Both return every ordering they cannot discriminate between, as a
:class:`PredictionSet`.  An ordering is a tuple of variable names with the
first-eliminated variable first.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .poly import Polynomial, ProblemInstance, discriminant, resultant

Ordering = Tuple[str, ...]

PROJECTION_OPERATOR = "coefficients+discriminants+pairwise-resultants"


@dataclass
class PredictionSet:
    orderings: List[Ordering]
    scores: Dict[Ordering, float] = field(default_factory=dict)
    method: str = ""
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.orderings:
            raise ValueError("a prediction set cannot be empty")
        if len(set(self.orderings)) != len(self.orderings):
            raise ValueError("duplicate orderings in prediction set")

    def to_json(self, problem_id: str) -> dict:
        rec = {
            "problem_id": problem_id,
            "method": self.method,
            "orderings": [">".join(o) for o in self.orderings],
            "scores": {">".join(o): s for o, s in self.scores.items()},
        }
        if self.meta:
            rec["meta"] = self.meta
        return rec

    @classmethod
    def from_json(cls, rec: dict) -> "PredictionSet":
        split = lambda s: tuple(s.split(">"))  # noqa: E731
        return cls([split(o) for o in rec["orderings"]],
                   {split(k): v for k, v in rec.get("scores", {}).items()},
                   rec.get("method", ""), rec.get("meta", {}))


def write_predictions(records: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(list(records), fh, indent=1)
        fh.write("\n")


def read_predictions(path) -> Dict[str, PredictionSet]:
    with open(path, encoding="utf-8") as fh:
        recs = json.load(fh)
    out = {}
    for rec in recs:
        pid = str(rec["problem_id"])
        if pid in out:
            raise ValueError(f"{path}: duplicate prediction for {pid!r}")
        out[pid] = PredictionSet.from_json(rec)
    return out


# -- Brown ---------------------------------------------------------------

def brown_criteria(pr: ProblemInstance) -> List[Tuple[int, int, int]]:
    """Per variable: (overall degree, max total degree of terms containing it,
    number of terms containing it)."""
    exps = [e for poly in pr.exponent_table() for e in poly]
    out = []
    for v in range(pr.nvars):
        containing = [e for e in exps if e[v]]
        out.append((
            max(e[v] for e in exps),
            max((sum(e) for e in containing), default=0),
            len(containing),
        ))
    return out


def brown(pr: ProblemInstance) -> PredictionSet:
    """Orderings consistent with Brown's three criteria (lowest eliminated first).

    Variables tied on all three criteria are permuted in every possible way.
    Scores count, for each ordering, the variable pairs it places against the
    criteria; predicted orderings score 0.
    """
    crit = brown_criteria(pr)
    names = pr.variables.names
    ranked = sorted(range(pr.nvars), key=lambda v: (crit[v], v))
    groups = [list(g) for _, g in itertools.groupby(ranked, key=lambda v: crit[v])]
    orderings = [tuple(names[v] for part in combo for v in part)
                 for combo in itertools.product(*(itertools.permutations(g) for g in groups))]
    scores = {}
    if pr.nvars <= 6:
        for perm in itertools.permutations(range(pr.nvars)):
            inversions = sum(1 for i, j in itertools.combinations(perm, 2) if crit[i] > crit[j])
            scores[tuple(names[v] for v in perm)] = inversions
    else:
        scores = {o: 0 for o in orderings}
    meta = {"criteria": {names[v]: list(crit[v]) for v in range(pr.nvars)}}
    return PredictionSet(sorted(orderings), scores, "brown", meta)


# -- projection and sotd -------------------------------------------------

def projection_set(polys: Sequence[Polynomial], v: int, dedup: bool = True) -> List[Polynomial]:
    """Coefficients, discriminants and pairwise resultants w.r.t. variable ``v``.

    Output polynomials are in primitive form (integer coefficients, content 1,
    positive leading coefficient); constants are dropped, and with ``dedup``
    repeated polynomials are kept once.
    """
    out: List[Polynomial] = []
    seen = set()

    def add(q: Polynomial):
        if q.is_constant():
            return
        q = q.primitive()
        if dedup:
            if q in seen:
                return
            seen.add(q)
        out.append(q)

    polys = list(polys)
    for p in polys:
        coeffs = p.coefficients_in(v)
        for k in sorted(coeffs):
            add(coeffs[k])
        if p.degree_in(v) >= 2:
            add(discriminant(p, v))
    for p, q in itertools.combinations(polys, 2):
        if p.degree_in(v) >= 1 and q.degree_in(v) >= 1:
            add(resultant(p, q, v))
    return out


def _normalized_inputs(polys: Sequence[Polynomial], dedup: bool) -> List[Polynomial]:
    out, seen = [], set()
    for p in polys:
        if p.is_constant():
            continue
        p = p.primitive()
        if dedup and p in seen:
            continue
        seen.add(p)
        out.append(p)
    return out


def projection_chain(pr: ProblemInstance, ordering: Sequence[int], dedup: bool = True) -> List[List[Polynomial]]:
    """Input level plus each successive projection level, eliminating in ``ordering``."""
    level = _normalized_inputs(pr.polynomials, dedup)
    levels = [level]
    for v in list(ordering)[:-1]:
        level = projection_set(level, v, dedup)
        levels.append(level)
    return levels


def sum_of_total_degrees(polys) -> int:
    return sum(sum(m.exponents) for p in polys for m in p.monomials())


def sotd_score(pr: ProblemInstance, ordering: Sequence[int], dedup: bool = True) -> int:
    levels = projection_chain(pr, ordering, dedup)
    if dedup:
        union = {p for level in levels for p in level}
    else:
        union = [p for level in levels for p in level]
    return sum_of_total_degrees(union)


def sotd(pr: ProblemInstance, dedup: bool = True, max_vars: int = 6) -> PredictionSet:
    """Orderings whose full projection set has the least sum of total degrees."""
    if pr.nvars > max_vars:
        raise ValueError(f"sotd is limited to {max_vars} variables (problem has {pr.nvars})")
    names = pr.variables.names
    scores = {}
    for perm in itertools.permutations(range(pr.nvars)):
        scores[tuple(names[v] for v in perm)] = sotd_score(pr, perm, dedup)
    best = min(scores.values())
    orderings = [o for o, s in scores.items() if s == best]
    meta = {"projection": PROJECTION_OPERATOR, "dedup": dedup}
    return PredictionSet(orderings, scores, "sotd", meta)
