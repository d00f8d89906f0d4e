"""Acceptance criteria 1-12, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
Criterion 13 needs an external corpus with real CAD timings and is described
in the README rather than run here.
"""

import itertools
import math
import random
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from cadfeat.dataset import INF, f_value, reconstruct, simplify
from cadfeat.features import (AV, CLASSES, DISTRIBUTIONS, MAX, SGN, SIGN_WEIGHTED, SUM, VARIABLE_DEGREE, BaseMap,
                              enumerate_descriptors, evaluate_feature, evaluate_matrix, evaluate_problem)
from cadfeat.heuristics import PredictionSet, brown, brown_criteria, sotd
from cadfeat.ml import TimingRecord, TimingTable, baselines, evaluate, knn_predict_classes, knn_train
from cadfeat.parse import parse_polynomial
from cadfeat.poly import Polynomial, ProblemInstance, VariableSet, discriminant, resultant

from conftest import random_poly, random_problem, run_pipeline
from oracles import (brute_f, from_sympy, max_degree, share_of_monomials_with, share_of_polys_with,
                     sylvester_det, sympy_sotd_scores)


@pytest.fixture
def verdict(capsys):
    """Print one line for the criterion, then fail the test if it did not hold."""
    def report(n, title, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else ""))
        assert ok, f"criterion {n}: {title} {detail}"
    return report


def relabel(pr, perm, names=None):
    """Move variable i to position perm[i]."""
    polys = []
    for p in pr.polynomials:
        terms = {}
        for e, c in p.terms.items():
            new = [0] * pr.nvars
            for i, d in enumerate(e):
                new[perm[i]] = d
            terms[tuple(new)] = c
        polys.append(Polynomial(pr.nvars, terms))
    return ProblemInstance(VariableSet(names or pr.variables.names), tuple(polys))


# -- 1 -------------------------------------------------------------------

def test_criterion_01_enumeration_count(verdict):
    t = time.perf_counter()
    descs = enumerate_descriptors(3)
    dt = time.perf_counter() - t
    verdict(1, "1728 descriptors for 3 variables in under 1 s",
            len(descs) == 1728 and len({d.serial for d in descs}) == 1728 and dt < 1.0,
            f"{len(descs)} in {dt:.3f} s")


# -- 2 -------------------------------------------------------------------

# Index assignments for (max, av, sum, sgn), copied cell by cell from the
# printed distribution table.  Row 9 is printed without an m-index.
PRINTED = [
    ("pm", "0", "0", "0"), ("p", "m", "0", "0"), ("p", "0", "m", "0"),
    ("0", "pm", "0", "0"), ("0", "p", "m", "0"), ("0", "0", "pm", "0"),
    ("pm", "0", "0", "1"), ("p", "m", "0", "1"), ("p", "0", "0", "1"),
    ("0", "pm", "0", "1"), ("0", "p", "m", "1"), ("0", "0", "pm", "1"),
]


def test_criterion_02_distribution_table(verdict):
    ours = [tuple(row[c] for c in (MAX, AV, SUM, SGN)) for row in DISTRIBUTIONS]
    diffs = [i + 1 for i, (a, b) in enumerate(zip(ours, PRINTED)) if a != b]
    # the one corrected row mirrors row 3 with the sign step switched on
    corrected = diffs == [9] and ours[8] == ("p", "0", "m", "1") and ours[8][:3] == PRINTED[2][:3]
    every_row_has_p_and_m = all("".join(r[:3]).count("p") == 1 and "".join(r[:3]).count("m") == 1 for r in ours)
    ok = len(ours) == 12 and corrected and every_row_has_p_and_m and list(CLASSES) == [MAX, AV, SUM, SGN]
    verdict(2, "12-row index distribution table matches the transcription",
            ok, "row 9 corrected from (p,0,0,1) to (p,0,m,1), the only row lacking an m-index")


# -- 3 -------------------------------------------------------------------

ORACLES = (
    [(f"max degree of x{v + 1}", lambda pr, v=v: max_degree(pr, v)) for v in range(3)]
    + [(f"share of polynomials containing x{v + 1}", lambda pr, v=v: share_of_polys_with(pr, v)) for v in range(3)]
    + [(f"share of monomials containing x{v + 1}", lambda pr, v=v: share_of_monomials_with(pr, v)) for v in range(3)]
)


def test_criterion_03_classic_features_expressible(verdict):
    rng = random.Random(3)
    corpus = [random_problem(rng, max_deg=6, max_terms=8, max_polys=5) for _ in range(100)]
    descs = enumerate_descriptors(3)
    t = time.perf_counter()
    values = [evaluate_problem(descs, pr) for pr in corpus]
    found = {}
    for name, oracle in ORACLES:
        want = [oracle(pr) for pr in corpus]
        found[name] = [d.serial for j, d in enumerate(descs) if all(row[j] == w for row, w in zip(values, want))]
    dt = time.perf_counter() - t
    missing = [n for n, s in found.items() if not s]
    verdict(3, "the nine per-variable classic features are generated exactly",
            not missing and dt < 10, f"{dt:.1f} s; missing: {missing or 'none'}")


# -- 4 -------------------------------------------------------------------

def test_criterion_04_named_features(verdict, worked):
    descs = enumerate_descriptors(3)

    def having(ops, kind):
        return [d for d in descs if d.ops() == ops and d.base == BaseMap(kind, 2)]

    f65 = having(((SGN, "1"), (AV, "pm")), VARIABLE_DEGREE)
    f46 = having(((AV, "m"), (SUM, "p")), SIGN_WEIGHTED)
    f76 = having(((MAX, "m"), (SUM, "p")), SIGN_WEIGHTED)
    value = evaluate_feature(f65[0], worked) if f65 else None
    verdict(4, "f65, f46 and f76 exist and f65 = 1/2 on the worked example",
            bool(f65 and f46 and f76) and value == Fraction(1, 2), f"f65 = {value}")


# -- 5 -------------------------------------------------------------------

def test_criterion_05_simplification(verdict):
    rng = random.Random(5)
    descs = enumerate_descriptors(3)
    bad = []
    for trial in range(1000):
        corpus = [random_problem(rng, max_deg=rng.randint(1, 5), max_terms=rng.randint(1, 5), max_polys=4)
                  for _ in range(rng.randint(2, 6))]
        m = evaluate_matrix(descs, corpus)
        out, rep = simplify(m)
        cols = [tuple(out.column(j)) for j in range(out.shape[1])]
        again, rep2 = simplify(out)
        ok = (all(len(set(c)) > 1 for c in cols) and len(set(cols)) == len(cols)
              and reconstruct(out, rep, m.descriptors).values == m.values
              and again.columns == out.columns and not rep2.removed_constant)
        if not ok:
            bad.append(trial)
    verdict(5, "simplify leaves no constant or duplicate column, reconstructs, is idempotent",
            not bad, f"1000 corpora, failures: {bad[:5] or 'none'}")


# -- 6 -------------------------------------------------------------------

def test_criterion_06_f_value(verdict):
    rng = random.Random(6)
    worst, zeros, infs = 0.0, 0, 0
    ok = f_value([0, 1, 2, 3], [1, 1, 2, 2]) == 8
    for trial in range(1000):
        C = rng.randint(2, 6)
        N = rng.randint(C + 1, 60)
        labels = list(range(1, C + 1)) + [rng.randint(1, C) for _ in range(N - C)]
        kind = trial % 10
        if kind == 0:
            # constant within each class, different between classes
            level = {c: rng.randint(-5, 5) for c in range(1, C + 1)}
            level[1] = level[2] + 1
            col = [level[c] for c in labels]
        elif kind == 1:
            # every class mean is 0; classes with two or more members have spread
            col = []
            counts = {c: labels.count(c) for c in set(labels)}
            seen = {c: 0 for c in counts}
            for c in labels:
                seen[c] += 1
                col.append(0 if counts[c] == 1 else (1 if seen[c] == 1 else (-1 if seen[c] == 2 else 0)))
        else:
            col = [rng.uniform(-10, 10) if rng.random() < 0.5 else rng.randint(-9, 9) for _ in range(N)]
        got = f_value(col, labels)
        try:
            want = brute_f(col, labels)
        except ZeroDivisionError:
            want = INF if len(set(sum(x for x, l in zip(col, labels) if l == c) / labels.count(c)
                                  for c in set(labels))) > 1 else 0.0
        if want == INF:
            infs += 1
            ok &= got == INF
        elif want == 0:
            zeros += 1
            ok &= got == 0
        else:
            rel = abs(got - want) / abs(want)
            worst = max(worst, rel)
    ok &= worst <= 1e-12 and zeros > 0 and infs > 0
    verdict(6, "F-value matches the brute-force ratio, sentinels and the worked example",
            ok, f"max rel err {worst:.1e}, {zeros} zero and {infs} infinite cases")


# -- 7 -------------------------------------------------------------------

def test_criterion_07_brown(verdict, worked):
    ok = sorted(brown(worked).orderings) == [("x1", "x3", "x2"), ("x3", "x1", "x2")]
    rng = random.Random(7)
    failures = 0
    for _ in range(500):
        pr = random_problem(rng, max_deg=rng.randint(1, 5), max_terms=5, max_polys=4)
        got = brown(pr)
        polys = list(pr.polynomials)
        rng.shuffle(polys)
        # rebuild each polynomial from its terms in shuffled order
        shuffled = []
        for p in polys:
            items = list(p.terms.items())
            rng.shuffle(items)
            shuffled.append(Polynomial(3, items))
        same = brown(ProblemInstance(pr.variables, tuple(shuffled))).orderings == got.orderings
        perm = list(range(3))
        rng.shuffle(perm)
        moved = brown(relabel(pr, perm))
        rename = {pr.variables.names[i]: pr.variables.names[perm[i]] for i in range(3)}
        equivariant = sorted(tuple(rename[v] for v in o) for o in got.orderings) == sorted(moved.orderings)
        crit = brown_criteria(pr)
        size = math.prod(math.factorial(len(list(g))) for _, g in itertools.groupby(sorted(crit)))
        failures += not (same and equivariant and len(got.orderings) == size)
    verdict(7, "Brown example, relabelling invariance and tie-group set sizes",
            ok and failures == 0, f"500 instances, {failures} failures")


# -- 8 -------------------------------------------------------------------

def test_criterion_08_resultant(verdict):
    XV = VariableSet(("x",))
    ok = resultant(parse_polynomial("x^2 - 4", XV), parse_polynomial("x - 1", XV), 0) == Polynomial.constant(1, -3)
    rng = random.Random(8)
    pairs = mismatches = 0
    while pairs < 500:
        n = rng.randint(1, 3)
        v = rng.randrange(n)
        p = random_poly(rng, n, 3, 4, total=False)
        q = random_poly(rng, n, 3, 4, total=False)
        if p.degree_in(v) < 1 or q.degree_in(v) < 1:
            continue
        syms = sp.symbols(f"z0:{n}")
        good = resultant(p, q, v) == from_sympy(sylvester_det(p, q, v, syms), syms, n)
        if p.degree_in(v) >= 2:
            good &= discriminant(p, v) == from_sympy(sylvester_det(p, p.derivative(v), v, syms), syms, n)
        mismatches += not good
        pairs += 1
    verdict(8, "resultant and discriminant equal the Sylvester determinant",
            ok and mismatches == 0, f"500 pairs, {mismatches} mismatches; res(x^2-4, x-1) = -3")


# -- 9 -------------------------------------------------------------------

def test_criterion_09_sotd(verdict):
    rng = random.Random(9)
    slowest, mismatches = 0.0, 0
    for _ in range(50):
        pr = random_problem(rng, max_deg=4, max_terms=4, max_polys=3)
        t = time.perf_counter()
        got = sotd(pr)
        slowest = max(slowest, time.perf_counter() - t)
        ref = sympy_sotd_scores(pr)
        best = min(ref.values())
        mismatches += not (min(got.scores.values()) == best
                           and sorted(got.orderings) == sorted(o for o, s in ref.items() if s == best))
    asymmetric = 0
    for _ in range(20):
        base = random_problem(rng, max_deg=4, max_terms=3, max_polys=2)
        swapped = relabel(base, [1, 0, 2])
        pr = ProblemInstance(base.variables, base.polynomials + swapped.polynomials)
        pred = set(sotd(pr).orderings)
        swap = {"x1": "x2", "x2": "x1", "x3": "x3"}
        asymmetric += {tuple(swap[v] for v in o) for o in pred} != pred
    verdict(9, "sotd minimum matches the independent recomputation, symmetry closure, < 2 s each",
            mismatches == 0 and asymmetric == 0 and slowest < 2.0,
            f"{mismatches} mismatches, {asymmetric} asymmetric sets, slowest {slowest:.2f} s")


# -- 10 ------------------------------------------------------------------

def test_criterion_10_evaluation(verdict):
    orders = list(itertools.permutations(("x1", "x2", "x3")))
    times = {"a": [1.0, 2.0, 2.0, 4.0, 8.0, 16.0], "b": [5.0, 3.0, 3.0, 9.0, 1.0, 1.0]}
    table = TimingTable(TimingRecord(p, o, t) for p, ts in times.items() for o, t in zip(orders, ts))
    single = evaluate({"a": PredictionSet([orders[0]])}, table)
    pair = evaluate({"a": PredictionSet([orders[0], orders[3]])}, table)
    # b has two targets; predicting one target and one non-target scores 50
    mixed = evaluate({"a": PredictionSet([orders[1]]), "b": PredictionSet([orders[4], orders[0]])}, table)
    ok = (single.accuracy, single.total_time_s) == (100.0, 1.0)
    ok &= (pair.accuracy, pair.total_time_s) == (50.0, 2.5)
    ok &= (mixed.accuracy, mixed.total_time_s) == (25.0, 2.0 + 3.0)
    best, worst, rand = baselines(table)
    everything = evaluate({p: PredictionSet(orders) for p in times}, table)
    ok &= everything.accuracy == rand.accuracy and everything.total_time_s == rand.total_time_s
    ok &= rand.accuracy == (100 / 6 + 200 / 6) / 2
    ok &= best.accuracy == 100.0 and best.total_time_s == 1.0 + 1.0 and worst.total_time_s == 16.0 + 9.0
    verdict(10, "tie-aware accuracy and time, predict-all equals random, virtual best is 100% and the minimum",
            ok, f"random {rand.accuracy:.2f}% / {rand.total_time_s:.3f} s")


# -- 11 ------------------------------------------------------------------

def blobs(seed, n=300):
    rng = np.random.default_rng(seed)
    centres = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    y = np.repeat([1, 2, 3], n // 3)
    return centres[y - 1] + rng.normal(size=(n, 2)), y


def test_criterion_11_knn(verdict):
    t = time.perf_counter()
    X, y = blobs(11)
    model = knn_train(X, y, seed=11)
    again = knn_train(X, y, seed=11)
    Xt, yt = blobs(12)
    acc = float((model.predict_classes(Xt) == yt).mean())
    dt = time.perf_counter() - t
    exact = bool((knn_predict_classes(model.points, model.labels, model.points, model.k) == model.labels).all())
    ok = exact and acc >= 0.9 and model.k == again.k and model.cv_scores == again.cv_scores and dt < 30
    verdict(11, "KNN exact-match, blobs accuracy, deterministic CV, under 30 s",
            ok, f"k={model.k}, accuracy {acc:.1%}, {dt:.1f} s")


# -- 12 ------------------------------------------------------------------

def test_criterion_12_pipeline_determinism(verdict, tmp_path):
    runs = {}
    for name, jobs in (("first", 1), ("second", 1), ("parallel", 8)):
        out = tmp_path / name
        out.mkdir()
        runs[name] = {str(f.relative_to(out)): f.read_bytes() for f in run_pipeline(out, jobs)}
    same = runs["first"] == runs["second"] == runs["parallel"]
    verdict(12, "CLI pipeline output is byte-identical across runs and --jobs 1 vs 8",
            same and len(runs["first"]) > 10, f"{len(runs['first'])} files compared")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
