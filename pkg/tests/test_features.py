import random
from collections import Counter, defaultdict
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cadfeat.features import (AV, CLASSES, DISTRIBUTIONS, MAX, SGN, SIGN_WEIGHTED, SUM, VARIABLE_DEGREE, BaseMap,
                              FeatureDescriptor, FeatureMatrix, descriptors_from_json, descriptors_to_json, describe,
                              enumerate_descriptors, evaluate_base, evaluate_feature, evaluate_matrix,
                              evaluate_problem, format_value, parse_value)
from cadfeat.poly import Polynomial, ProblemInstance, VariableSet

from conftest import random_problem

DESCS = enumerate_descriptors(3)


def find(ops, kind, v):
    return [d for d in DESCS if d.ops() == tuple(ops) and d.base == BaseMap(kind, v)]


def test_counts():
    assert len(DESCS) == 1728
    assert len(enumerate_descriptors(1)) == 576
    assert len(enumerate_descriptors(2)) == 24 * 4 * 12
    assert [d.serial for d in DESCS] == list(range(1728))
    assert enumerate_descriptors(3) == DESCS
    with pytest.raises(ValueError):
        enumerate_descriptors(0)


def test_every_descriptor_obeys_rules():
    for d in DESCS:
        assert sorted(g.cls for g in d.chain) == sorted(CLASSES)
        idx = [g.index for g in d.chain if g.cls != SGN]
        assert idx.count("pm") + idx.count("p") == 1
        assert idx.count("pm") + idx.count("m") == 1
        if "p" in idx:
            assert idx.index("m") < idx.index("p")
        assert next(g.index for g in d.chain if g.cls == SGN) in ("0", "1")


def test_rows_and_placements_are_all_present():
    combos = Counter((d.row, tuple(g.cls for g in d.chain)) for d in DESCS)
    assert len(combos) == 12 * 24
    assert set(combos.values()) == {6}


def test_h_values_on_worked_example(worked):
    assert evaluate_base(BaseMap(VARIABLE_DEGREE, 2), worked, 1, 2) == 4
    assert evaluate_base(BaseMap(SIGN_WEIGHTED, 2), worked, 1, 2) == 7
    assert evaluate_base(BaseMap(SIGN_WEIGHTED, 2), worked, 1, 2, h_reading="product") == 28
    # x1*x3 contains no x2
    assert evaluate_base(BaseMap(SIGN_WEIGHTED, 2), worked, 2, 2) == 0
    with pytest.raises(IndexError):
        evaluate_base(BaseMap(VARIABLE_DEGREE, 2), worked, 3, 2)


def test_f65_value_and_gloss(worked):
    cands = find([(SGN, "1"), (AV, "pm")], VARIABLE_DEGREE, 2)
    assert cands
    for d in cands:
        assert evaluate_feature(d, worked) == Fraction(1, 2)
    assert describe(cands[0], ("x_1", "x_2", "x_3"))["gloss"] == \
        "the proportion of monomials containing variable x_2, averaged across all polynomials"
    assert cands[0].formula() == "av_p av_m sgn(d_2)"


def test_f46_and_f76_structures(worked):
    f76 = find([(MAX, "m"), (SUM, "p")], SIGN_WEIGHTED, 2)
    assert f76 and f76[0].formula() == "Σ_p max_m sgn(d_2)·(Σ_v' d_v')"
    f46 = find([(AV, "m"), (SUM, "p")], SIGN_WEIGHTED, 2)
    assert f46 and f46[0].formula() == "Σ_p av_m sgn(d_2)·(Σ_v' d_v')"
    # per polynomial: x1^2*x2 (total 3) and x1*x2^4*x3^2 (total 7)
    assert evaluate_feature(f76[0], worked) == 3 + 7
    assert evaluate_feature(f46[0], worked) == Fraction(3, 2) + Fraction(7, 2)


def test_table1_row3_on_worked_example(worked):
    d = find([(MAX, "pm")], VARIABLE_DEGREE, 1)[0]
    assert evaluate_feature(d, worked) == 2


def test_identity_padding_gives_same_formula():
    by_ops = defaultdict(set)
    for d in DESCS:
        by_ops[d.canonical()].add(d.formula())
    assert all(len(f) == 1 for f in by_ops.values())
    assert len(by_ops) < len(DESCS)


@pytest.mark.parametrize("seed", range(5))
def test_identity_placement_redundancy(seed):
    # descriptors differing only in where identity steps sit agree everywhere
    pr = random_problem(random.Random(seed), max_deg=5, max_terms=5, max_polys=4)
    groups = defaultdict(set)
    for d in DESCS:
        groups[d.canonical()].add(evaluate_feature(d, pr))
    assert all(len(vals) == 1 for vals in groups.values())


def test_applied_sign_of_positive_quantity_is_one():
    pr = ProblemInstance(VariableSet(("x1", "x2", "x3")),
                         (Polynomial(3, {(1, 1, 1): 2, (2, 1, 3): -1}), Polynomial(3, {(1, 2, 1): 5})))
    for d in DESCS:
        if d.chain[-1].cls == SGN and d.chain[-1].index == "1":
            assert evaluate_feature(d, pr) == 1


def _relabel(pr, perm):
    """Rename variable i to perm[i]."""
    polys = []
    for p in pr.polynomials:
        terms = {}
        for e, c in p.terms.items():
            new = [0] * 3
            for i, d in enumerate(e):
                new[perm[i]] = d
            terms[tuple(new)] = c
        polys.append(Polynomial(3, terms))
    return ProblemInstance(pr.variables, tuple(polys))


problems = st.integers(0, 10 ** 6).map(lambda s: random_problem(random.Random(s), max_deg=5, max_terms=5, max_polys=4))


@settings(max_examples=25, deadline=None)
@given(problems, st.randoms(use_true_random=False))
def test_polynomial_label_invariance(pr, rnd):
    polys = list(pr.polynomials)
    rnd.shuffle(polys)
    shuffled = ProblemInstance(pr.variables, tuple(polys))
    assert evaluate_problem(DESCS, pr) == evaluate_problem(DESCS, shuffled)


@settings(max_examples=25, deadline=None)
@given(problems, st.permutations([0, 1, 2]))
def test_variable_relabel_equivariance(pr, perm):
    moved = _relabel(pr, perm)
    index = {(d.base, d.canonical()[1]): d for d in DESCS}
    for d in DESCS[::7]:
        twin = index[(BaseMap(d.base.kind, perm[d.base.v - 1] + 1), d.canonical()[1])]
        assert evaluate_feature(d, pr) == evaluate_feature(twin, moved)


@settings(max_examples=25, deadline=None)
@given(problems, st.fractions(min_value=-9, max_value=9).filter(bool))
def test_coefficient_scaling_invariance(pr, c):
    scaled = ProblemInstance(pr.variables, tuple(p * c for p in pr.polynomials))
    assert evaluate_problem(DESCS, pr) == evaluate_problem(DESCS, scaled)


def test_evaluate_problem_matches_evaluate_feature():
    pr = random_problem(random.Random(3), max_deg=6, max_terms=8, max_polys=5)
    assert evaluate_problem(DESCS, pr) == [evaluate_feature(d, pr) for d in DESCS]


def test_matrix_shapes_and_errors(worked):
    m = evaluate_matrix(DESCS, [worked])
    assert m.shape == (1, 1728)
    twice = evaluate_matrix(DESCS, [worked, worked])
    assert twice.values[0] == twice.values[1]
    with pytest.raises(ValueError):
        evaluate_matrix(DESCS, [])
    two = ProblemInstance(VariableSet(("a", "b")), (Polynomial(2, {(1, 0): 1}),))
    with pytest.raises(ValueError):
        evaluate_matrix(DESCS, [worked, two])
    with pytest.raises(ValueError):
        evaluate_matrix(DESCS, [worked], extras=["nope"])


def test_matrix_parallel_is_identical():
    corpus = [random_problem(random.Random(s)) for s in range(6)]
    corpus = [ProblemInstance(pr.variables, pr.polynomials, f"q{i}") for i, pr in enumerate(corpus)]
    serial = evaluate_matrix(DESCS[:200], corpus)
    parallel = evaluate_matrix(DESCS[:200], corpus, jobs=3)
    assert serial.values == parallel.values and serial.problem_ids == parallel.problem_ids


def test_extras(worked):
    m = evaluate_matrix(DESCS[:3], [worked], extras=["extra:P", "extra:max_total_degree"])
    assert m.columns[-2:] == ["extra:P", "extra:max_total_degree"]
    assert m.values[0][-2:] == [2, 7]


def test_csv_round_trip(tmp_path, worked):
    pr2 = random_problem(random.Random(9))
    pr2 = ProblemInstance(pr2.variables, pr2.polynomials, "r")
    m = evaluate_matrix(DESCS, [worked, pr2], extras=["extra:P"])
    path = tmp_path / "f.csv"
    m.to_csv(path)
    back = FeatureMatrix.from_csv(path)
    assert back.columns == m.columns and back.problem_ids == m.problem_ids
    for r1, r2 in zip(m.values, back.values):
        assert [float(a) for a in r1] == [float(b) for b in r2]
    path.write_text(path.read_text().replace("\n", ",1\n", 2))
    with pytest.raises(ValueError):
        FeatureMatrix.from_csv(path)


def test_value_formatting():
    assert format_value(3) == "3"
    assert format_value(Fraction(1, 2)) == "0.5"
    assert format_value(Fraction(1, 3)) == repr(1 / 3)
    assert format_value(float("inf")) == "inf"
    assert parse_value("0.5") == Fraction(1, 2)
    assert parse_value("4") == 4
    assert parse_value("inf") == float("inf")


def test_descriptor_json_round_trip():
    back = descriptors_from_json(descriptors_to_json(DESCS))
    assert [(d.serial, d.base, d.chain) for d in back] == [(d.serial, d.base, d.chain) for d in DESCS]
    assert FeatureDescriptor.from_json(DESCS[5].to_json()).formula() == DESCS[5].formula()


def test_distribution_table_shape():
    assert len(DISTRIBUTIONS) == 12
    for row in DISTRIBUTIONS:
        assert set(row) == set(CLASSES)
        aggregating = [row[c] for c in (MAX, AV, SUM)]
        assert sorted("".join(aggregating).replace("0", "")) == ["m", "p"]
