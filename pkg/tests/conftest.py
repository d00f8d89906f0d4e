import random
from fractions import Fraction

import pytest

from cadfeat.parse import parse_problem_native
from cadfeat.poly import Polynomial, ProblemInstance, VariableSet

NAMES3 = ("x1", "x2", "x3")

WORKED = "vars: x1, x2, x3\nx1^2*x2 - x3\nx1*x2^4*x3^2 + x1*x3\n"


@pytest.fixture
def worked():
    return parse_problem_native(WORKED, id="worked")


def random_poly(rng: random.Random, n: int, max_deg: int, max_terms: int, coeff=(-5, 5),
                rational=False, total=True) -> Polynomial:
    """Random polynomial, possibly zero.  ``total`` bounds the total degree, else each exponent."""
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        if total:
            e = [0] * n
            for _ in range(rng.randint(0, max_deg)):
                e[rng.randrange(n)] += 1
        else:
            e = [rng.randint(0, max_deg) for _ in range(n)]
        c = rng.randint(*coeff)
        if rational and rng.random() < 0.3:
            c = Fraction(c, rng.randint(1, 7))
        terms[tuple(e)] = terms.get(tuple(e), 0) + c
    return Polynomial(n, terms)


def random_problem(rng: random.Random, n: int = 3, max_deg: int = 4, max_terms: int = 4,
                   max_polys: int = 3, names=None) -> ProblemInstance:
    polys = []
    target = rng.randint(1, max_polys)
    while len(polys) < target:
        p = random_poly(rng, n, max_deg, max_terms)
        if not p.is_zero():
            polys.append(p)
    names = names or tuple(f"x{i + 1}" for i in range(n))
    return ProblemInstance(VariableSet(names), tuple(polys))


def exponent_sets(pr: ProblemInstance):
    """Per polynomial, the list of exponent tuples (descending lex)."""
    return [[m.exponents for m in p.monomials()] for p in pr.polynomials]


def run_pipeline(out, jobs: int = 1):
    """Run every CLI stage on the bundled synthetic data, writing into ``out``."""
    from cadfeat.cli import main
    from cadfeat.synthetic import bundled_paths

    corpus, timings = (str(p) for p in bundled_paths())
    o = lambda name: str(out / name)  # noqa: E731
    steps = [
        ["featurize", corpus, "-o", o("features.csv"), "--descriptors", o("descriptors.json"), "--jobs", str(jobs)],
        ["simplify", o("features.csv"), "-o", o("simple.csv"), "--report", o("merge.json")],
        ["label", timings, "-o", o("labels.csv"), "--targets", o("targets.json"), "--limits", "128"],
        ["rank", o("simple.csv"), "--labels", o("labels.csv"), "-o", o("ranking.csv"),
         "--descriptors", o("descriptors.json")],
        ["train", o("simple.csv"), "--labels", o("labels.csv"), "-o", o("model.json"), "--ranking", o("ranking.csv"),
         "--top-k", "20", "--train-fraction", "0.7"],
        ["predict", o("model.json"), "o_simple", "-o", o("knn.json")],
        ["brown", corpus, "-o", o("brown.json")],
        ["sotd", corpus, "-o", o("sotd.json"), "--jobs", str(jobs)],
        ["evaluate", "--pred", o("knn.json"), "--pred", o("brown.json"), "--pred", o("sotd.json"),
         "--timings", timings, "-o", o("evaluation.json")],
        ["report", "--pred", o("knn.json"), "--pred", o("brown.json"), "--pred", o("sotd.json"),
         "--timings", timings, "-o", o("report")],
    ]
    for argv in steps:
        argv = [o("simple.csv") if a == "o_simple" else a for a in argv]
        code = main(argv)
        if code != 0:
            raise RuntimeError(f"cadfeat {' '.join(argv)} exited with {code}")
    return sorted(p for p in out.rglob("*") if p.is_file())
