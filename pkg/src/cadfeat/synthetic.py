"""Deterministic synthetic problems and timings for demos and pipeline tests.

The timings are not CAD runs.  They come from a toy cost model: the sotd
projection size of an ordering, scaled exponentially, perturbed by seeded
noise, rounded to milliseconds and capped at a time limit.  This gives the
learning pipeline some real structure to find without needing a CAS.
"""

from __future__ import annotations

import itertools
from importlib import resources
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .heuristics import sotd_score
from .ml import TimingRecord
from .poly import Polynomial, ProblemInstance, VariableSet

VARIABLES = ("x1", "x2", "x3")
BUNDLED_SEED = 2019
BUNDLED_SIZE = 50
TIME_LIMIT = 128.0


def random_problem(rng: np.random.Generator, pid: str, max_degree: int = 3,
                   max_terms: int = 4, max_polys: int = 3) -> ProblemInstance:
    n = len(VARIABLES)
    polys = []
    while len(polys) < rng.integers(1, max_polys + 1):
        terms = {}
        for _ in range(rng.integers(1, max_terms + 1)):
            total = int(rng.integers(0, max_degree + 1))
            cuts = np.sort(rng.integers(0, total + 1, n - 1))
            exps = np.diff(np.concatenate(([0], cuts, [total])))
            terms[tuple(int(e) for e in rng.permutation(exps))] = int(rng.integers(1, 6)) * int(rng.choice([-1, 1]))
        p = Polynomial(n, terms)
        if not p.is_constant():
            polys.append(p)
    return ProblemInstance(VariableSet(VARIABLES), tuple(polys), pid)


def random_corpus(size: int, seed: int) -> List[ProblemInstance]:
    rng = np.random.default_rng(seed)
    return [random_problem(rng, f"p{i:03d}") for i in range(size)]


def synthetic_timings(problems: List[ProblemInstance], seed: int,
                      limit: float = TIME_LIMIT) -> List[TimingRecord]:
    rng = np.random.default_rng(seed)
    out = []
    for pr in problems:
        names = pr.variables.names
        for perm in itertools.permutations(range(pr.nvars)):
            score = sotd_score(pr, perm)
            t = round(0.05 * 1.08 ** score * float(rng.uniform(0.9, 1.1)), 3)
            t = max(t, 0.001)
            ordering = tuple(names[v] for v in perm)
            if t >= limit:
                out.append(TimingRecord(pr.id, ordering, limit, "timeout"))
            else:
                out.append(TimingRecord(pr.id, ordering, t, "ok"))
    return out


def build(size: int = BUNDLED_SIZE, seed: int = BUNDLED_SEED) -> Tuple[List[ProblemInstance], List[TimingRecord]]:
    problems = random_corpus(size, seed)
    return problems, synthetic_timings(problems, seed + 1)


def bundled_paths() -> Tuple[Path, Path]:
    """Paths of the shipped 50-problem corpus (JSON lines) and its timing CSV."""
    base = resources.files("cadfeat") / "data"
    return Path(str(base / "synthetic_corpus.jsonl")), Path(str(base / "synthetic_timings.csv"))
