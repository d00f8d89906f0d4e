"""
Brown and sotd on a small problem
=================================

Brown's heuristic reads degrees straight off the input.  sotd projects the
polynomials under every ordering and picks the one whose projections carry
the least total degree.  Both report every ordering they cannot separate.
"""

from cadfeat.heuristics import brown, brown_criteria, projection_chain, sotd
from cadfeat.parse import parse_problem_native

pr = parse_problem_native("""
vars: x1, x2, x3
x1^4 + x2
x2^2 + x3
""")
names = pr.variables.names

# (degree, max total degree of terms containing it, terms containing it)
for v, crit in zip(names, brown_criteria(pr)):
    print(v, crit)
print("brown:", [" > ".join(o) for o in brown(pr).orderings])

res = sotd(pr)
for ordering, score in sorted(res.scores.items(), key=lambda kv: kv[1]):
    mark = "*" if ordering in res.orderings else " "
    print(f"{mark} {' > '.join(ordering):15s} {score}")

# The projection levels behind one of the winning orderings
for level in projection_chain(pr, (0, 2, 1)):
    print([p.to_string(names) for p in level])
