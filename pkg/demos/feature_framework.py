"""
Generating polynomial features
==============================

Every feature here is a base quantity per monomial, pushed through one max,
one average, one sum and one sign step.  We build all of them for three
variables and look at a few on a small problem.
"""

from cadfeat.features import describe, enumerate_descriptors, evaluate_feature
from cadfeat.parse import parse_problem_native

pr = parse_problem_native("""
vars: x1, x2, x3
x1^2*x2 - x3
x1*x2^4*x3^2 + x1*x3
""", id="small")

descs = enumerate_descriptors(3)
print(len(descs), "descriptors")

# Many descriptors differ only in where an identity step sits, so they
# render to the same formula and always agree.
formulas = {d.formula() for d in descs}
print(len(formulas), "distinct formulas")

names = ("x_1", "x_2", "x_3")
for serial in (0, 100, 500, 1200):
    d = descs[serial]
    info = describe(d, names)
    print(f"{serial:5d}  {d.formula():45s} = {evaluate_feature(d, pr)}")
    if info.get("gloss"):
        print("       " + info["gloss"])

# The share of monomials containing x2, averaged across the polynomials:
share = next(d for d in descs if d.formula() == "av_p av_m sgn(d_2)")
print("share of monomials with x2:", evaluate_feature(share, pr))
