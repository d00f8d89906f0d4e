"""Algebraic features and variable-ordering heuristics for CAD.

Submodules: ``poly`` (exact sparse polynomials, resultants), ``parse``
(native and SMT-LIB readers), ``features`` (feature generation),
``dataset`` (simplification, F-values, splits), ``heuristics`` (Brown,
sotd), ``ml`` (labels, KNN, evaluation) and ``cli``.
"""

__version__ = "0.1.0"
