"""Sparse multivariate polynomials with exact rational coefficients.

A :class:`Polynomial` is a mapping from exponent tuples to nonzero rational
coefficients over a fixed number of variables.  Variable names live in a
:class:`VariableSet`; the polynomial itself only knows positions.  Monomials
are listed in descending lexicographic order of their exponent tuples, which
fixes the monomial labels used by the feature code.

Resultants are computed by fraction-free (Bareiss) elimination on the
Sylvester matrix, so no polynomial gcds are needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

try:  # GMP multiplies large integers much faster than CPython does
    import gmpy2

    def _bigmul(x: int, y: int) -> int:
        return int(gmpy2.mpz(x) * gmpy2.mpz(y))

    def _bigdivmod(x: int, y: int) -> Tuple[int, int]:
        q, r = gmpy2.f_divmod(gmpy2.mpz(x), gmpy2.mpz(y))
        return int(q), int(r)
except ImportError:  # pragma: no cover
    def _bigmul(x: int, y: int) -> int:
        return x * y

    _bigdivmod = divmod

Exponents = Tuple[int, ...]


class PolynomialError(ValueError):
    """Raised for invalid polynomial operations (bad index, bad degree, ...)."""


def _norm(c):
    # ints are much faster than Fractions; keep integral values as int
    if isinstance(c, Fraction):
        return c.numerator if c.denominator == 1 else c
    if isinstance(c, int):
        return c
    if isinstance(c, Rational):
        return _norm(Fraction(c.numerator, c.denominator))
    raise TypeError(f"coefficient must be rational, got {type(c).__name__}")


def _div(a, b):
    if isinstance(a, int) and isinstance(b, int):
        q, r = divmod(a, b)
        return q if r == 0 else Fraction(a, b)
    return _norm(Fraction(a) / b)


@dataclass(frozen=True)
class VariableSet:
    """Ordered, duplicate-free variable names.  The order is a labelling only."""

    names: Tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise PolynomialError(f"duplicate variable names in {names}")
        if not names:
            raise PolynomialError("a variable set needs at least one variable")

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise PolynomialError(f"unknown variable {name!r}") from None


@dataclass(frozen=True)
class Monomial:
    coefficient: Fraction
    exponents: Exponents

    @property
    def total_degree(self) -> int:
        return sum(self.exponents)


_W = 32  # bits per packed exponent field; top bit of each field is a guard
_FIELD = (1 << (_W - 1)) - 1


def _pack(exps: Sequence[int]) -> int:
    key = 0
    for d in exps:
        if not 0 <= d <= _FIELD:
            raise PolynomialError(f"exponent {d} out of range")
        key = (key << _W) | d
    return key


def _unpack(key: int, n: int) -> Exponents:
    out = [0] * n
    for i in range(n - 1, -1, -1):
        out[i] = key & _FIELD
        key >>= _W
    return tuple(out)


def _guard(n: int) -> int:
    g = 0
    for _ in range(n):
        g = (g << _W) | (1 << (_W - 1))
    return g


def _all_int(terms) -> bool:
    for c in terms.values():
        if type(c) is not int:
            return False
    return True


def _single_field(a: Dict[int, object], b: Dict[int, object]) -> int:
    """Shift of the one variable field used by ``a`` and ``b``, else -1."""
    mask = 0
    for k in a:
        mask |= k
    for k in b:
        mask |= k
    if not mask:
        return -1
    s = ((mask & -mask).bit_length() - 1) // _W * _W
    return s if mask >> s <= _FIELD else -1


def _kron_encode(t: Dict[int, int], s: int, nb: int) -> int:
    # value at x = 2^(8*nb) of the univariate integer polynomial ``t``
    slots = (max(t) >> s) + 1
    pos = bytearray(slots * nb)
    neg = bytearray(slots * nb)
    for k, c in t.items():
        off = (k >> s) * nb
        if c > 0:
            pos[off:off + nb] = c.to_bytes(nb, "little")
        else:
            neg[off:off + nb] = (-c).to_bytes(nb, "little")
    return int.from_bytes(pos, "little") - int.from_bytes(neg, "little")


def _kron_decode(value: int, slots: int, s: int, nb: int) -> Dict[int, int] | None:
    # inverse of _kron_encode for signed digits below 2^(8*nb-1); None if out of range
    half = 1 << (nb * 8 - 1)
    value += int.from_bytes((b"\x00" * (nb - 1) + b"\x80") * slots, "little")
    if value < 0 or value.bit_length() > 8 * nb * slots:
        return None
    raw = value.to_bytes(nb * slots, "little")
    if nb == 8:
        signed = (np.frombuffer(raw, dtype="<u8") ^ np.uint64(half)).view(np.int64)
        idx = np.flatnonzero(signed)
        return {i << s: c for i, c in zip(idx.tolist(), signed[idx].tolist())}
    from_bytes = int.from_bytes
    digits = [from_bytes(raw[i:i + nb], "little") - half for i in range(0, nb * slots, nb)]
    return {i << s: c for i, c in enumerate(digits) if c}


def _digit_bytes(bits: int) -> int:
    return 8 if bits <= 62 else (bits + 9) // 8


def _maxbits(t: Dict[int, int]) -> int:
    return max(abs(c).bit_length() for c in t.values())


def _kron_mul_uni(a: Dict[int, int], b: Dict[int, int], s: int) -> Dict[int, int]:
    # univariate product through one big-integer multiplication
    nb = _digit_bytes(_maxbits(a) + _maxbits(b) + min(len(a), len(b)).bit_length())
    slots = ((max(a) + max(b)) >> s) + 1
    return _kron_decode(_bigmul(_kron_encode(a, s, nb), _kron_encode(b, s, nb)), slots, s, nb)


def _kron_div_uni(a: Dict[int, int], b: Dict[int, int], s: int) -> Dict[int, int] | None:
    # exact quotient a/b via one big-integer division, verified by multiplying
    # back; None when the digit width guess is too small or b does not divide a
    dq = (max(a) - max(b)) >> s
    if dq < 0:
        return None
    nb = _digit_bytes(_maxbits(a) + dq + 8)
    q, r = _bigdivmod(_kron_encode(a, s, nb), _kron_encode(b, s, nb))
    if r:
        return None
    quot = _kron_decode(q, dq + 1, s, nb)
    if not quot or _kron_mul_uni(quot, b, s) != a:
        return None
    return quot


def _uni_exact_div(a: Dict[int, object], b: Dict[int, object], s: int) -> Dict[int, object]:
    # dense long division; ``a`` and ``b`` involve only the field at shift ``s``
    da, db = max(a) >> s, max(b) >> s
    if da < db:
        raise PolynomialError("division is not exact")
    rem = [0] * (da + 1)
    for k, c in a.items():
        rem[k >> s] = c
    lc = b[db << s]
    rest = [((k >> s) - db, c) for k, c in b.items() if k >> s != db]
    quot = {}
    for i in range(da, db - 1, -1):
        c = rem[i]
        if not c:
            continue
        q = _div(c, lc)
        quot[(i - db) << s] = q
        for j, bc in rest:
            rem[i + j] -= q * bc
    if any(rem[:db]):
        raise PolynomialError("division is not exact")
    return {k: _norm(c) for k, c in quot.items()}


class Polynomial:
    """Immutable sparse polynomial in ``nvars`` variables over Q.

    Monomials are stored under packed integer keys (variable 0 in the most
    significant field), so integer order on keys is lexicographic order on
    exponent tuples and monomial multiplication is integer addition.
    """

    __slots__ = ("nvars", "_t", "_key", "_monos")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        clean: Dict[int, object] = {}
        if terms:
            items = terms.items() if isinstance(terms, dict) else terms
            for exps, c in items:
                exps = tuple(exps)
                if len(exps) != nvars or any(e < 0 for e in exps):
                    raise PolynomialError(f"bad exponent tuple {exps} for {nvars} variables")
                k = _pack(exps)
                c = _norm(c)
                if c:
                    c = _norm(clean.get(k, 0) + c)
                    if c:
                        clean[k] = c
                    else:
                        clean.pop(k, None)
        self._t = clean
        self._key = None
        self._monos = None

    @classmethod
    def _raw(cls, nvars: int, terms: Dict[int, object]) -> "Polynomial":
        # trusted constructor: packed keys, normalized nonzero coefficients
        p = cls.__new__(cls)
        p.nvars = nvars
        p._t = terms
        p._key = None
        p._monos = None
        return p

    @classmethod
    def constant(cls, nvars: int, c) -> "Polynomial":
        c = _norm(c)
        return cls._raw(nvars, {0: c} if c else {})

    @classmethod
    def variable(cls, nvars: int, v: int) -> "Polynomial":
        return cls._raw(nvars, {1 << (_W * (nvars - 1 - v)): 1})

    def _shift(self, v: int) -> int:
        return _W * (self.nvars - 1 - v)

    # -- queries ---------------------------------------------------------

    @property
    def terms(self) -> Dict[Exponents, Fraction]:
        return {_unpack(k, self.nvars): Fraction(c) for k, c in self._t.items()}

    def monomials(self) -> List[Monomial]:
        """Monomials in descending lex order; this order defines monomial labels."""
        if self._monos is None:
            self._monos = tuple(Monomial(Fraction(self._t[k]), _unpack(k, self.nvars))
                                for k in sorted(self._t, reverse=True))
        return list(self._monos)

    def exponents(self) -> List[Exponents]:
        return [m.exponents for m in self.monomials()]

    def __len__(self) -> int:
        return len(self._t)

    def is_zero(self) -> bool:
        return not self._t

    def is_constant(self) -> bool:
        return all(k == 0 for k in self._t)

    def degree_in(self, v: int) -> int:
        """Degree in variable ``v``; -1 for the zero polynomial."""
        s = self._shift(v)
        return max(((k >> s) & _FIELD for k in self._t), default=-1)

    def total_degree(self) -> int:
        return max((sum(_unpack(k, self.nvars)) for k in self._t), default=-1)

    def variables(self) -> set:
        return {v for e in self.exponents() for v, d in enumerate(e) if d}

    def leading(self) -> Tuple[Exponents, object]:
        k = max(self._t)
        return _unpack(k, self.nvars), self._t[k]

    def coefficients_in(self, v: int) -> Dict[int, "Polynomial"]:
        """Coefficients w.r.t. ``v`` as polynomials in the other variables."""
        s = self._shift(v)
        out: Dict[int, Dict[int, object]] = {}
        for k, c in self._t.items():
            d = (k >> s) & _FIELD
            out.setdefault(d, {})[k - (d << s)] = c
        return {d: Polynomial._raw(self.nvars, t) for d, t in out.items()}

    def derivative(self, v: int) -> "Polynomial":
        s = self._shift(v)
        one = 1 << s
        terms = {}
        for k, c in self._t.items():
            d = (k >> s) & _FIELD
            if d:
                terms[k - one] = c * d
        return Polynomial._raw(self.nvars, terms)

    # -- arithmetic ------------------------------------------------------

    def _check(self, other: "Polynomial"):
        if other.nvars != self.nvars:
            raise PolynomialError("polynomials live in different rings")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, Rational):
            return Polynomial.constant(self.nvars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._t)
        for k, c in other._t.items():
            s = terms.get(k, 0) + c
            if s:
                terms[k] = _norm(s)
            else:
                del terms[k]
        return Polynomial._raw(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, {k: -c for k, c in self._t.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._t)
        for k, c in other._t.items():
            s = terms.get(k, 0) - c
            if s:
                terms[k] = _norm(s)
            else:
                del terms[k]
        return Polynomial._raw(self.nvars, terms)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        a, b = self._t, other._t
        if len(a) < len(b):
            a, b = b, a
        if len(b) > 8 and _all_int(a) and _all_int(b):
            s = _single_field(a, b)
            if s >= 0:
                return Polynomial._raw(self.nvars, _kron_mul_uni(a, b, s))
        terms: Dict[int, object] = {}
        get = terms.get
        for k2, c2 in b.items():
            for k1, c1 in a.items():
                k = k1 + k2
                terms[k] = get(k, 0) + c1 * c2
        return Polynomial._raw(self.nvars, {k: _norm(c) for k, c in terms.items() if c})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise PolynomialError("exponent must be a non-negative integer")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def scale(self, c) -> "Polynomial":
        c = _norm(c)
        if not c:
            return Polynomial._raw(self.nvars, {})
        return Polynomial._raw(self.nvars, {k: _norm(v * c) for k, v in self._t.items()})

    def exact_div(self, other: "Polynomial") -> "Polynomial":
        """Quotient of an exact division; raises if ``other`` does not divide."""
        self._check(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        if not self._t:
            return self
        guard = _guard(self.nvars)
        if len(other._t) == 1:
            (le, lc), = other._t.items()
            terms = {}
            for k, c in self._t.items():
                if ((k | guard) - le) & guard != guard:
                    raise PolynomialError("division is not exact")
                terms[k - le] = _div(c, lc)
            return Polynomial._raw(self.nvars, terms)
        s = _single_field(self._t, other._t)
        if s >= 0:
            if len(self._t) > 16 and _all_int(self._t) and _all_int(other._t):
                fast = _kron_div_uni(self._t, other._t, s)
                if fast is not None:
                    return Polynomial._raw(self.nvars, fast)
            return Polynomial._raw(self.nvars, _uni_exact_div(self._t, other._t, s))
        le = max(other._t)
        lc = other._t[le]
        rest = [(k, c) for k, c in other._t.items() if k != le]
        rem = dict(self._t)
        quot: Dict[int, object] = {}
        while rem:
            k = max(rem)
            if ((k | guard) - le) & guard != guard:
                raise PolynomialError("division is not exact")
            q = k - le
            qc = _div(rem.pop(k), lc)
            quot[q] = qc
            for d, oc in rest:
                t = q + d
                s = rem.get(t, 0) - qc * oc
                if s:
                    rem[t] = s
                else:
                    del rem[t]
        return Polynomial._raw(self.nvars, {k: _norm(c) for k, c in quot.items()})

    # -- normal forms ----------------------------------------------------

    def primitive(self) -> "Polynomial":
        """Integer coefficients with gcd 1 and positive leading coefficient.

        Two polynomials have the same primitive form iff they differ by a
        nonzero rational factor.
        """
        if not self._t:
            return self
        from math import gcd, lcm

        den = 1
        for c in self._t.values():
            if isinstance(c, Fraction):
                den = lcm(den, c.denominator)
        ints = {k: int(c * den) for k, c in self._t.items()}
        g = 0
        for c in ints.values():
            g = gcd(g, c)
        if ints[max(ints)] < 0:
            g = -g
        return Polynomial._raw(self.nvars, {k: c // g for k, c in ints.items()})

    def key(self) -> Tuple:
        if self._key is None:
            self._key = tuple(sorted((_unpack(k, self.nvars), Fraction(c)) for k, c in self._t.items()))
        return self._key

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._t == other._t
        if isinstance(other, Rational):
            return self == Polynomial.constant(self.nvars, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self._t.items())))

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self.key()!r})"

    def to_string(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = [f"x{i + 1}" for i in range(self.nvars)]
        if not self._t:
            return "0"
        parts = []
        for mono in self.monomials():
            c = mono.coefficient
            factors = []
            for name, d in zip(names, mono.exponents):
                if d == 1:
                    factors.append(name)
                elif d > 1:
                    factors.append(f"{name}^{d}")
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(mag)] + factors)
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"{'-' if c < 0 else '+'} {body}")
        return " ".join(parts)

    __str__ = to_string


@dataclass(frozen=True)
class ProblemInstance:
    """A finite, ordered collection of nonzero polynomials over ``variables``."""

    variables: VariableSet
    polynomials: Tuple[Polynomial, ...]
    id: str = ""

    def __post_init__(self):
        polys = tuple(self.polynomials)
        object.__setattr__(self, "polynomials", polys)
        if not polys:
            raise PolynomialError("a problem instance needs at least one polynomial")
        n = len(self.variables)
        for p, poly in enumerate(polys, 1):
            if poly.nvars != n:
                raise PolynomialError(f"polynomial {p} has {poly.nvars} variables, expected {n}")
            if poly.is_zero():
                raise PolynomialError(f"polynomial {p} is zero")

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def __len__(self) -> int:
        return len(self.polynomials)

    def degree(self, p: int, m: int, v: int) -> int:
        """Exponent of variable ``v`` in monomial ``m`` of polynomial ``p`` (1-based)."""
        return degree(self.polynomials[_check_index(p, len(self.polynomials), "p") - 1], m, v)

    def exponent_table(self) -> List[List[Exponents]]:
        """Per polynomial, the exponent tuples of its monomials in label order."""
        return [poly.exponents() for poly in self.polynomials]

    def to_native(self) -> str:
        lines = ["vars: " + ", ".join(self.variables.names)]
        lines += [poly.to_string(self.variables.names) for poly in self.polynomials]
        return "\n".join(lines) + "\n"


def _check_index(i: int, size: int, what: str) -> int:
    if not 1 <= i <= size:
        raise PolynomialError(f"{what}={i} out of range 1..{size}")
    return i


def degree(poly: Polynomial, m: int, v: int) -> int:
    """Exponent ``d_v`` of variable ``v`` in monomial ``m`` of ``poly`` (both 1-based)."""
    monos = poly.monomials()
    _check_index(m, len(monos), "m")
    _check_index(v, poly.nvars, "v")
    return monos[m - 1].exponents[v - 1]


def _bareiss_det(matrix: List[List[Polynomial]], nvars: int) -> Polynomial:
    a = [row[:] for row in matrix]
    size = len(a)
    sign = 1
    prev = Polynomial.constant(nvars, 1)
    for k in range(size - 1):
        if a[k][k].is_zero():
            for i in range(k + 1, size):
                if not a[i][k].is_zero():
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return Polynomial(nvars)
        pivot = a[k][k]
        for i in range(k + 1, size):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, size):
                num = row_i[j] * pivot
                if not aik.is_zero() and not row_k[j].is_zero():
                    num = num - aik * row_k[j]
                row_i[j] = num.exact_div(prev)
            row_i[k] = Polynomial(nvars)
        prev = pivot
    det = a[-1][-1]
    return det if sign > 0 else -det


def sylvester_matrix(p: Polynomial, q: Polynomial, v: int) -> List[List[Polynomial]]:
    """Sylvester matrix of ``p`` and ``q`` w.r.t. variable index ``v`` (0-based)."""
    dp, dq = p.degree_in(v), q.degree_in(v)
    cp, cq = p.coefficients_in(v), q.coefficients_in(v)
    zero = Polynomial(p.nvars)
    size = dp + dq
    rows = []
    for i in range(dq):
        row = [zero] * size
        for k, c in cp.items():
            row[i + dp - k] = c
        rows.append(row)
    for i in range(dp):
        row = [zero] * size
        for k, c in cq.items():
            row[i + dq - k] = c
        rows.append(row)
    return rows


def _dense(p: Polynomial, v: int) -> List[Polynomial]:
    coeffs = p.coefficients_in(v)
    zero = Polynomial(p.nvars)
    return [coeffs.get(k, zero) for k in range(p.degree_in(v) + 1)]


def _prem(a: List[Polynomial], b: List[Polynomial]) -> List[Polynomial]:
    """Pseudo-remainder lc(b)^(deg a - deg b + 1) * a mod b, coefficient lists low-to-high."""
    r = list(a)
    db = len(b) - 1
    lc = b[-1]
    e = len(a) - len(b) + 1
    while r and len(r) - 1 >= db:
        c = r[-1]
        shift = len(r) - 1 - db
        new = [x * lc for x in r[:-1]]
        if not c.is_zero():
            for i, bi in enumerate(b[:-1]):
                if not bi.is_zero():
                    new[i + shift] = new[i + shift] - c * bi
        e -= 1
        r = new
        while r and r[-1].is_zero():
            r.pop()
    if e > 0 and r:
        f = lc ** e
        r = [x * f for x in r]
    return r


def _subresultant(a: List[Polynomial], b: List[Polynomial], nvars: int) -> Polynomial:
    # subresultant PRS over the coefficient ring; all divisions are exact
    one = Polynomial.constant(nvars, 1)
    s = 1
    if len(a) < len(b):
        a, b = b, a
        if (len(a) - 1) % 2 and (len(b) - 1) % 2:
            s = -s
    g = h = one
    while True:
        da, db = len(a) - 1, len(b) - 1
        delta = da - db
        if da % 2 and db % 2:
            s = -s
        r = _prem(a, b)
        if not r:
            return Polynomial(nvars)
        a = b
        div = g * h ** delta
        b = [x.exact_div(div) for x in r]
        g = a[-1]
        h = g ** delta if delta == 1 else (g ** delta).exact_div(h ** (delta - 1)) if delta else h
        if len(b) == 1:
            da = len(a) - 1
            res = b[0] ** da
            if da > 1:
                res = res.exact_div(h ** (da - 1))
            return res if s > 0 else -res


def resultant(p: Polynomial, q: Polynomial, v: int, method: str = "subresultant") -> Polynomial:
    """Resultant of ``p`` and ``q`` with respect to variable index ``v`` (0-based).

    Equal to the determinant of the Sylvester matrix (rows of ``p`` first).
    Both inputs need positive degree in ``v``; the result does not involve
    ``v`` but keeps the same number of variables.  ``method`` is
    ``"subresultant"`` (PRS, default) or ``"bareiss"`` (fraction-free
    elimination on the Sylvester matrix).
    """
    p._check(q)
    if not 0 <= v < p.nvars:
        raise PolynomialError(f"variable index {v} out of range")
    if p.degree_in(v) < 1 or q.degree_in(v) < 1:
        raise PolynomialError("resultant needs positive degree in the eliminated variable")
    if method == "bareiss":
        return _bareiss_det(sylvester_matrix(p, q, v), p.nvars)
    if method != "subresultant":
        raise ValueError(f"unknown resultant method {method!r}")
    return _subresultant(_dense(p, v), _dense(q, v), p.nvars)


def discriminant(p: Polynomial, v: int, method: str = "subresultant") -> Polynomial:
    """``res(p, dp/dv, v)``, without dividing out the leading coefficient."""
    if p.degree_in(v) < 2:
        raise PolynomialError("discriminant needs degree >= 2 in the variable")
    return resultant(p, p.derivative(v), v, method)

