"""Readers for polynomial problems: native text, SMT-LIB fragment, corpora.

Native grammar (products and powers are expanded eagerly)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*        # '/' only by a nonzero constant
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' INT)?
    atom   := NUMBER | IDENT | '(' expr ')'

A native problem file starts with ``vars: x1, x2, x3`` and has one
polynomial per following non-empty line; ``#`` starts a comment.
"""

from __future__ import annotations

import itertools
import json
import re
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from .poly import Polynomial, PolynomialError, ProblemInstance, VariableSet


class ParseError(ValueError):
    """Malformed input.  ``line`` and ``col`` are 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None,
                 source: Optional[str] = None):
        self.message = message
        self.line = line
        self.col = col
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        if col is not None:
            where += f"{col}:"
        super().__init__(f"{where} {message}" if where else message)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip()) if pos < len(text) else pos
            raise ParseError(f"unexpected character {text[bad]!r}", col=bad + 1)
        kind = m.lastgroup
        value = m.group(kind)
        tokens.append((kind, "^" if value == "**" else value, m.start(kind)))
        pos = m.end()
    return tokens


class _ExprParser:
    def __init__(self, text: str, vars: VariableSet):
        self.tokens = _tokenize(text)
        self.i = 0
        self.vars = vars
        self.n = len(vars)
        self.end = len(text)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, self.end)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def fail(self, msg, pos=None):
        if pos is None:
            pos = self.peek()[2]
        raise ParseError(msg, col=pos + 1)

    def parse(self) -> Polynomial:
        if not self.tokens:
            self.fail("empty expression")
        result = self.expr()
        kind, value, pos = self.peek()
        if kind is not None:
            self.fail(f"unexpected token {value!r}")
        return result

    def expr(self):
        acc = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self):
        acc = self.unary()
        while self.peek()[1] in ("*", "/"):
            op, pos = self.take()[1:]
            rhs = self.unary()
            if op == "*":
                acc = acc * rhs
            else:
                if not rhs.is_constant() or rhs.is_zero():
                    self.fail("division only by a nonzero constant", pos)
                acc = acc.scale(1 / Fraction(rhs.terms[(0,) * self.n]))
        return acc

    def unary(self):
        op = self.peek()[1]
        if op == "-":
            self.take()
            return -self.unary()
        if op == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, value, pos = self.peek()
            if kind == "op" and value == "-":
                self.fail("negative exponent")
            if kind != "num":
                self.fail("exponent must be a non-negative integer literal")
            if "." in value:
                self.fail("exponent must be an integer", pos)
            self.take()
            base = base ** int(value)
        return base

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Polynomial.constant(self.n, Fraction(value))
        if kind == "ident":
            if value not in self.vars.names:
                self.fail(f"unknown variable {value!r}", pos)
            return Polynomial.variable(self.n, self.vars.index(value))
        if value == "(":
            inner = self.expr()
            if self.peek()[1] != ")":
                self.fail("expected ')'")
            self.take()
            return inner
        if kind is None:
            self.fail("unexpected end of expression", pos)
        self.fail(f"unexpected token {value!r}", pos)


def _as_varset(vars) -> VariableSet:
    return vars if isinstance(vars, VariableSet) else VariableSet(tuple(vars))


def parse_polynomial(text: str, vars: Union[VariableSet, Sequence[str]]) -> Polynomial:
    """Parse and expand ``text`` into a normalized polynomial over ``vars``."""
    return _ExprParser(text, _as_varset(vars)).parse()


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_problem_native(text: str, id: str = "", source: Optional[str] = None) -> ProblemInstance:
    vars = None
    polys = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if vars is None:
            if not line.startswith("vars:"):
                raise ParseError("first line must be 'vars: ...'", lineno, 1, source)
            names = [n.strip() for n in line[len("vars:"):].split(",") if n.strip()]
            try:
                vars = VariableSet(tuple(names))
            except PolynomialError as exc:
                raise ParseError(str(exc), lineno, 1, source) from None
            for name in names:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                    raise ParseError(f"bad variable name {name!r}", lineno, 1, source)
            continue
        try:
            poly = parse_polynomial(line, vars)
        except ParseError as exc:
            offset = len(raw) - len(raw.lstrip())
            col = exc.col + offset if exc.col is not None else None
            raise ParseError(exc.message, lineno, col, source) from None
        if poly.is_zero():
            raise ParseError("polynomial is zero", lineno, 1, source)
        polys.append(poly)
    if vars is None:
        raise ParseError("missing 'vars:' line", source=source)
    if not polys:
        raise ParseError("no polynomials listed", source=source)
    return ProblemInstance(vars, tuple(polys), id)


# -- SMT-LIB -------------------------------------------------------------

_SEXP_TOKEN = re.compile(r'\s*(?:(;[^\n]*)|(\()|(\))|(\|[^|]*\|)|("(?:[^"]|"")*")|([^\s()|";]+))')

_RELATIONS = {"=", "<", "<=", ">", ">="}
_CONNECTIVES = {"and", "or", "not", "=>", "xor"}
_REJECTED = {"let", "forall", "exists", "define-fun", "define-fun-rec", "define-funs-rec",
             "define-sort", "push", "pop", "declare-datatypes", "declare-datatype"}


class _Sym(str):
    __slots__ = ("line", "col")


def _read_sexps(text: str, source: Optional[str]):
    stack: List[list] = [[]]
    pos = 0
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def where(offset):
        import bisect

        ln = bisect.bisect_right(line_starts, offset)
        return ln, offset - line_starts[ln - 1] + 1

    while pos < len(text):
        m = _SEXP_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ParseError("unreadable input", *where(pos), source)
        pos = m.end()
        comment, lpar, rpar, quoted, string, atom = m.groups()
        if comment:
            continue
        if lpar:
            stack.append([])
        elif rpar:
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", *where(m.start(3)), source)
            done = stack.pop()
            stack[-1].append(done)
        else:
            tok = _Sym(atom or quoted or string)
            tok.line, tok.col = where(m.start(4) if quoted else m.start(5) if string else m.start(6))
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ParseError("unbalanced '(' at end of input", source=source)
    return stack[0]


def _pos(node):
    while isinstance(node, list) and node:
        node = node[0]
    if isinstance(node, _Sym):
        return node.line, node.col
    return None, None


_NUMERAL = re.compile(r"\d+(\.\d+)?")


class _SmtReader:
    def __init__(self, source):
        self.source = source
        self.names: List[str] = []
        self.vars: Optional[VariableSet] = None

    def fail(self, msg, node):
        raise ParseError(msg, *_pos(node), self.source)

    def term(self, node) -> Polynomial:
        n = len(self.vars)
        if isinstance(node, _Sym):
            if _NUMERAL.fullmatch(node):
                return Polynomial.constant(n, Fraction(str(node)))
            if node in self.vars.names:
                return Polynomial.variable(n, self.vars.index(node))
            self.fail(f"undeclared symbol {str(node)!r}", node)
        if not node:
            self.fail("empty term", node)
        head, args = node[0], node[1:]
        if isinstance(head, list):
            self.fail("unsupported term", node)
        if head == "+":
            acc = Polynomial(n)
            for a in args:
                acc = acc + self.term(a)
            return acc
        if head == "-":
            if not args:
                self.fail("'-' needs arguments", node)
            if len(args) == 1:
                return -self.term(args[0])
            acc = self.term(args[0])
            for a in args[1:]:
                acc = acc - self.term(a)
            return acc
        if head == "*":
            acc = Polynomial.constant(n, 1)
            for a in args:
                acc = acc * self.term(a)
            return acc
        if head == "/":
            # only rational literals such as (/ 1 3) are in the polynomial fragment
            vals = [self.term(a) for a in args]
            if len(vals) < 2 or not all(v.is_constant() for v in vals) or any(v.is_zero() for v in vals[1:]):
                self.fail("unsupported operator '/' on non-constant terms", node)
            acc = Fraction(vals[0].terms.get((0,) * n, 0))
            for v in vals[1:]:
                acc /= Fraction(v.terms[(0,) * n])
            return Polynomial.constant(n, acc)
        if head == "to_real":
            return self.term(args[0])
        self.fail(f"unsupported operator {str(head)!r}", node)

    def atoms(self, node, found: list):
        if isinstance(node, _Sym):
            if node in ("true", "false"):
                return
            self.fail(f"unexpected symbol {str(node)!r} in formula", node)
        if not node or isinstance(node[0], list):
            self.fail("malformed formula", node)
        head = node[0]
        if head in _CONNECTIVES:
            for arg in node[1:]:
                self.atoms(arg, found)
            return
        if head in _RELATIONS:
            args = node[1:]
            if len(args) < 2:
                self.fail(f"'{head}' needs two arguments", node)
            terms = [self.term(a) for a in args]
            for lhs, rhs in zip(terms, terms[1:]):
                found.append(lhs - rhs)
            return
        if head == "distinct":
            if len(node) < 3:
                self.fail("'distinct' needs two arguments", node)
            terms = [self.term(a) for a in node[1:]]
            for lhs, rhs in itertools.combinations(terms, 2):
                found.append(lhs - rhs)
            return
        if head in _REJECTED:
            self.fail(f"'{head}' is not supported", node)
        self.fail(f"unsupported operator {str(head)!r}", node)

    def read(self, text: str, id: str) -> ProblemInstance:
        found: List[Polynomial] = []
        asserted = []
        for cmd in _read_sexps(text, self.source):
            if not isinstance(cmd, list) or not cmd or isinstance(cmd[0], list):
                self.fail("expected a command", cmd)
            head = cmd[0]
            if head in ("declare-fun", "declare-const"):
                name = cmd[1]
                sort = cmd[-1]
                if head == "declare-fun" and cmd[2] != []:
                    self.fail("only nullary declarations are supported", cmd)
                if sort not in ("Real", "Int"):
                    self.fail(f"unsupported sort {sort!s}", cmd)
                self.names.append(str(name).strip("|"))
            elif head == "assert":
                asserted.append(cmd[1])
            elif head in _REJECTED:
                self.fail(f"'{head}' is not supported", cmd)
        if not self.names:
            raise ParseError("no declared real constants", source=self.source)
        self.vars = VariableSet(tuple(self.names))
        for formula in asserted:
            self.atoms(formula, found)
        polys = []
        seen = set()
        for poly in found:
            if poly.is_constant() or poly in seen:
                continue
            seen.add(poly)
            polys.append(poly)
        if not polys:
            raise ParseError("no polynomial atoms found", source=self.source)
        return ProblemInstance(self.vars, tuple(polys), id)


def parse_problem_smt(text: str, id: str = "", source: Optional[str] = None) -> ProblemInstance:
    """Extract the distinct atom polynomials ``lhs - rhs`` of an SMT-LIB script.

    Boolean structure is discarded.  Variables are the declared constants in
    declaration order.  Constant atoms (e.g. ``(> 1 0)``) are dropped.
    """
    return _SmtReader(source).read(text, id)


# -- corpora -------------------------------------------------------------

def load_problem(path: Union[str, Path]) -> ProblemInstance:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".smt2":
        return parse_problem_smt(text, id=path.stem, source=str(path))
    return parse_problem_native(text, id=path.stem, source=str(path))


def _load_jsonl(path: Path) -> List[ProblemInstance]:
    problems = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
            vars = VariableSet(tuple(rec["vars"]))
            polys = []
            for text in rec["polys"]:
                poly = parse_polynomial(text, vars)
                if poly.is_zero():
                    raise ParseError(f"zero polynomial {text!r}")
                polys.append(poly)
            problems.append(ProblemInstance(vars, tuple(polys), str(rec["id"])))
        except (KeyError, TypeError, json.JSONDecodeError, ValueError) as exc:
            msg = exc.message if isinstance(exc, ParseError) else str(exc)
            raise ParseError(f"bad record: {msg}", lineno, None, str(path)) from None
    return problems


def load_corpus(path: Union[str, Path]) -> List[ProblemInstance]:
    """Load a directory of ``.txt``/``.poly``/``.smt2`` files or a ``.jsonl`` file.

    Directory entries are read in sorted filename order.  Problem ids must be
    unique.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir()
                       if p.is_file() and p.suffix in (".txt", ".poly", ".smt2"))
        problems = [load_problem(p) for p in files]
    elif path.suffix == ".jsonl":
        problems = _load_jsonl(path)
    elif path.is_file():
        problems = [load_problem(path)]
    else:
        raise ParseError(f"no such corpus: {path}")
    ids = [p.id for p in problems]
    if len(set(ids)) != len(ids):
        raise ParseError(f"duplicate problem ids in {path}")
    return problems


def write_jsonl(problems: Sequence[ProblemInstance], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pr in problems:
            rec = {"id": pr.id, "vars": list(pr.variables.names),
                   "polys": [p.to_string(pr.variables.names) for p in pr.polynomials]}
            fh.write(json.dumps(rec) + "\n")
