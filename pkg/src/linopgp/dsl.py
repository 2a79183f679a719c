"""Text front end for operator expressions.

Grammar::

    expr  := ['+'|'-'] term (('+'|'-') term)*
    term  := [coeff '*'] atom
    coeff := number | identifier
    atom  := 'u' | 'd/d'dim | 'd2/d'dim'2' | 'int[' dim ']' | 'frac[' dim ',' identifier ']'

Identifiers become parameter slots. A minus sign folds into the scale of the
following term, so ``d/dt - a*d2/dx2`` stores the second term as -1 * a.
"""
import re

from .errors import ConfigurationError, OperatorSyntaxError
from .operators import (FractionalDeriv, Identity, IntegralFromZero, OperatorExpr,
                        PartialDeriv, Term)

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<d2>d2/d(?P<d2dim>[A-Za-z_][A-Za-z0-9_]*)2\b)
  | (?P<d1>d/d(?P<d1dim>[A-Za-z_][A-Za-z0-9_]*)\b)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*\[\],])
""", re.VERBOSE)


def tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise OperatorSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind in ("d2dim", "d1dim"):
            kind = "d2" if m.group("d2") else "d1"
        if kind == "d2":
            tokens.append(("d2", m.group("d2dim"), pos, m.end()))
        elif kind == "d1":
            tokens.append(("d1", m.group("d1dim"), pos, m.end()))
        elif kind != "ws":
            tokens.append((kind, m.group(kind), pos, m.end()))
        pos = m.end()
    tokens.append(("end", "", len(text), len(text)))
    return tokens


RESERVED = frozenset({"u", "int", "frac"})


class _Parser:
    def __init__(self, text, dims):
        self.text = text
        self.dims = list(dims)
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise OperatorSyntaxError(msg, self.text, tok[2])

    def expect(self, value):
        tok = self.next()
        if tok[0] != "op" or tok[1] != value:
            self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def dim(self, name, tok):
        if name not in self.dims:
            self.error(f"unknown dimension {name!r} (declared: {', '.join(self.dims)})", tok)
        return self.dims.index(name)

    def slot(self, tok):
        if tok[1] in RESERVED:
            self.error(f"{tok[1]!r} is reserved and cannot name a parameter", tok)
        return tok[1]

    def parse(self):
        terms = []
        sign = 1.0
        if self.peek()[0] == "op" and self.peek()[1] in "+-":
            sign = -1.0 if self.next()[1] == "-" else 1.0
        terms.append(self.term(sign))
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            sign = -1.0 if self.next()[1] == "-" else 1.0
            terms.append(self.term(sign))
        if self.peek()[0] != "end":
            self.error(f"unexpected {self.peek()[1]!r}")
        return terms

    def term(self, sign):
        start = self.peek()[2]
        scale, param = sign, None
        tok = self.peek()
        if tok[0] == "number":
            self.next()
            scale = sign * float(tok[1])
            self.expect("*")
        elif tok[0] == "ident" and self.peek(1)[:2] == ("op", "*"):
            self.next()
            self.next()
            param = self.slot(tok)
        atom = self.atom()
        end = self.tokens[self.i - 1]
        return Term(atom, scale, param, span=(start, end[3]))

    def atom(self):
        tok = self.next()
        kind, val = tok[0], tok[1]
        if kind == "d1":
            return PartialDeriv(self.dim(val, tok), 1)
        if kind == "d2":
            return PartialDeriv(self.dim(val, tok), 2)
        if kind == "ident" and val == "u":
            return Identity()
        if kind == "ident" and val in ("int", "frac"):
            self.expect("[")
            dtok = self.next()
            if dtok[0] != "ident":
                self.error("expected a dimension name", dtok)
            d = self.dim(dtok[1], dtok)
            if val == "int":
                self.expect("]")
                return IntegralFromZero(d)
            self.expect(",")
            ptok = self.next()
            if ptok[0] != "ident":
                self.error("expected a parameter name for the fractional order", ptok)
            self.expect("]")
            return FractionalDeriv(d, self.slot(ptok))
        self.error(f"expected an operator atom, found {val or 'end of input'!r}", tok)


def parse_operator(text, dims=("x",)):
    """Parse ``text`` into an :class:`OperatorExpr` over the named dimensions."""
    if not text or not text.strip():
        raise OperatorSyntaxError("empty operator expression", text or "", 0)
    dims = tuple(dims)
    if not dims:
        raise ConfigurationError("at least one dimension name is required")
    terms = _Parser(text, dims).parse()
    return OperatorExpr(tuple(terms), dims)


def list_params(expr):
    return expr.params()


def _fmt_number(x):
    s = repr(float(x))
    if "inf" in s or "nan" in s:
        raise ValueError(f"cannot render non-finite coefficient {x}")
    return s


def render_atom(atom, dims):
    if isinstance(atom, Identity):
        return "u"
    if isinstance(atom, PartialDeriv):
        name = dims[atom.dim]
        return f"d/d{name}" if atom.order == 1 else f"d2/d{name}2"
    if isinstance(atom, IntegralFromZero):
        return f"int[{dims[atom.dim]}]"
    if isinstance(atom, FractionalDeriv):
        return f"frac[{dims[atom.dim]},{atom.order_param}]"
    raise TypeError(f"unknown atom {atom!r}")


def render(expr):
    """Inverse of :func:`parse_operator` up to whitespace and number formatting."""
    parts = []
    for i, t in enumerate(expr.terms):
        neg = t.scale < 0 or (t.scale == 0 and str(t.scale).startswith("-"))
        mag = abs(t.scale)
        if t.param is not None:
            if mag != 1.0:
                raise ValueError("a term with both a numeric scale and a parameter has no text form")
            coeff = f"{t.param}*"
        else:
            coeff = "" if mag == 1.0 else f"{_fmt_number(mag)}*"
        body = coeff + render_atom(t.atom, expr.dims)
        if i == 0:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append(("- " if neg else "+ ") + body)
    return " ".join(parts)
