"""
Expression Text Format
Parser and canonical printer for differential polynomials and formal series
"""
import logging
import re
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Optional

import lark
from lark import v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError
from sympy.polys.domains import QQ

from core.config import get_config
from core.errors import NonzeroConstantTerm, ParseError
from core.ring import (
    G1, G2, PARAM_NAMES, XI, DiffPoly, ParamScalar, TruncationContext, invert_unit,
)

logger = logging.getLogger(__name__)


GRAMMAR = """
?start: sum

?sum: product
    | sum "+" product   -> add
    | sum "-" product   -> sub

?product: factor
    | product "*" factor -> mul

?factor: power
    | "-" factor        -> neg
    | "+" factor

?power: atom
    | atom "^" RATIONAL -> pow

?atom: RATIONAL         -> number
    | "eps"             -> eps
    | "xi"              -> xi
    | "G1"              -> g1
    | "G2"              -> g2
    | "inv" "(" sum ")" -> inv
    | "(" sum ")"
    __EXTRA_ATOMS__

RATIONAL: /[0-9]+(\\/[0-9]+)?/
JETVAR: /[uv][0-9]+(_[xy]+|\\[[0-9]+\\])?/

%import common.WS
%ignore WS
"""

EXPR_GRAMMAR = GRAMMAR.replace("__EXTRA_ATOMS__", '| JETVAR -> jet')
SERIES_GRAMMAR = GRAMMAR.replace("__EXTRA_ATOMS__", '| "x" -> xvar')

JET_RE = re.compile(r"([uv])([0-9]+)(?:_([xy]+)|\[([0-9]+)\])?$")


@lru_cache(maxsize=None)
def _parser(kind: str) -> lark.Lark:
    grammar = EXPR_GRAMMAR if kind == 'expr' else SERIES_GRAMMAR
    return lark.Lark(grammar, parser='lalr', propagate_positions=True)


def _rational(token) -> Fraction:
    num, _, den = str(token).partition('/')
    if den and int(den) == 0:
        raise ParseError("division by zero", token.line, token.column)
    return Fraction(int(num), int(den) if den else 1)


class _ArithmeticTransformer(lark.Transformer):
    """Shared +, -, *, ^ handling; subclasses build the atoms"""

    def add(self, items):
        return items[0] + items[1]

    def sub(self, items):
        return items[0] - items[1]

    def neg(self, items):
        return -items[0]

    def mul(self, items):
        return self._mul(items[0], items[1])

    def pow(self, items):
        base, exponent = items
        value = _rational(exponent)
        if value.denominator != 1:
            raise ParseError("exponent must be a natural number", exponent.line, exponent.column)
        return self._pow(base, value.numerator)

    def _mul(self, a, b):
        return a * b

    def _pow(self, base, n: int):
        return base ** n


class ExprTransformer(_ArithmeticTransformer):
    """Build a DiffPoly from a parse tree"""

    def __init__(self, n_vars: int, context: TruncationContext, var_name: Optional[str] = None):
        super().__init__()
        self.n_vars = n_vars
        self.context = context
        self.var_name = var_name

    def _constant(self, value) -> DiffPoly:
        return DiffPoly.constant(self.n_vars, self.context, value, self.var_name or 'u')

    def number(self, items):
        return self._constant(_rational(items[0]))

    def eps(self, items):
        return DiffPoly.epsilon(self.n_vars, self.context, 1, self.var_name or 'u')

    def xi(self, items):
        return self._constant(XI)

    def g1(self, items):
        return self._constant(G1)

    def g2(self, items):
        return self._constant(G2)

    def jet(self, items):
        token = items[0]
        match = JET_RE.match(str(token))
        name, index, letters, bracket = match.groups()
        alpha = int(index)
        if not 1 <= alpha <= self.n_vars:
            raise ParseError(f"variable {name}{alpha} out of range 1..{self.n_vars}", token.line, token.column)
        if self.var_name is None:
            self.var_name = name
        elif name != self.var_name:
            raise ParseError(f"cannot mix {self.var_name} and {name} variables", token.line, token.column)
        order = len(letters) if letters else int(bracket) if bracket else 0
        return DiffPoly.variable(self.n_vars, self.context, alpha, order, name)

    @v_args(meta=True)
    def inv(self, meta, items):
        value = items[0]
        if value.constant_term() != 1:
            raise ParseError("inv() needs an argument with constant term 1",
                             getattr(meta, 'line', 0), getattr(meta, 'column', 0))
        return invert_unit(value)


class SeriesTransformer(_ArithmeticTransformer):
    """Build a truncated series in x, eps and the parameters"""

    def __init__(self, series_ring):
        super().__init__()
        self.sr = series_ring

    def _mul(self, a, b):
        return self.sr.mul(a, b)

    def _pow(self, base, n: int):
        return self.sr.power(base, n)

    def number(self, items):
        value = _rational(items[0])
        return self.sr.ring(QQ(value.numerator, value.denominator))

    def eps(self, items):
        return self.sr.gen('eps')

    def xi(self, items):
        return self.sr.gen('xi')

    def g1(self, items):
        return self.sr.gen('G1')

    def g2(self, items):
        return self.sr.gen('G2')

    def xvar(self, items):
        return self.sr.gen('x')

    @v_args(meta=True)
    def inv(self, meta, items):
        try:
            return self.sr.invert_unit(items[0])
        except NonzeroConstantTerm as e:
            raise ParseError(str(e), getattr(meta, 'line', 0), getattr(meta, 'column', 0))


def _run(kind: str, text: str, transformer: lark.Transformer, source: str):
    try:
        tree = _parser(kind).parse(text)
        return transformer.transform(tree)
    except UnexpectedEOF:
        raise ParseError("unexpected end of input", 1, len(text) + 1, source)
    except UnexpectedInput as e:
        raise ParseError(f"unexpected input near {text[max(e.column - 1, 0):e.column + 9]!r}",
                         e.line, e.column, source)
    except VisitError as e:
        orig = e.orig_exc
        if isinstance(orig, ParseError):
            raise ParseError(orig.message, orig.line, orig.column, source)
        raise ParseError(str(orig), 1, 1, source)


def parse_expr(text: str, n_vars: int, context: Optional[TruncationContext] = None,
               var_name: Optional[str] = None, source: str = '<expr>') -> DiffPoly:
    """Parse text such as '1/2*u1^2 + 1/12*eps^2*u1[2]' into a DiffPoly"""
    if context is None:
        context = get_config().truncation_context(cli=True)
    transformer = ExprTransformer(n_vars, context, var_name)
    result = _run('expr', text, transformer, source)
    name = transformer.var_name or var_name or 'u'
    if result.var_name != name:
        result = result.renamed(name)
    logger.debug(f"Parsed {source}: {len(result)} terms")
    return result


def parse_series(text: str, series_ring, source: str = '<series>'):
    """Parse a series in x, eps and the parameters, truncated by series_ring"""
    return series_ring.truncate(_run('series', text, SeriesTransformer(series_ring), source))


# Canonical printing

def _scalar_terms(c: ParamScalar):
    return sorted(c.items(), key=lambda item: (sum(item[0]), tuple(-e for e in item[0])))


def _power(name: str, e: int) -> str:
    return name if e == 1 else f"{name}^{e}"


def _param_factors(monom) -> List[str]:
    return [_power(name, e) for name, e in zip(PARAM_NAMES, monom) if e]


def render_scalar(c: ParamScalar) -> str:
    if not c:
        return "0"
    parts = []
    for monom, q in _scalar_terms(c):
        factors = _param_factors(monom)
        value = Fraction(int(q.numerator), int(q.denominator))
        sign = '-' if value < 0 else '+'
        magnitude = abs(value)
        if factors:
            body = "*".join(([str(magnitude)] if magnitude != 1 else []) + factors)
        else:
            body = str(magnitude)
        parts.append((sign, body))
    return _join(parts)


def _join(parts) -> str:
    out = []
    for i, (sign, body) in enumerate(parts):
        if i == 0:
            out.append(f"-{body}" if sign == '-' else body)
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


def _jet_factor(var_name: str, alpha: int, k: int, mult: int) -> str:
    name = f"{var_name}{alpha}" if k == 0 else f"{var_name}{alpha}[{k}]"
    return _power(name, mult)


def render_expr(p: DiffPoly, fmt: str = 'text') -> Any:
    """Canonical text, or the JSON-ready dict when fmt is 'json'"""
    if fmt == 'json':
        return expr_to_json(p)
    if fmt != 'text':
        raise ValueError(f"Unknown format: {fmt}")
    if p.is_zero():
        return "0"
    parts = []
    for mono, coeff in p.sorted_terms():
        factors = []
        if mono.eps_exp:
            factors.append(_power("eps", mono.eps_exp))
        factors.extend(_jet_factor(p.var_name, a, k, m) for a, k, m in mono.jets)
        items = list(coeff.items())
        if len(items) == 1:
            monom, q = items[0]
            value = Fraction(int(q.numerator), int(q.denominator))
            sign = '-' if value < 0 else '+'
            magnitude = abs(value)
            lead = ([str(magnitude)] if magnitude != 1 or not (factors or any(monom)) else [])
            body = "*".join(lead + _param_factors(monom) + factors)
        else:
            sign = '+'
            body = "*".join([f"({render_scalar(coeff)})"] + factors)
        parts.append((sign, body))
    return _join(parts)


def expr_to_json(p: DiffPoly) -> Dict[str, Any]:
    return {
        'var': p.var_name,
        'n_vars': p.n_vars,
        'terms': [
            {
                'eps': mono.eps_exp,
                'jets': [[a, k, m] for a, k, m in mono.jets],
                'coeff': [{'monomial': list(monom), 'value': str(Fraction(int(q.numerator), int(q.denominator)))}
                          for monom, q in _scalar_terms(coeff)],
            }
            for mono, coeff in p.sorted_terms()
        ],
    }


def render_series(p, series_ring) -> str:
    """Canonical text of a truncated series, lowest weight first"""
    if not p:
        return "0"
    names = series_ring.names
    terms = sorted(p.items(), key=lambda item: (series_ring.weight(item[0]), tuple(-e for e in item[0])))
    parts = []
    for monom, q in terms:
        value = Fraction(int(q.numerator), int(q.denominator))
        factors = [_power(name, e) for name, e in zip(names, monom) if e]
        magnitude = abs(value)
        body = "*".join(([str(magnitude)] if magnitude != 1 or not factors else []) + factors)
        parts.append(('-' if value < 0 else '+', body))
    return _join(parts)
