"""
File Formats
Line-based files for evolutionary systems, Miura maps and initial series
"""
import logging
import re
from typing import Any, Dict, Iterator, List, Optional, Tuple

from core.calculus import EvolutionaryOp, EvolutionarySystem, FlowLabel, format_label
from core.errors import ParseError
from core.expressions import parse_expr, parse_series, render_expr
from core.ring import TruncationContext
from core.transforms import MiuraTransform

logger = logging.getLogger(__name__)

LABEL_RE = re.compile(r"^t([0-9]+)_([0-9]+)$")
VARIABLE_RE = re.compile(r"^u([0-9]+)$")
UNKNOWN = '?'


def parse_label(text: str) -> FlowLabel:
    match = LABEL_RE.match(text.strip())
    if not match:
        raise ValueError(f"Flow labels look like t1_0, got {text!r}")
    return int(match.group(1)), int(match.group(2))


def _content_lines(text: str) -> Iterator[Tuple[int, str]]:
    """Non-blank lines that are not # comments, with 1-based numbers"""
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith('#'):
            yield number, line


def _split_head(line: str, number: int, source: str) -> Tuple[str, str, int]:
    head, sep, body = line.partition(':')
    if not sep:
        raise ParseError("expected '<name>: <expression>'", number, 1, source)
    return head.strip(), body, len(head) + 1


def _reanchor(e: ParseError, number: int, offset: int, source: str) -> ParseError:
    return ParseError(e.message, number, offset + e.column, source)


def parse_system_text(text: str, context: TruncationContext, source: str = '<system>') -> EvolutionarySystem:
    """One flow per line: t<beta>_<d>: <expr>[, <expr>], '?' for an unknown component"""
    rows: List[Tuple[int, FlowLabel, List[Tuple[str, int]]]] = []
    for number, line in _content_lines(text):
        head, body, offset = _split_head(line, number, source)
        try:
            label = parse_label(head)
        except ValueError as e:
            raise ParseError(str(e), number, 1, source)
        pieces = []
        column = offset
        for piece in body.split(','):
            pieces.append((piece, column))
            column += len(piece) + 1
        rows.append((number, label, pieces))
    if not rows:
        raise ParseError("no flows found", 1, 1, source)

    n_vars = len(rows[0][2])
    system = EvolutionarySystem()
    var_name: Optional[str] = None
    for number, label, pieces in rows:
        if len(pieces) != n_vars:
            raise ParseError(f"flow {format_label(label)} has {len(pieces)} components, expected {n_vars}",
                             number, 1, source)
        if label in system:
            raise ParseError(f"flow {format_label(label)} given twice", number, 1, source)
        components = []
        for piece, column in pieces:
            if piece.strip() == UNKNOWN:
                components.append(None)
                continue
            try:
                comp = parse_expr(piece, n_vars, context, var_name, source)
            except ParseError as e:
                raise _reanchor(e, number, column, source)
            if not comp.is_constant():
                var_name = comp.var_name
            components.append(comp)
        system.add(label, EvolutionaryOp(components))
    system.var_name = var_name or 'u'
    logger.info(f"Read {len(system)} flows in {n_vars} variables from {source}")
    return system


def read_system(path: str, context: TruncationContext) -> EvolutionarySystem:
    with open(path, 'r') as f:
        return parse_system_text(f.read(), context, path)


def _variable_lines(text: str, source: str) -> Dict[int, Tuple[int, str, int]]:
    entries: Dict[int, Tuple[int, str, int]] = {}
    for number, line in _content_lines(text):
        head, body, offset = _split_head(line, number, source)
        match = VARIABLE_RE.match(head)
        if not match:
            raise ParseError(f"expected a variable name like u1, got {head!r}", number, 1, source)
        alpha = int(match.group(1))
        if alpha in entries:
            raise ParseError(f"u{alpha} given twice", number, 1, source)
        entries[alpha] = (number, body, offset)
    if not entries:
        raise ParseError("no variables found", 1, 1, source)
    missing = set(range(1, len(entries) + 1)) - set(entries)
    if missing:
        raise ParseError(f"missing lines for {', '.join(f'u{a}' for a in sorted(missing))}", 1, 1, source)
    return entries


def parse_miura_text(text: str, context: TruncationContext, source: str = '<miura>') -> MiuraTransform:
    """One line per variable: u<alpha>: <image in terms of u>"""
    entries = _variable_lines(text, source)
    n_vars = len(entries)
    images = []
    for alpha in range(1, n_vars + 1):
        number, body, offset = entries[alpha]
        try:
            images.append(parse_expr(body, n_vars, context, 'u', source))
        except ParseError as e:
            raise _reanchor(e, number, offset, source)
    return MiuraTransform(images)


def read_miura(path: str, context: TruncationContext) -> MiuraTransform:
    with open(path, 'r') as f:
        return parse_miura_text(f.read(), context, path)


def parse_init_text(text: str, series_ring, source: str = '<init>') -> List[Any]:
    """One line per variable: u<alpha>: <series in x>"""
    entries = _variable_lines(text, source)
    series = []
    for alpha in range(1, len(entries) + 1):
        number, body, offset = entries[alpha]
        try:
            series.append(parse_series(body, series_ring, source))
        except ParseError as e:
            raise _reanchor(e, number, offset, source)
    return series


def read_init(path: str, series_ring) -> List[Any]:
    with open(path, 'r') as f:
        return parse_init_text(f.read(), series_ring, path)


def format_system(S: EvolutionarySystem) -> str:
    lines = []
    for label, op in S.items():
        comps = [UNKNOWN if c is None else render_expr(c) for c in op.components]
        lines.append(f"{format_label(label)}: {', '.join(comps)}")
    return "\n".join(lines)


def system_to_json(S: EvolutionarySystem) -> Dict[str, Any]:
    return {
        'var': S.var_name,
        'flows': {
            format_label(label): [None if c is None else render_expr(c, 'json') for c in op.components]
            for label, op in S.items()
        },
    }
