"""
Exact Linear Solver
Gauss-Jordan elimination over parameter polynomials with rational pivots
"""
import logging
from typing import Dict, List, Sequence

from sympy.polys.domains import QQ

from core.errors import NoSolution, NonUniqueSolution
from core.ring import PARAM_RING, ParamScalar

logger = logging.getLogger(__name__)

Row = Dict[int, ParamScalar]


def solve_exact(rows: Sequence[Row], rhs: Sequence[ParamScalar], n_unknowns: int,
                label: str = 'system') -> List[ParamScalar]:
    """Solve rows * x = rhs for a unique x, pivoting only on nonzero rationals"""
    if len(rows) != len(rhs):
        raise ValueError(f"{label}: {len(rows)} rows but {len(rhs)} right-hand sides")
    work = [(dict(row), value) for row, value in zip(rows, rhs)]
    pivot_of_column: Dict[int, int] = {}
    used = [False] * len(work)

    for col in range(n_unknowns):
        pivot_idx = None
        parametric = False
        for idx, (row, _) in enumerate(work):
            if used[idx]:
                continue
            entry = row.get(col)
            if not entry:
                continue
            if entry.is_ground:
                pivot_idx = idx
                break
            parametric = True
        if pivot_idx is None:
            reason = 'only parametric pivots' if parametric else 'free unknown'
            raise NonUniqueSolution(f"{label}: column {col} has {reason}")

        used[pivot_idx] = True
        pivot_of_column[col] = pivot_idx
        row, value = work[pivot_idx]
        scale = PARAM_RING(QQ.one / row[col].LC)
        row = {c: e * scale for c, e in row.items()}
        value = value * scale
        work[pivot_idx] = (row, value)

        for idx, (other, other_value) in enumerate(work):
            if idx == pivot_idx:
                continue
            factor = other.get(col)
            if not factor:
                continue
            for c, e in row.items():
                updated = other.get(c, PARAM_RING.zero) - factor * e
                if updated:
                    other[c] = updated
                else:
                    other.pop(c, None)
            work[idx] = (other, other_value - factor * value)

    for idx, (row, value) in enumerate(work):
        if not used[idx] and value:
            raise NoSolution(f"{label}: inconsistent equation {idx} (residual {value.as_expr()})")

    logger.debug(f"{label}: solved {n_unknowns} unknowns from {len(rows)} equations")
    return [work[pivot_of_column[col]][1] for col in range(n_unknowns)]
