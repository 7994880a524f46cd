"""
drkdv Command Line
Prints KdV-type flows, applies Miura and reciprocal transformations and verifies the rank-2 family
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from core.calculus import (
    EvolutionarySystem, apply, commutator, conservation_law_witness, format_label, variational_derivative,
)
from core.config import DRKdVConfig, load_config
from core.errors import ClosednessViolation, NonUniqueSolution, NoSolution, ParseError, TruncationError
from core.expressions import parse_expr, render_expr
from core.family import dispersionless_flow, primary_flows
from core.formats import format_system, parse_label, read_init, read_miura, read_system, system_to_json
from core.lax import kdv_flow, xi_kdv_flow
from core.ring import DiffPoly, TruncationContext
from core.solutions import SeriesRing, evolve_formal_solution, solution_transport
from core.transforms import miura_push_system, reciprocal_push_system
from core.verifier import verify_theorem

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

# outcomes of a computation that ran but did not verify
DOMAIN_FAILURES = (ClosednessViolation, TruncationError, NoSolution, NonUniqueSolution)


class CommandFailed(Exception):
    """A command ran but its check did not pass"""


def _context(args, config: DRKdVConfig, verify: bool = False, min_eps: int = 0,
             min_deg: int = 0) -> TruncationContext:
    prefix = '' if verify else 'cli_'
    eps = args.eps if args.eps is not None else max(config.truncation[f'{prefix}eps_max'], min_eps)
    deg = args.deg if args.deg is not None else max(config.truncation[f'{prefix}deg_max'], min_deg)
    return TruncationContext(eps, deg)


def _emit(config: DRKdVConfig, args, text: str, data) -> None:
    if args.format == 'json':
        print(json.dumps(data, indent=config.output['json_indent']))
    else:
        print(text)


def _emit_poly(config: DRKdVConfig, args, p: DiffPoly) -> None:
    _emit(config, args, render_expr(p), render_expr(p, 'json'))


def _emit_system(config: DRKdVConfig, args, S: EvolutionarySystem) -> None:
    _emit(config, args, format_system(S), system_to_json(S))


def cmd_kdv(args, config: DRKdVConfig) -> None:
    _emit_poly(config, args, kdv_flow(args.d, _context(args, config)))


def cmd_xikdv(args, config: DRKdVConfig) -> None:
    _emit_poly(config, args, xi_kdv_flow(args.d, _context(args, config)))


def cmd_disp(args, config: DRKdVConfig) -> None:
    P = dispersionless_flow(args.d, _context(args, config))
    entries = {f"P[{a + 1}][{b + 1}]": P[a][b] for a in range(2) for b in range(2)}
    _emit(config, args,
          "\n".join(f"{name}: {render_expr(p)}" for name, p in entries.items()),
          {name: render_expr(p, 'json') for name, p in entries.items()})


def cmd_primary(args, config: DRKdVConfig) -> None:
    d_max = args.dmax if args.dmax is not None else config.truncation['d_max']
    _emit_system(config, args, primary_flows(d_max, _context(args, config)))


def cmd_verify_theorem(args, config: DRKdVConfig) -> None:
    context = _context(args, config, verify=True)
    report = verify_theorem(args.dmax, context, xi_zero=args.xi0)
    if args.json:
        print(json.dumps(report.to_dict(), indent=config.output['json_indent']))
    else:
        print("\n".join(report.summary_lines()))
    if not report.all_passed:
        raise CommandFailed(f"{len(report.failed()) + len(report.skipped)} checks did not pass")


def cmd_commute(args, config: DRKdVConfig) -> None:
    S = read_system(args.file, _context(args, config))
    a, b = parse_label(args.a), parse_label(args.b)
    for label in (a, b):
        if label not in S:
            raise ValueError(f"{args.file} has no flow {format_label(label)}")
    comm = commutator(S[a], S[b])
    comps = comm.components
    _emit(config, args,
          "\n".join(f"component {alpha}: {'?' if c is None else render_expr(c)}"
                    for alpha, c in enumerate(comps, start=1)),
          {'commutator': [None if c is None else render_expr(c, 'json') for c in comps]})
    if not comm.is_zero():
        raise CommandFailed(f"{args.a} and {args.b} do not commute")


def cmd_conslaw(args, config: DRKdVConfig) -> None:
    context = _context(args, config)
    S = read_system(args.file, context)
    f = parse_expr(args.expr, S.n_vars, context, S.var_name, '<--expr>')
    lines: List[str] = []
    data: Dict[str, Optional[dict]] = {}
    failed = []
    for label, H in S.items():
        name = format_label(label)
        if not H.is_complete():
            lines.append(f"{name}: ? (flow not fully known)")
            data[name] = None
            continue
        R = conservation_law_witness(f, H)
        if R is None:
            image = apply(H, f)
            nonzero = [alpha for alpha in range(1, S.n_vars + 1)
                       if not variational_derivative(image, alpha).is_zero()]
            reason = (f"delta/delta {S.var_name}{','.join(map(str, nonzero))} of H(f) is nonzero" if nonzero
                      else "H(f) has a nonzero constant term")
            lines.append(f"{name}: not a conservation-law witness: {reason}")
            data[name] = None
            failed.append(name)
        else:
            lines.append(f"{name}: R = {render_expr(R)}")
            data[name] = render_expr(R, 'json')
    _emit(config, args, "\n".join(lines), {'witnesses': data})
    if failed:
        raise CommandFailed(f"not a conservation law of {', '.join(failed)}")


def cmd_miura_apply(args, config: DRKdVConfig) -> None:
    context = _context(args, config)
    M = read_miura(args.map, context)
    S = read_system(args.file, context)
    _emit_system(config, args, miura_push_system(M, S))


def cmd_recip_apply(args, config: DRKdVConfig) -> None:
    context = _context(args, config)
    S = read_system(args.file, context)
    f = parse_expr(args.f, S.n_vars, context, S.var_name, '<--f>')
    _emit_system(config, args, reciprocal_push_system(f, S))


def cmd_transport_solution(args, config: DRKdVConfig) -> None:
    # flows must be known to eps^(K-1) and degree K
    context = _context(args, config, min_eps=args.deg_series - 1, min_deg=args.deg_series)
    S = read_system(args.file, context)
    if args.times:
        times = [parse_label(t) for t in args.times.split(',')]
        missing = [format_label(t) for t in times if t not in S]
        if missing:
            raise ValueError(f"{args.file} has no flow {', '.join(missing)}")
    else:
        times = S.labels()
    sr = SeriesRing(times, args.deg_series)
    initial = read_init(args.init, sr)
    f = parse_expr(args.f, S.n_vars, context, S.var_name, '<--f>')
    sol = evolve_formal_solution(S, initial, sr)
    moved = solution_transport(S, f, sol)
    text = ["# solution in x"]
    text += [f"{name}: {series}" for name, series in sol.to_dict()['components'].items()]
    text.append("# transported solution in y")
    text.append(f"y: {moved.to_dict()['coordinate']}")
    text += [f"{name}: {series}" for name, series in moved.to_dict()['components'].items()]
    _emit(config, args, "\n".join(text), {'solution': sol.to_dict(), 'transported': moved.to_dict()})


COMMANDS: Dict[str, Callable] = {
    'kdv': cmd_kdv,
    'xikdv': cmd_xikdv,
    'disp': cmd_disp,
    'primary': cmd_primary,
    'verify-theorem': cmd_verify_theorem,
    'commute': cmd_commute,
    'conslaw': cmd_conslaw,
    'miura-apply': cmd_miura_apply,
    'recip-apply': cmd_recip_apply,
    'transport-solution': cmd_transport_solution,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument('--eps', type=int, help='Keep terms up to eps^EPS')
    shared.add_argument('--config', help='JSON configuration file')
    shared.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Diagnostics level on stderr')
    shared.add_argument('--format', choices=['text', 'json'], default='text',
                        help='Output format for polynomials and systems')
    common = argparse.ArgumentParser(add_help=False, parents=[shared])
    common.add_argument('--deg', type=int, help='Keep terms up to this polynomial degree in the jets')

    parser = argparse.ArgumentParser(
        prog='drkdv',
        description="Differential polynomials, KdV-type hierarchies and their transformations",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py kdv --d 1                              # P_1 of KdV
  python main.py xikdv --d 1                            # P_1 of xi-KdV
  python main.py verify-theorem --dmax 0 --eps 2 --deg 6
  python main.py commute --file kdv.sys t1_1 t1_2
  python main.py recip-apply --f "xi*u1" --file kdv.sys
        """
    )
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('kdv', parents=[common], help='P_d of the KdV hierarchy')
    p.add_argument('--d', type=int, required=True)
    p = sub.add_parser('xikdv', parents=[common], help='P_d of the xi-KdV hierarchy')
    p.add_argument('--d', type=int, required=True)
    p = sub.add_parser('disp', parents=[common], help='Dispersionless DR flow P_d of the family')
    p.add_argument('--d', type=int, required=True)
    p = sub.add_parser('primary', parents=[common], help='Known DR flows of the family')
    p.add_argument('--dmax', type=int)

    p = sub.add_parser('verify-theorem', parents=[common], help='Run the full verification')
    p.add_argument('--dmax', type=int)
    p.add_argument('--json', action='store_true', help='Print the report as JSON')
    p.add_argument('--xi0', action='store_true', help='Verify with xi = 0')

    p = sub.add_parser('commute', parents=[common], help='Commutator of two flows of a system file')
    p.add_argument('--file', required=True)
    p.add_argument('a', help='First flow, e.g. t1_1')
    p.add_argument('b', help='Second flow')

    p = sub.add_parser('conslaw', parents=[common], help='Flux of a conservation law for each flow')
    p.add_argument('--file', required=True)
    p.add_argument('--expr', required=True)

    p = sub.add_parser('miura-apply', parents=[common], help='Rewrite a system through a Miura map')
    p.add_argument('--map', required=True)
    p.add_argument('--file', required=True)

    p = sub.add_parser('recip-apply', parents=[common], help='Reciprocal transformation by a conservation law')
    p.add_argument('--f', required=True)
    p.add_argument('--file', required=True)

    # --deg is the series degree here, the jet degree moves to --jet-deg
    p = sub.add_parser('transport-solution', parents=[shared],
                       help='Series solution of a system and its reciprocal transport')
    p.add_argument('--f', required=True)
    p.add_argument('--file', required=True)
    p.add_argument('--init', required=True)
    p.add_argument('--deg', dest='deg_series', type=int, required=True,
                   help='Total degree in eps, x and the times')
    p.add_argument('--jet-deg', dest='deg', type=int, help='Jet degree used for the flows')
    p.add_argument('--times', help='Comma separated flows, default all')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    config = load_config(args.config, args.log_level)
    try:
        COMMANDS[args.command](args, config)
    except CommandFailed as e:
        print(f"drkdv {args.command}: {e}", file=sys.stderr)
        return EXIT_FAILED
    except DOMAIN_FAILURES as e:
        print(f"drkdv {args.command}: {e}", file=sys.stderr)
        return EXIT_FAILED
    except ParseError as e:
        print(f"drkdv {args.command}: parse error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as e:
        print(f"drkdv {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
