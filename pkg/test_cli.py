"""
Command Line and File Format Tests
Runs the drkdv commands on small inputs and checks exit codes, output and configuration
"""

import io
import json
import os
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

from hypothesis import given, settings

from testing_support import diff_polys, main_for

from core.calculus import EvolutionaryOp, EvolutionarySystem
from core.config import DRKdVConfig, load_config, reset_config
from core.errors import ParseError
from core.expressions import parse_expr, render_expr
from core.formats import format_system, parse_label, parse_miura_text, parse_system_text
from core.lax import kdv_flow
from core.ring import DiffPoly, TruncationContext, dx
from main import EXIT_FAILED, EXIT_OK, EXIT_USAGE, build_parser, main

CTX = TruncationContext(4, 6)
KDV_1 = "t1_1: u1*u1[1] + 1/12*eps^2*u1[3]\n"


def run(*argv):
    """Run the CLI and return (exit code, stdout, stderr)"""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def write(directory, name, text):
    path = Path(directory) / name
    path.write_text(text)
    return str(path)


def test_kdv_command():
    print("🧪 Testing the kdv command...")
    code, out, _ = run('kdv', '--d', '1', '--eps', '2', '--deg', '4')
    assert code == EXIT_OK
    assert out.strip() == "1/2*u1^2 + 1/12*eps^2*u1[2]"
    code, out, _ = run('kdv', '--d', '0', '--format', 'json')
    assert code == EXIT_OK
    data = json.loads(out)
    assert data['var'] == 'u'
    assert data['terms'][0]['jets'] == [[1, 0, 1]]
    print("✅ Text and JSON output")


def test_usage_errors():
    print("🧪 Testing usage errors...")
    code, _, _ = run('kdv')
    assert code == EXIT_USAGE
    code, _, _ = run('no-such-command')
    assert code == EXIT_USAGE
    code, _, err = run('commute', '--file', '/nonexistent/flows.sys', 't1_1', 't1_2')
    assert code == EXIT_USAGE
    assert 'drkdv commute' in err
    print("✅ Missing arguments, unknown commands and missing files exit with 2")


def test_verify_theorem_command():
    print("🧪 Testing verify-theorem --dmax 0 --eps 2 --deg 6...")
    code, out, _ = run('verify-theorem', '--dmax', '0', '--eps', '2', '--deg', '6')
    assert code == EXIT_OK, out
    assert "Overall:" in out
    assert "FAIL" not in out
    print("✅ Verification passes from the command line")


def test_parse_error_positions():
    print("🧪 Testing parse errors in system files...")
    text = "# KdV\nt1_0: u1[1]\nt1_1: u1 * * u1\n"
    try:
        parse_system_text(text, CTX, 'flows.sys')
        assert False, "malformed expression must fail"
    except ParseError as e:
        assert e.line == 3
        assert e.source == 'flows.sys'
    for bad in ("t1_0 u1[1]\n", "x1_0: u1\n", "t1_0: u1\nt1_0: u1[1]\n", "t1_0: u1, u2\nt1_1: u1\n", "\n# only\n"):
        try:
            parse_system_text(bad, CTX)
            assert False, f"{bad!r} should be rejected"
        except ParseError:
            pass
    with tempfile.TemporaryDirectory() as tmp:
        path = write(tmp, 'bad.sys', text)
        code, _, err = run('commute', '--file', path, 't1_0', 't1_1')
        assert code == EXIT_USAGE
        assert 'parse error' in err
    print("✅ Errors carry the file line and exit with 2")


def test_system_files():
    print("🧪 Testing system and Miura files...")
    S = parse_system_text("t1_0: u1[1], ?\nt2_0: u2_x, u1_x\n", TruncationContext(2, 4))
    assert S.n_vars == 2
    assert S[(1, 0)].components[1] is None
    assert S[(2, 0)].component(2) == DiffPoly.variable(2, TruncationContext(2, 4), 1, 1)
    assert format_system(S) == "t1_0: u1[1], ?\nt2_0: u2[1], u1[1]"
    assert parse_label('t2_3') == (2, 3)
    try:
        parse_label('t2')
        assert False, "label without index"
    except ValueError:
        pass
    M = parse_miura_text("u1: 2*u1\n", TruncationContext(2, 4))
    assert M.images[0] == DiffPoly.variable(1, TruncationContext(2, 4), 1).scale(2)
    print("✅ Unknown components, labels and Miura maps read correctly")


def test_conslaw_command():
    print("🧪 Testing the conslaw command...")
    with tempfile.TemporaryDirectory() as tmp:
        path = write(tmp, 'kdv.sys', KDV_1)
        code, out, _ = run('conslaw', '--file', path, '--expr', 'u1', '--eps', '2', '--deg', '5')
        assert code == EXIT_OK
        assert out.strip() == "t1_1: R = 1/2*u1^2 + 1/12*eps^2*u1[2]"
        code, out, _ = run('conslaw', '--file', path, '--expr', 'u1_x^2', '--eps', '2', '--deg', '5')
        assert code == EXIT_FAILED
        assert "t1_1: not a conservation-law witness" in out
    print("✅ Flux printed for u, u_x^2 rejected with exit 1")


def test_recip_apply_command():
    print("🧪 Testing recip-apply...")
    with tempfile.TemporaryDirectory() as tmp:
        path = write(tmp, 'shift.sys', "t1_0: u1_x\n")
        code, out, _ = run('recip-apply', '--f', 'xi*u1', '--file', path, '--eps', '2', '--deg', '4')
        assert code == EXIT_OK
        assert out.strip() == "t1_0: v1[1]"
        code, out, _ = run('recip-apply', '--f', 'u1^3', '--file', write(tmp, 'kdv.sys', KDV_1),
                           '--eps', '2', '--deg', '4')
        assert code == EXIT_USAGE
    print("✅ u_t = u_x becomes v_t = v_y, non-conserved f rejected")


def test_miura_apply_command():
    print("🧪 Testing miura-apply...")
    with tempfile.TemporaryDirectory() as tmp:
        flows = write(tmp, 'hopf.sys', "t1_1: u1*u1_x\n")
        scaling = write(tmp, 'scale.miura', "u1: 2*u1\n")
        code, out, _ = run('miura-apply', '--map', scaling, '--file', flows, '--eps', '2', '--deg', '4')
        assert code == EXIT_OK
        assert out.strip() == "t1_1: 1/2*u1*u1[1]"
        degenerate = write(tmp, 'square.miura', "u1: u1^2\n")
        code, _, _ = run('miura-apply', '--map', degenerate, '--file', flows, '--eps', '2', '--deg', '4')
        assert code == EXIT_USAGE
    print("✅ Scaling map applied, degenerate map rejected")


def test_commute_command():
    print("🧪 Testing the commute command...")
    ctx = TruncationContext(4, 6)
    kdv = EvolutionarySystem({(1, d): EvolutionaryOp.single(dx(kdv_flow(d, ctx))) for d in (1, 2)})
    with tempfile.TemporaryDirectory() as tmp:
        path = write(tmp, 'kdv.sys', format_system(kdv) + "\n")
        code, out, _ = run('commute', '--file', path, 't1_1', 't1_2', '--eps', '4', '--deg', '6')
        assert code == EXIT_OK
        assert out.strip() == "component 1: 0"
        broken = write(tmp, 'broken.sys', "t1_1: u1*u1[1]\nt1_2: u1[3]\n")
        code, out, _ = run('commute', '--file', broken, 't1_1', 't1_2', '--eps', '4', '--deg', '6')
        assert code == EXIT_FAILED
        code, _, _ = run('commute', '--file', path, 't1_1', 't1_9')
        assert code == EXIT_USAGE
    print("✅ KdV flows commute, Hopf and Airy do not")


def test_transport_solution_command():
    print("🧪 Testing transport-solution...")
    with tempfile.TemporaryDirectory() as tmp:
        flows = write(tmp, 'hopf.sys', "t1_1: u1*u1[1]\n")
        init = write(tmp, 'hopf.init', "u1: x\n")
        code, out, _ = run('transport-solution', '--f', 'xi*u1', '--file', flows, '--init', init,
                           '--deg', '4', '--eps', '3', '--jet-deg', '4')
        assert code == EXIT_OK, out
        lines = out.splitlines()
        assert lines[0] == "# solution in x"
        assert lines[1] == "u1: x + x*t1_1 + x*t1_1^2 + x*t1_1^3"
        assert "# transported solution in y" in lines
        assert any(line.startswith("v1: y") for line in lines)
    print("✅ Hopf solution x/(1 - t) evolved and transported")


def test_degree_options_per_command():
    print("🧪 Testing --deg across subcommands...")
    parser = build_parser()
    args = parser.parse_args(['commute', '--file', 'kdv.sys', 't1_1', 't1_2', '--deg', '6'])
    assert (args.deg, args.a, args.b) == (6, 't1_1', 't1_2')
    args = parser.parse_args(['kdv', '--d', '1', '--deg', '5'])
    assert args.deg == 5
    args = parser.parse_args(['transport-solution', '--f', 'u1', '--file', 'a', '--init', 'b',
                              '--deg', '4', '--jet-deg', '7'])
    assert (args.deg_series, args.deg) == (4, 7)
    print("✅ --deg is the jet degree everywhere except transport-solution")


def test_transport_failure_exit_code():
    print("🧪 Testing that a failed transport exits with 1...")
    with tempfile.TemporaryDirectory() as tmp:
        flows = write(tmp, 'mixed.sys', "t1_1: u1*u1[1]\nt1_2: u1[3]\n")
        init = write(tmp, 'line.init', "u1: x\n")
        code, out, err = run('transport-solution', '--f', 'u1', '--file', flows, '--init', init,
                             '--deg', '4', '--eps', '3', '--jet-deg', '4')
        assert code == EXIT_FAILED, (code, err)
        assert out == ''
        assert 'drkdv transport-solution' in err
    print("✅ Hopf and Airy flows do not commute, so no solution is transported")


@settings(max_examples=30, deadline=None)
@given(diff_polys(n_vars=2, context=CTX))
def test_render_then_parse(p):
    assert parse_expr(render_expr(p), 2, CTX) == p


def test_expression_syntax():
    print("🧪 Testing the expression syntax...")
    ctx = TruncationContext(2, 4)
    u_xx = DiffPoly.variable(1, ctx, 1, 2)
    assert parse_expr("u1_xx", 1, ctx) == u_xx
    assert parse_expr("u1[2]", 1, ctx) == u_xx
    assert parse_expr("v1_yy", 1, ctx).var_name == 'v'
    inverse = parse_expr("inv(1 + xi*u1)", 1, ctx)
    assert (inverse * parse_expr("1 + xi*u1", 1, ctx)) == 1
    for bad in ("u1 +", "u3", "u1*v1", "inv(u1)", "u1 $ 2"):
        try:
            parse_expr(bad, 1, ctx)
            assert False, f"{bad!r} should be rejected"
        except ParseError as e:
            assert e.message
    print("✅ Jet notations, inv() and syntax errors")


def test_config_overrides():
    print("🧪 Testing configuration...")
    os.environ['DRKDV_EPS_MAX'] = '3'
    os.environ['DRKDV_FAIL_FAST'] = 'yes'
    try:
        config = DRKdVConfig()
        assert config.truncation['eps_max'] == 3
        assert config.verification['fail_fast'] is True
        assert config.truncation_context() == TruncationContext(3, 8)
        assert config.truncation_context(cli=True) == TruncationContext(6, 8)
        assert config.validate()
    finally:
        del os.environ['DRKDV_EPS_MAX']
        del os.environ['DRKDV_FAIL_FAST']
        reset_config()

    with tempfile.TemporaryDirectory() as tmp:
        path = write(tmp, 'drkdv.json', json.dumps({'truncation': {'d_max': 1, 'deg_max': 1}}))
        config = DRKdVConfig(path)
        assert config.truncation['d_max'] == 1
        assert not config.validate()
        saved = str(Path(tmp) / 'out' / 'saved.json')
        config.save_to_file(saved)
        assert json.loads(Path(saved).read_text())['truncation']['deg_max'] == 1
        try:
            loaded = load_config(path)
            assert loaded.truncation['deg_max'] == 8
            assert loaded.truncation['d_max'] == 1
            assert loaded.validate()
        finally:
            reset_config()
    print("✅ Environment overrides, file loading, validation and fallback to defaults")


if __name__ == "__main__":
    main_for("🧮 Command Line Tests", [
        ("kdv", test_kdv_command),
        ("Usage Errors", test_usage_errors),
        ("verify-theorem", test_verify_theorem_command),
        ("Parse Errors", test_parse_error_positions),
        ("System Files", test_system_files),
        ("conslaw", test_conslaw_command),
        ("recip-apply", test_recip_apply_command),
        ("miura-apply", test_miura_apply_command),
        ("commute", test_commute_command),
        ("transport-solution", test_transport_solution_command),
        ("Degree Options", test_degree_options_per_command),
        ("Transport Failure", test_transport_failure_exit_code),
        ("Render and Parse", test_render_then_parse),
        ("Expression Syntax", test_expression_syntax),
        ("Configuration", test_config_overrides),
    ])
