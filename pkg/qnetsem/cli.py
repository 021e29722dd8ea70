"""
Command-line interface.

    python -m qnetsem run data/protocols/teleport.qnet --inputs inputs.json
    python -m qnetsem denote "bitflip(pi/2, observed)"
    python -m qnetsem equiv teleport direct_channel
    python -m qnetsem schedules hadamard_pair
    python -m qnetsem context teleport --extra 1 --trials 20 --seed 7
    python -m qnetsem compose --seq teleport.qnet:TP1 teleport.qnet:TP2 -o twice.qnet
    python -m qnetsem validate tests/fixtures/bad/h0_send_unknown_qubit.qnet

A network argument is a source file (optionally `file:NAME` to pick one of
several networks) or a library protocol such as `teleport` or
`bitflip(pi/4, hidden)`.

Exit codes: 0 pass, 1 fail (a witness is printed), 2 usage, parse or
validation error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from qnetsem import qnum
from qnetsem.checks import check_compose, check_context, check_schedules, equivalent
from qnetsem.dsl import parse_file, to_source
from qnetsem.errors import DSLError, QNetError, ScheduleDependence, UsageError
from qnetsem.library import PROTOCOLS, from_spec
from qnetsem.netmodel import net_par_compose, net_seq_compose, validate_network
from qnetsem.qnum import QRegisterState
from qnetsem.report import render_report
from qnetsem.semantics import denotational, operational, parse_schedule, run_schedule

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def load_network(arg):
    """Network from a file path (`path` or `path:NAME`) or a library spec."""
    path, _, name = arg.rpartition(':') if ':' in arg and not Path(arg).exists() else (arg, '', '')
    if Path(path).is_file():
        return parse_file(path, name or None)
    head = arg.split('(')[0].strip()
    if head in PROTOCOLS:
        return from_spec(arg)
    raise UsageError(f"no such file or library protocol: {arg}")


def _complex_list(values):
    return np.array([complex(re, im) for re, im in values], dtype=complex)


def load_inputs(path):
    """
    Read an inputs document.

    Returns:
        (classical dict, quantum dict agent -> QRegisterState)
    """
    if path is None:
        return {}, None
    doc = json.loads(Path(path).read_text(encoding='utf-8'))
    cin = {name: int(bit) for name, bit in doc.get('classical', {}).items()}
    qin = {}
    for agent, spec in doc.get('quantum', {}).items():
        qubits = tuple(spec['qubits'])
        if 'density' in spec:
            rho = np.array([_complex_list(row) for row in spec['density']])
            qin[agent] = QRegisterState.mixed(qubits, rho)
        else:
            qin[agent] = QRegisterState.pure(qubits, _complex_list(spec['amplitudes']))
    return cin, qin or None


def _emit(text, output):
    if output:
        Path(output).write_text(text, encoding='utf-8')
        print(f"Saved to {output}")
    else:
        print(text, end='')


def _verdict_exit(verdict, output):
    _emit(render_report(verdict), output)
    return EXIT_OK if verdict.ok else EXIT_FAIL


def cmd_run(args):
    n = load_network(args.network)
    cin, qin = load_inputs(args.inputs)
    if args.all_schedules:
        try:
            pts = operational(n, cin, qin, check_schedules=True, tol=args.tol)
        except ScheduleDependence as exc:
            return _verdict_exit(exc.verdict, args.output)
    else:
        pts = run_schedule(n, cin, qin, parse_schedule(args.schedule, n), merge=not args.no_merge)
    _emit(render_report(pts, title=n.name), args.output)
    return EXIT_OK


def cmd_denote(args):
    n = load_network(args.network)
    _emit(render_report(denotational(n), title=n.name), args.output)
    return EXIT_OK


def cmd_equiv(args):
    verdict = equivalent(load_network(args.first), load_network(args.second), tol=args.tol)
    return _verdict_exit(verdict, args.output)


def cmd_schedules(args):
    n = load_network(args.network)
    cin, qin = load_inputs(args.inputs)
    return _verdict_exit(check_schedules(n, cin, qin, tol=args.tol), args.output)


def cmd_context(args):
    n = load_network(args.network)
    verdict = check_context(n, args.extra, args.trials, args.seed, tol=args.tol)
    return _verdict_exit(verdict, args.output)


def cmd_compose(args):
    first, second = load_network(args.first), load_network(args.second)
    mode = 'par' if args.par else 'seq'
    if mode == 'seq':
        composed = net_seq_compose(first, second, pad=True)
    else:
        composed = net_par_compose(first, second)
    source = to_source(composed, args.name)
    if args.output:
        Path(args.output).write_text(source, encoding='utf-8')
        print(f"Saved composed network to {args.output}")
    else:
        print(source, end='')
    verdict = check_compose(first, second, mode, tol=args.tol)
    print(render_report(verdict), end='')
    return EXIT_OK if verdict.ok else EXIT_FAIL


def cmd_validate(args):
    n = load_network(args.network)
    violations = validate_network(n)
    if violations:
        for v in violations:
            print(f"Error: {v}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{n.name or args.network}: ok ({len(n.agents)} agents)")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog='qnetsem', description='Run and compare networks of measurement-based quantum agents',
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p, inputs=False):
        p.add_argument('-o', '--output', help='Write the report to this file')
        p.add_argument('--tol', type=float, default=qnum.ATOL, help='Comparison tolerance')
        if inputs:
            p.add_argument('--inputs', help='JSON inputs document')

    p = sub.add_parser('run', help='Operational semantics under one schedule')
    p.add_argument('network')
    p.add_argument('--schedule', default='round-robin', help="'round-robin' or an agent order such as BA or B,A")
    p.add_argument('--no-merge', action='store_true', help='List every path instead of merged classes')
    p.add_argument('--all-schedules', action='store_true', help='Fail if another schedule gives a different result')
    common(p, inputs=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('denote', help='Denotational semantics (Kraus elements per signal output)')
    p.add_argument('network')
    common(p)
    p.set_defaults(func=cmd_denote)

    p = sub.add_parser('equiv', help='Decide whether two networks have the same semantics')
    p.add_argument('first')
    p.add_argument('second')
    common(p)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser('schedules', help='Check that every schedule gives the same result')
    p.add_argument('network')
    common(p, inputs=True)
    p.set_defaults(func=cmd_schedules)

    p = sub.add_parser('context', help='Check behaviour on inputs entangled with a context')
    p.add_argument('network')
    p.add_argument('--extra', type=int, default=1, help='Number of context qubits')
    p.add_argument('--trials', type=int, default=20)
    p.add_argument('--seed', type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_context)

    p = sub.add_parser('compose', help='Compose two networks and check compositionality')
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument('--seq', action='store_true')
    mode.add_argument('--par', action='store_true')
    p.add_argument('first')
    p.add_argument('second')
    p.add_argument('--name', default='COMPOSED', help='Name of the composed network')
    common(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser('validate', help='Check H0-H3 and report every violation')
    p.add_argument('network')
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
    )
    try:
        return args.func(args)
    except DSLError as exc:
        for d in exc.diagnostics:
            print(f"Error: {d}" if d.is_error else str(d), file=sys.stderr)
        return EXIT_ERROR
    except QNetError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, KeyError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
