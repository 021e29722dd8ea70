import logging
from pathlib import Path

import numpy as np
import pytest

from qnetsem.calculus import CorrectX, Measure, SignalExpr
from qnetsem.dsl import format_angle, parse_angle, parse_file, parse_network, parse_source, to_source
from qnetsem.errors import DSLError
from qnetsem.library import library
from qnetsem.netmodel import PatternEvent, QuantumRecv, validate_network

PROTOCOLS_DIR = Path(__file__).resolve().parent.parent / 'data' / 'protocols'
BAD_DIR = Path(__file__).resolve().parent / 'fixtures' / 'bad'

BAD_FIXTURES = {
    'h0_send_unknown_qubit.qnet': 'H0: qubit 9 not in the sort of A',
    'h0_qubit_sent_twice.qnet': 'H0: qubit 1 not in the sort of A',
    'h0_prep_unowned.qnet': 'H0: preparation qubit not owned by any agent: 6',
    'h1_send_before_measure.qnet': 'H1: name s1 used before it is bound',
    'h1_output_never_bound.qnet': 'H1: output y is never bound',
    'h1_unbound_correction.qnet': 'H1: name y used before it is bound',
    'h2_unmatched_send.qnet': 'H2: channel c has 1 sends and 0 receives',
    'h2_arity_mismatch.qnet': 'H2: channel c sends 2 values but receives 1',
    'h2_kind_mismatch.qnet': 'H2: channel c mixes classical and quantum messages',
    'h2_deadlock.qnet': 'H2: communication deadlock',
    'h3_shared_qubit.qnet': 'H3: sorts overlap: qubit 1 owned by A and B',
    'h3_fresh_qubit_reused.qnet': 'H3: qubit id reused: 2',
    'h3_name_bound_twice.qnet': 'H3: name x bound twice',
    'h3_signal_shadows_input.qnet': 'H3: name s2 bound twice',
    'h3_signal_shadows_received.qnet': 'H3: name s2 bound twice',
    'pattern_shared_join.qnet': 'joined command lists share qubits: 2',
    'pattern_measured_twice.qnet': 'invalid pattern: measured twice: 1',
    'syntax_error.qnet': 'syntax error',
    'unknown_network.qnet': 'unknown network Missing',
}

# networks in data/protocols and the library call each one must equal
PROTOCOL_FILES = [
    ('teleport.qnet', None, ('teleport',)),
    ('direct_channel.qnet', None, ('direct_channel',)),
    ('bitflip.qnet', None, ('bitflip', np.pi / 2)),
    ('hadamard_pair.qnet', None, ('hadamard_pair',)),
    ('superdense.qnet', None, ('superdense',)),
    ('teleport_chain.qnet', 'teleport_chain_2', ('teleport_chain', 2)),
]

TELEPORT = """
network TP {
    prepare E(2, 3);
    agent A qubits {1, 2} {
        pattern [ M(2, 0); M(1, 0); E(1, 2) ];
        send c (s2, s1)
    }
    agent B qubits {3} {
        recv c (x2, x1);
        pattern [ X(3, x2); Z(3, x1) ]
    }
}
"""


def test_teleport_source_matches_library():
    n = parse_network(TELEPORT)
    assert n == library('teleport')
    assert n.name == 'TP'


def test_empty_network():
    n = parse_network("network EMPTY { }")
    assert n.agents == ()
    assert n.prep.is_null


@pytest.mark.parametrize('filename, name, call', PROTOCOL_FILES)
def test_protocol_files_match_library(filename, name, call):
    assert parse_file(PROTOCOLS_DIR / filename, name) == library(*call)


@pytest.mark.parametrize('name, args', [
    ('teleport', ()), ('direct_channel', ()), ('bitflip', (0.3,)), ('bitflip', (np.pi / 4, False)),
    ('hadamard_pair', ()), ('superdense', ()), ('teleport_chain', (3,)),
])
def test_round_trip(name, args):
    n = library(name, *args)
    assert parse_network(to_source(n)) == n


def test_undeclared_qubit_has_span():
    source = TELEPORT.replace("send c (s2, s1)", "send c (s2, s1);\n        qsend q 9")
    source = source.replace("Z(3, x1) ]", "Z(3, x1) ];\n        qrecv q 9")
    with pytest.raises(DSLError) as info:
        parse_source(source, 'tp.qnet')
    [d] = info.value.diagnostics
    assert d.message == 'H0: qubit 9 not in the sort of A'
    line = source.splitlines().index('        qsend q 9') + 1
    assert (d.span.file, d.span.line) == ('tp.qnet', line)
    assert str(d).startswith(f"tp.qnet:{line}:")


@pytest.mark.parametrize('filename, expected', sorted(BAD_FIXTURES.items()))
def test_bad_fixtures(filename, expected):
    path = BAD_DIR / filename
    with pytest.raises(DSLError) as info:
        parse_file(path)
    diagnostics = info.value.diagnostics
    assert any(expected in d.message for d in diagnostics)
    n_lines = len(path.read_text().splitlines())
    for d in diagnostics:
        assert d.is_error
        assert d.span.file == str(path)
        assert 1 <= d.span.line <= n_lines + 1


def test_every_bad_fixture_is_covered():
    assert sorted(p.name for p in BAD_DIR.glob('*.qnet')) == sorted(BAD_FIXTURES)


def test_syntax_error_points_at_token():
    with pytest.raises(DSLError) as info:
        parse_source("network N {\n    agent A qubits {1} {\n        pattern [ Q(1) ]\n    }\n}\n")
    [d] = info.value.diagnostics
    assert d.span.line == 3
    assert 'syntax error' in d.message


def test_parse_angle():
    assert parse_angle('pi/2') == pytest.approx(np.pi / 2)
    assert parse_angle('-3*pi/4') == pytest.approx(-3 * np.pi / 4)
    assert parse_angle('0.25') == 0.25
    assert parse_angle('-pi/2') == -(np.pi / 2)
    with pytest.raises(DSLError):
        parse_angle('pi/')


def test_format_angle_parses_back():
    for angle in (0.0, np.pi, -np.pi / 2, 3 * np.pi / 4, 0.7, -0.123456789):
        assert parse_angle(format_angle(angle)) == angle
    assert format_angle(np.pi / 2) == 'pi/2'


def test_measure_dependencies_and_named_placeholder():
    n = parse_network("""
    network N {
        agent A qubits {1} {
            qsend q 1
        }
        agent B(in: b, out: -) qubits {} {
            qrecv q p;
            pattern [ M(p, pi/4, s: b, t: b + 1) ]
        }
    }
    """)
    b = n.agent('B')
    assert b.events[0] == QuantumRecv('q', 'p')
    [m] = b.events[1].pattern.commands
    assert m == Measure('p', np.pi / 4, SignalExpr.of('b'), SignalExpr.of('b', constant=1))


def test_composed_agent_with_then():
    n = parse_network("""
    network N {
        agent A qubits {1} {
            pattern [ X(2, s1); M(1, 0); E(1, 2) ]
        } then qubits {2} {
            pattern [ X(3, s2); M(2, 0); E(2, 3) ]
        }
    }
    """)
    a = n.agent('A')
    assert a.sort == {1}
    assert len(a.events) == 2
    assert validate_network(n) == []


def test_side_by_side_patterns_and_over():
    n = parse_network("""
    network N {
        agent A qubits {1, 3} {
            pattern [ X(2, s1); M(1, 0); E(1, 2) ] & [ Z(3, 1) ] over {3, 5}
        }
    }
    """)
    p = n.agent('A').events[0].pattern
    assert p.space == {1, 2, 3, 5}
    assert p.inputs == {1, 3}
    assert p.outputs == {2, 3, 5}


def test_seq_and_par_expressions():
    program = parse_source("""
    network L { agent A qubits {1} { pattern [ X(2, s1); M(1, 0); E(1, 2) ] } }
    network R { agent B qubits {3} { pattern [ X(4, s3); M(3, 0); E(3, 4) ] } }
    network BOTH = par(L, R);
    """)
    assert list(program.networks) == ['L', 'R', 'BOTH']
    assert program.networks['BOTH'] == library('hadamard_pair')


def test_joined_lists_must_be_disjoint():
    source = "network N {\n    agent A qubits {1, 2, 3} {\n        pattern [ E(1, 2) ] & [ E(2, 3) ]\n    }\n}\n"
    with pytest.raises(DSLError) as info:
        parse_source(source, 'join.qnet')
    [d] = info.value.diagnostics
    assert d.message == 'joined command lists share qubits: 2'
    assert (d.span.file, d.span.line) == ('join.qnet', 3)


def test_explicit_preparation():
    n = parse_network("""
    network N {
        prepare state(1, 2) [(0.7071067811865476, 0), (0, 0), (0, 0), (0.7071067811865476, 0)];
        agent A qubits {1} { }
        agent B qubits {2} { }
    }
    """)
    assert n.prep.is_explicit
    assert n.prep.qubits == (1, 2)
    assert parse_network(to_source(n)) == n


def test_bad_preparation_is_reported():
    with pytest.raises(DSLError) as info:
        parse_source("network N { prepare state(1) [(1, 0), (1, 0)]; agent A qubits {1} { } }")
    assert 'bad preparation' in info.value.diagnostics[0].message


def test_duplicate_network():
    with pytest.raises(DSLError) as info:
        parse_source("network N { }\nnetwork N { }")
    assert info.value.diagnostics[0].message == 'network N defined twice'


def test_unread_input_warns(caplog):
    with caplog.at_level(logging.WARNING, logger='qnetsem.dsl'):
        program = parse_source("network N { agent A(in: x, out: -) qubits {1} { } }")
    assert 'classical input x of A is never read' in caplog.text
    assert [d.severity for d in program.diagnostics] == ['warning']


def test_comments_are_ignored():
    n = parse_network("# header\nnetwork N { # trailing\n agent A qubits {1} { pattern [ nil ] } }")
    [event] = n.agent('A').events
    assert isinstance(event, PatternEvent)
    assert event.pattern.commands == ()


def test_pick_network_by_name():
    source = "network A1 { }\nnetwork A2 { agent A qubits {1} { } }"
    assert parse_network(source, 'A1').agents == ()
    assert parse_network(source).name == 'A2'
    with pytest.raises(DSLError):
        parse_network(source, 'A3')


def test_dependency_on_correction():
    n = parse_network("network N { agent A qubits {1, 2} { pattern [ X(1, s2 + 1); M(2, 0) ] } }")
    p = n.agent('A').events[0].pattern
    assert CorrectX(1, SignalExpr.of('s2', constant=1)) in p.commands
