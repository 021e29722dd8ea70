import pytest
from hypothesis import given

from qnetsem.calculus import CorrectX, Measure, Pattern, SignalExpr, hadamard_pattern
from qnetsem.errors import (
    AgentSetMismatch,
    NameCollision,
    NameMismatch,
    OverlappingIds,
    SortMismatch,
    UnknownQubit,
    ValidationFailed,
)
from qnetsem.library import direct_channel, hadamard_pair, library, teleport
from qnetsem.netmodel import (
    Agent,
    ClassicalRecv,
    ClassicalSend,
    Network,
    PatternEvent,
    QuantumRecv,
    QuantumSend,
    agent_compose,
    classify_outputs,
    net_par_compose,
    net_seq_compose,
    network_type,
    output_sort,
    require_valid,
    resolve_network,
    validate_network,
)
from tests.strategies import networks, par_pairs, seq_pairs


def codes(n):
    return [v.code for v in validate_network(n)]


def messages(n):
    return [v.message for v in validate_network(n)]


def test_output_sort():
    sender = Agent.build('A', {1}, [QuantumSend('qc', 1)])
    assert output_sort(sender) == frozenset()
    worker = Agent.build('A', {1, 2}, [PatternEvent(hadamard_pattern(1, 4))])
    assert output_sort(worker) == {2, 4}
    assert output_sort(Agent.build('A', {5}, [])) == {5}


def test_output_sort_unknown_qubit():
    with pytest.raises(UnknownQubit):
        output_sort(Agent.build('A', {1}, [QuantumSend('qc', 2)]))


def test_library_networks_are_valid():
    for name in ('teleport', 'direct_channel', 'hadamard_pair', 'superdense'):
        assert validate_network(library(name)) == []
    assert validate_network(library('bitflip', 0.3)) == []


def test_shared_qubit_is_reported():
    n = Network((Agent.build('A', {1}, []), Agent.build('B', {1}, [])))
    assert 'H3: sorts overlap: qubit 1 owned by A and B' in messages(n)


def test_send_before_measurement():
    a = Agent.build('A', {1, 2}, [ClassicalSend('c', ('s1',))])
    b = Agent.build('B', set(), [ClassicalRecv('c', ('x',))])
    assert 'H1: name s1 used before it is bound' in messages(Network((a, b)))


def test_unbound_output():
    n = Network((Agent.build('A', {1}, [], cout={'y'}),))
    assert messages(n) == ['H1: output y is never bound']


def test_qsend_of_foreign_qubit():
    a = Agent.build('A', {1}, [QuantumSend('qc', 9)])
    b = Agent.build('B', set(), [QuantumRecv('qc', 9)])
    assert 'H0: qubit 9 not in the sort of A' in messages(Network((a, b)))


def test_unmatched_send():
    a = Agent.build('A', {1}, [ClassicalSend('c', (1,))])
    assert 'H2' in codes(Network((a, Agent.build('B', set(), []))))


def test_arity_mismatch():
    a = Agent.build('A', set(), [ClassicalSend('c', (0, 1))])
    b = Agent.build('B', set(), [ClassicalRecv('c', ('x',))])
    assert 'H2: channel c sends 2 values but receives 1' in messages(Network((a, b)))


def test_deadlock_is_detected():
    a = Agent.build('A', set(), [ClassicalRecv('c1', ('x',)), ClassicalSend('c2', (0,))])
    b = Agent.build('B', set(), [ClassicalRecv('c2', ('y',)), ClassicalSend('c1', (1,))])
    assert 'H2: communication deadlock: A, B blocked' in messages(Network((a, b)))


def test_name_bound_twice():
    a = Agent.build('A', set(), [ClassicalSend('c', (0,)), ClassicalSend('d', (1,))])
    b = Agent.build('B', set(), [ClassicalRecv('c', ('x',)), ClassicalRecv('d', ('x',))])
    assert 'H3: name x bound twice' in messages(Network((a, b)))


def test_signal_cannot_rebind_an_input():
    a = Agent.build('A', {2}, [PatternEvent(Pattern.build([Measure(2)], inputs=(2,)))], cin={'s2'})
    assert 'H3: name s2 bound twice' in messages(Network((a,)))


def test_signal_cannot_rebind_a_received_name():
    a = Agent.build('A', set(), [ClassicalSend('c', (0,))])
    b = Agent.build('B', {2}, [
        ClassicalRecv('c', ('s2',)),
        PatternEvent(Pattern.build([Measure(2)], inputs=(2,))),
    ])
    assert messages(Network((a, b))) == ['H3: name s2 bound twice']


def test_fresh_qubit_reused():
    a = Agent.build('A', {1}, [PatternEvent(hadamard_pattern(1, 2))])
    b = Agent.build('B', {2}, [])
    assert 'H3: qubit id reused: 2' in messages(Network((a, b)))


def test_require_valid_raises():
    with pytest.raises(ValidationFailed) as info:
        require_valid(Network((Agent.build('A', {1}, [], cout={'y'}),)))
    assert 'H1' in str(info.value)


def test_agent_compose_merges_io():
    first = Agent.build('A', set(), [ClassicalRecv('c', ('x',))], cout={'x'})
    second = Agent.build('A', set(), [ClassicalSend('d', ('x',))], cin={'x'})
    composed = agent_compose(first, second)
    assert composed.cin == frozenset()
    assert composed.cout == {'x'}
    assert composed.events == first.events + second.events


def test_agent_compose_with_empty_program():
    a = Agent.build('A', {1}, [QuantumSend('qc', 1)], cin={'i'})
    composed = agent_compose(a, Agent.build('A', set(), [], cout={'o'}))
    assert composed.events == a.events
    assert composed.cin == {'i'} and composed.cout == {'o'}


def test_agent_compose_sort_merge():
    first = Agent.build('A', {1}, [PatternEvent(hadamard_pattern(1, 4))])
    second = Agent.build('A', {4, 7}, [])
    assert agent_compose(first, second).sort == {1, 7}


def test_agent_compose_errors():
    with pytest.raises(NameMismatch):
        agent_compose(Agent('A'), Agent('B'))
    first = Agent.build('A', {1}, [PatternEvent(hadamard_pattern(1, 4))])
    with pytest.raises(SortMismatch):
        agent_compose(first, Agent.build('A', {1}, []))


def test_agent_compose_is_associative():
    a = Agent.build('A', {1}, [PatternEvent(hadamard_pattern(1, 2))])
    b = Agent.build('A', {2}, [PatternEvent(hadamard_pattern(2, 3))])
    c = Agent.build('A', {3, 9}, [QuantumSend('qc', 9)])
    assert agent_compose(agent_compose(a, b), c) == agent_compose(a, agent_compose(b, c))


def test_seq_compose_teleports_twice():
    first = teleport()
    second = teleport('A', 'B', (4, 5, 6), 'c2')
    n = net_seq_compose(first, second)
    assert validate_network(n) == []
    initial, final = network_type(n)
    assert initial == {'A': (1, 4), 'B': ()}
    assert final == {'A': (), 'B': (3, 6)}


def test_seq_compose_with_empty_network_is_identity(tp):
    empty = Network((Agent('A'), Agent('B')))
    assert net_seq_compose(tp, empty) == tp
    assert net_seq_compose(empty, tp) == tp


def test_seq_compose_agent_sets():
    with pytest.raises(AgentSetMismatch):
        net_seq_compose(teleport(), direct_channel('A', 'C'))
    padded = net_seq_compose(teleport(), direct_channel('A', 'C', qubit=4, channel='q'), pad=True)
    assert padded.names == ('A', 'B', 'C')
    assert validate_network(padded) == []


def test_seq_compose_rejects_shared_ownership():
    # qubit 3 ends at B but the second network starts with A holding it
    with pytest.raises(OverlappingIds):
        net_seq_compose(teleport(), direct_channel('A', 'C', qubit=3, channel='q'), pad=True)


def test_send_there_and_back():
    there_and_back = net_seq_compose(direct_channel(), direct_channel('B', 'A', channel='qb'))
    assert validate_network(there_and_back) == []
    assert network_type(there_and_back)[1] == {'A': (1,), 'B': ()}


def test_par_compose():
    left = Network((Agent.build('A', {1}, [PatternEvent(hadamard_pattern(1, 2))]),))
    right = Network((Agent.build('B', {3}, [PatternEvent(hadamard_pattern(3, 4))]),))
    assert net_par_compose(left, right) == hadamard_pair()
    assert net_par_compose(left, Network()) == left


def test_par_compose_errors(tp):
    with pytest.raises(NameCollision):
        net_par_compose(tp, direct_channel())
    with pytest.raises(OverlappingIds):
        net_par_compose(tp, direct_channel('C', 'D'))
    combined = net_par_compose(tp, direct_channel('C', 'D', qubit=4, channel='qd'))
    assert validate_network(combined) == []


def test_resolve_named_placeholder():
    a = Agent.build('A', {1}, [QuantumSend('qc', 1)])
    b = Agent.build('B', set(), [
        QuantumRecv('qc', 'x'),
        PatternEvent(Pattern.build([CorrectX('x', SignalExpr.of(constant=1))], inputs=('x',))),
    ])
    resolved = resolve_network(Network((a, b)))
    expected = Agent.build('B', set(), [
        QuantumRecv('qc', 1),
        PatternEvent(Pattern.build([CorrectX(1, SignalExpr.of(constant=1))], inputs=(1,))),
    ])
    assert resolved.agent('B') == expected
    assert network_type(Network((a, b)))[1] == {'A': (), 'B': (1,)}


def test_classify_outputs():
    assert classify_outputs(library('bitflip', 0.3)) == {'A': ((), ('s2',))}
    assert classify_outputs(library('superdense')) == {'A': ((), ()), 'B': ((), ('s1', 's2'))}
    a = Agent.build('A', set(), [ClassicalSend('c', ('x',))], cin={'x'})
    b = Agent.build('B', set(), [ClassicalRecv('c', ('y',))], cout={'y'})
    assert classify_outputs(Network((a, b)))['B'] == (('y',), ())


def test_signals_taint_through_messages():
    a = Agent.build('A', {1}, [
        PatternEvent(Pattern.build([Measure(1)], inputs=(1,))),
        ClassicalSend('c', (SignalExpr.of('s1', constant=1),)),
    ])
    b = Agent.build('B', set(), [ClassicalRecv('c', ('y',))], cout={'y'})
    assert classify_outputs(Network((a, b)))['B'] == ((), ('y',))


@given(networks())
def test_generated_networks_are_valid(n):
    assert validate_network(n) == []


@given(seq_pairs())
def test_seq_composition_keeps_validity(pair):
    first, second = pair
    composed = net_seq_compose(first, second)
    assert validate_network(composed) == []
    owners = [q for a in composed.agents for q in a.sort]
    assert len(owners) == len(set(owners))


@given(par_pairs())
def test_par_composition_keeps_validity(pair):
    composed = net_par_compose(*pair)
    assert validate_network(composed) == []
    assert composed.names == pair[0].names + pair[1].names
