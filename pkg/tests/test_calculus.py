import numpy as np
import pytest
from hypothesis import given, strategies as st

from qnetsem import qnum
from qnetsem.calculus import (
    CorrectX,
    CorrectZ,
    Entangle,
    Measure,
    Pattern,
    SignalExpr,
    bell_measure,
    branch_operator,
    eval_signal,
    exec_pattern,
    hadamard_pattern,
    measured_angle,
    measurement_bra,
    pattern_kraus,
    validate_pattern,
)
from qnetsem.errors import IncompleteSignals, InvalidPattern, UnboundName, UnknownQubit
from qnetsem.qnum import QRegisterState
from tests.strategies import patterns, pure_states


def teleport_pattern():
    """M_2 M_1 E_12 E_23 with input 1 and output 3."""
    return Pattern.from_notation(
        [Measure(2), Measure(1), Entangle(1, 2), Entangle(2, 3)], inputs=(1,),
    )


def messages(p):
    return [v.message for v in validate_pattern(p)]


def test_library_patterns_are_valid():
    assert validate_pattern(hadamard_pattern(1, 2)) == []
    assert validate_pattern(bell_measure(1, 2)) == []
    assert validate_pattern(Pattern.identity({1, 2})) == []
    assert validate_pattern(teleport_pattern()) == []


def test_measured_twice():
    p = Pattern({1, 2}, {1}, {2}, (Measure(1), Measure(1)))
    assert 'measured twice: 1' in messages(p)


def test_command_after_measurement():
    p = Pattern({1, 2}, {1, 2}, {2}, (Measure(1), CorrectX(1, SignalExpr.of('s1'))))
    assert 'acts on measured qubit: 1' in messages(p)


def test_unmeasured_non_output():
    p = Pattern({1, 2}, {1}, {1}, (Entangle(1, 2),))
    assert 'not measured: 2' in messages(p)


def test_output_measured():
    p = Pattern({1}, {1}, {1}, (Measure(1),))
    assert 'output qubit measured: 1' in messages(p)


def test_signal_used_before_measurement():
    p = Pattern.build([CorrectX(2, SignalExpr.of('s1')), Measure(1)], inputs=(1, 2))
    assert 'signal used before measurement: s1' in messages(p)


def test_entangle_single_qubit_and_space():
    assert 'entangle on a single qubit: 1' in messages(Pattern({1}, {1}, {1}, (Entangle(1, 1),)))
    assert 'qubit not in space: 5' in messages(Pattern({1}, {1}, {1}, (CorrectX(5),)))


def test_eval_signal():
    assert eval_signal(SignalExpr(), {}) == 0
    assert eval_signal(SignalExpr.of('s2'), {'s2': 1}) == 1
    assert eval_signal(SignalExpr.of('s1', 'x1', constant=1), {'s1': 1, 'x1': 1}) == 1
    with pytest.raises(UnboundName):
        eval_signal(SignalExpr.of('s9'), {})


def test_signal_expr_cancels_repeated_names():
    assert SignalExpr.of('a', 'a') == SignalExpr()
    assert SignalExpr.of('a') + 'b' + 1 == SignalExpr.of('a', 'b', constant=1)
    assert str(SignalExpr.of('b', 'a', constant=1)) == 'a+b+1'


def test_measured_angle_dependencies():
    m = Measure(1, 0.3, SignalExpr.of('a'), SignalExpr.of('b'))
    assert measured_angle(m, {'a': 0, 'b': 0}) == pytest.approx(0.3)
    assert measured_angle(m, {'a': 1, 'b': 0}) == pytest.approx(-0.3)
    assert measured_angle(m, {'a': 0, 'b': 1}) == pytest.approx(0.3 + np.pi)


def test_shifted_projector_swaps_outcomes():
    np.testing.assert_allclose(measurement_bra(0.4 + np.pi, 0), measurement_bra(0.4, 1), atol=1e-12)


def test_hadamard_pattern_on_zero():
    branches = exec_pattern(QRegisterState.basis([1]), hadamard_pattern(1, 4), {})
    assert len(branches) == 2
    for b in branches:
        assert b.prob == pytest.approx(0.5)
        assert b.state.qubit_ids == (4,)
        assert qnum.fidelity(b.state, QRegisterState.plus([4])) == pytest.approx(1.0)
    assert sorted(b.bindings['s1'] for b in branches) == [0, 1]


def test_identity_pattern_single_branch(rng):
    state = qnum.random_pure((1,), rng)
    [branch] = exec_pattern(state, Pattern.identity({1}), {})
    assert branch.prob == pytest.approx(1.0)
    assert branch.bindings == {}
    assert qnum.state_distance(branch.state, state) < 1e-12


def test_bell_measurement_on_teleport_resource(rng):
    psi = qnum.random_pure((1,), rng)
    pair = qnum.embed_apply(qnum.LinOp((2, 3), (2, 3), qnum.CZ), QRegisterState.plus((2, 3)))
    branches = exec_pattern(qnum.tensor(psi, pair), bell_measure(1, 2), {})
    assert len(branches) == 4
    for b in branches:
        assert b.prob == pytest.approx(0.25)
        fix = np.linalg.matrix_power(qnum.X, b.bindings['s2']) @ np.linalg.matrix_power(qnum.Z, b.bindings['s1'])
        expected = QRegisterState.pure((3,), fix @ psi.data)
        assert qnum.fidelity(b.state, expected) == pytest.approx(1.0)


def test_exec_pattern_errors():
    with pytest.raises(UnknownQubit):
        exec_pattern(QRegisterState.basis([2]), hadamard_pattern(1, 4), {})
    with pytest.raises(InvalidPattern):
        exec_pattern(QRegisterState.basis([1]), Pattern({1}, {1}, {1}, (Measure(1),)), {})
    with pytest.raises(UnboundName):
        exec_pattern(QRegisterState.basis([1]), Pattern.build([CorrectX(1, SignalExpr.of('y'))], inputs=(1,)), {})


def test_branch_operator_identity_pattern():
    op = branch_operator(Pattern.identity({1}), {}, {})
    np.testing.assert_allclose(op.matrix, np.eye(2))


def test_branch_operator_teleport_zero_branch():
    op = branch_operator(teleport_pattern(), {1: 0, 2: 0}, {})
    assert op.in_ids == (1,) and op.out_ids == (3,)
    np.testing.assert_allclose(op.matrix, np.eye(2) / 2, atol=1e-12)


@pytest.mark.parametrize('alpha', [np.pi / 2, np.pi / 3, 0.4])
def test_bitflip_branch_operators(alpha):
    p = Pattern.from_notation([CorrectX(1, SignalExpr.of('s2')), Measure(2, -alpha)], inputs=(1,))
    keep = branch_operator(p, {2: 0}, {}).matrix
    flip = branch_operator(p, {2: 1}, {}).matrix
    prob = np.cos(alpha / 2) ** 2
    np.testing.assert_allclose(keep.conj().T @ keep, prob * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(flip.conj().T @ flip, (1 - prob) * np.eye(2), atol=1e-12)
    assert abs(keep[0, 1]) < 1e-12 and abs(keep[1, 0]) < 1e-12
    assert abs(flip[0, 0]) < 1e-12 and abs(flip[1, 1]) < 1e-12


def test_branch_operator_needs_every_signal():
    with pytest.raises(IncompleteSignals):
        branch_operator(teleport_pattern(), {1: 0}, {})


@given(patterns())
def test_branch_operators_are_complete(p):
    ops = [op for _, op in pattern_kraus(p, {})]
    gram = sum(op.matrix.conj().T @ op.matrix for op in ops)
    np.testing.assert_allclose(gram, np.eye(2 ** len(p.inputs)), atol=1e-9)


@given(st.data())
def test_executor_agrees_with_branch_operators(data):
    p = data.draw(patterns())
    state = data.draw(pure_states(sorted(p.inputs)))
    for branch in exec_pattern(state, p, {}):
        signals = {int(name[1:]): bit for name, bit in branch.bindings.items()}
        expected = qnum.embed_apply(branch_operator(p, signals, {}), state)
        observed = QRegisterState.pure(branch.state.qubit_ids, np.sqrt(branch.prob) * branch.state.data)
        assert qnum.state_distance(expected, observed) < 1e-9


@given(patterns())
def test_branch_probabilities_sum_to_one(p):
    state = QRegisterState.plus(sorted(p.inputs))
    assert sum(b.prob for b in exec_pattern(state, p, {})) == pytest.approx(1.0, abs=1e-9)


def test_substituted_renames_signals():
    p = hadamard_pattern(1, 2).substituted({1: 7})
    assert p.inputs == {7}
    assert CorrectX(2, SignalExpr.of('s7')) in p.commands
    assert validate_pattern(p) == []


def test_notation_is_reversed_order():
    p = Pattern.from_notation([CorrectZ(1), Entangle(1, 2)], inputs=(1, 2))
    assert p.commands[0] == Entangle(1, 2)
    assert p.notation[0] == CorrectZ(1)
