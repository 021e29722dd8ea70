"""
Measurement-calculus patterns: signal expressions, commands, well-formedness,
the branch executor and per-branch operators.

Commands are stored in application order (the first element acts first).
The conventional notation writes them right-to-left; `Pattern.from_notation`
and `Pattern.notation` convert between the two.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from qnetsem import qnum
from qnetsem.errors import (
    IncompleteSignals,
    InvalidPattern,
    OverlappingIds,
    UnboundName,
    UnknownQubit,
)
from qnetsem.qnum import LinOp, QRegisterState, sort_ids

logger = logging.getLogger(__name__)


def signal_name(qubit):
    """Name under which the outcome of measuring `qubit` is bound."""
    return f"s{qubit}"


@dataclass(frozen=True)
class SignalExpr:
    """A constant bit plus a sum (mod 2) of classical names."""
    constant: int = 0
    terms: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, 'constant', int(self.constant) % 2)
        object.__setattr__(self, 'terms', frozenset(self.terms))

    @classmethod
    def of(cls, *names, constant=0):
        terms = frozenset()
        for name in names:
            terms = terms ^ {name}
        return cls(constant, terms)

    @classmethod
    def coerce(cls, value):
        if isinstance(value, SignalExpr):
            return value
        if isinstance(value, str):
            return cls.of(value)
        return cls(int(value))

    def __add__(self, other):
        other = SignalExpr.coerce(other)
        return SignalExpr(self.constant ^ other.constant, self.terms ^ other.terms)

    __radd__ = __add__

    @property
    def names(self):
        return self.terms

    def renamed(self, mapping):
        out = SignalExpr(self.constant)
        for name in self.terms:
            out = out + mapping.get(name, name)
        return out

    def __str__(self):
        parts = sorted(self.terms)
        if self.constant or not parts:
            parts.append(str(self.constant))
        return '+'.join(parts)


ZERO = SignalExpr()


def eval_signal(expr, env):
    """
    Evaluate a signal expression in an environment.

    Args:
        expr: SignalExpr (a bare name or bit is accepted too)
        env: mapping from classical names to bits

    Returns:
        0 or 1
    """
    expr = SignalExpr.coerce(expr)
    total = expr.constant
    for name in sorted(expr.terms):
        if name not in env:
            raise UnboundName(name)
        total += int(env[name])
    return total % 2


@dataclass(frozen=True)
class Entangle:
    i: object
    j: object

    @property
    def qubits(self):
        return (self.i, self.j)

    @property
    def names(self):
        return frozenset()

    def substituted(self, qubits, names):
        return Entangle(qubits.get(self.i, self.i), qubits.get(self.j, self.j))

    def __str__(self):
        return f"E({self.i},{self.j})"


@dataclass(frozen=True)
class Measure:
    qubit: object
    angle: float = 0.0
    s: SignalExpr = ZERO
    t: SignalExpr = ZERO

    @property
    def qubits(self):
        return (self.qubit,)

    @property
    def names(self):
        return self.s.names | self.t.names

    def substituted(self, qubits, names):
        return Measure(
            qubits.get(self.qubit, self.qubit), self.angle,
            self.s.renamed(names), self.t.renamed(names),
        )

    def __str__(self):
        return f"M({self.qubit},{self.angle!r},s:{self.s},t:{self.t})"


@dataclass(frozen=True)
class CorrectX:
    qubit: object
    dep: SignalExpr = ZERO

    @property
    def qubits(self):
        return (self.qubit,)

    @property
    def names(self):
        return self.dep.names

    def substituted(self, qubits, names):
        return CorrectX(qubits.get(self.qubit, self.qubit), self.dep.renamed(names))

    def __str__(self):
        return f"X({self.qubit},{self.dep})"


@dataclass(frozen=True)
class CorrectZ:
    qubit: object
    dep: SignalExpr = ZERO

    @property
    def qubits(self):
        return (self.qubit,)

    @property
    def names(self):
        return self.dep.names

    def substituted(self, qubits, names):
        return CorrectZ(qubits.get(self.qubit, self.qubit), self.dep.renamed(names))

    def __str__(self):
        return f"Z({self.qubit},{self.dep})"


@dataclass(frozen=True)
class Nil:
    @property
    def qubits(self):
        return ()

    @property
    def names(self):
        return frozenset()

    def substituted(self, qubits, names):
        return self

    def __str__(self):
        return "nil"


@dataclass(frozen=True)
class Violation:
    """One broken well-formedness condition."""
    code: str
    message: str
    agent: str = None
    index: int = None
    qubit: object = None

    def __str__(self):
        where = []
        if self.agent is not None:
            where.append(f"agent {self.agent}")
        if self.index is not None:
            where.append(f"event {self.index}")
        if where:
            return f"{self.message} [{', '.join(where)}]"
        return self.message


@dataclass(frozen=True)
class Pattern:
    """
    A command sequence over the computation space `space`.

    Non-input qubits are prepared in |+> before the first command; qubits
    outside `outputs` are measured (and leave the register).
    """
    space: frozenset
    inputs: frozenset
    outputs: frozenset
    commands: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'space', frozenset(self.space))
        object.__setattr__(self, 'inputs', frozenset(self.inputs))
        object.__setattr__(self, 'outputs', frozenset(self.outputs))
        object.__setattr__(self, 'commands', tuple(self.commands))

    @classmethod
    def build(cls, commands, inputs=(), outputs=None, space=None):
        """
        Pattern with space and outputs inferred from the commands.

        Args:
            commands: commands in application order
            inputs: input qubits
            outputs: defaults to the space minus the measured qubits
            space: defaults to every qubit mentioned plus the inputs
        """
        commands = tuple(c for c in commands if not isinstance(c, Nil))
        if space is None:
            space = set(inputs)
            for command in commands:
                space.update(command.qubits)
        if outputs is None:
            measured = {c.qubit for c in commands if isinstance(c, Measure)}
            outputs = set(space) - measured
        return cls(frozenset(space), frozenset(inputs), frozenset(outputs), commands)

    @classmethod
    def from_notation(cls, commands, inputs=(), outputs=None, space=None):
        """Same as `build` with the commands written right-to-left."""
        return cls.build(tuple(reversed(tuple(commands))), inputs, outputs, space)

    @classmethod
    def identity(cls, qubits):
        return cls(frozenset(qubits), frozenset(qubits), frozenset(qubits), ())

    @property
    def notation(self):
        return tuple(reversed(self.commands))

    @property
    def measured(self):
        return tuple(c.qubit for c in self.commands if isinstance(c, Measure))

    @property
    def signals(self):
        """Names bound by executing the pattern."""
        return frozenset(signal_name(q) for q in self.measured)

    @property
    def free_names(self):
        """Dependency names the pattern reads from its environment."""
        used = set()
        for command in self.commands:
            used |= command.names
        return frozenset(used - self.signals)

    @property
    def prepared(self):
        return sort_ids(self.space - self.inputs)

    def substituted(self, qubits):
        """Rename qubit ids (and the signals of renamed qubits)."""
        if not qubits:
            return self
        names = {signal_name(old): signal_name(new) for old, new in qubits.items()}
        sub = lambda ids: frozenset(qubits.get(q, q) for q in ids)
        return Pattern(
            sub(self.space), sub(self.inputs), sub(self.outputs),
            tuple(c.substituted(qubits, names) for c in self.commands),
        )

    def tensor(self, other):
        """Side-by-side composition of two patterns on disjoint spaces."""
        clash = self.space & other.space
        if clash:
            raise OverlappingIds(clash)
        return Pattern(
            self.space | other.space, self.inputs | other.inputs,
            self.outputs | other.outputs, self.commands + other.commands,
        )

    def __str__(self):
        body = '; '.join(str(c) for c in self.notation)
        return f"[{body}]"


def validate_pattern(p):
    """
    Check the well-formedness of a pattern.

    Returns:
        list of Violation, empty when the pattern is valid
    """
    violations = []

    def add(code, message, index=None, qubit=None):
        violations.append(Violation(code, message, index=index, qubit=qubit))

    for q in sort_ids(p.inputs - p.space):
        add('space', f"input not in space: {q}", qubit=q)
    for q in sort_ids(p.outputs - p.space):
        add('space', f"output not in space: {q}", qubit=q)

    measured = set()
    produced = set()
    own_signals = {signal_name(q) for q in p.space}
    for index, command in enumerate(p.commands):
        for q in command.qubits:
            if q not in p.space:
                add('space', f"qubit not in space: {q}", index, q)
        if isinstance(command, Entangle) and command.i == command.j:
            add('entangle', f"entangle on a single qubit: {command.i}", index, command.i)
        for name in sorted(command.names & own_signals - produced):
            add('signal', f"signal used before measurement: {name}", index)
        if isinstance(command, Measure) and command.qubit in measured:
            add('measure', f"measured twice: {command.qubit}", index, command.qubit)
            continue
        for q in command.qubits:
            if q in measured:
                add('measure', f"acts on measured qubit: {q}", index, q)
        if isinstance(command, Measure):
            measured.add(command.qubit)
            produced.add(signal_name(command.qubit))

    for q in sort_ids(measured & p.outputs):
        add('output', f"output qubit measured: {q}", qubit=q)
    for q in sort_ids(p.space - p.outputs - measured):
        add('output', f"not measured: {q}", qubit=q)
    return violations


def _require_valid(p):
    violations = validate_pattern(p)
    if violations:
        raise InvalidPattern(violations)


def measured_angle(command, env):
    """Angle actually measured: (-1)^s * angle + pi * t."""
    s = eval_signal(command.s, env)
    t = eval_signal(command.t, env)
    return (-1) ** s * command.angle + np.pi * t


def measurement_bra(angle, outcome):
    """Row vector <+_angle| (outcome 0) or <-_angle| (outcome 1)."""
    sign = -1 if outcome else 1
    return np.array([[1, sign * np.exp(-1j * angle)]], dtype=complex) / np.sqrt(2)


def _command_op(command, env, outcome=None):
    """LinOp of one command, or None when it acts trivially."""
    if isinstance(command, Entangle):
        return LinOp((command.i, command.j), (command.i, command.j), qnum.CZ)
    if isinstance(command, Measure):
        bra = measurement_bra(measured_angle(command, env), outcome)
        return LinOp((command.qubit,), (), bra)
    if isinstance(command, CorrectX):
        return LinOp.single(command.qubit, qnum.X) if eval_signal(command.dep, env) else None
    if isinstance(command, CorrectZ):
        return LinOp.single(command.qubit, qnum.Z) if eval_signal(command.dep, env) else None
    return None


class BranchResult(NamedTuple):
    state: QRegisterState
    prob: float
    bindings: dict


def exec_pattern(state, p, env):
    """
    Run a pattern on a register and return every measurement branch.

    Args:
        state: register containing the pattern inputs
        p: valid Pattern
        env: bindings for the names the pattern depends on

    Returns:
        list of BranchResult(state, prob, bindings); states are renormalized,
        bindings hold exactly the signals of the measured qubits
    """
    _require_valid(p)
    for q in sort_ids(p.inputs):
        if q not in state.qubit_ids:
            raise UnknownQubit(q, 'pattern input')
    fresh = p.prepared
    clash = set(fresh) & set(state.qubit_ids)
    if clash:
        raise OverlappingIds(clash)
    for name in sorted(p.free_names):
        if name not in env:
            raise UnboundName(name)

    start_norm = state.norm2()
    current = qnum.tensor(state, QRegisterState.plus(fresh)) if fresh else state
    branches = [(current, {})]
    for command in p.commands:
        if isinstance(command, Measure):
            split = []
            for branch_state, bindings in branches:
                local = {**env, **bindings}
                for outcome in (0, 1):
                    op = _command_op(command, local, outcome)
                    after = qnum.embed_apply(op, branch_state)
                    if after.norm2() <= qnum.PRUNE_TOL * max(start_norm, qnum.PRUNE_TOL):
                        continue
                    split.append((after, {**bindings, signal_name(command.qubit): outcome}))
            branches = split
        else:
            updated = []
            for branch_state, bindings in branches:
                op = _command_op(command, {**env, **bindings})
                updated.append((qnum.embed_apply(op, branch_state) if op else branch_state, bindings))
            branches = updated

    results = []
    for branch_state, bindings in branches:
        prob = branch_state.norm2() / start_norm if start_norm > 0 else 0.0
        results.append(BranchResult(branch_state.normalized(), prob, bindings))
    logger.debug("pattern %s: %d branches", p, len(results))
    return results


def branch_operator(p, signals, env):
    """
    Linear map realised by one measurement branch of a pattern.

    Args:
        p: valid Pattern
        signals: mapping from measured qubit to outcome bit
        env: bindings for the names the pattern depends on

    Returns:
        LinOp from the sorted inputs to the sorted outputs (not normalized)
    """
    _require_valid(p)
    missing = set(p.measured) - set(signals)
    if missing:
        raise IncompleteSignals(missing)

    local = dict(env)
    local.update({signal_name(q): int(signals[q]) for q in p.measured})
    op = LinOp.identity(sort_ids(p.inputs))
    fresh = p.prepared
    if fresh:
        prep = QRegisterState.plus(fresh).data.reshape(-1, 1)
        op = qnum.compose_ops(LinOp((), fresh, prep), op)
    for command in p.commands:
        outcome = signals[command.qubit] if isinstance(command, Measure) else None
        step = _command_op(command, local, outcome)
        if step is not None:
            op = qnum.compose_ops(step, op)
    return op.reordered(out_ids=sort_ids(p.outputs))


def signal_assignments(qubits):
    """Every bit assignment to `qubits`, in lexicographic order."""
    qubits = tuple(qubits)
    for bits in itertools.product((0, 1), repeat=len(qubits)):
        yield dict(zip(qubits, bits))


def pattern_kraus(p, env, tol=qnum.PRUNE_TOL):
    """
    All nonzero branch operators of a pattern.

    Returns:
        list of (signals, LinOp)
    """
    out = []
    for signals in signal_assignments(p.measured):
        op = branch_operator(p, signals, env)
        if op.norm2() > tol:
            out.append((signals, op))
    return out


def hadamard_pattern(i, j):
    """X_j^{s_i} M_i^0 E_ij: moves qubit i to j and applies H."""
    return Pattern.from_notation(
        [CorrectX(j, SignalExpr.of(signal_name(i))), Measure(i, 0.0), Entangle(i, j)],
        inputs=(i,),
    )


def bell_measure(i, j):
    """M_j^0 M_i^0 E_ij on inputs i and j."""
    return Pattern.from_notation([Measure(j, 0.0), Measure(i, 0.0), Entangle(i, j)], inputs=(i, j))
