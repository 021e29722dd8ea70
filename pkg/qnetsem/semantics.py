"""
Small-step interpreter, schedules, the operational semantics (probabilistic
transition system over final-configuration classes) and the denotational
semantics (Kraus sets keyed by signal outputs).
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from qnetsem import qnum
from qnetsem.calculus import (
    branch_operator,
    eval_signal,
    exec_pattern,
    signal_assignments,
    signal_name,
)
from qnetsem.errors import (
    Deadlock,
    InputMismatch,
    NotEnabled,
    ScheduleDependence,
    ValidationFailed,
)
from qnetsem.netmodel import (
    ClassicalRecv,
    ClassicalSend,
    PatternEvent,
    QuantumRecv,
    QuantumSend,
    classify_outputs,
    network_type,
    sort_names,
    validate_network,
)
from qnetsem.qnum import KrausSet, LinOp, QRegisterState, sort_ids

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AgentState:
    """Runtime state of one agent: environment, remaining events and sort."""
    name: str
    env: dict
    remaining: tuple
    sort: frozenset
    cout: frozenset = frozenset()

    @property
    def done(self):
        return not self.remaining

    @property
    def head(self):
        return self.remaining[0] if self.remaining else None

    def outputs(self):
        return {name: self.env[name] for name in sort_names(self.cout) if name in self.env}

    def advanced(self, env=None, sort=None, remaining=None):
        return AgentState(
            self.name,
            self.env if env is None else env,
            self.remaining[1:] if remaining is None else remaining,
            self.sort if sort is None else frozenset(sort),
            self.cout,
        )


@dataclass(frozen=True, eq=False)
class Configuration:
    """
    Global quantum state plus every agent's local state.

    `qstate` is a QRegisterState during execution, or a LinOp from the input
    qubits to the current register when extracting operation elements.
    """
    qstate: object
    agents: tuple

    @property
    def done(self):
        return all(a.done for a in self.agents)

    def agent(self, name):
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(name)

    def replaced(self, qstate=None, **updates):
        agents = tuple(updates.get(a.name, a) for a in self.agents)
        return Configuration(self.qstate if qstate is None else qstate, agents)


@dataclass(frozen=True)
class LocalStep:
    agent: str

    @property
    def actors(self):
        return (self.agent,)

    def __str__(self):
        return f"local({self.agent})"


@dataclass(frozen=True)
class Rendezvous:
    sender: str
    receiver: str
    channel: str
    quantum: bool = False

    @property
    def actors(self):
        return (self.sender, self.receiver)

    def __str__(self):
        kind = 'quantum' if self.quantum else 'classical'
        return f"{kind}({self.sender}->{self.receiver} on {self.channel})"


def enabled(c):
    """
    Rule instances that may fire in a configuration.

    Returns:
        tuple of LocalStep and Rendezvous, local steps first, in agent order
    """
    out = []
    for a in c.agents:
        if isinstance(a.head, PatternEvent):
            out.append(LocalStep(a.name))
    for sender in c.agents:
        send = sender.head
        if not isinstance(send, (ClassicalSend, QuantumSend)):
            continue
        wanted = QuantumRecv if isinstance(send, QuantumSend) else ClassicalRecv
        for receiver in c.agents:
            recv = receiver.head
            if receiver.name != sender.name and isinstance(recv, wanted) and recv.channel == send.channel:
                out.append(Rendezvous(sender.name, receiver.name, send.channel, wanted is QuantumRecv))
                break
    return tuple(out)


def _local_branches(carrier, pattern, env):
    """Branches of a pattern on a state (with probabilities) or on a LinOp carrier."""
    if isinstance(carrier, QRegisterState):
        return [(b.state, b.prob, b.bindings) for b in exec_pattern(carrier, pattern, env)]
    out = []
    for signals in signal_assignments(pattern.measured):
        op = qnum.compose_ops(branch_operator(pattern, signals, env), carrier)
        if op.norm2() <= qnum.PRUNE_TOL:
            continue
        out.append((op, 1.0, {signal_name(q): b for q, b in signals.items()}))
    return out


def step(c, choice):
    """
    Fire one rule instance.

    Returns:
        list of (Configuration, probability); rendezvous give one successor
        with probability 1, local patterns one per surviving branch
    """
    if choice not in enabled(c):
        raise NotEnabled(choice)

    if isinstance(choice, LocalStep):
        a = c.agent(choice.agent)
        p = a.head.pattern
        out = []
        for carrier, prob, bindings in _local_branches(c.qstate, p, a.env):
            sort = (a.sort - p.inputs) | p.outputs
            moved = a.advanced(env={**a.env, **bindings}, sort=sort)
            out.append((c.replaced(carrier, **{a.name: moved}), prob))
        logger.debug("%s: %d branches", choice, len(out))
        return out

    sender, receiver = c.agent(choice.sender), c.agent(choice.receiver)
    send, recv = sender.head, receiver.head
    if choice.quantum:
        q = send.qubit
        rest = tuple(e.substituted({recv.placeholder: q}) for e in receiver.remaining[1:])
        moved_sender = sender.advanced(sort=sender.sort - {q})
        moved_receiver = receiver.advanced(sort=receiver.sort | {q}, remaining=rest)
    else:
        values = [eval_signal(v, sender.env) for v in send.values]
        moved_sender = sender.advanced()
        moved_receiver = receiver.advanced(env={**receiver.env, **dict(zip(recv.names, values))})
    logger.debug("%s", choice)
    return [(c.replaced(**{sender.name: moved_sender, receiver.name: moved_receiver}), 1.0)]


class RoundRobin:
    """
    Canonical schedule: agents take turns in `order`; the current agent
    keeps going until it is blocked.
    """

    def __init__(self, order):
        self.order = tuple(order)

    def start(self):
        return 0

    def pick(self, c, instances, position):
        for k in range(len(self.order)):
            at = (position + k) % len(self.order)
            name = self.order[at]
            for instance in instances:
                if name in instance.actors:
                    return instance, at
        return instances[0], position

    def __str__(self):
        return 'round-robin(' + ','.join(self.order) + ')'


class FixedSchedule:
    """Replays one explicit interleaving of rule instances."""

    def __init__(self, sequence):
        self.sequence = tuple(sequence)

    def start(self):
        return 0

    def pick(self, c, instances, position):
        if position >= len(self.sequence):
            raise NotEnabled(None)
        choice = self.sequence[position]
        if choice not in instances:
            raise NotEnabled(choice)
        return choice, position + 1

    def __str__(self):
        return ' '.join(map(str, self.sequence))


def parse_schedule(text, n):
    """
    Schedule from its command-line form.

    'round-robin' keeps the declared agent order; 'BA' or 'B,A' gives another
    order (agents missing from it follow in declared order).
    """
    if not text or text == 'round-robin':
        return RoundRobin(n.names)
    if ',' in text:
        names = [part.strip() for part in text.split(',') if part.strip()]
    elif all(len(name) == 1 for name in n.names):
        names = list(text)
    else:
        names = [text]
    unknown = [name for name in names if name not in n.names]
    if unknown:
        raise InputMismatch(f"schedule names unknown agents: {', '.join(unknown)}")
    return RoundRobin(names + [name for name in n.names if name not in names])


@dataclass(frozen=True, eq=False)
class StepRecord:
    rule: str
    agents: tuple
    bindings: dict
    prob: float


@dataclass(frozen=True, eq=False)
class Path:
    steps: tuple
    prob: float
    final: Configuration


@dataclass(frozen=True, eq=False)
class FinalClass:
    """Final configurations identified up to internal bindings."""
    sorts: dict
    couts: dict
    qfinal: QRegisterState

    @classmethod
    def of(cls, c):
        sorts = {a.name: frozenset(a.sort) for a in c.agents}
        couts = {a.name: a.outputs() for a in c.agents}
        return cls(sorts, couts, c.qstate.to_mixed().sorted())

    def matches(self, other, tol=qnum.ATOL):
        if self.sorts != other.sorts or self.couts != other.couts:
            return False
        if set(self.qfinal.qubit_ids) != set(other.qfinal.qubit_ids):
            return False
        return qnum.state_distance(self.qfinal, other.qfinal) <= tol

    def signal_key(self, classified):
        """Values of the signal outputs, as a sortable tuple."""
        return tuple(
            (name, o, self.couts[name].get(o))
            for name, (_, o_s) in classified.items() for o in o_s
        )


@dataclass(frozen=True, eq=False)
class PTS:
    cin: dict
    qin: object
    paths: tuple
    transitions: tuple
    schedule: str = ''

    def total_prob(self):
        return sum(prob for _, prob in self.transitions)

    def matches(self, other, tol=qnum.ATOL):
        """Same classes with the same probabilities (order-insensitive)."""
        if len(self.transitions) != len(other.transitions):
            return False
        unused = list(other.transitions)
        for klass, prob in self.transitions:
            for k, (their_class, their_prob) in enumerate(unused):
                if abs(prob - their_prob) <= tol and klass.matches(their_class, tol):
                    del unused[k]
                    break
            else:
                return False
        return True


def merge_paths(paths, tol=qnum.ATOL):
    """Group paths into final classes and sum their probabilities."""
    merged = []
    for path in paths:
        klass = FinalClass.of(path.final)
        for entry in merged:
            if entry[0].matches(klass, tol):
                entry[1].append((path.prob, klass.qfinal))
                break
        else:
            merged.append((klass, [(path.prob, klass.qfinal)]))
    out = []
    for klass, members in merged:
        prob = sum(w for w, _ in members)
        if len(members) == 1:
            out.append((klass, prob))
            continue
        # class state is the probability-weighted mixture of its members
        ids = klass.qfinal.qubit_ids
        rho = sum(w * s.permuted(ids).density() for w, s in members) / prob
        out.append((FinalClass(klass.sorts, klass.couts, QRegisterState.mixed(ids, rho)), prob))
    return out


def input_register(n, qin=None):
    """
    Quantum input of a network without the preparation.

    Args:
        qin: None, a mapping agent -> QRegisterState, or one joint state

    Returns:
        QRegisterState; per-agent inputs are tensored in agent order
    """
    local = {a.name: n.local_inputs(a) for a in n.agents}
    if qin is None:
        qin = {}
    if isinstance(qin, QRegisterState):
        wanted = set(itertools.chain.from_iterable(local.values()))
        missing = wanted - set(qin.qubit_ids)
        if missing:
            raise InputMismatch(f"joint input lacks qubits {list(sort_ids(missing))}")
        if set(qin.qubit_ids) & set(n.prep.qubits):
            raise InputMismatch("joint input overlaps the preparation")
        return qin
    unknown = set(qin) - set(local)
    if unknown:
        raise InputMismatch(f"quantum input for unknown agents: {', '.join(sorted(unknown))}")
    state = QRegisterState.empty()
    for a in n.agents:
        ids = local[a.name]
        given = qin.get(a.name)
        if given is None:
            if ids:
                state = qnum.tensor(state, QRegisterState.basis(ids))
            continue
        if set(given.qubit_ids) != set(ids):
            raise InputMismatch(
                f"agent {a.name} expects input qubits {list(ids)}, got {list(given.qubit_ids)}"
            )
        state = qnum.tensor(state, given)
    return state


def _input_state(n, qin):
    """Joint initial register: the preparation followed by the inputs."""
    prep = n.prep.register() if not n.prep.is_null else QRegisterState.empty()
    return qnum.tensor(prep, input_register(n, qin))


def _initial_envs(n, cin):
    cin = dict(cin or {})
    declared = set(n.classical_inputs())
    unknown = set(cin) - declared
    if unknown:
        raise InputMismatch(f"classical input for undeclared names: {', '.join(sort_names(unknown))}")
    envs = {}
    for a in n.agents:
        env = {}
        for name in a.cin:
            bit = cin.get(name, 0)
            if bit not in (0, 1):
                raise InputMismatch(f"classical input {name} must be 0 or 1, got {bit!r}")
            env[name] = int(bit)
        envs[a.name] = env
    return envs


def init_configuration(n, cin=None, qin=None, validate=True):
    """
    Initial configuration of a network.

    Args:
        n: Network
        cin: mapping of classical input names to bits (missing names are 0)
        qin: None (all inputs |0...0>), a mapping agent -> QRegisterState on
            that agent's input qubits, or one joint QRegisterState covering
            every input qubit (extra qubits ride along untouched)
        validate: run validate_network first

    Returns:
        Configuration
    """
    if validate:
        violations = validate_network(n)
        if violations:
            raise ValidationFailed(violations)
    envs = _initial_envs(n, cin)
    agents = tuple(
        AgentState(a.name, envs[a.name], a.events, a.sort, a.cout) for a in n.agents
    )
    return Configuration(_input_state(n, qin), agents)


def _explore(c, schedule, on_final):
    """Depth-first walk of the branch tree under a schedule."""
    stack = [(c, 1.0, (), schedule.start())]
    while stack:
        config, prob, steps, position = stack.pop()
        if config.done:
            on_final(Path(steps, prob, config))
            continue
        instances = enabled(config)
        if not instances:
            raise Deadlock([a.name for a in config.agents if not a.done])
        choice, position = schedule.pick(config, instances, position)
        successors = step(config, choice)
        rule = 'local' if isinstance(choice, LocalStep) else ('quantum' if choice.quantum else 'classical')
        for succ, lam in reversed(successors):
            bindings = {}
            if isinstance(choice, LocalStep):
                before, after = config.agent(choice.agent).env, succ.agent(choice.agent).env
                bindings = {k: v for k, v in after.items() if k not in before}
            record = StepRecord(rule, choice.actors, bindings, lam)
            stack.append((succ, prob * lam, steps + (record,), position))


def run_schedule(n, cin=None, qin=None, schedule=None, merge=True, validate=True):
    """
    Operational semantics of a network under one schedule.

    Args:
        schedule: RoundRobin / FixedSchedule; defaults to round-robin in agent order
        merge: identify final configurations into classes; with merge=False
            every path is its own transition

    Returns:
        PTS
    """
    schedule = schedule or RoundRobin(n.names)
    c = init_configuration(n, cin, qin, validate=validate)
    paths = []
    _explore(c, schedule, paths.append)
    if merge:
        transitions = merge_paths(paths)
    else:
        transitions = [(FinalClass.of(p.final), p.prob) for p in paths]
    logger.info(
        "schedule %s: %d paths, %d classes", schedule, len(paths), len(transitions)
    )
    return PTS(dict(cin or {}), qin, tuple(paths), tuple(transitions), str(schedule))


def operational(n, cin=None, qin=None, check_schedules=False, tol=qnum.ATOL):
    """
    Operational semantics under the canonical schedule.

    Args:
        check_schedules: also run every other interleaving and raise
            ScheduleDependence if any gives a different PTS
    """
    pts = run_schedule(n, cin, qin)
    if check_schedules:
        from qnetsem.checks import check_schedules as check
        verdict = check(n, cin, qin, tol=tol)
        if not verdict.ok:
            raise ScheduleDependence(verdict)
    return pts


@dataclass(frozen=True, eq=False)
class Outcome:
    """One restricted operation of a denotation."""
    o_e: dict
    o_s: dict
    kraus: KrausSet

    def prob(self, rho):
        return self.kraus.apply(rho).norm2()


@dataclass(frozen=True, eq=False)
class Denotation:
    """
    Quantum operation of a network, for every classical input assignment.

    `table[bits]` lists the restricted operations keyed by signal output;
    `total[bits]` is the union of their elements. `bits` follows
    `cin_names`.
    """
    type: tuple
    in_ids: tuple
    out_ids: tuple
    cin_names: tuple
    table: dict
    total: dict = field(default_factory=dict)

    def assignments(self):
        return list(self.table)

    def outcomes(self, cin=None):
        return self.table[self.key(cin)]

    def key(self, cin=None):
        cin = cin or {}
        return tuple(int(cin.get(name, 0)) for name in self.cin_names)


def _canonical_out(c):
    out = ()
    for a in c.agents:
        out += sort_ids(a.sort)
    return out


def _initial_carriers(n, in_ids):
    """LinOps from the input qubits adjoining each pure component of the preparation."""
    eye = np.eye(2 ** len(in_ids))
    if n.prep.is_null:
        return [LinOp(in_ids, in_ids, eye)]
    carriers = []
    for weight, component in qnum.spectral(n.prep.register()):
        column = np.sqrt(weight) * component.data.reshape(-1, 1)
        carriers.append(LinOp(in_ids, component.qubit_ids + in_ids, np.kron(column, eye)))
    return carriers


def denotational(n):
    """
    Denotational semantics: Kraus elements from the input qubits to the final
    sorts, grouped by signal output, for every classical input assignment.

    Input qubits are ordered by agent position then id; output qubits by agent
    position then id of the final sort.
    """
    violations = validate_network(n)
    if violations:
        raise ValidationFailed(violations)
    classified = classify_outputs(n)
    in_ids = n.input_qubits()
    cin_names = n.classical_inputs()
    order = RoundRobin(n.names)

    table, total = {}, {}
    for bits in itertools.product((0, 1), repeat=len(cin_names)):
        cin = dict(zip(cin_names, bits))
        envs = _initial_envs(n, cin)
        finals = []
        for carrier in _initial_carriers(n, in_ids):
            agents = tuple(AgentState(a.name, envs[a.name], a.events, a.sort, a.cout) for a in n.agents)
            _explore(Configuration(carrier, agents), order, finals.append)

        groups = {}
        for path in finals:
            c = path.final
            out_ids = _canonical_out(c)
            op = c.qstate.reordered(out_ids=out_ids)
            o_e = {name: {o: c.agent(name).env.get(o) for o in classified[name][0]} for name in n.names}
            o_s = {name: {o: c.agent(name).env.get(o) for o in classified[name][1]} for name in n.names}
            key = tuple((name, o, v) for name in n.names for o, v in o_s[name].items())
            if key in groups:
                if groups[key][0] != o_e:
                    logger.warning("external outputs differ between branches for input %s", cin)
                groups[key][2].append(op)
            else:
                groups[key] = (o_e, o_s, [op])
        outcomes = [
            Outcome(o_e, o_s, KrausSet(tuple(ops)))
            for _, (o_e, o_s, ops) in sorted(groups.items(), key=lambda kv: str(kv[0]))
        ]
        table[bits] = outcomes
        total[bits] = KrausSet(tuple(op for outcome in outcomes for op in outcome.kraus))
        logger.debug("input %s: %d classes, %d elements", cin, len(outcomes), len(total[bits]))

    out_ids = total[next(iter(total))].out_ids
    return Denotation(network_type(n), in_ids, out_ids, cin_names, table, total)
