"""
Agents, networks and their composition.

An agent owns a set of qubits (its sort) and runs a finite sequence of
events: local patterns, classical sends/receives and quantum sends/receives.
A network puts agents side by side with a shared preparation state.

validate_network checks the definiteness conditions:
    H0  events only touch qubits in the running sort
    H1  every name is bound before it is read
    H2  sends and receives pair up one-to-one per channel (and do not deadlock)
    H3  names and qubit ids are globally unique
"""

import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from qnetsem import qnum
from qnetsem.calculus import (
    Pattern,
    SignalExpr,
    Violation,
    signal_name,
    validate_pattern,
)
from qnetsem.errors import (
    AgentSetMismatch,
    NameCollision,
    NameMismatch,
    OverlappingIds,
    SortMismatch,
    UnknownQubit,
    ValidationFailed,
)
from qnetsem.qnum import LinOp, QRegisterState, sort_ids

logger = logging.getLogger(__name__)


def name_key(name):
    """Natural sort key: x2 < x10."""
    return [int(part) if part.isdigit() else part for part in re.split(r'(\d+)', str(name))]


def sort_names(names):
    return tuple(sorted(names, key=name_key))


# Events

@dataclass(frozen=True)
class PatternEvent:
    pattern: Pattern
    kind = 'pattern'

    def substituted(self, qubits):
        return PatternEvent(self.pattern.substituted(qubits))

    def __str__(self):
        return f"pattern {self.pattern}"


@dataclass(frozen=True)
class ClassicalSend:
    channel: str
    values: tuple
    kind = 'send'

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(SignalExpr.coerce(v) for v in self.values))

    @property
    def names(self):
        out = set()
        for value in self.values:
            out |= value.names
        return frozenset(out)

    def substituted(self, qubits):
        names = {signal_name(old): signal_name(new) for old, new in qubits.items()}
        return ClassicalSend(self.channel, tuple(v.renamed(names) for v in self.values))

    def __str__(self):
        return f"{self.channel}!{' '.join(map(str, self.values))}"


@dataclass(frozen=True)
class ClassicalRecv:
    channel: str
    names: tuple
    kind = 'recv'

    def __post_init__(self):
        object.__setattr__(self, 'names', tuple(self.names))

    def substituted(self, qubits):
        return self

    def __str__(self):
        return f"{self.channel}?{' '.join(self.names)}"


@dataclass(frozen=True)
class QuantumSend:
    channel: str
    qubit: object
    kind = 'qsend'

    def substituted(self, qubits):
        return QuantumSend(self.channel, qubits.get(self.qubit, self.qubit))

    def __str__(self):
        return f"{self.channel}!{self.qubit}"


@dataclass(frozen=True)
class QuantumRecv:
    channel: str
    placeholder: object
    kind = 'qrecv'

    def substituted(self, qubits):
        return QuantumRecv(self.channel, qubits.get(self.placeholder, self.placeholder))

    def __str__(self):
        return f"{self.channel}?{self.placeholder}"


SENDS = ('send', 'qsend')
RECVS = ('recv', 'qrecv')


def _arity(event):
    if event.kind == 'send':
        return len(event.values)
    if event.kind == 'recv':
        return len(event.names)
    return 1


def _is_quantum(event):
    return event.kind in ('qsend', 'qrecv')


@dataclass(frozen=True)
class Agent:
    """
    A named party: classical inputs `cin`, classical outputs `cout`, initial
    sort and its event sequence.
    """
    name: str
    cin: frozenset = frozenset()
    cout: frozenset = frozenset()
    sort: frozenset = frozenset()
    events: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'cin', frozenset(self.cin))
        object.__setattr__(self, 'cout', frozenset(self.cout))
        object.__setattr__(self, 'sort', frozenset(self.sort))
        object.__setattr__(self, 'events', tuple(self.events))

    @classmethod
    def null(cls, name):
        return cls(name)

    @classmethod
    def build(cls, name, sort, events, cin=(), cout=()):
        """
        Agent whose pattern events get their inputs from the running sort.

        Each pattern's inputs become its space intersected with the qubits
        the agent holds when the pattern runs; its outputs are the unmeasured
        part of its space.
        """
        running = set(sort)
        fixed = []
        for event in events:
            if isinstance(event, PatternEvent):
                p = event.pattern
                p = Pattern.build(p.commands, inputs=p.space & running, space=p.space)
                event = PatternEvent(p)
            fixed.append(event)
            running = _advance(running, event)
        return cls(name, frozenset(cin), frozenset(cout), frozenset(sort), tuple(fixed))

    @property
    def is_null(self):
        return not (self.cin or self.cout or self.sort or self.events)

    def substituted(self, qubits):
        return Agent(
            self.name, self.cin, self.cout,
            frozenset(qubits.get(q, q) for q in self.sort),
            tuple(e.substituted(qubits) for e in self.events),
        )

    def __str__(self):
        return f"{self.name}:{{{','.join(map(str, sort_ids(self.sort)))}}}"


def _advance(running, event):
    if isinstance(event, PatternEvent):
        return (set(running) - event.pattern.inputs) | event.pattern.outputs
    if isinstance(event, QuantumSend):
        return set(running) - {event.qubit}
    if isinstance(event, QuantumRecv):
        return set(running) | {event.placeholder}
    return set(running)


def output_sort(agent):
    """
    Sort of an agent after all its events, by symbolic replay.

    Raises:
        UnknownQubit: a pattern input or a quantum send refers to a qubit
            the agent does not hold at that point
    """
    running = set(agent.sort)
    for index, event in enumerate(agent.events):
        if isinstance(event, PatternEvent):
            for q in sort_ids(event.pattern.inputs - running):
                raise UnknownQubit(q, f"agent {agent.name}, event {index}")
        elif isinstance(event, QuantumSend) and event.qubit not in running:
            raise UnknownQubit(event.qubit, f"agent {agent.name}, event {index}")
        running = _advance(running, event)
    return frozenset(running)


def referenced_qubits(agent):
    """Every qubit id an agent's program mentions (sorts, pattern spaces, sends)."""
    out = set(agent.sort)
    for event in agent.events:
        if isinstance(event, PatternEvent):
            out |= event.pattern.space
        elif isinstance(event, QuantumSend):
            out.add(event.qubit)
        elif isinstance(event, QuantumRecv):
            out.add(event.placeholder)
    return out


@dataclass(frozen=True, eq=False)
class Preparation:
    """
    The shared initial state. Either entangle pairs applied to fresh |+>
    qubits or an explicit register state.
    """
    qubits: tuple = ()
    entangle: tuple = ()
    state: QRegisterState = None

    def __post_init__(self):
        if self.state is not None:
            object.__setattr__(self, 'qubits', self.state.qubit_ids)
        else:
            qubits = set(self.qubits)
            for i, j in self.entangle:
                qubits.update((i, j))
            object.__setattr__(self, 'qubits', sort_ids(qubits))
        object.__setattr__(self, 'entangle', tuple(tuple(p) for p in self.entangle))

    @classmethod
    def null(cls):
        return cls()

    @property
    def is_null(self):
        return not self.qubits

    @property
    def is_explicit(self):
        return self.state is not None

    def register(self):
        """The preparation as a QRegisterState on sorted ids (or its explicit ids)."""
        if self.state is not None:
            return self.state
        out = QRegisterState.plus(self.qubits)
        for i, j in self.entangle:
            out = qnum.embed_apply(LinOp((i, j), (i, j), qnum.CZ), out)
        return out

    def tensor(self, other):
        clash = set(self.qubits) & set(other.qubits)
        if clash:
            raise OverlappingIds(clash)
        if not self.is_explicit and not other.is_explicit:
            return Preparation(self.qubits + other.qubits, self.entangle + other.entangle)
        return Preparation(state=qnum.tensor(self.register(), other.register()))

    def __eq__(self, other):
        if not isinstance(other, Preparation):
            return NotImplemented
        if set(self.qubits) != set(other.qubits):
            return False
        if not self.qubits:
            return True
        return qnum.state_distance(self.register(), other.register()) <= qnum.ATOL

    __hash__ = None

    def __str__(self):
        if self.is_explicit:
            return f"explicit state on {list(self.qubits)}"
        return ' '.join(f"E({i},{j})" for i, j in self.entangle) or 'null'


@dataclass(frozen=True)
class Network:
    agents: tuple = ()
    prep: Preparation = field(default_factory=Preparation.null)
    name: str = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'agents', tuple(self.agents))

    @property
    def names(self):
        return tuple(a.name for a in self.agents)

    def agent(self, name):
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(name)

    def local_inputs(self, agent):
        """Qubits an agent receives from outside the network (I = Q minus shared)."""
        return sort_ids(set(agent.sort) - set(self.prep.qubits))

    def input_qubits(self):
        """All local input qubits, ordered by agent position then id."""
        out = ()
        for a in self.agents:
            out += self.local_inputs(a)
        return out

    def classical_inputs(self):
        """All classical input names, ordered by agent position then name."""
        out = ()
        for a in self.agents:
            out += sort_names(a.cin)
        return out

    def with_name(self, name):
        return Network(self.agents, self.prep, name)


def all_qubits(n):
    out = set(n.prep.qubits)
    for a in n.agents:
        out |= referenced_qubits(a)
    return out


# Channel pairing

@dataclass(frozen=True)
class ChannelPair:
    """The k-th send on a channel matched with the k-th receive."""
    channel: str
    sender: str
    send_index: int
    send: object
    receiver: str
    recv_index: int
    recv: object


def _channel_events(n):
    by_channel = defaultdict(lambda: ([], []))
    for a in n.agents:
        for index, event in enumerate(a.events):
            if event.kind in SENDS:
                by_channel[event.channel][0].append((a.name, index, event))
            elif event.kind in RECVS:
                by_channel[event.channel][1].append((a.name, index, event))
    return by_channel


def _pairing(n):
    """Positional channel pairing plus the H2 violations it runs into."""
    pairs = []
    violations = []
    for channel in sorted(_channel_events(n)):
        sends, recvs = _channel_events(n)[channel]
        senders = sorted({s[0] for s in sends})
        receivers = sorted({r[0] for r in recvs})
        if len(senders) > 1:
            violations.append(Violation('H2', f"H2: channel {channel} has several senders: {', '.join(senders)}"))
        if len(receivers) > 1:
            violations.append(Violation('H2', f"H2: channel {channel} has several receivers: {', '.join(receivers)}"))
        if senders and senders == receivers:
            violations.append(Violation('H2', f"H2: agent {senders[0]} sends to itself on {channel}", agent=senders[0]))
        if len(sends) != len(recvs):
            agent, index, _ = (sends + recvs)[-1]
            violations.append(Violation(
                'H2', f"H2: channel {channel} has {len(sends)} sends and {len(recvs)} receives",
                agent=agent, index=index,
            ))
        for (s_agent, s_index, send), (r_agent, r_index, recv) in zip(sends, recvs):
            if _is_quantum(send) != _is_quantum(recv):
                violations.append(Violation(
                    'H2', f"H2: channel {channel} mixes classical and quantum messages",
                    agent=r_agent, index=r_index,
                ))
            elif _arity(send) != _arity(recv):
                violations.append(Violation(
                    'H2', f"H2: channel {channel} sends {_arity(send)} values but receives {_arity(recv)}",
                    agent=r_agent, index=r_index,
                ))
            pairs.append(ChannelPair(channel, s_agent, s_index, send, r_agent, r_index, recv))
    return pairs, violations


def channel_pairs(n):
    """
    Send/receive pairs of a network in channel order.

    Raises:
        ValidationFailed: the channels do not pair up
    """
    pairs, violations = _pairing(n)
    if violations:
        raise ValidationFailed(violations)
    return pairs


def _skeleton_blocked(n, pairs):
    """Agents left blocked when running the communication skeleton, if any."""
    partner = {}
    for p in pairs:
        partner[(p.sender, p.send_index)] = (p.receiver, p.recv_index)
        partner[(p.receiver, p.recv_index)] = (p.sender, p.send_index)
    heads = {a.name: 0 for a in n.agents}
    lengths = {a.name: len(a.events) for a in n.agents}
    events = {a.name: a.events for a in n.agents}
    progress = True
    while progress:
        progress = False
        for name in heads:
            while heads[name] < lengths[name] and events[name][heads[name]].kind == 'pattern':
                heads[name] += 1
                progress = True
        for name in heads:
            if heads[name] >= lengths[name]:
                continue
            other = partner.get((name, heads[name]))
            if other and heads[other[0]] == other[1]:
                heads[name] += 1
                heads[other[0]] += 1
                progress = True
    return [name for name in heads if heads[name] < lengths[name]]


def validate_network(n):
    """
    Check a network against H0-H3, sort disjointness, preparation coverage
    and pattern well-formedness.

    Returns:
        list of Violation (empty when valid)
    """
    violations = []

    seen_names = set()
    for a in n.agents:
        if a.name in seen_names:
            violations.append(Violation('H3', f"H3: duplicate agent name {a.name}", agent=a.name))
        seen_names.add(a.name)

    owner = {}
    for a in n.agents:
        for q in sort_ids(a.sort):
            if q in owner:
                violations.append(Violation(
                    'disjoint', f"H3: sorts overlap: qubit {q} owned by {owner[q]} and {a.name}",
                    agent=a.name, qubit=q,
                ))
            else:
                owner[q] = a.name
    for q in n.prep.qubits:
        if q not in owner:
            violations.append(Violation('prep', f"H0: preparation qubit not owned by any agent: {q}", qubit=q))

    ids_in_use = set(owner) | set(n.prep.qubits)
    name_owner = {}
    for a in n.agents:
        running = set(a.sort)
        bound = set(a.cin)
        local_names = set(a.cin)
        for index, event in enumerate(a.events):
            where = dict(agent=a.name, index=index)
            if isinstance(event, PatternEvent):
                p = event.pattern
                for v in validate_pattern(p):
                    violations.append(Violation('pattern', f"invalid pattern: {v.message}", qubit=v.qubit, **where))
                expected = p.space & running
                if p.inputs != expected:
                    for q in sort_ids(p.inputs ^ expected):
                        violations.append(Violation(
                            'H0', f"H0: pattern input {q} does not match the sort of {a.name}", qubit=q, **where,
                        ))
                for q in p.prepared:
                    if q in ids_in_use:
                        violations.append(Violation('H3', f"H3: qubit id reused: {q}", qubit=q, **where))
                    ids_in_use.add(q)
                for name in sort_names(p.free_names - bound):
                    violations.append(Violation('H1', f"H1: name {name} used before it is bound", **where))
                for name in sort_names(p.signals & bound):
                    violations.append(Violation('H3', f"H3: name {name} bound twice", **where))
                bound |= p.signals
                local_names |= p.signals
            elif isinstance(event, QuantumSend):
                if event.qubit not in running:
                    violations.append(Violation(
                        'H0', f"H0: qubit {event.qubit} not in the sort of {a.name}", qubit=event.qubit, **where,
                    ))
            elif isinstance(event, QuantumRecv):
                if event.placeholder in running:
                    violations.append(Violation(
                        'H3', f"H3: placeholder {event.placeholder} already held by {a.name}", **where,
                    ))
            elif isinstance(event, ClassicalSend):
                for name in sort_names(event.names - bound):
                    violations.append(Violation('H1', f"H1: name {name} used before it is bound", **where))
            elif isinstance(event, ClassicalRecv):
                for name in event.names:
                    if name in bound:
                        violations.append(Violation('H3', f"H3: name {name} bound twice", **where))
                    bound.add(name)
                    local_names.add(name)
            running = _advance(running, event)
        for name in sort_names(a.cout - bound):
            violations.append(Violation('H1', f"H1: output {name} is never bound", agent=a.name))
        for name in sort_names(local_names):
            if name in name_owner and name_owner[name] != a.name:
                violations.append(Violation(
                    'H3', f"H3: name {name} used by {name_owner[name]} and {a.name}", agent=a.name,
                ))
            name_owner.setdefault(name, a.name)

    pairs, pairing_violations = _pairing(n)
    violations.extend(pairing_violations)
    if not pairing_violations:
        blocked = _skeleton_blocked(n, pairs)
        if blocked:
            violations.append(Violation('H2', f"H2: communication deadlock: {', '.join(blocked)} blocked"))

    logger.debug("validated network %s: %d violations", n.name, len(violations))
    return violations


def require_valid(n):
    violations = validate_network(n)
    if violations:
        raise ValidationFailed(violations)
    return n


# Static analysis

def resolve_network(n):
    """
    Replace every quantum-receive placeholder by the qubit id sent to it.

    Returns:
        Network whose events mention concrete qubit ids only
    """
    pairs = [p for p in channel_pairs(n) if p.send.kind == 'qsend']
    mapping = {}
    for p in pairs:
        mapping[(p.receiver, p.recv.placeholder)] = (p.sender, p.send.qubit)

    def chase(agent, ref):
        hops = 0
        while (agent, ref) in mapping and hops <= len(mapping):
            agent, ref = mapping[(agent, ref)]
            hops += 1
        return ref

    agents = []
    for a in n.agents:
        subs = {}
        for (receiver, placeholder) in mapping:
            if receiver == a.name:
                target = chase(receiver, placeholder)
                if target != placeholder:
                    subs[placeholder] = target
        agents.append(a.substituted(subs) if subs else a)
    return Network(tuple(agents), n.prep, n.name)


def network_type(n):
    """
    Type of a network: local input qubits and final sort of every agent.

    Shared preparation qubits are internal and do not appear in the type.

    Returns:
        (dict agent -> sorted input ids, dict agent -> sorted output sort)
    """
    resolved = resolve_network(n)
    initial = {a.name: resolved.local_inputs(a) for a in resolved.agents}
    final = {a.name: sort_ids(output_sort(a)) for a in resolved.agents}
    return initial, final


def classify_outputs(n):
    """
    Split every agent's classical outputs into external and signal outputs.

    A name is a signal output when its value depends on some measurement
    outcome, directly or through classical messages.

    Returns:
        dict agent -> (o_e, o_s) as naturally sorted tuples
    """
    tainted = set()
    for a in n.agents:
        for event in a.events:
            if isinstance(event, PatternEvent):
                tainted |= event.pattern.signals
    classical = [p for p in channel_pairs(n) if p.send.kind == 'send']
    changed = True
    while changed:
        changed = False
        for p in classical:
            for value, name in zip(p.send.values, p.recv.names):
                if value.names & tainted and name not in tainted:
                    tainted.add(name)
                    changed = True
    out = {}
    for a in n.agents:
        o_s = sort_names(a.cout & tainted)
        o_e = sort_names(a.cout - tainted)
        out[a.name] = (o_e, o_s)
    return out


# Composition

def agent_compose(first, second):
    """
    Run `second` after `first` on the same agent.

    i = i1 | (i2 - o1), o = o1 | o2, Q = Q1 | (Q2 - Q1') where Q1' is the
    output sort of `first`.
    """
    if first.name != second.name:
        raise NameMismatch(first.name, second.name)
    after_first = output_sort(first)
    extra = set(second.sort) - after_first
    clash = extra & referenced_qubits(first)
    if clash:
        raise SortMismatch(first.name, clash)
    return Agent(
        first.name,
        first.cin | (second.cin - first.cout),
        first.cout | second.cout,
        first.sort | extra,
        first.events + second.events,
    )


def net_seq_compose(n1, n2, pad=False):
    """
    Sequential composition: each agent runs its n1 program, then its n2 one.

    Args:
        pad: add null agents for names present in only one network

    Raises:
        AgentSetMismatch, OverlappingIds: a qubit would end up in two sorts
    """
    names1, names2 = list(n1.names), list(n2.names)
    if set(names1) != set(names2) and not pad:
        raise AgentSetMismatch(names1, names2)
    prep = n1.prep.tensor(n2.prep)
    order = names1 + [name for name in names2 if name not in names1]
    agents = []
    for name in order:
        a1 = n1.agent(name) if name in names1 else Agent.null(name)
        a2 = n2.agent(name) if name in names2 else Agent.null(name)
        agents.append(agent_compose(a1, a2))
    owned = set()
    for a in agents:
        if owned & a.sort:
            raise OverlappingIds(owned & a.sort)
        owned |= a.sort
    return Network(tuple(agents), prep)


def net_par_compose(n1, n2):
    """Parallel composition of networks with disjoint agents and qubits."""
    collide = set(n1.names) & set(n2.names)
    if collide:
        raise NameCollision(collide)
    clash = all_qubits(n1) & all_qubits(n2)
    if clash:
        raise OverlappingIds(clash)
    return Network(n1.agents + n2.agents, n1.prep.tensor(n2.prep))


def entangle_prep(*pairs):
    """Preparation of E_ij over |+> qubits for the given pairs."""
    return Preparation(entangle=tuple(pairs))


def explicit_prep(qubit_ids, amplitudes):
    return Preparation(state=QRegisterState.pure(qubit_ids, np.asarray(amplitudes, dtype=complex)))
