"""
Built-in protocol networks.

    teleport        A:{1,2} Bell-measures and sends two bits; B:{3} corrects
    direct_channel  A:{1} sends its qubit to B over a quantum channel
    bitflip         one agent applies X conditioned on a measured |+> ancilla
    hadamard_pair   A and B each run the Hadamard pattern, no communication
    superdense      A encodes two bits on half of a shared pair, B decodes
    teleport_chain  n teleportations in sequence, moving an n-qubit input
"""

import logging
import re

from qnetsem.calculus import (
    CorrectX,
    CorrectZ,
    Measure,
    Pattern,
    SignalExpr,
    bell_measure,
    hadamard_pattern,
    signal_name,
)
from qnetsem.errors import UnknownProtocol
from qnetsem.netmodel import (
    Agent,
    ClassicalRecv,
    ClassicalSend,
    Network,
    PatternEvent,
    QuantumRecv,
    QuantumSend,
    entangle_prep,
    net_seq_compose,
    require_valid,
)

logger = logging.getLogger(__name__)


def teleport(sender='A', receiver='B', qubits=(1, 2, 3), channel='c', names=None):
    """
    Teleport the sender's qubit qubits[0] to qubits[2] at the receiver.

    qubits[1] and qubits[2] form the shared entangled pair. The receiver
    binds the two bits under `names` (default x<qubits[1]>, x<qubits[0]>).
    """
    q_in, q_a, q_b = qubits
    names = names or (f"x{q_a}", f"x{q_in}")
    alice = Agent.build(sender, {q_in, q_a}, [
        PatternEvent(bell_measure(q_in, q_a)),
        ClassicalSend(channel, (signal_name(q_a), signal_name(q_in))),
    ])
    bob = Agent.build(receiver, {q_b}, [
        ClassicalRecv(channel, names),
        PatternEvent(Pattern.from_notation([
            CorrectX(q_b, SignalExpr.of(names[0])),
            CorrectZ(q_b, SignalExpr.of(names[1])),
        ])),
    ])
    return Network((alice, bob), entangle_prep((q_a, q_b)), 'teleport')


def direct_channel(sender='A', receiver='B', qubit=1, channel='qc'):
    alice = Agent.build(sender, {qubit}, [QuantumSend(channel, qubit)])
    bob = Agent.build(receiver, set(), [QuantumRecv(channel, qubit)])
    return Network((alice, bob), name='direct_channel')


def bitflip(alpha, observed=True, agent='A', qubit=1, ancilla=2):
    """
    X applied to `qubit` with probability 1 - cos^2(alpha/2).

    The ancilla is prepared in |+> and measured at angle -alpha; with
    `observed` the outcome is a classical output of the agent.
    """
    p = Pattern.from_notation([
        CorrectX(qubit, SignalExpr.of(signal_name(ancilla))),
        Measure(ancilla, -alpha),
    ])
    cout = {signal_name(ancilla)} if observed else set()
    a = Agent.build(agent, {qubit}, [PatternEvent(p)], cout=cout)
    return Network((a,), name='bitflip')


def hadamard_pair():
    a = Agent.build('A', {1}, [PatternEvent(hadamard_pattern(1, 2))])
    b = Agent.build('B', {3}, [PatternEvent(hadamard_pattern(3, 4))])
    return Network((a, b), name='hadamard_pair')


def superdense():
    """
    Superdense coding: A applies X^{x2} Z^{x1} to its half of E(1,2) and sends
    it; B undoes the entangling and measures, yielding s1 = x1 and s2 = x2.
    """
    alice = Agent.build('A', {1}, [
        PatternEvent(Pattern.from_notation([
            CorrectX(1, SignalExpr.of('x2')),
            CorrectZ(1, SignalExpr.of('x1')),
        ])),
        QuantumSend('q', 1),
    ], cin={'x1', 'x2'})
    bob = Agent.build('B', {2}, [
        QuantumRecv('q', 1),
        PatternEvent(bell_measure(1, 2)),
    ], cout={'s1', 's2'})
    return Network((alice, bob), entangle_prep((1, 2)), 'superdense')


def teleport_chain(n, sender='A', receiver='B'):
    """
    Move qubits 1, 4, 7, ... of the sender to 3, 6, 9, ... at the receiver
    by composing n teleportations in sequence.
    """
    if n < 1:
        raise ValueError("a chain needs at least one teleportation")
    out = None
    for k in range(n):
        base = 3 * k
        hop = teleport(sender, receiver, (base + 1, base + 2, base + 3), f"c{k + 1}")
        out = hop if out is None else net_seq_compose(out, hop)
    return out.with_name(f"teleport_chain_{n}")


PROTOCOLS = {
    'teleport': teleport,
    'direct_channel': direct_channel,
    'bitflip': bitflip,
    'hadamard_pair': hadamard_pair,
    'superdense': superdense,
    'teleport_chain': teleport_chain,
}


def library(name, *args, **params):
    """
    A validated library network.

    Raises:
        UnknownProtocol
    """
    if name not in PROTOCOLS:
        raise UnknownProtocol(name, sorted(PROTOCOLS))
    return require_valid(PROTOCOLS[name](*args, **params))


def from_spec(text):
    """
    Library network from a call-like string: 'teleport',
    'bitflip(pi/2, observed)', 'bitflip(0.3, hidden)', 'teleport_chain(2)'.
    """
    from qnetsem.dsl import parse_angle

    match = re.fullmatch(r'\s*(\w+)\s*(?:\((.*)\))?\s*', text)
    if not match:
        raise UnknownProtocol(text, sorted(PROTOCOLS))
    name, arg_text = match.group(1), match.group(2)
    args = [a.strip() for a in arg_text.split(',')] if arg_text and arg_text.strip() else []
    if name == 'bitflip':
        alpha = parse_angle(args[0]) if args else 0.0
        observed = (args[1] if len(args) > 1 else 'observed') != 'hidden'
        return library(name, alpha, observed)
    if name == 'teleport_chain':
        return library(name, int(args[0]) if args else 2)
    return library(name)
