"""
Semantic checks on networks: equivalence of denotations, schedule
independence, entanglement context, compositionality and agreement between
the operational and denotational semantics.

Every check returns a Verdict; a failed check is a result, not an error.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from qnetsem import qnum
from qnetsem.netmodel import (
    ClassicalRecv,
    ClassicalSend,
    PatternEvent,
    QuantumRecv,
    QuantumSend,
    all_qubits,
    classify_outputs,
    net_par_compose,
    net_seq_compose,
    require_valid,
)
from qnetsem.qnum import KrausSet, LinOp, QRegisterState
from qnetsem.semantics import (
    FixedSchedule,
    LocalStep,
    Rendezvous,
    denotational,
    input_register,
    run_schedule,
)

logger = logging.getLogger(__name__)

# bound on enumerated interleavings
MAX_SCHEDULES = 10_000

# bound on the qubit pairings `equivalent` tries
MAX_RELABELINGS = 5040


@dataclass(frozen=True, eq=False)
class Verdict:
    """
    Outcome of a check.

    Args:
        ok: whether the check passed
        check: name of the check
        witness: first counterexample (None when ok)
        deviation: largest distance observed
        table: per-case summary
    """
    ok: bool
    check: str
    witness: dict = None
    deviation: float = 0.0
    table: pd.DataFrame = field(default_factory=pd.DataFrame)

    def __bool__(self):
        return self.ok


def _positional(outcome_dict, names):
    """Output values as a tuple ordered by agent position then name order."""
    return tuple(tuple(outcome_dict[name].values()) for name in names)


def _choi(ops, in_ids, out_ids):
    ops = [op.reordered(in_ids, out_ids) for op in ops]
    if not ops:
        dim = 2 ** (len(in_ids) + len(out_ids))
        return np.zeros((dim, dim), dtype=complex)
    return qnum.choi(KrausSet(tuple(ops)))


def _signature(d):
    initial, final = d.type
    return [(name, len(initial[name]), len(final[name])) for name in initial]


def _flat(parts):
    return tuple(q for part in parts for q in part)


def _relabelings(d, names):
    """
    Candidate (input order, output order) pairs for d: the qubits of each
    agent permuted among themselves, agents kept in position.

    Falls back to ascending ids when there are more than MAX_RELABELINGS.
    """
    initial, final = d.type
    count = math.prod(math.factorial(len(initial[name])) * math.factorial(len(final[name])) for name in names)
    if count > MAX_RELABELINGS:
        logger.warning("%d qubit pairings; comparing by ascending ids only", count)
        return [(d.in_ids, d.out_ids)]
    ins = itertools.product(*(itertools.permutations(initial[name]) for name in names))
    outs = itertools.product(*(itertools.permutations(final[name]) for name in names))
    return itertools.product(map(_flat, ins), list(map(_flat, outs)))


def equivalent(n1, n2, tol=qnum.ATOL):
    """
    Decide whether two networks have the same semantics.

    Agents and classical names are matched by position: the k-th agent of n1
    with the k-th of n2, names in natural order. Qubits are matched by any
    bijection within an agent; the networks are equivalent when one
    bijection makes every restricted channel agree.

    Returns:
        Verdict; the witness names the distinguishing input, class and the
        smallest distance any qubit pairing reaches
    """
    d1, d2 = denotational(n1), denotational(n2)
    c1, c2 = classify_outputs(n1), classify_outputs(n2)
    shape1 = [(i, o, len(c1[name][0]), len(c1[name][1])) for name, i, o in _signature(d1)]
    shape2 = [(i, o, len(c2[name][0]), len(c2[name][1])) for name, i, o in _signature(d2)]
    cin1 = [len(n1.agents[k].cin) for k in range(len(n1.agents))]
    cin2 = [len(n2.agents[k].cin) for k in range(len(n2.agents))]
    if shape1 != shape2 or cin1 != cin2:
        witness = {
            'reason': 'types differ',
            'first': shape1, 'second': shape2,
            'first_cin': cin1, 'second_cin': cin2,
        }
        return Verdict(False, 'equivalent', witness)

    names1, names2 = n1.names, n2.names
    matched = []
    for bits in d1.assignments():
        by_key1 = {_positional(o.o_s, names1): o for o in d1.table[bits]}
        by_key2 = {_positional(o.o_s, names2): o for o in d2.table[bits]}
        if set(by_key1) != set(by_key2):
            witness = {
                'reason': 'signal outputs differ', 'input': bits,
                'first': sorted(by_key1), 'second': sorted(by_key2),
            }
            return Verdict(False, 'equivalent', witness)
        for key in sorted(by_key1):
            o1, o2 = by_key1[key], by_key2[key]
            if _positional(o1.o_e, names1) != _positional(o2.o_e, names2):
                witness = {'reason': 'external outputs differ', 'input': bits, 'class': key}
                return Verdict(False, 'equivalent', witness)
            matched.append((bits, key, _choi(o1.kraus, d1.in_ids, d1.out_ids), o2))

    best = None
    for in_order, out_order in _relabelings(d2, names2):
        rows = []
        worst, where = 0.0, None
        for bits, key, reference, o2 in matched:
            dist = qnum.frob_dist(reference, _choi(o2.kraus, in_order, out_order))
            rows.append({'input': str(bits), 'class': str(key), 'distance': dist})
            if where is None or dist > worst:
                worst, where = dist, (bits, key)
        if worst <= tol:
            logger.debug("qubits paired as %s -> %s", d1.in_ids + d1.out_ids, in_order + out_order)
            return Verdict(True, 'equivalent', None, worst, pd.DataFrame(rows))
        if best is None or worst < best[0]:
            pairing = dict(zip(d1.in_ids, in_order)), dict(zip(d1.out_ids, out_order))
            best = (worst, where, pairing, rows)

    worst, (bits, key), (pair_in, pair_out), rows = best
    witness = {
        'reason': 'channels differ', 'input': bits, 'class': key, 'distance': worst,
        'inputs': pair_in, 'outputs': pair_out,
    }
    return Verdict(False, 'equivalent', witness, worst, pd.DataFrame(rows))


def interleavings(n, limit=MAX_SCHEDULES):
    """
    All maximal interleavings of a network's communication skeleton.

    Pattern events are always enabled; a rendezvous is enabled when both
    agents have the matching send and receive at the head of their sequence.

    Returns:
        (list of rule-instance sequences, truncated flag)
    """
    events = {a.name: a.events for a in n.agents}
    order = n.names
    found = []
    truncated = False

    def options(heads):
        out = []
        for name in order:
            if heads[name] < len(events[name]) and isinstance(events[name][heads[name]], PatternEvent):
                out.append(LocalStep(name))
        for sender in order:
            if heads[sender] >= len(events[sender]):
                continue
            send = events[sender][heads[sender]]
            if not isinstance(send, (ClassicalSend, QuantumSend)):
                continue
            wanted = QuantumRecv if isinstance(send, QuantumSend) else ClassicalRecv
            for receiver in order:
                if receiver == sender or heads[receiver] >= len(events[receiver]):
                    continue
                recv = events[receiver][heads[receiver]]
                if isinstance(recv, wanted) and recv.channel == send.channel:
                    out.append(Rendezvous(sender, receiver, send.channel, wanted is QuantumRecv))
                    break
        return out

    stack = [({name: 0 for name in order}, ())]
    while stack:
        heads, sequence = stack.pop()
        choices = options(heads)
        if not choices:
            found.append(sequence)
            if len(found) >= limit:
                truncated = bool(stack)
                break
            continue
        for choice in reversed(choices):
            moved = dict(heads)
            for actor in choice.actors:
                moved[actor] += 1
            stack.append((moved, sequence + (choice,)))
    if truncated:
        logger.warning("more than %d schedules; checking the first %d only", limit, limit)
    return found, truncated


def check_schedules(n, cin=None, qin=None, tol=qnum.ATOL, limit=MAX_SCHEDULES):
    """
    Run every interleaving and compare the resulting PTSs.

    Returns:
        Verdict; the witness holds the first pair of schedules that disagree
    """
    require_valid(n)
    sequences, truncated = interleavings(n, limit)
    rows = []
    reference = None
    witness = None
    for index, sequence in enumerate(sequences):
        schedule = FixedSchedule(sequence)
        pts = run_schedule(n, cin, qin, schedule, validate=False)
        total = pts.total_prob()
        same = reference is None or pts.matches(reference, tol)
        rows.append({
            'schedule': str(schedule), 'classes': len(pts.transitions),
            'total_prob': total, 'matches': same,
        })
        if witness is None and abs(total - 1) > tol:
            witness = {'reason': 'probabilities do not sum to one', 'schedule': str(schedule), 'total': total}
        if witness is None and not same:
            witness = {
                'reason': 'schedules disagree',
                'first': rows[0]['schedule'], 'second': str(schedule),
            }
        if reference is None:
            reference = pts
    logger.info("checked %d schedules%s", len(sequences), ' (truncated)' if truncated else '')
    return Verdict(witness is None, 'schedules', witness, 0.0, pd.DataFrame(rows))


def _context_ids(n, extra):
    used = {str(q) for q in all_qubits(n)}
    ids = []
    k = 0
    while len(ids) < extra:
        candidate = f"ctx{k}"
        if candidate not in used:
            ids.append(candidate)
        k += 1
    return tuple(ids)


def _mixture(pts):
    """Probability-weighted sum of the final class states."""
    ids = None
    rho = None
    for klass, prob in pts.transitions:
        state = klass.qfinal if ids is None else klass.qfinal.permuted(ids)
        if ids is None:
            ids = state.qubit_ids
            rho = prob * state.density()
        else:
            rho = rho + prob * state.density()
    return QRegisterState.mixed(ids, rho)


def check_context(n, extra=1, trials=20, seed=0, cin=None, tol=qnum.ATOL):
    """
    Feed one half of random joint states through the network.

    For each trial a random state on the network inputs plus `extra` context
    qubits is run operationally (the context rides along untouched) and
    compared with the Kraus elements applied to the input half.

    Returns:
        Verdict with the largest Frobenius deviation
    """
    d = denotational(n)
    ops = d.total[d.key(cin)]
    context = _context_ids(n, extra)
    ids = d.in_ids + context
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for trial in range(trials):
        if trial % 2 == 0:
            joint = qnum.random_pure(ids, rng)
        else:
            joint = qnum.random_density(ids, rng, rank=2)
        pts = run_schedule(n, cin, joint, validate=False)
        observed = _mixture(pts)
        predicted = ops.apply(joint)
        deviation = qnum.state_distance(predicted, observed)
        worst = max(worst, deviation)
        rows.append({'trial': trial, 'pure': joint.is_pure, 'deviation': deviation})
    ok = worst <= tol
    witness = None if ok else {'reason': 'context not preserved', 'deviation': worst}
    return Verdict(ok, 'context', witness, worst, pd.DataFrame(rows))


def _merge_outputs(*outcomes):
    merged = {}
    for outcome in outcomes:
        for part in (outcome.o_e, outcome.o_s):
            for name, values in part.items():
                merged.setdefault(name, {}).update(values)
    return merged


def _restrict(outputs, classified, index):
    return tuple(
        (name, o, outputs.get(name, {}).get(o))
        for name in classified for o in classified[name][index]
    )


def _compare_classes(composed, predicted, tol):
    """
    Compare composed-network outcomes with predicted (o_e, ops) per o_s key.

    Returns:
        (worst distance, rows, witness or None)
    """
    d, classified = composed
    rows = []
    worst = 0.0
    for bits, expected in predicted.items():
        actual = {}
        for outcome in d.table[bits]:
            merged = _merge_outputs(outcome)
            actual[_restrict(merged, classified, 1)] = (_restrict(merged, classified, 0), list(outcome.kraus))
        for key in sorted(set(actual) | set(expected), key=str):
            o_e_a, ops_a = actual.get(key, (None, []))
            o_e_p, ops_p = expected.get(key, (None, []))
            dist = qnum.frob_dist(_choi(ops_a, d.in_ids, d.out_ids), _choi(ops_p, d.in_ids, d.out_ids))
            worst = max(worst, dist)
            rows.append({'input': str(bits), 'class': str(key), 'distance': dist})
            if dist > tol:
                return worst, rows, {'reason': 'channels differ', 'input': bits, 'class': key, 'distance': dist}
            if ops_a and ops_p and o_e_a != o_e_p:
                return worst, rows, {'reason': 'external outputs differ', 'input': bits, 'class': key}
    return worst, rows, None


def check_compose(n1, n2, mode='seq', tol=qnum.ATOL):
    """
    Compare the semantics of a composed network with the composition of the
    two semantics.

    seq: restricted operations compose as L2 . (L1 (x) I) with the outputs of
    n1 feeding the classical inputs of n2. par: restricted operations tensor.
    """
    if mode == 'seq':
        composed = net_seq_compose(n1, n2, pad=True)
    elif mode == 'par':
        composed = net_par_compose(n1, n2)
    else:
        raise ValueError(f"unknown composition mode: {mode!r}")
    dc = denotational(composed)
    classified = classify_outputs(composed)
    d1, d2 = denotational(n1), denotational(n2)

    predicted = {}
    for bits in dc.assignments():
        cin = dict(zip(dc.cin_names, bits))
        groups = {}
        for o1 in d1.outcomes(cin):
            if mode == 'par':
                seconds = d2.outcomes(cin)
            else:
                # outputs of an agent feed the classical inputs of the same agent only
                given = {**cin}
                for name, values in _merge_outputs(o1).items():
                    if name in n2.names:
                        wanted = n2.agent(name).cin
                        given.update({k: v for k, v in values.items() if k in wanted})
                seconds = d2.outcomes({k: v for k, v in given.items() if k in d2.cin_names})
            for o2 in seconds:
                if mode == 'par':
                    ops = [qnum.tensor_ops(l1, l2) for l1 in o1.kraus for l2 in o2.kraus]
                else:
                    extra = tuple(q for q in d2.in_ids if q not in d1.out_ids)
                    pad = LinOp.identity(extra)
                    ops = [qnum.compose_ops(l2, qnum.tensor_ops(l1, pad)) for l1 in o1.kraus for l2 in o2.kraus]
                ops = [op for op in ops if op.norm2() > qnum.PRUNE_TOL]
                if not ops:
                    continue
                merged = _merge_outputs(o1, o2)
                key = _restrict(merged, classified, 1)
                entry = groups.setdefault(key, (_restrict(merged, classified, 0), []))
                entry[1].extend(ops)
        predicted[bits] = groups

    worst, rows, witness = _compare_classes((dc, classified), predicted, tol)
    return Verdict(witness is None, f"compose-{mode}", witness, worst, pd.DataFrame(rows))


def check_correspondence(n, cin=None, qin=None, tol=qnum.ATOL):
    """
    Compare the operational classes with the restricted operations: per
    signal output, the summed class probability must equal tr L(rho) and the
    class state L(rho) / tr L(rho).
    """
    d = denotational(n)
    classified = classify_outputs(n)
    pts = run_schedule(n, cin, qin, validate=False)
    rho = input_register(n, qin)

    observed = {}
    for klass, prob in pts.transitions:
        key = klass.signal_key(classified)
        entry = observed.setdefault(key, [0.0, []])
        entry[0] += prob
        entry[1].append((prob, klass.qfinal))

    rows = []
    worst = 0.0
    witness = None
    expected_keys = set()
    for outcome in d.outcomes(cin):
        key = tuple((name, o, outcome.o_s[name][o]) for name in classified for o in classified[name][1])
        after = outcome.kraus.apply(rho)
        p_den = after.norm2()
        if p_den <= qnum.PRUNE_TOL:
            continue
        expected_keys.add(key)
        p_op, members = observed.get(key, [0.0, []])
        dist = float('inf')
        if members:
            ids = after.qubit_ids
            mixture = sum(w * s.permuted(ids).density() for w, s in members) / p_op
            dist = qnum.frob_dist(mixture, after.density() / p_den)
        worst = max(worst, abs(p_op - p_den), dist)
        rows.append({'class': str(key), 'p_operational': p_op, 'p_denotational': p_den, 'state_distance': dist})
        if witness is None and (abs(p_op - p_den) > tol or dist > tol):
            witness = {'reason': 'semantics disagree', 'class': key, 'p_operational': p_op, 'p_denotational': p_den}
    for key in set(observed) - expected_keys:
        if observed[key][0] > tol and witness is None:
            witness = {'reason': 'class missing from denotation', 'class': key}
    return Verdict(witness is None, 'correspondence', witness, worst, pd.DataFrame(rows))
