"""
Dense complex linear algebra over registers of named qubits.

States, operators and Kraus sets carry explicit ordered lists of qubit ids;
every operation permutes internally so that callers never reason about
positions. The first id of a register is the most significant tensor factor.
All values are immutable once built.
"""

import logging
from dataclasses import dataclass

import numpy as np

from qnetsem.errors import (
    NotHermitian,
    InvalidState,
    OverlappingIds,
    ShapeMismatch,
    UnknownQubit,
)

logger = logging.getLogger(__name__)

# equality of matrices / probabilities
ATOL = 1e-9
# branches below this squared norm are dropped
PRUNE_TOL = 1e-12

PURE = 'pure'
MIXED = 'mixed'

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def id_key(qubit):
    """Sort key putting integer ids before symbolic (placeholder) ids."""
    if isinstance(qubit, str):
        return (1, 0, qubit)
    return (0, qubit, '')


def sort_ids(ids):
    return tuple(sorted(ids, key=id_key))


def _check_distinct(ids):
    seen = set()
    dupes = set()
    for q in ids:
        if q in seen:
            dupes.add(q)
        seen.add(q)
    if dupes:
        raise OverlappingIds(dupes)


def _frozen(array):
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class QRegisterState:
    """
    Quantum state of an ordered register of qubits.

    Pure states hold an amplitude vector and may be sub-normalized (they
    represent unrenormalized measurement branches). Mixed states hold a
    density matrix with trace at most one.
    """
    qubit_ids: tuple
    data: np.ndarray
    form: str = PURE

    def __post_init__(self):
        ids = tuple(self.qubit_ids)
        _check_distinct(ids)
        object.__setattr__(self, 'qubit_ids', ids)
        dim = 2 ** len(ids)
        data = np.asarray(self.data, dtype=complex)
        if self.form == PURE:
            if data.size != dim:
                raise ShapeMismatch((dim,), data.shape)
            data = data.reshape(dim)
            norm2 = float(np.vdot(data, data).real)
            if norm2 > 1 + ATOL:
                raise InvalidState(f"squared norm {norm2:.12g} exceeds one")
        elif self.form == MIXED:
            if data.shape != (dim, dim):
                raise ShapeMismatch((dim, dim), data.shape)
            deviation = float(np.linalg.norm(data - data.conj().T))
            if deviation > ATOL:
                raise NotHermitian(deviation)
            trace = float(np.trace(data).real)
            if trace < -ATOL or trace > 1 + ATOL:
                raise InvalidState(f"trace {trace:.12g} outside [0, 1]")
        else:
            raise ValueError(f"unknown state form: {self.form!r}")
        object.__setattr__(self, 'data', _frozen(data))

    @classmethod
    def pure(cls, qubit_ids, amplitudes):
        return cls(tuple(qubit_ids), amplitudes, PURE)

    @classmethod
    def mixed(cls, qubit_ids, density):
        return cls(tuple(qubit_ids), density, MIXED)

    @classmethod
    def empty(cls):
        """The register with no qubits (amplitude 1)."""
        return cls((), np.ones(1), PURE)

    @classmethod
    def basis(cls, qubit_ids, bits=None):
        ids = tuple(qubit_ids)
        bits = bits or [0] * len(ids)
        index = int(''.join(str(b) for b in bits), 2) if ids else 0
        amps = np.zeros(2 ** len(ids), dtype=complex)
        amps[index] = 1
        return cls.pure(ids, amps)

    @classmethod
    def plus(cls, qubit_ids):
        ids = tuple(qubit_ids)
        amps = np.ones(2 ** len(ids), dtype=complex) / np.sqrt(2 ** len(ids))
        return cls.pure(ids, amps)

    @property
    def n_qubits(self):
        return len(self.qubit_ids)

    @property
    def is_pure(self):
        return self.form == PURE

    def norm2(self):
        """Squared norm (pure) or trace (mixed)."""
        if self.is_pure:
            return float(np.vdot(self.data, self.data).real)
        return float(np.trace(self.data).real)

    def density(self):
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def to_mixed(self):
        if not self.is_pure:
            return self
        return QRegisterState.mixed(self.qubit_ids, self.density())

    def normalized(self):
        norm2 = self.norm2()
        if norm2 <= PRUNE_TOL:
            raise InvalidState("cannot normalize a zero state")
        if self.is_pure:
            return QRegisterState.pure(self.qubit_ids, self.data / np.sqrt(norm2))
        return QRegisterState.mixed(self.qubit_ids, self.data / norm2)

    def permuted(self, order):
        """Return the same state with its ids listed in `order`."""
        order = tuple(order)
        if set(order) != set(self.qubit_ids) or len(order) != self.n_qubits:
            missing = set(order) ^ set(self.qubit_ids)
            raise UnknownQubit(next(iter(missing)), 'permutation')
        if order == self.qubit_ids:
            return self
        n = self.n_qubits
        perm = [self.qubit_ids.index(q) for q in order]
        if self.is_pure:
            data = self.data.reshape((2,) * n).transpose(perm).reshape(-1)
        else:
            data = self.data.reshape((2,) * 2 * n).transpose(perm + [p + n for p in perm])
            data = data.reshape(2 ** n, 2 ** n)
        return QRegisterState(order, data, self.form)

    def sorted(self):
        return self.permuted(sort_ids(self.qubit_ids))

    def relabeled(self, mapping):
        ids = tuple(mapping.get(q, q) for q in self.qubit_ids)
        return QRegisterState(ids, self.data, self.form)


@dataclass(frozen=True, eq=False)
class LinOp:
    """Linear map from the qubits `in_ids` to the qubits `out_ids`."""
    in_ids: tuple
    out_ids: tuple
    matrix: np.ndarray

    def __post_init__(self):
        in_ids, out_ids = tuple(self.in_ids), tuple(self.out_ids)
        _check_distinct(in_ids)
        _check_distinct(out_ids)
        object.__setattr__(self, 'in_ids', in_ids)
        object.__setattr__(self, 'out_ids', out_ids)
        matrix = np.asarray(self.matrix, dtype=complex)
        shape = (2 ** len(out_ids), 2 ** len(in_ids))
        if matrix.shape != shape:
            raise ShapeMismatch(shape, matrix.shape)
        object.__setattr__(self, 'matrix', _frozen(matrix))

    @classmethod
    def identity(cls, qubit_ids):
        ids = tuple(qubit_ids)
        return cls(ids, ids, np.eye(2 ** len(ids)))

    @classmethod
    def single(cls, qubit, matrix):
        return cls((qubit,), (qubit,), matrix)

    def reordered(self, in_ids=None, out_ids=None):
        """Return the same map with inputs/outputs listed in the given order."""
        in_ids = self.in_ids if in_ids is None else tuple(in_ids)
        out_ids = self.out_ids if out_ids is None else tuple(out_ids)
        if set(in_ids) != set(self.in_ids) or len(in_ids) != len(self.in_ids):
            raise UnknownQubit(next(iter(set(in_ids) ^ set(self.in_ids))), 'input order')
        if set(out_ids) != set(self.out_ids) or len(out_ids) != len(self.out_ids):
            raise UnknownQubit(next(iter(set(out_ids) ^ set(self.out_ids))), 'output order')
        n_out, n_in = len(out_ids), len(in_ids)
        perm = [self.out_ids.index(q) for q in out_ids]
        perm += [n_out + self.in_ids.index(q) for q in in_ids]
        matrix = self.matrix.reshape((2,) * (n_out + n_in)).transpose(perm)
        return LinOp(in_ids, out_ids, matrix.reshape(2 ** n_out, 2 ** n_in))

    def norm2(self):
        return float(np.linalg.norm(self.matrix) ** 2)


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Operation elements of a (possibly trace-decreasing) quantum operation."""
    elements: tuple

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise ValueError("a Kraus set needs at least one element")
        first = elements[0]
        for op in elements[1:]:
            if op.in_ids != first.in_ids or op.out_ids != first.out_ids:
                raise ShapeMismatch(
                    (first.out_ids, first.in_ids), (op.out_ids, op.in_ids)
                )
        object.__setattr__(self, 'elements', elements)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def in_ids(self):
        return self.elements[0].in_ids

    @property
    def out_ids(self):
        return self.elements[0].out_ids

    def gram(self):
        """Sum of L^dagger L over the elements."""
        return sum(op.matrix.conj().T @ op.matrix for op in self.elements)

    def is_trace_preserving(self, tol=ATOL):
        return frob_dist(self.gram(), np.eye(2 ** len(self.in_ids))) <= tol

    def is_trace_decreasing(self, tol=ATOL):
        deficit = np.eye(2 ** len(self.in_ids)) - self.gram()
        return bool(np.all(np.linalg.eigvalsh((deficit + deficit.conj().T) / 2) >= -tol))

    def reordered(self, in_ids=None, out_ids=None):
        return KrausSet(tuple(op.reordered(in_ids, out_ids) for op in self.elements))

    def apply(self, state):
        """Apply the operation to the `in_ids` part of `state`; the result is mixed."""
        total = None
        for op in self.elements:
            out = embed_apply(op, state).to_mixed()
            if total is None:
                ids, total = out.qubit_ids, np.array(out.data)
            else:
                total = total + out.permuted(ids).data
        return QRegisterState.mixed(ids, total)


def _apply_rows(tensor, ids, op):
    """
    Contract `op` with the qubit axes of `tensor`.

    `tensor` has one axis of size 2 per id in `ids`, followed by any number of
    trailing axes which are carried along untouched. The output ids take the
    place of the first input id (or are appended when the op has no inputs).

    Returns:
        (new tensor, new id tuple)
    """
    in_set = set(op.in_ids)
    for q in op.in_ids:
        if q not in ids:
            raise UnknownQubit(q)
    rest = [q for q in ids if q not in in_set]
    clash = set(op.out_ids) & set(rest)
    if clash:
        raise OverlappingIds(clash)

    k_in, k_out = len(op.in_ids), len(op.out_ids)
    axes = [ids.index(q) for q in op.in_ids]
    m = op.matrix.reshape((2,) * (k_out + k_in))
    result = np.tensordot(m, tensor, axes=(list(range(k_out, k_out + k_in)), axes))
    at = min(axes) if axes else len(rest)
    result = np.moveaxis(result, list(range(k_out)), list(range(at, at + k_out)))
    return result, tuple(rest[:at]) + op.out_ids + tuple(rest[at:])


def tensor(a, b):
    """
    Joint state of two registers on disjoint qubits.

    Args:
        a: QRegisterState
        b: QRegisterState

    Returns:
        QRegisterState on a.qubit_ids + b.qubit_ids; pure only if both are pure
    """
    clash = set(a.qubit_ids) & set(b.qubit_ids)
    if clash:
        raise OverlappingIds(clash)
    ids = a.qubit_ids + b.qubit_ids
    if a.is_pure and b.is_pure:
        return QRegisterState.pure(ids, np.kron(a.data, b.data))
    return QRegisterState.mixed(ids, np.kron(a.density(), b.density()))


def tensor_ops(a, b):
    """Tensor product of two linear maps on disjoint qubits."""
    for mine, theirs in ((a.in_ids, b.in_ids), (a.out_ids, b.out_ids)):
        clash = set(mine) & set(theirs)
        if clash:
            raise OverlappingIds(clash)
    return LinOp(a.in_ids + b.in_ids, a.out_ids + b.out_ids, np.kron(a.matrix, b.matrix))


def embed_apply(op, state):
    """
    Apply `op` to its qubits of `state`, acting as identity on all others.

    The op's output ids replace its input ids in the register, so a
    projection onto a bra removes the qubit and an isometry can add fresh ones.
    The result is not renormalized.

    Args:
        op: LinOp with in_ids contained in state.qubit_ids
        state: QRegisterState

    Returns:
        QRegisterState of the same form
    """
    ids = state.qubit_ids
    n = len(ids)
    if state.is_pure:
        result, new_ids = _apply_rows(state.data.reshape((2,) * n), ids, op)
        return QRegisterState.pure(new_ids, result.reshape(-1))

    dim = 2 ** n
    half, new_ids = _apply_rows(state.data.reshape((2,) * n + (dim,)), ids, op)
    new_dim = 2 ** len(new_ids)
    # (M rho) -> (M (M rho)^dagger)^dagger = M rho M^dagger
    half = half.reshape(new_dim, dim).conj().T
    full, _ = _apply_rows(half.reshape((2,) * n + (new_dim,)), ids, op)
    return QRegisterState.mixed(new_ids, full.reshape(new_dim, new_dim).conj().T)


def compose_ops(outer, inner):
    """
    Compose `outer` after `inner`, embedding `outer` into inner's outputs.

    Returns:
        LinOp from inner.in_ids to the resulting register
    """
    n = len(inner.out_ids)
    shaped = inner.matrix.reshape((2,) * n + (2 ** len(inner.in_ids),))
    result, new_ids = _apply_rows(shaped, inner.out_ids, outer)
    return LinOp(inner.in_ids, new_ids, result.reshape(2 ** len(new_ids), -1))


def partial_trace(state, keep):
    """
    Trace out every qubit not in `keep`.

    Args:
        state: QRegisterState
        keep: collection of qubit ids to keep (order follows the state)

    Returns:
        mixed QRegisterState on the kept ids
    """
    keep = set(keep)
    for q in keep:
        if q not in state.qubit_ids:
            raise UnknownQubit(q)
    kept = [q for q in state.qubit_ids if q in keep]
    traced = [q for q in state.qubit_ids if q not in keep]
    ordered = state.permuted(kept + traced)
    dk, dt = 2 ** len(kept), 2 ** len(traced)
    if state.is_pure:
        m = ordered.data.reshape(dk, dt)
        rho = m @ m.conj().T
    else:
        rho = np.einsum('ijkj->ik', ordered.data.reshape(dk, dt, dk, dt))
    return QRegisterState.mixed(kept, rho)


def choi(kraus):
    """
    Unnormalized Choi matrix sum_{m,n} |m><n| (x) L(|m><n|).

    The input factor comes first; basis order follows kraus.in_ids and
    kraus.out_ids.

    Args:
        kraus: KrausSet (or a sequence of LinOp with identical ids)

    Returns:
        complex matrix of shape (d_in * d_out, d_in * d_out)
    """
    if not isinstance(kraus, KrausSet):
        kraus = KrausSet(tuple(kraus))
    d = kraus.elements[0].matrix.size
    c = np.zeros((d, d), dtype=complex)
    for op in kraus.elements:
        v = op.matrix.T.reshape(d)
        c += np.outer(v, v.conj())
    return c


def frob_dist(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeMismatch(a.shape, b.shape)
    return float(np.linalg.norm(a - b))


def spectral(state, tol=PRUNE_TOL):
    """
    Decompose a state into weighted orthonormal pure components.

    Components with weight below `tol` are dropped; the rest are listed by
    decreasing weight.

    Returns:
        list of (weight, pure QRegisterState)
    """
    if state.is_pure:
        norm2 = state.norm2()
        return [(norm2, state.normalized())] if norm2 > tol else []
    rho = np.asarray(state.data)
    deviation = float(np.linalg.norm(rho - rho.conj().T))
    if deviation > ATOL:
        raise NotHermitian(deviation)
    weights, vectors = np.linalg.eigh((rho + rho.conj().T) / 2)
    components = []
    for k in np.argsort(-weights, kind='stable'):
        if weights[k] > tol:
            components.append((float(weights[k]), QRegisterState.pure(state.qubit_ids, vectors[:, k])))
    return components


def reconstruct(components, qubit_ids):
    """Inverse of `spectral`: sum of w |v><v| as a mixed state on `qubit_ids`."""
    dim = 2 ** len(qubit_ids)
    rho = np.zeros((dim, dim), dtype=complex)
    for weight, vec in components:
        rho += weight * vec.permuted(qubit_ids).density()
    return QRegisterState.mixed(qubit_ids, rho)


def state_distance(a, b):
    """Frobenius distance between the density matrices of two states on the same ids."""
    return frob_dist(a.density(), b.permuted(a.qubit_ids).density())


def fidelity(a, b):
    """Fidelity between two normalized states on the same qubit ids."""
    b = b.permuted(a.qubit_ids)
    if a.is_pure:
        return float(np.vdot(a.data, b.density() @ a.data).real)
    if b.is_pure:
        return float(np.vdot(b.data, a.density() @ b.data).real)
    weights, vectors = np.linalg.eigh(a.density())
    root = vectors @ np.diag(np.sqrt(np.clip(weights, 0, None))) @ vectors.conj().T
    inner = np.linalg.eigvalsh(root @ b.density() @ root)
    return float(np.sum(np.sqrt(np.clip(inner, 0, None))) ** 2)


def random_pure(qubit_ids, rng):
    """Haar-distributed pure state drawn with a numpy Generator."""
    ids = tuple(qubit_ids)
    dim = 2 ** len(ids)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return QRegisterState.pure(ids, v / np.linalg.norm(v))


def random_density(qubit_ids, rng, rank=None):
    """Random full- (or given-) rank density matrix G G^dagger / tr."""
    ids = tuple(qubit_ids)
    dim = 2 ** len(ids)
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return QRegisterState.mixed(ids, rho / np.trace(rho).real)
