"""
Exceptions raised by qnetsem.

Every error keeps the offending values as attributes so callers (and the
CLI) can report them without parsing messages.
"""


class QNetError(Exception):
    """Base class for all qnetsem errors."""


class OverlappingIds(QNetError):
    def __init__(self, ids):
        self.ids = tuple(sorted(ids, key=str))
        super().__init__(f"qubit ids overlap: {', '.join(map(str, self.ids))}")


class UnknownQubit(QNetError):
    def __init__(self, qubit, where=None):
        self.qubit = qubit
        self.where = where
        msg = f"unknown qubit: {qubit}"
        if where:
            msg += f" ({where})"
        super().__init__(msg)


class InvalidState(QNetError):
    """A register state whose norm or trace is out of range."""


class ShapeMismatch(QNetError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"shape mismatch: expected {expected}, got {got}")


class NotHermitian(QNetError):
    def __init__(self, deviation):
        self.deviation = deviation
        super().__init__(f"matrix is not Hermitian (deviation {deviation:.3e})")


class UnboundName(QNetError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unbound name: {name}")


class InvalidPattern(QNetError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid pattern: " + "; ".join(map(str, self.violations)))


class IncompleteSignals(QNetError):
    def __init__(self, missing):
        self.missing = tuple(sorted(missing, key=str))
        super().__init__(f"no signal given for measured qubits: {', '.join(map(str, self.missing))}")


class NameMismatch(QNetError):
    def __init__(self, first, second):
        self.first = first
        self.second = second
        super().__init__(f"cannot compose agents {first!r} and {second!r}")


class SortMismatch(QNetError):
    def __init__(self, agent, qubits):
        self.agent = agent
        self.qubits = tuple(sorted(qubits, key=str))
        super().__init__(
            f"agent {agent}: second program claims qubits consumed by the first: "
            f"{', '.join(map(str, self.qubits))}"
        )


class AgentSetMismatch(QNetError):
    def __init__(self, first, second):
        self.first = tuple(first)
        self.second = tuple(second)
        super().__init__(f"agent sets differ: {list(self.first)} vs {list(self.second)}")


class NameCollision(QNetError):
    def __init__(self, names):
        self.names = tuple(sorted(names))
        super().__init__(f"agent names collide: {', '.join(self.names)}")


class ValidationFailed(QNetError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("network is not valid: " + "; ".join(map(str, self.violations)))


class InputMismatch(QNetError):
    def __init__(self, message):
        super().__init__(message)


class NotEnabled(QNetError):
    def __init__(self, choice):
        self.choice = choice
        super().__init__(f"rule instance is not enabled: {choice}")


class Deadlock(QNetError):
    def __init__(self, blocked):
        self.blocked = tuple(blocked)
        super().__init__(f"deadlock: agents blocked with events left: {', '.join(self.blocked)}")


class UnknownProtocol(QNetError):
    def __init__(self, name, known):
        self.name = name
        self.known = tuple(known)
        super().__init__(f"unknown protocol {name!r} (known: {', '.join(self.known)})")


class UsageError(QNetError):
    """A command-line argument that names no file or protocol."""


class ScheduleDependence(QNetError):
    def __init__(self, verdict):
        self.verdict = verdict
        super().__init__(f"semantics depends on the schedule: {verdict.witness}")


class DSLError(QNetError):
    """Raised when a DSL source has error diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
