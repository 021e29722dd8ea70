"""
Parser and serializer for the protocol language.

A source file holds one or more networks:

    network TP {
        prepare E(2,3);
        agent A(in: -, out: -) qubits {1, 2} {
            pattern [ M(2, 0); M(1, 0); E(1, 2) ];
            send c (s2, s1)
        }
        agent B qubits {3} {
            recv c (x2, x1);
            pattern [ X(3, x2); Z(3, x1) ]
        }
    }
    network TWICE = seq(TP, TP2);

Command lists are written right-to-left (the last command acts first).
Every diagnostic carries a span into the source text.
"""

import functools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from qnetsem.calculus import CorrectX, CorrectZ, Entangle, Measure, Nil, Pattern, SignalExpr
from qnetsem.errors import DSLError, OverlappingIds, QNetError
from qnetsem.netmodel import (
    Agent,
    ClassicalRecv,
    ClassicalSend,
    Network,
    PatternEvent,
    Preparation,
    QuantumRecv,
    QuantumSend,
    agent_compose,
    explicit_prep,
    net_par_compose,
    net_seq_compose,
    sort_names,
    validate_network,
)
from qnetsem.qnum import sort_ids

logger = logging.getLogger(__name__)

GRAMMAR = r"""
start: item*

?item: network_def
     | network_expr

network_def: "network" NAME "{" prep? agent_def* "}"
network_expr: "network" NAME "=" net_op "(" NAME "," NAME ")" ";"
!net_op: "seq" | "par"

prep: "prepare" prep_item ("," prep_item)* ";"
    | "prepare" "state" "(" qubit_list ")" "[" amp ("," amp)* "]" ";"   -> prep_state
prep_item: "E" "(" qref "," qref ")"   -> prep_entangle
         | "plus" "(" qubit_list ")"   -> prep_plus
amp: "(" SIGNED_NUMBER "," SIGNED_NUMBER ")"

agent_def: "agent" NAME part ("then" part)*
part: io? "qubits" "{" qubit_list? "}" "{" (event ";"?)* "}"
io: "(" "in" ":" name_set "," "out" ":" name_set ")"
name_set: "-"        -> no_names
        | NAME+      -> names

qubit_list: qref ("," qref)*
qref: INT            -> qint
    | NAME           -> qname

event: "pattern" pattern ("over" "{" qubit_list "}")?   -> pattern_event
     | "send" NAME "(" sexpr ("," sexpr)* ")"           -> send_event
     | "recv" NAME "(" NAME ("," NAME)* ")"             -> recv_event
     | "qsend" NAME qref                                -> qsend_event
     | "qrecv" NAME qref                                -> qrecv_event

pattern: cmd_list ("&" cmd_list)*
cmd_list: "[" (command (";" command)*)? "]"
command: "E" "(" qref "," qref ")"                      -> entangle
       | "M" "(" qref ("," angle)? ("," dep)* ")"       -> measure
       | "X" "(" qref "," sexpr ")"                     -> correct_x
       | "Z" "(" qref "," sexpr ")"                     -> correct_z
       | "nil"                                          -> nil
dep: "s" ":" sexpr   -> dep_s
   | "t" ":" sexpr   -> dep_t

sexpr: sterm ("+" sterm)*
sterm: NAME          -> sname
     | INT           -> sconst

?angle: sum
?sum: product
    | sum "+" product    -> add
    | sum "-" product    -> sub
?product: atom
    | product "*" atom   -> mul
    | product "/" atom   -> div
?atom: NUMBER            -> number
     | "pi"              -> pi
     | "-" atom          -> neg
     | "(" sum ")"

NAME: /[A-Za-z_][A-Za-z0-9_]*/
COMMENT: /#[^\n]*/

%import common.INT
%import common.NUMBER
%import common.SIGNED_NUMBER
%import common.WS
%ignore WS
%ignore COMMENT
"""


@functools.lru_cache(maxsize=None)
def _parser():
    return Lark(GRAMMAR, parser='lalr', start=['start', 'angle'], propagate_positions=True)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    end_line: int
    end_column: int

    def __str__(self):
        return f"{self.file or '<source>'}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str
    message: str
    span: SourceSpan

    @property
    def is_error(self):
        return self.severity == 'error'

    def __str__(self):
        return f"{self.span}: {self.severity}: {self.message}"


@dataclass
class Program:
    """Networks defined by a source, in definition order."""
    networks: dict
    diagnostics: list


class _IO(tuple):
    pass


class _Qubits(tuple):
    pass


@dataclass
class _EventDecl:
    event: object
    span: SourceSpan


@dataclass
class _PartDecl:
    cin: tuple
    cout: tuple
    qubits: tuple
    events: list
    span: SourceSpan


@dataclass
class _AgentDecl:
    name: str
    parts: list
    span: SourceSpan


@dataclass
class _PrepDecl:
    entangle: tuple = ()
    plus: tuple = ()
    qubits: tuple = None
    amplitudes: tuple = None
    span: SourceSpan = None


@dataclass
class _NetworkDecl:
    name: str
    prep: _PrepDecl
    agents: list
    span: SourceSpan


@dataclass
class _NetworkExpr:
    name: str
    op: str
    left: str
    right: str
    span: SourceSpan


class QNetTransformer(Transformer):
    """Turns a parse tree into declarations carrying source spans."""

    def __init__(self, source_file=None):
        super().__init__()
        self.source_file = source_file
        self.diagnostics = []

    def _span(self, meta):
        if meta is None or getattr(meta, 'empty', False):
            return SourceSpan(self.source_file, 1, 1, 1, 1)
        return SourceSpan(self.source_file, meta.line, meta.column, meta.end_line, meta.end_column)

    def start(self, items):
        return list(items)

    @v_args(meta=True)
    def network_def(self, meta, items):
        name = str(items[0])
        prep = None
        agents = []
        for item in items[1:]:
            if isinstance(item, _PrepDecl):
                prep = item
            else:
                agents.append(item)
        return _NetworkDecl(name, prep, agents, self._span(meta))

    @v_args(meta=True)
    def network_expr(self, meta, items):
        name, op, left, right = items
        return _NetworkExpr(str(name), op, str(left), str(right), self._span(meta))

    def net_op(self, items):
        return str(items[0])

    @v_args(meta=True)
    def prep(self, meta, items):
        decl = _PrepDecl(span=self._span(meta))
        entangle, plus = [], []
        for kind, value in items:
            if kind == 'E':
                entangle.append(value)
            else:
                plus.extend(value)
        decl.entangle, decl.plus = tuple(entangle), tuple(plus)
        return decl

    @v_args(meta=True)
    def prep_state(self, meta, items):
        qubits, amps = items[0], items[1:]
        return _PrepDecl(qubits=tuple(qubits), amplitudes=tuple(amps), span=self._span(meta))

    def prep_entangle(self, items):
        return ('E', (items[0], items[1]))

    def prep_plus(self, items):
        return ('plus', tuple(items[0]))

    def amp(self, items):
        return complex(float(items[0]), float(items[1]))

    @v_args(meta=True)
    def agent_def(self, meta, items):
        return _AgentDecl(str(items[0]), list(items[1:]), self._span(meta))

    @v_args(meta=True)
    def part(self, meta, items):
        cin, cout, qubits, events = (), (), (), []
        for item in items:
            if isinstance(item, _IO):
                cin, cout = item
            elif isinstance(item, _Qubits):
                qubits = tuple(item)
            else:
                events.append(item)
        return _PartDecl(cin, cout, qubits, events, self._span(meta))

    def io(self, items):
        return _IO(items)

    def no_names(self, items):
        return ()

    def names(self, items):
        return tuple(str(t) for t in items)

    def qubit_list(self, items):
        return _Qubits(items)

    def qint(self, items):
        return int(items[0])

    def qname(self, items):
        return str(items[0])

    @v_args(meta=True)
    def pattern_event(self, meta, items):
        parts = items[0]
        try:
            joined = functools.reduce(Pattern.tensor, parts)
        except OverlappingIds as exc:
            message = f"joined command lists share qubits: {', '.join(map(str, exc.ids))}"
            self.diagnostics.append(ParseDiagnostic('error', message, self._span(meta)))
            joined = parts[0]
        space = joined.space | set(items[1]) if len(items) > 1 else joined.space
        p = Pattern.build(joined.commands, space=frozenset(space))
        return _EventDecl(PatternEvent(p), self._span(meta))

    @v_args(meta=True)
    def send_event(self, meta, items):
        return _EventDecl(ClassicalSend(str(items[0]), tuple(items[1:])), self._span(meta))

    @v_args(meta=True)
    def recv_event(self, meta, items):
        return _EventDecl(ClassicalRecv(str(items[0]), tuple(str(t) for t in items[1:])), self._span(meta))

    @v_args(meta=True)
    def qsend_event(self, meta, items):
        return _EventDecl(QuantumSend(str(items[0]), items[1]), self._span(meta))

    @v_args(meta=True)
    def qrecv_event(self, meta, items):
        return _EventDecl(QuantumRecv(str(items[0]), items[1]), self._span(meta))

    def pattern(self, items):
        # each list is in notation order; joined lists act side by side
        return [Pattern.from_notation(notation) for notation in items]

    def cmd_list(self, items):
        return tuple(items)

    def entangle(self, items):
        return Entangle(items[0], items[1])

    def measure(self, items):
        qubit, rest = items[0], items[1:]
        angle = 0.0
        s = t = SignalExpr()
        for item in rest:
            if isinstance(item, tuple):
                if item[0] == 's':
                    s = item[1]
                else:
                    t = item[1]
            else:
                angle = float(item)
        return Measure(qubit, angle, s, t)

    def correct_x(self, items):
        return CorrectX(items[0], items[1])

    def correct_z(self, items):
        return CorrectZ(items[0], items[1])

    def nil(self, items):
        return Nil()

    def dep_s(self, items):
        return ('s', items[0])

    def dep_t(self, items):
        return ('t', items[0])

    def sexpr(self, items):
        out = SignalExpr()
        for term in items:
            out = out + term
        return out

    def sname(self, items):
        return SignalExpr.of(str(items[0]))

    def sconst(self, items):
        return SignalExpr(int(items[0]))

    def number(self, items):
        return float(items[0])

    def pi(self, items):
        return math.pi

    def neg(self, items):
        return -items[0]

    def add(self, items):
        return items[0] + items[1]

    def sub(self, items):
        return items[0] - items[1]

    def mul(self, items):
        return items[0] * items[1]

    def div(self, items):
        return items[0] / items[1]


def _syntax_diagnostic(exc, source_file):
    line = getattr(exc, 'line', None) or 1
    column = getattr(exc, 'column', None) or 1
    if isinstance(exc, UnexpectedToken):
        token = exc.token
        shown = 'end of input' if token.type == '$END' else repr(str(token))
        expected = ', '.join(sorted(exc.expected)[:6])
        message = f"syntax error: unexpected {shown}; expected {expected}"
        end_line = getattr(token, 'end_line', None) or line
        end_column = getattr(token, 'end_column', None) or column + 1
    elif isinstance(exc, UnexpectedCharacters):
        message = f"syntax error: unexpected character {exc.char!r}"
        end_line, end_column = line, column + 1
    elif isinstance(exc, UnexpectedEOF):
        message = "syntax error: unexpected end of input"
        end_line, end_column = line, column
    else:
        message = f"syntax error: {exc}"
        end_line, end_column = line, column
    return ParseDiagnostic('error', message, SourceSpan(source_file, line, column, end_line, end_column))


class _Builder:
    """Builds networks from declarations, collecting diagnostics."""

    def __init__(self):
        self.diagnostics = []
        self.networks = {}

    def error(self, message, span):
        self.diagnostics.append(ParseDiagnostic('error', message, span))

    def warning(self, message, span):
        self.diagnostics.append(ParseDiagnostic('warning', message, span))

    def prep(self, decl):
        if decl is None:
            return Preparation.null()
        try:
            if decl.amplitudes is not None:
                return explicit_prep(decl.qubits, decl.amplitudes)
            return Preparation(decl.plus, decl.entangle)
        except QNetError as exc:
            self.error(f"bad preparation: {exc}", decl.span)
            return None

    def agent(self, decl):
        """Returns (Agent, event spans) or None."""
        built = None
        spans = []
        for part in decl.parts:
            if len(set(part.qubits)) != len(part.qubits):
                self.warning(f"repeated qubit in the sort of {decl.name}", part.span)
            events = [e.event for e in part.events]
            try:
                current = Agent.build(decl.name, part.qubits, events, part.cin, part.cout)
                built = current if built is None else agent_compose(built, current)
            except QNetError as exc:
                self.error(str(exc), part.span)
                return None
            spans.extend(e.span for e in part.events)
        read = set()
        for event in built.events:
            if isinstance(event, PatternEvent):
                read |= event.pattern.free_names
            elif isinstance(event, ClassicalSend):
                read |= event.names
        for name in sort_names(built.cin - read - built.cout):
            self.warning(f"classical input {name} of {decl.name} is never read", decl.span)
        return built, spans

    def network(self, decl):
        if decl.name in self.networks:
            self.error(f"network {decl.name} defined twice", decl.span)
            return
        prep = self.prep(decl.prep)
        agents, spans = [], {}
        for agent_decl in decl.agents:
            result = self.agent(agent_decl)
            if result is None:
                continue
            agents.append(result[0])
            spans[agent_decl.name] = (agent_decl.span, result[1])
        if prep is None or len(agents) != len(decl.agents):
            return
        n = Network(tuple(agents), prep, decl.name)
        self.check(n, decl.span, spans)
        self.networks[decl.name] = n

    def expression(self, decl):
        if decl.name in self.networks:
            self.error(f"network {decl.name} defined twice", decl.span)
            return
        missing = [name for name in (decl.left, decl.right) if name not in self.networks]
        if missing:
            for name in missing:
                self.error(f"unknown network {name}", decl.span)
            return
        left, right = self.networks[decl.left], self.networks[decl.right]
        try:
            if decl.op == 'seq':
                n = net_seq_compose(left, right, pad=True)
            else:
                n = net_par_compose(left, right)
        except QNetError as exc:
            self.error(str(exc), decl.span)
            return
        n = n.with_name(decl.name)
        self.check(n, decl.span, {})
        self.networks[decl.name] = n

    def check(self, n, span, agent_spans):
        for v in validate_network(n):
            where = span
            if v.agent in agent_spans:
                agent_span, event_spans = agent_spans[v.agent]
                where = agent_span
                if v.index is not None and v.index < len(event_spans):
                    where = event_spans[v.index]
            self.error(str(v.message), where)


def parse_source(text, source_file=None):
    """
    Parse a source text into networks.

    Args:
        text: source text
        source_file: file name used in spans

    Returns:
        Program with the networks in definition order; warnings are logged

    Raises:
        DSLError: the source has syntax errors or invalid networks
    """
    try:
        tree = _parser().parse(text, start='start')
    except UnexpectedInput as exc:
        raise DSLError([_syntax_diagnostic(exc, source_file)]) from exc
    transformer = QNetTransformer(source_file)
    decls = transformer.transform(tree)
    if transformer.diagnostics:
        raise DSLError(transformer.diagnostics)

    builder = _Builder()
    for decl in decls:
        if isinstance(decl, _NetworkDecl):
            builder.network(decl)
        else:
            builder.expression(decl)
    for d in builder.diagnostics:
        if not d.is_error:
            logger.warning("%s", d)
    if any(d.is_error for d in builder.diagnostics):
        raise DSLError(builder.diagnostics)
    return Program(builder.networks, builder.diagnostics)


def parse_network(text, name=None, source_file=None):
    """
    Parse a source and return one of its networks.

    Args:
        name: network to return; defaults to the last one defined
    """
    program = parse_source(text, source_file)
    if not program.networks:
        span = SourceSpan(source_file, 1, 1, 1, 1)
        raise DSLError([ParseDiagnostic('error', 'source defines no network', span)])
    if name is None:
        return list(program.networks.values())[-1]
    if name not in program.networks:
        span = SourceSpan(source_file, 1, 1, 1, 1)
        raise DSLError([ParseDiagnostic('error', f"no network named {name}", span)])
    return program.networks[name]


def parse_file(path, name=None):
    path = Path(path)
    return parse_network(path.read_text(encoding='utf-8'), name, str(path))


def parse_angle(text):
    """Evaluate an angle expression such as 'pi/2' or '-3*pi/4'."""
    try:
        tree = _parser().parse(text, start='angle')
    except UnexpectedInput as exc:
        raise DSLError([_syntax_diagnostic(exc, None)]) from exc
    value = QNetTransformer().transform(tree)
    return float(value)


# Serializer

def format_angle(angle):
    """Shortest form that parses back to the same float."""
    if angle == 0:
        return '0'
    ratio = Fraction(angle / math.pi).limit_denominator(64)
    num, den = ratio.numerator, ratio.denominator
    if num != 0 and num * math.pi / den == angle:
        head = {1: 'pi', -1: '-pi'}.get(num, f"{num}*pi")
        return head if den == 1 else f"{head}/{den}"
    return repr(float(angle))


def _format_command(c):
    if isinstance(c, Entangle):
        return f"E({c.i}, {c.j})"
    if isinstance(c, Measure):
        out = f"M({c.qubit}, {format_angle(c.angle)}"
        if c.s.constant or c.s.terms:
            out += f", s: {c.s}"
        if c.t.constant or c.t.terms:
            out += f", t: {c.t}"
        return out + ")"
    if isinstance(c, CorrectX):
        return f"X({c.qubit}, {c.dep})"
    if isinstance(c, CorrectZ):
        return f"Z({c.qubit}, {c.dep})"
    return "nil"


def _format_event(e):
    if isinstance(e, PatternEvent):
        p = e.pattern
        body = '; '.join(_format_command(c) for c in p.notation)
        mentioned = set()
        for c in p.commands:
            mentioned.update(c.qubits)
        out = f"pattern [ {body} ]" if body else "pattern [ ]"
        if set(p.space) != mentioned:
            out += ' over {' + ', '.join(map(str, sort_ids(p.space))) + '}'
        return out
    if isinstance(e, ClassicalSend):
        return f"send {e.channel} ({', '.join(map(str, e.values))})"
    if isinstance(e, ClassicalRecv):
        return f"recv {e.channel} ({', '.join(e.names)})"
    if isinstance(e, QuantumSend):
        return f"qsend {e.channel} {e.qubit}"
    return f"qrecv {e.channel} {e.placeholder}"


def _format_names(names):
    return ' '.join(sort_names(names)) if names else '-'


def _format_prep(prep):
    if prep.is_null:
        return None
    if prep.is_explicit:
        amps = ', '.join(f"({float(a.real)!r}, {float(a.imag)!r})" for a in prep.state.data)
        return f"prepare state({', '.join(map(str, prep.qubits))}) [{amps}];"
    items = [f"E({i}, {j})" for i, j in prep.entangle]
    paired = {q for pair in prep.entangle for q in pair}
    lone = [q for q in prep.qubits if q not in paired]
    if lone:
        items.append(f"plus({', '.join(map(str, lone))})")
    return f"prepare {', '.join(items)};"


def to_source(n, name=None):
    """Render a network in the protocol language."""
    name = name or n.name or 'N'
    lines = [f"network {name} {{"]
    prep = _format_prep(n.prep)
    if prep:
        lines.append(f"    {prep}")
    for a in n.agents:
        qubits = ', '.join(map(str, sort_ids(a.sort)))
        lines.append(
            f"    agent {a.name}(in: {_format_names(a.cin)}, out: {_format_names(a.cout)}) "
            f"qubits {{{qubits}}} {{"
        )
        for k, event in enumerate(a.events):
            sep = ';' if k < len(a.events) - 1 else ''
            lines.append(f"        {_format_event(event)}{sep}")
        lines.append("    }")
    lines.append("}")
    return '\n'.join(lines) + '\n'
