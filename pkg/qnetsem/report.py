"""
Report rendering.

A report is a sequence of sections, each a `[name]` header line followed by
a CSV table. Reals are printed with 12 digits after the decimal point, so the
same result always renders to the same bytes.
"""

import io
import logging

import numpy as np
import pandas as pd

from qnetsem.checks import Verdict
from qnetsem.qnum import sort_ids
from qnetsem.semantics import PTS, Denotation

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12f'


def _clean(value):
    """Round away signed zeros and sub-print noise."""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if abs(value) < 5e-13:
            return 0.0
    return value


def _table(rows, columns):
    df = pd.DataFrame(rows, columns=columns)
    for column in df.columns:
        if df[column].dtype.kind == 'f':
            df[column] = df[column].map(_clean)
    return df


def _section(name, df):
    if len(df.columns) == 0:
        return f"[{name}]\n"
    return f"[{name}]\n" + df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


def _format_ids(ids):
    return ' '.join(map(str, sort_ids(ids)))


def _format_values(values):
    return ' '.join(f"{k}={v}" for k, v in values.items())


def _format_outputs(outputs):
    parts = []
    for agent, values in outputs.items():
        if values:
            parts.append(f"{agent}:{_format_values(values)}")
    return ' '.join(parts)


def _matrix_rows(matrix, **key):
    rows = []
    for (r, c), value in np.ndenumerate(np.asarray(matrix)):
        rows.append({**key, 'row': r, 'col': c, 're': float(value.real), 'im': float(value.imag)})
    return rows


def _pts_sections(pts):
    summary = _table([
        {'key': 'schedule', 'value': pts.schedule},
        {'key': 'inputs', 'value': _format_values(dict(sorted(pts.cin.items())))},
        {'key': 'paths', 'value': str(len(pts.paths))},
        {'key': 'classes', 'value': str(len(pts.transitions))},
        {'key': 'total_prob', 'value': FLOAT_FORMAT % _clean(pts.total_prob())},
    ], ['key', 'value'])

    transitions, sorts, states = [], [], []
    for index, (klass, prob) in enumerate(pts.transitions):
        transitions.append({
            'class': index, 'prob': prob, 'outputs': _format_outputs(klass.couts),
            'qubits': ' '.join(map(str, klass.qfinal.qubit_ids)),
        })
        for agent, sort in klass.sorts.items():
            sorts.append({'class': index, 'agent': agent, 'sort': _format_ids(sort)})
        states.extend(_matrix_rows(klass.qfinal.data, **{'class': index}))

    paths = []
    for index, path in enumerate(pts.paths):
        steps = ' | '.join(
            f"{s.rule}({','.join(s.agents)})" + (f" {_format_values(s.bindings)}" if s.bindings else '')
            for s in path.steps
        )
        paths.append({'path': index, 'prob': path.prob, 'steps': steps})

    return [
        ('summary', summary),
        ('transitions', _table(transitions, ['class', 'prob', 'outputs', 'qubits'])),
        ('sorts', _table(sorts, ['class', 'agent', 'sort'])),
        ('paths', _table(paths, ['path', 'prob', 'steps'])),
        ('states', _table(states, ['class', 'row', 'col', 're', 'im'])),
    ]


def _denotation_sections(d):
    initial, final = d.type
    types = _table([
        {'agent': name, 'inputs': _format_ids(initial[name]), 'outputs': _format_ids(final[name])}
        for name in initial
    ], ['agent', 'inputs', 'outputs'])
    summary = _table([
        {'key': 'in_ids', 'value': ' '.join(map(str, d.in_ids))},
        {'key': 'out_ids', 'value': ' '.join(map(str, d.out_ids))},
        {'key': 'classical_inputs', 'value': ' '.join(d.cin_names)},
    ], ['key', 'value'])

    classes, kraus = [], []
    dim_in = 2 ** len(d.in_ids)
    for bits, outcomes in d.table.items():
        label = ''.join(map(str, bits))
        for index, outcome in enumerate(outcomes):
            # trace of the restricted operation on the maximally mixed input
            prob = float(np.trace(outcome.kraus.gram()).real) / dim_in
            classes.append({
                'input': label, 'class': index, 'external': _format_outputs(outcome.o_e),
                'signals': _format_outputs(outcome.o_s), 'elements': len(outcome.kraus), 'prob': prob,
            })
            for k, op in enumerate(outcome.kraus):
                kraus.extend(_matrix_rows(op.matrix, input=label, **{'class': index, 'element': k}))
    return [
        ('summary', summary),
        ('type', types),
        ('classes', _table(classes, ['input', 'class', 'external', 'signals', 'elements', 'prob'])),
        ('kraus', _table(kraus, ['input', 'class', 'element', 'row', 'col', 're', 'im'])),
    ]


def _verdict_sections(v):
    summary = _table([
        {'key': 'check', 'value': v.check},
        {'key': 'ok', 'value': str(v.ok).lower()},
        {'key': 'deviation', 'value': FLOAT_FORMAT % _clean(v.deviation)},
        {'key': 'witness', 'value': '' if v.witness is None else repr(v.witness)},
    ], ['key', 'value'])
    details = v.table if v.table is not None else pd.DataFrame()
    for column in details.columns:
        if details[column].dtype.kind == 'f':
            details = details.assign(**{column: details[column].map(_clean)})
    return [('summary', summary), ('details', details)]


def render_report(result, title=None):
    """
    Render a PTS, Denotation or Verdict as report text.

    Args:
        result: the value to render
        title: optional first line after the report kind

    Returns:
        str
    """
    if isinstance(result, PTS):
        kind, sections = 'operational', _pts_sections(result)
    elif isinstance(result, Denotation):
        kind, sections = 'denotational', _denotation_sections(result)
    elif isinstance(result, Verdict):
        kind, sections = 'verdict', _verdict_sections(result)
    else:
        raise TypeError(f"cannot render {type(result).__name__}")
    head = f"# qnetsem report: {kind}\n"
    if title:
        head += f"# {title}\n"
    return head + '\n'.join(_section(name, df) for name, df in sections)


def read_report(text):
    """
    Parse report text back into tables.

    Returns:
        dict section name -> DataFrame
    """
    sections = {}
    name, lines = None, []
    for line in text.splitlines():
        if line.startswith('#'):
            continue
        if line.startswith('[') and line.endswith(']'):
            if name is not None:
                sections[name] = lines
            name, lines = line[1:-1], []
        elif name is not None and line.strip():
            lines.append(line)
    if name is not None:
        sections[name] = lines
    out = {}
    for section, body in sections.items():
        if not body:
            out[section] = pd.DataFrame()
            continue
        out[section] = pd.read_csv(io.StringIO('\n'.join(body) + '\n'), keep_default_na=False)
    return out
