import numpy as np
import pandas as pd
import pytest

from qnetsem.checks import equivalent
from qnetsem.library import library
from qnetsem.report import read_report, render_report
from qnetsem.semantics import PTS, denotational, run_schedule


def test_teleport_run_report(tp):
    text = render_report(run_schedule(tp), title='teleport')
    assert text.startswith('# qnetsem report: operational\n# teleport\n')
    tables = read_report(text)
    assert list(tables) == ['summary', 'transitions', 'sorts', 'paths', 'states']
    transitions = tables['transitions']
    assert len(transitions) == 1
    assert transitions['prob'][0] == pytest.approx(1.0)
    assert '1.000000000000' in text
    assert len(tables['paths']) == 4
    sorts = dict(zip(tables['sorts']['agent'], tables['sorts']['sort'].astype(str)))
    assert sorts == {'A': '', 'B': '3'}


def test_bitflip_denotation_report():
    tables = read_report(render_report(denotational(library('bitflip', np.pi / 2))))
    classes = tables['classes']
    assert list(classes['signals']) == ['A:s2=0', 'A:s2=1']
    assert list(classes['prob']) == pytest.approx([0.5, 0.5])
    assert set(tables['kraus']['element']) == {0}


def test_empty_pts_renders():
    tables = read_report(render_report(PTS({}, None, (), ())))
    assert tables['transitions'].empty
    summary = tables['summary'].set_index('key')['value']
    assert str(summary['classes']) == '0'


def test_rendering_is_deterministic(tp):
    first = render_report(run_schedule(tp, merge=False))
    second = render_report(run_schedule(tp, merge=False))
    assert first == second


def test_verdict_report(tp, direct):
    tables = read_report(render_report(equivalent(tp, direct)))
    summary = tables['summary'].set_index('key')['value']
    assert summary['check'] == 'equivalent'
    assert summary['ok'] == 'true'
    assert isinstance(tables['details'], pd.DataFrame)


def test_no_negative_zeros(tp):
    text = render_report(denotational(tp))
    assert '-0.000000000000' not in text


def test_unknown_result_type():
    with pytest.raises(TypeError):
        render_report(42)
