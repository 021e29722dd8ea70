"""
qnetsem: execute and compare networks of agents running measurement-based
quantum patterns.
"""

from qnetsem.checks import (
    Verdict,
    check_compose,
    check_context,
    check_correspondence,
    check_schedules,
    equivalent,
)
from qnetsem.dsl import parse_file, parse_network, parse_source, to_source
from qnetsem.library import library
from qnetsem.netmodel import Agent, Network, validate_network
from qnetsem.report import read_report, render_report
from qnetsem.semantics import denotational, operational, run_schedule

__all__ = [
    'Agent',
    'Network',
    'Verdict',
    'check_compose',
    'check_context',
    'check_correspondence',
    'check_schedules',
    'denotational',
    'equivalent',
    'library',
    'operational',
    'parse_file',
    'parse_network',
    'parse_source',
    'read_report',
    'render_report',
    'run_schedule',
    'to_source',
    'validate_network',
]
