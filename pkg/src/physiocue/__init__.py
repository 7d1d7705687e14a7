"""Physiological and behavioural cue extraction for deception studies.

Remote pulse estimation, heart-rate tracking, saccade and microexpression
detection, paired statistics, simple classifiers and sensor clock
synchronisation, all on numpy arrays.
"""
from .errors import (
    ConfigError,
    DegenerateSignalError,
    InsufficientEvidenceError,
    InvalidInputError,
    NoEdgesError,
    ParseError,
    PhysiocueError,
)
from .series import UniformSeries, WindowSpec

__version__ = "0.1.0"
