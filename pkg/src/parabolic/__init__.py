"""Spectral surrogates for non-autonomous parabolic Cauchy problems.

Submodules, bottom up: ``spectral_core`` (operators and functional calculus),
``time_analysis`` (grids, trajectories, time-frequency norms), ``heat_engine``
(abstract heat solvers), ``parabolic_engine`` (form families and solvers),
``propagator`` (Green families), ``applications`` (concrete 1-D operators)
and ``cli``.
"""
from .errors import ArgumentError, ContractError, DomainError, NumericError, ParabolicError, SpecError
from .spectral_core import SpectralOperator
from .time_analysis import GridKind, TimeGrid, Trajectory
from .heat_engine import SourceSpec
from .parabolic_engine import FormFamily
from .propagator import PropagatorFamily

__all__ = [
    "ArgumentError",
    "ContractError",
    "DomainError",
    "FormFamily",
    "GridKind",
    "NumericError",
    "ParabolicError",
    "PropagatorFamily",
    "SourceSpec",
    "SpecError",
    "SpectralOperator",
    "TimeGrid",
    "Trajectory",
]
