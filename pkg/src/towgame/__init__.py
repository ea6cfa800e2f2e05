"""Tug-of-War games with space/time dependent movement sets.

Discrete game values (``dpp_core``), Monte Carlo plays (``game_engine``),
the limit operator (``limit_operator``), epsilon sweeps (``convergence_lab``)
and the ``towgame`` command line.
"""

from .dpp_core import DomainSpec, GridSpec, PointClass, ValueField, brute_force_oracle, classify_point, dpp_sweep
from .movement_sets import FamilySpec, check_axioms, extremal_data, hat_time, lattice_ball, sample_set
from .payoff_expr import parse_payoff
from .payoffs import PayoffField

__version__ = "0.1.0"

__all__ = [
    "DomainSpec",
    "FamilySpec",
    "GridSpec",
    "PayoffField",
    "PointClass",
    "ValueField",
    "brute_force_oracle",
    "check_axioms",
    "classify_point",
    "dpp_sweep",
    "extremal_data",
    "hat_time",
    "lattice_ball",
    "parse_payoff",
    "sample_set",
]
