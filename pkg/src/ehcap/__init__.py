"""Capacity of the AWGN channel under static and time-varying amplitude constraints."""

__version__ = "0.1.0"

from ehcap.channel import DiscreteDistribution, ExtendedChannel, StateAlphabet
from ehcap.numerics import NumericalDomainError, QuadratureRule, build_rule
from ehcap.onoff import (
    BaselineSet,
    OnOffProblem,
    baselines,
    g_function,
    general_si_both,
    onoff_capacity,
    u_threshold,
)
from ehcap.solver import (
    CapacitySolution,
    KktReport,
    ba_oracle,
    kkt_check,
    optimize_fixed_cardinality,
    smith_capacity,
    solve_capacity,
)

__all__ = [
    "BaselineSet",
    "CapacitySolution",
    "DiscreteDistribution",
    "ExtendedChannel",
    "KktReport",
    "NumericalDomainError",
    "OnOffProblem",
    "QuadratureRule",
    "StateAlphabet",
    "ba_oracle",
    "baselines",
    "build_rule",
    "g_function",
    "general_si_both",
    "kkt_check",
    "onoff_capacity",
    "optimize_fixed_cardinality",
    "smith_capacity",
    "solve_capacity",
    "u_threshold",
]
