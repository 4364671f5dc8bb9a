"""Core membership for public goods economies, with a brute-force grid oracle."""

from .config import SolverConfig
from .coretest import (
    DEVIATION_FOUND,
    IN_CORE,
    NOT_PARETO,
    CoreVerdict,
    check_certificate,
    is_lindahl,
    lindahl_report,
    pareto_preprocess,
    test_core_membership,
    test_core_membership_approx,
)
from .economy import UtilityOracle, directional_derivative, evaluate, project, validate_economy
from .families import load_economy, parse_economy, random_economy
from .groundtruth import GridSpec, brute_force_core_test, characterization_check
from .optimizer import Box, MaxMinProblem, SignedSimplex, solve_maxmin

__all__ = [
    "Box",
    "CoreVerdict",
    "DEVIATION_FOUND",
    "GridSpec",
    "IN_CORE",
    "MaxMinProblem",
    "NOT_PARETO",
    "SignedSimplex",
    "SolverConfig",
    "UtilityOracle",
    "brute_force_core_test",
    "characterization_check",
    "check_certificate",
    "directional_derivative",
    "evaluate",
    "is_lindahl",
    "lindahl_report",
    "load_economy",
    "pareto_preprocess",
    "parse_economy",
    "project",
    "random_economy",
    "solve_maxmin",
    "test_core_membership",
    "test_core_membership_approx",
    "validate_economy",
]
