"""Quantum strong coin flipping lab.

Analytic cheating bounds, fairness optimisation, Monte Carlo sessions and a
three-process networked harness for a lossy, noisy optical implementation.
"""
from .link_model import LinkBudget
from .photon_source import PhotonStatistics, SourceKind, SourceSpec
from .protocol_engine import RngSpec, ScenarioConfig, run_bob_cheat_session, run_session, simulated_io_table
from .security_analysis import quantum_gain, solve_fair_a, sweep_gain

__version__ = "0.1.0"

__all__ = [
    "LinkBudget",
    "PhotonStatistics",
    "RngSpec",
    "ScenarioConfig",
    "SourceKind",
    "SourceSpec",
    "quantum_gain",
    "run_bob_cheat_session",
    "run_session",
    "simulated_io_table",
    "solve_fair_a",
    "sweep_gain",
]
