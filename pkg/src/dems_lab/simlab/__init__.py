"""Scenarios, plant simulation and experiment orchestration."""

from ..datasets import Dataset, TrialResult, sse
from .experiments import (
    BenchmarkRecord,
    Landscape,
    benchmark_suite,
    derive_seed,
    embedding_sweep,
    fe_landscape,
    fe_landscapes,
    median_sse,
    mismatch_sweep,
    observer_config,
    quadrant_analysis,
    read_records,
    records_to_csv,
    run_method,
    unique_maximum_check,
)
from .scenarios import SCENARIOS, Scenario, get_scenario, scenario_paper_system, scenario_quadrotor
from .simulate import simulate_lti

__all__ = [
    "BenchmarkRecord", "Dataset", "Landscape", "SCENARIOS", "Scenario", "TrialResult",
    "benchmark_suite", "derive_seed", "embedding_sweep", "fe_landscape", "fe_landscapes", "get_scenario",
    "median_sse", "mismatch_sweep", "observer_config", "unique_maximum_check", "quadrant_analysis",
    "read_records", "records_to_csv", "run_method", "scenario_paper_system", "scenario_quadrotor",
    "simulate_lti", "sse",
]
