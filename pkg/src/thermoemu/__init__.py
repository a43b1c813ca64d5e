"""Weakly driven quantum thermal machines and their classical stochastic emulators."""

__version__ = "0.1.0"

from .model import (
    BathParams,
    ConfigError,
    CycleEdge,
    MachineSpec,
    SpecError,
    ValidationReport,
    build_four_level,
    build_heat_leak_variant,
    build_three_level,
    reference_baths,
    load_machine,
    parse_config,
    validate_spec,
)
from .rates import decay_rates, edge_rates, work_rate
from .lindblad import ThermoReport, build_generator, solve, steady_state, thermo_report
from .emulator import build_rate_matrix, certify_balance, classical_steady_state, emulator_report
from .graph import RateGraph, circuit_heat_currents, from_rate_matrix, graph_steady_populations
from .analysis import ComparisonPoint, cop_ratio, cooling_window, performance_ratio, ratio_approximation, sweep

CONFIG_DIR = __import__("pathlib").Path(__file__).parent / "configs"
