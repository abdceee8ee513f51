"""Exact reduced dynamics of qubits coupled to periodic XX spin-chain baths."""

from .dynamics import EvolutionPlan, SectorState, evolve_coherent, evolve_ground, evolve_sector
from .errors import (
    DegenerateGroundStateError,
    IntegrationError,
    InvalidParameterError,
    PreconditionError,
    QubitBathError,
    ResourceError,
    SizeError,
)
from .observables import (
    bloch_and_purity,
    concurrence,
    decoherence_factor,
    metrics,
    two_qubit_rho,
    w_factors,
    wootters_concurrence,
)
from .slater import FTable, build_f_table, dicke_initial_amplitudes, enumerate_configs, f_function, rank, slater, unrank
from .spinbath import (
    ModelParams,
    bath_ground_state,
    coherent_coefficients,
    critical_fields,
    dispersion,
    ground_state,
    momentum_grid,
)

__all__ = [
    "EvolutionPlan",
    "SectorState",
    "evolve_coherent",
    "evolve_ground",
    "evolve_sector",
    "DegenerateGroundStateError",
    "IntegrationError",
    "InvalidParameterError",
    "PreconditionError",
    "QubitBathError",
    "ResourceError",
    "SizeError",
    "bloch_and_purity",
    "concurrence",
    "decoherence_factor",
    "metrics",
    "two_qubit_rho",
    "w_factors",
    "wootters_concurrence",
    "FTable",
    "build_f_table",
    "dicke_initial_amplitudes",
    "enumerate_configs",
    "f_function",
    "rank",
    "slater",
    "unrank",
    "ModelParams",
    "bath_ground_state",
    "coherent_coefficients",
    "critical_fields",
    "dispersion",
    "ground_state",
    "momentum_grid",
]

__version__ = "0.1.0"
