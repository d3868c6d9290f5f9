"""resqfit: quality-factor extraction and loss decomposition for superconducting resonators.

Workflow: complex S21 traces are fit with a diameter-corrected circle fit
(CircleFitter / extract_quality_factors), power and temperature sweeps of
the extracted Q_i are regressed onto the saturable-TLS + thermal
quasiparticle loss model (PowerSweepFitter / TemperatureSweepFitter), and
per-sample results are aggregated into reports. A forward simulator
(synthesize_*) provides synthetic data for testing and the `resqfit` CLI
drives batch runs.
"""

from .circlefit import (
    CircleFitResult,
    CircleFitter,
    extract_quality_factors,
    fit_circle,
    fit_phase,
    remove_cable_delay,
)
from .constants import HBAR, K_B, PHOTON_NUMBER_PREFACTOR, dbm_to_watts, watts_to_dbm
from .errors import (
    ConvergenceError,
    EdgeClippedError,
    FitError,
    IdentifiabilityError,
    NegativeQiError,
    NoResonanceError,
    NonFiniteSampleError,
    NonMonotonicFrequencyError,
    ResqfitError,
    UnknownFormatError,
    ValidationError,
)
from .fileio import ingest_trace_file, read_archive, write_archive, write_delimited
from .physics import (
    LossModelParams,
    MeasurementContext,
    delta_qp,
    delta_qp_zero_temperature_limit,
    delta_tls,
    delta_tls_zero_temperature_limit,
    kinetic_inductance,
    photon_number,
    quasiparticle_factor,
    sinh_k0,
    thermal_tls_factor,
    total_inverse_qi,
)
from .report import FitReport, emit_table
from .sweepfit import (
    FitOutcome,
    PowerSweepFitter,
    SampleSummary,
    SweepDataset,
    TemperatureSweepFitter,
    box_stats,
    fit_power_sweep,
    fit_temperature_sweep,
    summarize_sample,
)
from .synth import (
    ChipSpec,
    ForwardParams,
    frequency_grid,
    photon_fixed_point,
    qi_sigma_fraction,
    synthesize_power_sweep,
    synthesize_temperature_sweep,
    synthesize_trace,
)
from .trace import ResonanceTrace

__version__ = "0.1.0"

__all__ = [
    "CircleFitResult",
    "CircleFitter",
    "ChipSpec",
    "ConvergenceError",
    "EdgeClippedError",
    "FitError",
    "FitOutcome",
    "FitReport",
    "ForwardParams",
    "HBAR",
    "IdentifiabilityError",
    "K_B",
    "LossModelParams",
    "MeasurementContext",
    "NegativeQiError",
    "NoResonanceError",
    "NonFiniteSampleError",
    "NonMonotonicFrequencyError",
    "PHOTON_NUMBER_PREFACTOR",
    "PowerSweepFitter",
    "ResonanceTrace",
    "ResqfitError",
    "SampleSummary",
    "SweepDataset",
    "TemperatureSweepFitter",
    "UnknownFormatError",
    "ValidationError",
    "box_stats",
    "dbm_to_watts",
    "delta_qp",
    "delta_qp_zero_temperature_limit",
    "delta_tls",
    "delta_tls_zero_temperature_limit",
    "emit_table",
    "extract_quality_factors",
    "fit_circle",
    "fit_phase",
    "fit_power_sweep",
    "fit_temperature_sweep",
    "frequency_grid",
    "ingest_trace_file",
    "kinetic_inductance",
    "photon_fixed_point",
    "photon_number",
    "qi_sigma_fraction",
    "quasiparticle_factor",
    "read_archive",
    "remove_cable_delay",
    "sinh_k0",
    "summarize_sample",
    "synthesize_power_sweep",
    "synthesize_temperature_sweep",
    "synthesize_trace",
    "thermal_tls_factor",
    "total_inverse_qi",
    "watts_to_dbm",
    "write_archive",
    "write_delimited",
]
