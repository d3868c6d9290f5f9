"""Loss models for superconducting resonators.

Pure evaluation of the physical formulas: saturable two-level-system (TLS)
absorption, thermal quasiparticle absorption, their sum 1/Q_i, the
photon-number calibration, and kinetic inductance from sheet resistance.
No fitting logic lives here; the sweep fitters call these functions as the
single source of truth for the loss model.

All functions are pure, accept scalars or numpy arrays, and are safe for
concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import k0e

from .constants import HBAR, K_B, PHOTON_NUMBER_PREFACTOR, superconducting_gap
from .errors import ValidationError
from .validation import check_non_negative, check_positive


@dataclass(frozen=True)
class LossModelParams:
    """Physical loss parameters of one resonator.

    f_delta_tls0 : filling-factor-weighted linear TLS loss tangent (F * delta0_TLS)
    n_c          : critical photon number above which TLS saturate
    beta         : saturation exponent, 0 < beta <= 1 (0.5 for non-interacting TLS)
    delta_qp0    : linear thermal-quasiparticle absorption
    delta_other  : power- and temperature-independent residual loss
    t_c          : superconducting critical temperature, kelvin
    f0           : resonator fundamental frequency, hertz

    The gap energy is derived, not stored: 1.764 * k_B * t_c.
    """

    f_delta_tls0: float
    n_c: float
    beta: float
    delta_qp0: float
    delta_other: float
    t_c: float = 4.4
    f0: float = 6.34e9

    def __post_init__(self):
        check_non_negative(self.f_delta_tls0, "f_delta_tls0")
        check_non_negative(self.delta_qp0, "delta_qp0")
        check_non_negative(self.delta_other, "delta_other")
        check_positive(self.n_c, "n_c")
        check_positive(self.t_c, "t_c")
        check_positive(self.f0, "f0")
        if not np.isfinite(self.beta) or not 0.0 < self.beta <= 1.0:
            raise ValidationError(f"beta must be in (0, 1], got {self.beta}")


@dataclass(frozen=True)
class MeasurementContext:
    """Measurement conditions of one trace: applied power (watts) and temperature (kelvin)."""

    p_app: float
    temperature: float

    def __post_init__(self):
        check_positive(self.p_app, "p_app")
        check_positive(self.temperature, "temperature")

    @classmethod
    def from_dbm(cls, power_dbm: float, temperature: float) -> "MeasurementContext":
        return cls(p_app=10.0 ** (power_dbm / 10.0) * 1e-3, temperature=temperature)

    @property
    def power_dbm(self) -> float:
        return 10.0 * np.log10(self.p_app / 1e-3)


def photon_thermal_ratio(temperature, f0):
    """Half photon energy over thermal energy: hbar*w0 / (2*k_B*T)."""
    temperature = np.asarray(temperature, dtype=float)
    if np.any(temperature <= 0) or not np.all(np.isfinite(temperature)):
        raise ValidationError("temperature must be positive and finite")
    return HBAR * 2.0 * np.pi * f0 / (2.0 * K_B * temperature)


def thermal_tls_factor(temperature, f0):
    """TLS thermal depolarization factor tanh(hbar*w0 / 2*k_B*T)."""
    return np.tanh(photon_thermal_ratio(temperature, f0))


def sinh_k0(x):
    """sinh(x) * K0(x), stable over the whole positive axis.

    Written as (1 - exp(-2x))/2 * [exp(x) K0(x)] so neither factor
    overflows; exp(x)*K0(x) is the exponentially scaled Bessel function,
    which decays like sqrt(pi/2x) for large x.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValidationError("sinh_k0 requires positive finite argument")
    return 0.5 * (1.0 - np.exp(-2.0 * x)) * k0e(x)


def delta_tls(n, temperature, p: LossModelParams):
    """Saturable TLS loss: F*delta0_TLS * tanh(hbar w0/2kT) / (1 + n/n_c)^beta.

    Strictly decreasing in both photon number and temperature. Rejects
    T = 0 (the tanh argument diverges); use
    delta_tls_zero_temperature_limit for the T -> 0 value.
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 0) or not np.all(np.isfinite(n)):
        raise ValidationError("photon number must be non-negative and finite")
    factor = thermal_tls_factor(temperature, p.f0)
    return p.f_delta_tls0 * factor / (1.0 + n / p.n_c) ** p.beta


def delta_tls_zero_temperature_limit(n, p: LossModelParams):
    """T -> 0 limit of delta_tls (tanh factor -> 1)."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 0) or not np.all(np.isfinite(n)):
        raise ValidationError("photon number must be non-negative and finite")
    return p.f_delta_tls0 / (1.0 + n / p.n_c) ** p.beta


def quasiparticle_factor(temperature, f0, t_c):
    """Bracketed thermal-quasiparticle factor sinh(xi) K0(xi) exp(-gap/k_B T).

    xi = hbar*w0 / (2*k_B*T). Monotonically increasing in T below t_c and
    exponentially suppressed as T -> 0 (underflows cleanly to 0.0).
    """
    xi = photon_thermal_ratio(temperature, f0)
    gap_over_kt = superconducting_gap(t_c) / (K_B * np.asarray(temperature, dtype=float))
    # exp underflow to exactly 0.0 at low T is the physically correct limit
    return sinh_k0(xi) * np.exp(-gap_over_kt)


def delta_qp(temperature, p: LossModelParams):
    """Thermal quasiparticle loss delta0_QP * sinh(xi) K0(xi) / exp(gap/k_B T)."""
    if p.delta_qp0 == 0.0:
        temperature = np.asarray(temperature, dtype=float)
        if np.any(temperature <= 0) or not np.all(np.isfinite(temperature)):
            raise ValidationError("temperature must be positive and finite")
        return np.zeros_like(temperature) if temperature.ndim else 0.0
    return p.delta_qp0 * quasiparticle_factor(temperature, p.f0, p.t_c)


def delta_qp_zero_temperature_limit(p: LossModelParams) -> float:
    """T -> 0 limit of delta_qp (exponentially suppressed to zero)."""
    return 0.0


def total_inverse_qi(n, temperature, p: LossModelParams):
    """Total intrinsic loss 1/Q_i = delta_TLS(n, T) + delta_QP(T) + delta_other."""
    return delta_tls(n, temperature, p) + delta_qp(temperature, p) + p.delta_other


def photon_number(p_app, f0, q_l, q_c, prefactor: float = PHOTON_NUMBER_PREFACTOR):
    """Mean intracavity photon number from applied power.

    <n> = prefactor * Q_l^2 * P_app / (hbar * w0^2 * Q_c), the side-coupled
    quarter-wave convention. Strictly linear in P_app.
    """
    check_positive(p_app, "p_app")
    check_positive(f0, "f0")
    check_positive(q_l, "q_l")
    check_positive(q_c, "q_c")
    w0 = 2.0 * np.pi * f0
    return prefactor * np.asarray(q_l, dtype=float) ** 2 * np.asarray(p_app, dtype=float) / (
        HBAR * w0**2 * np.asarray(q_c, dtype=float)
    )


def kinetic_inductance(r_sheet: float, t_c: float) -> float:
    """Kinetic sheet inductance L_K = hbar * R_sq / (pi * gap), henries per square."""
    check_positive(r_sheet, "r_sheet")
    check_positive(t_c, "t_c")
    return HBAR * r_sheet / (np.pi * superconducting_gap(t_c))
