"""Physical constants and unit conversions.

All internal computation is SI (hertz, kelvin, watts, henries). dBm, GHz
and mK appear only at interfaces (CLI flags, file headers, reports).
"""

import math

# CODATA 2018 / exact SI definitions, fixed as decimal literals.
HBAR = 1.054571817e-34  # reduced Planck constant, J s
K_B = 1.380649e-23  # Boltzmann constant, J/K (exact)

# BCS weak-coupling gap ratio: gap energy = 1.764 * k_B * T_C.
BCS_GAP_FACTOR = 1.764

# Prefactor of the intracavity photon-number formula
# <n> = PREF * Q_l^2 * P_app / (hbar * w0^2 * Q_c)
# for a side-coupled quarter-wave resonator. Other coupling conventions
# differ by a factor of order one; pass `prefactor=` to photon_number()
# to override.
PHOTON_NUMBER_PREFACTOR = 2.0


def dbm_to_watts(p_dbm: float) -> float:
    """Convert power in dBm to watts."""
    return 10.0 ** (p_dbm / 10.0) * 1e-3


def watts_to_dbm(p_watts: float) -> float:
    """Convert power in watts to dBm."""
    if p_watts <= 0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_watts / 1e-3)


def superconducting_gap(t_c: float) -> float:
    """Zero-temperature BCS gap energy in joules for critical temperature t_c."""
    return BCS_GAP_FACTOR * K_B * t_c
