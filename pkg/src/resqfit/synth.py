"""Forward simulation: synthetic S21 traces and sweep datasets from known truth.

The trace model here is written independently of the extraction code in
circlefit.py (no shared functions), so that round-trip agreement between
synthesis and extraction is evidence rather than tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .constants import HBAR, PHOTON_NUMBER_PREFACTOR, dbm_to_watts
from .errors import FitError, ValidationError
from .physics import LossModelParams, MeasurementContext, delta_qp, total_inverse_qi
from .sweepfit import SweepDataset
from .trace import ResonanceTrace
from .validation import check_positive, check_strictly_increasing


@dataclass(frozen=True)
class ForwardParams:
    """Ground-truth parameters of one synthetic resonance trace."""

    f_r: float
    q_i: float
    q_c_mag: float
    phi: float = 0.0
    env_delay: float = 0.0
    env_amp: float = 1.0
    env_phase: float = 0.0
    noise_snr_db: float = math.inf
    rng_seed: int = 0

    def __post_init__(self):
        check_positive(self.f_r, "f_r")
        check_positive(self.q_i, "q_i")
        check_positive(self.q_c_mag, "q_c_mag")
        check_positive(self.env_amp, "env_amp")
        if not abs(self.phi) < np.pi / 2:
            raise ValidationError("mismatch angle phi must satisfy |phi| < pi/2")
        if not (self.noise_snr_db > 0):
            raise ValidationError("noise_snr_db must be positive (or infinite)")

    @property
    def q_l(self) -> float:
        return 1.0 / (1.0 / self.q_i + np.cos(self.phi) / self.q_c_mag)


@dataclass(frozen=True)
class ChipSpec:
    """Layout metadata of one chip: resonator count and design frequencies."""

    n_resonators: int = 5
    f0_list: tuple = (5.7e9, 6.0e9, 6.34e9, 6.65e9, 6.9e9)
    band: tuple = (5.5e9, 7.0e9)
    cpw_width: float = 9e-6
    cpw_gap: float = 5e-6

    def __post_init__(self):
        if self.n_resonators != len(self.f0_list):
            raise ValidationError("n_resonators must match the length of f0_list")
        if len(set(self.f0_list)) != len(self.f0_list):
            raise ValidationError("design frequencies must be distinct")
        lo, hi = self.band
        if not all(lo <= f <= hi for f in self.f0_list):
            raise ValidationError(f"design frequencies must lie within [{lo}, {hi}] Hz")


def frequency_grid(f_r: float, q_l: float, span_linewidths: float = 40.0, n_points: int = 801):
    """Measurement grid centered on f_r, sized in units of the loaded linewidth."""
    span = span_linewidths * f_r / q_l
    return np.linspace(f_r - span / 2.0, f_r + span / 2.0, n_points)


def synthesize_trace(p: ForwardParams, grid, context: MeasurementContext | None = None) -> ResonanceTrace:
    """Generate a notch-port S21 trace with environment and optional noise.

    S21(f) = a e^{i alpha} e^{-2 i pi f tau}
             [1 - (Q_l/|Q_c|) e^{i phi} / (1 + 2 i Q_l (f/f_r - 1))]

    Noise is additive complex Gaussian with total standard deviation
    a * 10^(-SNR/20), split evenly between quadratures; deterministic per
    rng_seed.
    """
    grid = np.asarray(grid, dtype=float)
    check_strictly_increasing(grid, "grid")
    if not grid[0] < p.f_r < grid[-1]:
        raise ValidationError("frequency grid does not span the resonance frequency")
    q_l = p.q_l
    detuning = 2j * q_l * (grid / p.f_r - 1.0)
    resonance = 1.0 - (q_l / p.q_c_mag) * np.exp(1j * p.phi) / (1.0 + detuning)
    env = p.env_amp * np.exp(1j * p.env_phase) * np.exp(-2j * np.pi * grid * p.env_delay)
    s21 = env * resonance
    if math.isfinite(p.noise_snr_db):
        rng = np.random.default_rng(p.rng_seed)
        sigma = p.env_amp * 10.0 ** (-p.noise_snr_db / 20.0)
        s21 = s21 + sigma / np.sqrt(2.0) * (
            rng.standard_normal(len(grid)) + 1j * rng.standard_normal(len(grid))
        )
    return ResonanceTrace(freqs=grid, s21=s21, context=context)


def photon_fixed_point(
    p: LossModelParams,
    q_c: float,
    p_app: float,
    temperature: float,
    prefactor: float = PHOTON_NUMBER_PREFACTOR,
) -> float:
    """Self-consistent mean photon number.

    <n> depends on Q_l, and Q_l depends on Q_i(<n>); the fixed point of
    n = prefactor Q_l(n)^2 P / (hbar w0^2 Q_c) is bracketed between the
    unsaturated and fully saturated loaded Q and solved to 1e-12 relative.
    """
    check_positive(q_c, "q_c")
    check_positive(p_app, "p_app")
    w0 = 2.0 * np.pi * p.f0
    const = prefactor * p_app / (HBAR * w0**2 * q_c)

    def drive(n: float) -> float:
        q_i = 1.0 / total_inverse_qi(n, temperature, p)
        q_l = 1.0 / (1.0 / q_i + 1.0 / q_c)
        return const * q_l**2

    n_lo = 0.5 * drive(0.0)
    # fully saturated bound: TLS term -> 0, only residual + quasiparticle loss left
    residual_loss = p.delta_other + float(np.asarray(delta_qp(temperature, p)))
    q_l_max = 1.0 / (residual_loss + 1.0 / q_c) if residual_loss > 0 else q_c
    n_hi = 2.0 * const * q_l_max**2
    if n_hi <= n_lo:
        n_hi = 2.0 * n_lo + 1.0

    def gap(n: float) -> float:
        return drive(n) - n

    try:
        return float(brentq(gap, n_lo, n_hi, rtol=1e-12, maxiter=200))
    except ValueError as exc:
        raise FitError(f"photon-number fixed point did not bracket: {exc}") from exc


def _attach_noise(q_i_true: np.ndarray, frac: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Multiplicative Gaussian scatter on Q_i plus the matching sigma column.

    A noiseless request still attaches a tiny positive sigma (1e-6 relative)
    so datasets keep strictly positive weights.
    """
    if frac > 0:
        q_i = q_i_true * np.clip(1.0 + frac * rng.standard_normal(len(q_i_true)), 0.05, None)
        sigma = frac * q_i_true
    else:
        q_i = q_i_true.copy()
        sigma = 1e-6 * q_i_true
    return q_i, sigma


def synthesize_power_sweep(
    p_true: LossModelParams,
    q_c: float,
    powers_dbm,
    temperature: float = 0.0257,
    noise_frac: float = 0.0,
    snr_db: float | None = None,
    seed=None,
    self_consistent: bool = True,
    prefactor: float = PHOTON_NUMBER_PREFACTOR,
) -> SweepDataset:
    """Q_i versus photon number dataset at fixed temperature.

    Photon numbers come from the self-consistent Q_l <-> <n> fixed point
    unless self_consistent=False, which uses the unsaturated Q_l (handy for
    textbook-simple tests). Fractional scatter is either given directly
    (noise_frac) or derived from a trace-level SNR via the calibrated
    lookup (snr_db).
    """
    powers_dbm = np.asarray(powers_dbm, dtype=float)
    if np.any(powers_dbm < -170.0) or np.any(powers_dbm > -60.0):
        raise ValidationError("applied powers must lie within [-170, -60] dBm")
    rng = np.random.default_rng(seed)
    w0 = 2.0 * np.pi * p_true.f0
    ns = []
    for dbm in powers_dbm:
        p_app = dbm_to_watts(float(dbm))
        if self_consistent:
            ns.append(photon_fixed_point(p_true, q_c, p_app, temperature, prefactor))
        else:
            q_i0 = 1.0 / total_inverse_qi(0.0, temperature, p_true)
            q_l0 = 1.0 / (1.0 / q_i0 + 1.0 / q_c)
            ns.append(prefactor * q_l0**2 * p_app / (HBAR * w0**2 * q_c))
    ns = np.asarray(ns)
    q_i_true = 1.0 / total_inverse_qi(ns, temperature, p_true)
    frac = qi_sigma_fraction(snr_db) if snr_db is not None else noise_frac
    q_i, sigma = _attach_noise(q_i_true, frac, rng)
    return SweepDataset(
        kind="power-sweep",
        x=ns,
        q_i=q_i,
        sigma_qi=sigma,
        f0=p_true.f0,
        t_c=p_true.t_c,
        fixed_temperature=temperature,
    )


def synthesize_temperature_sweep(
    p_true: LossModelParams,
    n_branches,
    temps,
    noise_frac: float = 0.0,
    seed=None,
) -> SweepDataset:
    """Q_i versus temperature dataset at several fixed photon occupancies."""
    n_branches = np.asarray(n_branches, dtype=float)
    temps = np.asarray(temps, dtype=float)
    if np.any(temps <= 0) or np.any(temps > 1.2):
        raise ValidationError("temperatures must lie within (0, 1.2] K")
    rng = np.random.default_rng(seed)
    xs, qs, branch = [], [], []
    for b, n in enumerate(n_branches):
        inv_qi = total_inverse_qi(np.full_like(temps, n), temps, p_true)
        xs.append(temps)
        qs.append(1.0 / inv_qi)
        branch.append(np.full(len(temps), b, dtype=int))
    x = np.concatenate(xs)
    q_i_true = np.concatenate(qs)
    branch = np.concatenate(branch)
    q_i, sigma = _attach_noise(q_i_true, noise_frac, rng)
    return SweepDataset(
        kind="temperature-sweep",
        x=x,
        q_i=q_i,
        sigma_qi=sigma,
        f0=p_true.f0,
        t_c=p_true.t_c,
        fixed_n=tuple(float(v) for v in n_branches),
        branch=branch,
    )


# ---------------------------------------------------------------------------
# Trace-SNR -> fractional Q_i scatter lookup.
#
# Calibrated once by Monte Carlo (see calibrate_qi_sigma below): 200 seeds of
# the reference geometry (512 points, 40 linewidths, Q_i = 2e6, |Q_c| = 4e5,
# phi = 0.1, tau = 40 ns) per SNR, taking the robust std of recovered Q_i.
# Between grid points the fractional scatter follows the amplitude-noise
# scaling 10^(-SNR/20).
# ---------------------------------------------------------------------------
_QI_SIGMA_TABLE = {
    20.0: 0.2697,
    30.0: 0.06217,
    40.0: 0.01876,
    50.0: 0.00589,
    60.0: 0.00186,
}


def qi_sigma_fraction(snr_db: float) -> float:
    """Fractional Q_i scatter expected from a trace fit at the given SNR."""
    check_positive(snr_db, "snr_db")
    grid = sorted(_QI_SIGMA_TABLE)
    if snr_db <= grid[0]:
        return _QI_SIGMA_TABLE[grid[0]] * 10.0 ** (-(snr_db - grid[0]) / 20.0)
    if snr_db >= grid[-1]:
        return _QI_SIGMA_TABLE[grid[-1]] * 10.0 ** (-(snr_db - grid[-1]) / 20.0)
    # log-linear interpolation between calibrated points
    logs = np.log10([_QI_SIGMA_TABLE[s] for s in grid])
    return float(10.0 ** np.interp(snr_db, grid, logs))


def calibrate_qi_sigma(snr_values=(20.0, 30.0, 40.0, 50.0, 60.0), n_seeds: int = 200) -> dict:
    """Recompute the _QI_SIGMA_TABLE entries by Monte Carlo (slow)."""
    from .circlefit import extract_quality_factors

    out = {}
    for snr in snr_values:
        vals = []
        for seed in range(n_seeds):
            p = ForwardParams(
                f_r=6.34e9,
                q_i=2.0e6,
                q_c_mag=4.0e5,
                phi=0.1,
                env_delay=40e-9,
                env_amp=0.97,
                env_phase=1.1,
                noise_snr_db=snr,
                rng_seed=seed,
            )
            grid = frequency_grid(p.f_r, p.q_l, span_linewidths=40.0, n_points=512)
            trace = synthesize_trace(p, grid)
            try:
                vals.append(extract_quality_factors(trace).q_i)
            except FitError:
                continue
        vals = np.asarray(vals)
        out[float(snr)] = float(np.std(vals) / np.mean(vals))
    return out
