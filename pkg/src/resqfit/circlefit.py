"""Diameter-corrected circle fit for notch-type S21 resonances.

Pipeline: (1) find the cable delay that makes the trace circular,
(2) algebraic circle fit, (3) phase-vs-frequency fit of the centered data,
(4) locate the off-resonant point, normalize the environment, and apply
the diameter correction 1/Q_i = 1/Q_l - cos(phi)/|Q_c|.

Everything is a pure function of the trace; traces may be fit concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar
from sklearn.base import BaseEstimator

from .errors import (
    ConvergenceError,
    EdgeClipWarning,
    EdgeClippedError,
    NegativeQiError,
    NoResonanceError,
    ValidationError,
)
from .trace import ResonanceTrace
from .validation import as_complex_array, as_float_array, check_finite

# Grid points this close to an edge trigger the clipped-resonance warning.
EDGE_MARGIN = 5

_SIGMA_KEYS = ("f_r", "q_l", "q_c_mag", "phi", "q_i", "env_delay", "env_amp", "env_phase")


@dataclass(frozen=True)
class CircleFitResult:
    """Extracted resonance parameters with per-parameter standard errors.

    q_i is defined through the diameter-corrected closure
    1/q_l = 1/q_i + cos(phi)/q_c_mag, so the closure holds to rounding.
    """

    f_r: float
    q_l: float
    q_c_mag: float
    phi: float
    q_i: float
    env_delay: float
    env_amp: float
    env_phase: float
    sigma: dict = field(default_factory=dict)
    n_points: int = 0
    residual_rms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "f_r": self.f_r,
            "q_l": self.q_l,
            "q_c_mag": self.q_c_mag,
            "phi": self.phi,
            "q_i": self.q_i,
            "env_delay": self.env_delay,
            "env_amp": self.env_amp,
            "env_phase": self.env_phase,
            "sigma": dict(self.sigma),
            "n_points": self.n_points,
            "residual_rms": self.residual_rms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CircleFitResult":
        return cls(**d)


def fit_circle(points) -> tuple[complex, float]:
    """Algebraic least-squares circle fit (Taubin, via SVD of the moment matrix).

    Deterministic, needs no initialization, exact for noiseless circular
    data. Raises ValidationError for fewer than 3 points or (near-)collinear
    input.
    """
    z = as_complex_array(points, "points")
    if len(z) < 3:
        raise ValidationError("circle fit needs at least 3 points")
    check_finite(z.real, "Re(points)")
    check_finite(z.imag, "Im(points)")
    x = z.real - z.real.mean()
    y = z.imag - z.imag.mean()
    sq = x * x + y * y
    sq_mean = sq.mean()
    if sq_mean <= 0:
        raise ValidationError("all points coincide; circle is undefined")
    scale = np.sqrt(sq_mean)
    # Columns [ (|p|^2 - mean)/2s, x, y ]; null vector gives the conic coefficients.
    design = np.column_stack([(sq - sq_mean) / (2.0 * scale), x, y])
    _, _, vt = np.linalg.svd(design, full_matrices=False)
    a0, b1, c1 = vt[2]
    a0 /= 2.0 * scale
    d0 = -sq_mean * a0
    if abs(a0) * scale < 1e-12 * np.hypot(b1, c1):
        raise ValidationError("points are collinear; no finite circle fits them")
    xc = -b1 / (2.0 * a0)
    yc = -c1 / (2.0 * a0)
    radius = np.sqrt(b1 * b1 + c1 * c1 - 4.0 * a0 * d0) / (2.0 * abs(a0))
    center = complex(xc + z.real.mean(), yc + z.imag.mean())
    if not np.isfinite(radius) or radius > 1e8 * scale:
        raise ValidationError("degenerate circle fit (radius unbounded)")
    return center, float(radius)


def _radial_residual_ms(z: np.ndarray) -> float:
    """Mean squared radial deviation from the best-fit circle."""
    center, radius = fit_circle(z)
    r = np.abs(z - center) - radius
    return float(np.mean(r * r))


def _dip_depth(z: np.ndarray) -> tuple[float, float]:
    """(relative dip depth, baseline magnitude) from the outer-decile baseline."""
    mag = np.abs(z)
    k = max(3, len(z) // 10)
    baseline = float(np.median(np.concatenate([mag[:k], mag[-k:]])))
    if baseline <= 0:
        return 0.0, baseline
    depth = max(baseline - float(mag.min()), 0.0)
    return depth / baseline, baseline


def _group_delay_estimate(freqs: np.ndarray, z: np.ndarray) -> tuple[float, float]:
    """Cable-delay guess and its standard error from the baseline phase slope.

    The resonance region (where |z| dips below the baseline) is masked out
    and a straight line is fit to the unwrapped phase of the remaining
    points; the resonance contributes no net phase between the far ends of
    the span, so the residual slope is -2*pi*tau.
    """
    n = len(z)
    mag = np.abs(z)
    rel_depth, baseline = _dip_depth(z)
    mask = np.ones(n, dtype=bool)
    if rel_depth > 0:
        core = mag < baseline - 0.25 * rel_depth * baseline
        if core.any():
            idx = np.flatnonzero(core)
            width = idx[-1] - idx[0] + 1
            lo = max(0, idx[0] - width)
            hi = min(n, idx[-1] + width + 1)
            mask[lo:hi] = False
    if mask.sum() < max(8, n // 4):
        # resonance fills the span: fall back to the outermost points
        mask[:] = False
        k = max(4, n // 16)
        mask[:k] = True
        mask[-k:] = True
    phase = np.unwrap(np.angle(z))
    f = freqs[mask]
    ph = phase[mask]
    design = np.column_stack([f - f.mean(), np.ones_like(f)])
    coef, *_ = np.linalg.lstsq(design, ph, rcond=None)
    resid = ph - design @ coef
    dof = max(len(f) - 2, 1)
    var_slope = float(np.sum(resid**2)) / dof / float(np.sum((f - f.mean()) ** 2))
    tau = -coef[0] / (2.0 * np.pi)
    sigma_tau = np.sqrt(max(var_slope, 0.0)) / (2.0 * np.pi)
    return float(tau), float(sigma_tau)


def _best_delay(freqs: np.ndarray, z: np.ndarray) -> float:
    """Delay that minimizes the circle-fit residual of z * exp(+2i pi f tau).

    The residual has a very narrow basin around the true delay (width
    ~ dip_depth / (4 pi span)) sitting on a nearly flat plateau, so the
    search combines the baseline phase-slope estimate with scans at several
    widths, Brent-polishing each candidate and keeping the best.
    """
    span = freqs[-1] - freqs[0]
    tau_a, sigma_tau = _group_delay_estimate(freqs, z)
    rel_depth, _ = _dip_depth(z)
    basin = max(rel_depth, 1e-4) / (4.0 * np.pi * span)
    xatol = max(1e-9 / span, 1e-18)

    def objective(tau: float) -> float:
        return _radial_residual_ms(z * np.exp(2j * np.pi * freqs * tau))

    def scan_best(center: float, half_width: float, n_pts: int) -> tuple[float, float]:
        taus = np.linspace(center - half_width, center + half_width, n_pts)
        vals = [objective(t) for t in taus]
        k = int(np.argmin(vals))
        return float(taus[k]), float(taus[1] - taus[0])

    w_fine = max(8.0 * basin, 5.0 * sigma_tau, 1e-3 / span)
    w_wide = 4.0 * abs(tau_a) + 8.0 / (np.pi * span)
    candidates = [
        scan_best(tau_a, w_fine, 129),
        scan_best(tau_a, w_wide, 65),
        (tau_a, max(2.0 * basin, 1e3 * xatol)),
    ]

    best_tau, best_val = tau_a, objective(tau_a)
    for center, half in candidates:
        res = minimize_scalar(
            objective,
            bounds=(center - half, center + half),
            method="bounded",
            options={"xatol": xatol, "maxiter": 500},
        )
        if not res.success:
            raise ConvergenceError(
                f"cable-delay search did not converge: {res.message}",
                best_value=float(res.x),
            )
        if res.fun < best_val:
            best_tau, best_val = float(res.x), float(res.fun)
    return best_tau


def remove_cable_delay(trace: ResonanceTrace, delay: float | None = None):
    """Undo the feedline propagation delay.

    Returns (corrected trace, tau) where the corrected samples are
    s21 * exp(+2i pi f tau). If delay is None it is estimated by maximizing
    circularity of the corrected data.
    """
    z = trace.s21 / np.max(np.abs(trace.s21))
    tau = _best_delay(trace.freqs, z) if delay is None else float(delay)
    corrected = trace.with_s21(trace.s21 * np.exp(2j * np.pi * trace.freqs * tau))
    return corrected, tau


@dataclass(frozen=True)
class PhaseFit:
    theta0: float
    q_l: float
    f_r: float
    cov: np.ndarray  # 3x3 over (theta0, q_l, f_r)
    residual_rms: float
    n_evaluations: int


def _phase_model(freqs, theta0, q_l, f_r):
    return theta0 + 2.0 * np.arctan(2.0 * q_l * (1.0 - freqs / f_r))


def fit_phase(freqs, z_centered, theta0=None, q_l=None, f_r=None) -> PhaseFit:
    """Fit theta(f) = theta0 + 2*arctan(2*Q_l*(1 - f/f_r)) to the centered data.

    Expects delay-removed data translated so the resonance circle is centered
    at the origin. Initial guesses are derived from the data unless given.
    """
    freqs = as_float_array(freqs, "freqs")
    z = as_complex_array(z_centered, "z_centered")
    theta = np.unwrap(np.angle(z))

    if f_r is None or q_l is None:
        # |dz/df| peaks at resonance with a Lorentzian profile of FWHM f_r/Q_l
        speed = np.abs(np.diff(z)) / np.diff(freqs)
        width = max(3, len(speed) // 64)
        kernel = np.ones(width) / width
        speed = np.convolve(speed, kernel, mode="same")
        mids = 0.5 * (freqs[1:] + freqs[:-1])
        peak = int(np.argmax(speed))
        if f_r is None:
            f_r = float(mids[peak])
        if q_l is None:
            above = speed > 0.5 * speed[peak]
            fwhm = mids[above][-1] - mids[above][0] if above.sum() >= 2 else 0.0
            q_l = f_r / fwhm if fwhm > 0 else 10.0 * f_r / (freqs[-1] - freqs[0])
    if theta0 is None:
        theta0 = float(np.interp(f_r, freqs, theta))

    def residuals(p):
        return _phase_model(freqs, *p) - theta

    def jac(p):
        _, ql, fr = p
        u = 2.0 * ql * (1.0 - freqs / fr)
        denom = 1.0 + u * u
        d_theta0 = np.ones_like(freqs)
        d_ql = 2.0 * (2.0 * (1.0 - freqs / fr)) / denom
        d_fr = 2.0 * (2.0 * ql * freqs / fr**2) / denom
        return np.column_stack([d_theta0, d_ql, d_fr])

    sol = least_squares(
        residuals,
        x0=[theta0, q_l, f_r],
        jac=jac,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=2000,
    )
    if not sol.success and sol.status <= 0:
        raise ConvergenceError(
            f"phase fit did not converge: {sol.message}",
            best_value={"theta0": sol.x[0], "q_l": sol.x[1], "f_r": sol.x[2]},
        )
    n = len(freqs)
    dof = max(n - 3, 1)
    s2 = float(np.sum(sol.fun**2)) / dof
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj) * s2
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.nan)
    th0 = (sol.x[0] + np.pi) % (2.0 * np.pi) - np.pi
    return PhaseFit(
        theta0=float(th0),
        q_l=float(sol.x[1]),
        f_r=float(sol.x[2]),
        cov=cov,
        residual_rms=float(np.sqrt(np.mean(sol.fun**2))),
        n_evaluations=int(sol.nfev),
    )


def _notch_model(freqs, f_r, q_l, q_c_mag, phi, delay, amp, alpha):
    """Environment-dressed notch transmission, used for reconstruction only."""
    resonance = 1.0 - (q_l / q_c_mag) * np.exp(1j * phi) / (
        1.0 + 2j * q_l * (freqs / f_r - 1.0)
    )
    return amp * np.exp(1j * alpha) * np.exp(-2j * np.pi * freqs * delay) * resonance


def _extract_once(freqs, z_scaled, delay):
    """One pass of the full pipeline on amplitude-normalized data.

    Returns the raw parameter tuple plus intermediate quantities needed for
    the uncertainty estimates.
    """
    tau = _best_delay(freqs, z_scaled) if delay is None else float(delay)
    z1 = z_scaled * np.exp(2j * np.pi * freqs * tau)
    center, r0 = fit_circle(z1)
    pf = fit_phase(freqs, z1 - center)

    theta = np.unwrap(np.angle(z1 - center))
    if theta.max() - theta.min() < 0.5:
        raise NoResonanceError(
            f"phase swing of centered data is only {theta.max() - theta.min():.3f} rad"
        )
    if pf.q_l <= 0:
        raise NoResonanceError("phase fit returned non-positive loaded Q")
    # a real resonance traces a coherent arc; pure noise leaves ~1 rad of
    # unexplained phase scatter around any arctan curve
    if pf.residual_rms > 0.7:
        raise NoResonanceError(
            f"phase fit leaves {pf.residual_rms:.2f} rad rms scatter; "
            "no coherent resonance in this trace"
        )
    if not freqs[0] <= pf.f_r <= freqs[-1]:
        raise EdgeClippedError(
            f"fitted resonance frequency {pf.f_r:.6g} Hz is outside the measured span"
        )

    # Off-resonant point: diametrically opposite the resonance point on the circle.
    offres = center + r0 * np.exp(1j * (pf.theta0 + np.pi))
    a_rel = abs(offres)
    if a_rel <= 0:
        raise NoResonanceError("off-resonant point collapsed to the origin")
    alpha = float(np.angle(offres))
    c2 = center / offres
    r2 = r0 / a_rel
    phi = float(np.angle(1.0 - c2))
    q_c_mag = pf.q_l / (2.0 * r2)
    return tau, z1, center, r0, pf, a_rel, alpha, phi, q_c_mag, r2


def extract_quality_factors(
    trace: ResonanceTrace,
    delay: float | None = None,
    uncertainty: str = "analytic",
    n_bootstrap: int = 64,
    random_state=None,
) -> CircleFitResult:
    """Full diameter-corrected extraction of (f_r, Q_l, |Q_c|, phi, Q_i).

    uncertainty: "analytic" propagates the phase-fit covariance and the
    radial residual scatter (fast); "bootstrap" refits residual-resampled
    replicas of the trace (slower, also covers the delay estimate).
    """
    if uncertainty not in ("analytic", "bootstrap"):
        raise ValidationError(f"unknown uncertainty mode {uncertainty!r}")
    freqs = trace.freqs
    dip = int(np.argmin(np.abs(trace.s21)))
    if dip < EDGE_MARGIN or dip >= len(freqs) - EDGE_MARGIN:
        warnings.warn(
            f"resonance minimum within {EDGE_MARGIN} points of the span edge; "
            "extraction proceeds but may be biased",
            EdgeClipWarning,
            stacklevel=2,
        )
    scale = float(np.max(np.abs(trace.s21)))
    if scale <= 0:
        raise ValidationError("trace is identically zero")
    z_scaled = trace.s21 / scale

    tau, z1, center, r0, pf, a_rel, alpha, phi, q_c_mag, r2 = _extract_once(
        freqs, z_scaled, delay
    )

    inv_ql = 1.0 / pf.q_l
    inv_qi = inv_ql - np.cos(phi) / q_c_mag

    # --- analytic standard errors ------------------------------------------
    n = len(freqs)
    sigma_ql = float(np.sqrt(abs(pf.cov[1, 1]))) if np.all(np.isfinite(pf.cov)) else np.nan
    sigma_fr = float(np.sqrt(abs(pf.cov[2, 2]))) if np.all(np.isfinite(pf.cov)) else np.nan
    sigma_th0 = float(np.sqrt(abs(pf.cov[0, 0]))) if np.all(np.isfinite(pf.cov)) else np.nan
    radial = np.abs(z1 - center) - r0
    s_rad = float(np.sqrt(np.mean(radial * radial)))
    sigma_r0 = s_rad / np.sqrt(n)
    sigma_coord = s_rad * np.sqrt(2.0 / n)
    # off-resonant point scatter: center scatter plus the theta0 lever arm
    sigma_off = float(np.hypot(sigma_coord, r0 * sigma_th0))
    sigma_phi = float(
        np.hypot(sigma_coord / (a_rel * r2 * max(abs(np.cos(phi)), 0.1)), sigma_th0 * r2)
    )
    sigma_r2 = float(np.hypot(sigma_r0 / a_rel, r2 * sigma_off / a_rel))
    sigma_qc = q_c_mag * float(np.hypot(sigma_ql / pf.q_l, sigma_r2 / r2))
    sigma_inv_qi = float(
        np.sqrt(
            (sigma_ql / pf.q_l**2) ** 2
            + (np.cos(phi) * sigma_qc / q_c_mag**2) ** 2
            + (np.sin(phi) * sigma_phi / q_c_mag) ** 2
        )
    )
    # Winding lever arm: a delay error tilts phase by 2*pi*span*dtau across the span.
    span = freqs[-1] - freqs[0]
    sigma_tau = s_rad / (max(r0, 1e-12) * np.pi * span * np.sqrt(n))

    if inv_qi <= 0:
        if inv_qi < -3.0 * max(sigma_inv_qi, 1e-12):
            raise NegativeQiError(
                f"diameter-corrected 1/Q_i = {inv_qi:.3e} is significantly negative; "
                "the resonance is overcoupled beyond what the model supports"
            )
        q_i = np.inf  # loss indistinguishable from zero at this precision
        sigma_qi = np.inf
    else:
        q_i = 1.0 / inv_qi
        sigma_qi = q_i**2 * sigma_inv_qi

    sigma = {
        "f_r": sigma_fr,
        "q_l": sigma_ql,
        "q_c_mag": sigma_qc,
        "phi": sigma_phi,
        "q_i": float(sigma_qi),
        "env_delay": float(sigma_tau),
        "env_amp": float(sigma_off * scale),
        "env_phase": float(sigma_off / a_rel),
    }

    result = CircleFitResult(
        f_r=pf.f_r,
        q_l=pf.q_l,
        q_c_mag=float(q_c_mag),
        phi=phi,
        q_i=float(q_i),
        env_delay=tau,
        env_amp=float(a_rel * scale),
        env_phase=alpha,
        sigma=sigma,
        n_points=n,
        residual_rms=s_rad,
    )

    if uncertainty == "bootstrap":
        result = _bootstrap_sigma(trace, result, n_bootstrap, random_state)
    return result


def _bootstrap_sigma(trace, result, n_bootstrap, random_state) -> CircleFitResult:
    """Residual bootstrap: refit model + resampled residuals, report the spread."""
    rng = np.random.default_rng(random_state)
    model = _notch_model(
        trace.freqs,
        result.f_r,
        result.q_l,
        result.q_c_mag,
        result.phi,
        result.env_delay,
        result.env_amp,
        result.env_phase,
    )
    residuals = trace.s21 - model
    draws = {k: [] for k in _SIGMA_KEYS}
    failures = 0
    for _ in range(n_bootstrap):
        idx = rng.integers(0, len(residuals), size=len(residuals))
        replica = trace.with_s21(model + residuals[idx])
        try:
            r = extract_quality_factors(replica, uncertainty="analytic")
        except (NoResonanceError, EdgeClippedError, NegativeQiError, ConvergenceError):
            failures += 1
            continue
        for k in _SIGMA_KEYS:
            draws[k].append(getattr(r, k))
    if failures > 0.2 * n_bootstrap:
        raise ConvergenceError(
            f"bootstrap failed on {failures}/{n_bootstrap} replicas", best_value=result
        )
    sigma = {k: float(np.std(v, ddof=1)) if len(v) > 1 else np.nan for k, v in draws.items()}
    return CircleFitResult(
        f_r=result.f_r,
        q_l=result.q_l,
        q_c_mag=result.q_c_mag,
        phi=result.phi,
        q_i=result.q_i,
        env_delay=result.env_delay,
        env_amp=result.env_amp,
        env_phase=result.env_phase,
        sigma=sigma,
        n_points=result.n_points,
        residual_rms=result.residual_rms,
    )


class CircleFitter(BaseEstimator):
    """Scikit-learn style estimator wrapping the circle-fit pipeline.

    Parameters
    ----------
    delay : float or None
        Fixed cable delay in seconds; None estimates it from the data.
    uncertainty : {"analytic", "bootstrap"}
        Standard-error method.
    n_bootstrap : int
        Number of bootstrap replicas when uncertainty="bootstrap".
    random_state : int or None
        Seed for the bootstrap resampler.

    After fit(), the extracted parameters are available as ``f_r_``,
    ``q_l_``, ``q_c_mag_``, ``phi_``, ``q_i_``, ``delay_``, ``amp_``,
    ``phase_offset_``, ``sigma_`` and the full ``result_``.
    """

    def __init__(self, delay=None, uncertainty="analytic", n_bootstrap=64, random_state=None):
        self.delay = delay
        self.uncertainty = uncertainty
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state

    def fit(self, freqs, s21=None):
        """Fit a trace. Either fit(trace) or fit(freqs, s21)."""
        if isinstance(freqs, ResonanceTrace):
            trace = freqs
        else:
            trace = ResonanceTrace(freqs=np.asarray(freqs, dtype=float), s21=s21)
        self.result_ = extract_quality_factors(
            trace,
            delay=self.delay,
            uncertainty=self.uncertainty,
            n_bootstrap=self.n_bootstrap,
            random_state=self.random_state,
        )
        self.f_r_ = self.result_.f_r
        self.q_l_ = self.result_.q_l
        self.q_c_mag_ = self.result_.q_c_mag
        self.phi_ = self.result_.phi
        self.q_i_ = self.result_.q_i
        self.delay_ = self.result_.env_delay
        self.amp_ = self.result_.env_amp
        self.phase_offset_ = self.result_.env_phase
        self.sigma_ = self.result_.sigma
        return self

    def predict(self, freqs):
        """Evaluate the fitted transmission model on a frequency grid."""
        if not hasattr(self, "result_"):
            raise ValidationError("CircleFitter must be fit before calling predict")
        r = self.result_
        return _notch_model(
            np.asarray(freqs, dtype=float),
            r.f_r,
            r.q_l,
            r.q_c_mag,
            r.phi,
            r.env_delay,
            r.env_amp,
            r.env_phase,
        )
