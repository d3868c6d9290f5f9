"""Regression of the loss models onto Q_i sweep data.

Fits are performed in loss space (1/Q_i), where the channels add linearly,
with weights sigma_(1/Qi) = sigma_Qi / Q_i^2. Positivity of the amplitude
parameters is enforced by fitting their logarithms; the saturation exponent
beta is mapped onto (0, 1) through a logistic. The model evaluated inside
the fitter is exactly the one in resqfit.physics (single source of truth).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit, logit
from sklearn.base import BaseEstimator

from .errors import ConvergenceError, IdentifiabilityError, ValidationError
from .physics import (
    LossModelParams,
    delta_tls,
    quasiparticle_factor,
    thermal_tls_factor,
    total_inverse_qi,
)
from .validation import as_float_array, check_finite, check_positive, check_same_length

POWER_SWEEP = "power-sweep"
TEMPERATURE_SWEEP = "temperature-sweep"

_PARAM_ORDER = ("f_delta_tls0", "n_c", "beta", "delta_qp0", "delta_other")
_LOG_PARAMS = frozenset({"f_delta_tls0", "n_c", "delta_qp0", "delta_other"})

# Points per free parameter required before a fit is attempted. Four per
# parameter admits the standard 19-power protocol with all four TLS-model
# parameters free while still rejecting grossly underdetermined fits.
MIN_POINTS_PER_PARAM = 4

# A sample counts as saturated at high power when the relative slope of
# 1/Q_i per decade of <n> at the largest measured <n> falls below this.
SATURATION_SLOPE_THRESHOLD = 0.02


@dataclass(frozen=True)
class SweepDataset:
    """(x, Q_i, sigma_Qi) points for one resonator under one condition.

    x is mean photon number for power sweeps and temperature in kelvin for
    temperature sweeps. Temperature sweeps carry the per-branch photon
    occupancies in fixed_n and a per-point index into it in branch.
    """

    kind: str
    x: np.ndarray
    q_i: np.ndarray
    sigma_qi: np.ndarray
    f0: float
    t_c: float = 4.4
    fixed_temperature: float | None = None
    fixed_n: tuple | None = None
    branch: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (POWER_SWEEP, TEMPERATURE_SWEEP):
            raise ValidationError(f"unknown sweep kind {self.kind!r}")
        object.__setattr__(self, "x", as_float_array(self.x, "x"))
        object.__setattr__(self, "q_i", as_float_array(self.q_i, "q_i"))
        object.__setattr__(self, "sigma_qi", as_float_array(self.sigma_qi, "sigma_qi"))
        check_same_length("x", self.x, "q_i", self.q_i)
        check_same_length("x", self.x, "sigma_qi", self.sigma_qi)
        for name in ("x", "q_i", "sigma_qi"):
            arr = getattr(self, name)
            check_finite(arr, name)
            if not np.all(arr > 0):
                raise ValidationError(f"{name} values must be strictly positive")
        check_positive(self.f0, "f0")
        check_positive(self.t_c, "t_c")
        if self.kind == POWER_SWEEP:
            if self.fixed_temperature is None:
                raise ValidationError("power sweeps need fixed_temperature")
            check_positive(self.fixed_temperature, "fixed_temperature")
        else:
            if self.fixed_n is None or len(self.fixed_n) == 0:
                raise ValidationError("temperature sweeps need at least one fixed_n branch")
            if self.branch is None:
                raise ValidationError("temperature sweeps need per-point branch indices")
            branch = np.asarray(self.branch, dtype=int)
            object.__setattr__(self, "branch", branch)
            check_same_length("x", self.x, "branch", branch)
            if branch.min() < 0 or branch.max() >= len(self.fixed_n):
                raise ValidationError("branch indices outside fixed_n range")
            object.__setattr__(self, "fixed_n", tuple(float(v) for v in self.fixed_n))

    def __len__(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class FitOutcome:
    """Converged loss-model fit: parameters, uncertainty, and diagnostics."""

    params: LossModelParams
    free_names: tuple
    covariance: np.ndarray
    sigma: dict
    reduced_chi_square: float
    residuals: np.ndarray
    n_evaluations: int
    termination: str
    converged: bool
    saturated: bool | None = None

    def to_dict(self) -> dict:
        p = self.params
        return {
            "params": {
                "f_delta_tls0": p.f_delta_tls0,
                "n_c": p.n_c,
                "beta": p.beta,
                "delta_qp0": p.delta_qp0,
                "delta_other": p.delta_other,
                "t_c": p.t_c,
                "f0": p.f0,
            },
            "free_names": list(self.free_names),
            "covariance": np.asarray(self.covariance).tolist(),
            "sigma": dict(self.sigma),
            "reduced_chi_square": self.reduced_chi_square,
            "n_evaluations": self.n_evaluations,
            "termination": self.termination,
            "converged": self.converged,
            "saturated": self.saturated,
        }


# Internal coordinates are clamped so that exp/expit stay finite on wild
# trial steps; the range is far wider than any physical value.
_INTERNAL_CLIP = 200.0


def _to_internal(name: str, value: float) -> float:
    return float(np.log(value)) if name in _LOG_PARAMS else float(logit(value))


def _from_internal(name: str, u: float) -> float:
    u = float(np.clip(u, -_INTERNAL_CLIP, _INTERNAL_CLIP))
    if name in _LOG_PARAMS:
        return float(np.exp(u))
    return float(min(max(expit(u), 1e-12), 1.0))


def _dphys_dinternal(name: str, value: float) -> float:
    return value if name in _LOG_PARAMS else value * (1.0 - value)


def _make_params(values: dict, f0: float, t_c: float) -> LossModelParams:
    return LossModelParams(
        f_delta_tls0=values["f_delta_tls0"],
        n_c=values["n_c"],
        beta=values["beta"],
        delta_qp0=values["delta_qp0"],
        delta_other=values["delta_other"],
        t_c=t_c,
        f0=f0,
    )


def _jacobian_columns(p: LossModelParams, n, temps, free_names):
    """Physical-space Jacobian columns, expressed through the physics module.

    The TLS columns reuse delta_tls directly (analytic derivatives of the
    saturable form); the quasiparticle amplitude enters linearly, so its
    column is just the bracketed thermal factor.
    """
    cols = {}
    dtls = np.asarray(delta_tls(n, temps, p))
    u = n / p.n_c
    if "f_delta_tls0" in free_names:
        cols["f_delta_tls0"] = dtls / p.f_delta_tls0
    if "n_c" in free_names:
        cols["n_c"] = dtls * p.beta * u / (p.n_c * (1.0 + u))
    if "beta" in free_names:
        cols["beta"] = -dtls * np.log1p(u)
    if "delta_qp0" in free_names:
        cols["delta_qp0"] = np.asarray(quasiparticle_factor(temps, p.f0, p.t_c))
    if "delta_other" in free_names:
        cols["delta_other"] = np.ones_like(np.asarray(n, dtype=float))
    return cols


def _initial_values(data: SweepDataset) -> dict:
    """Data-driven starting point in physical space (all strictly positive)."""
    y = 1.0 / data.q_i
    floor = 1e-4 * float(np.median(y))
    if data.kind == POWER_SWEEP:
        order = np.argsort(data.x)
        y_lo = float(np.mean(y[order[:2]]))
        y_hi = float(np.mean(y[order[-2:]]))
        th_ref = float(thermal_tls_factor(data.fixed_temperature, data.f0))
        n_ref = data.x
        qp0 = floor
    else:
        branch = data.branch
        fixed_n = np.asarray(data.fixed_n)
        b_lo, b_hi = int(np.argmin(fixed_n)), int(np.argmax(fixed_n))

        def at(b, coldest=True):
            mask = branch == b
            i = np.argmin(data.x[mask]) if coldest else np.argmax(data.x[mask])
            return float(y[mask][i]), float(data.x[mask][i])

        y_lo, t_cold = at(b_lo, coldest=True)
        y_hi, _ = at(b_hi, coldest=True)
        y_hot, t_hot = at(b_hi, coldest=False)
        th_ref = float(thermal_tls_factor(t_cold, data.f0))
        n_ref = fixed_n
        g_hot = float(quasiparticle_factor(t_hot, data.f0, data.t_c))
        qp0 = max(y_hot - y_hi, 0.01 * float(np.median(y))) / g_hot if g_hot > 0 else floor
    return {
        "f_delta_tls0": max(y_lo - y_hi, floor) / th_ref,
        "n_c": float(np.exp(np.median(np.log(n_ref)))),
        "beta": 0.5,
        "delta_qp0": max(qp0, 1e-30),
        "delta_other": max(0.9 * y_hi, floor),
    }


def _fit_loss_model(data: SweepDataset, frozen: dict, max_iter: int, xtol: float) -> FitOutcome:
    free_names = tuple(name for name in _PARAM_ORDER if name not in frozen)
    if len(data) < MIN_POINTS_PER_PARAM * len(free_names):
        raise ValidationError(
            f"need at least {MIN_POINTS_PER_PARAM} points per free parameter "
            f"({len(free_names)} free), got {len(data)}"
        )

    if data.kind == POWER_SWEEP:
        n = data.x
        temps = np.full(len(data), float(data.fixed_temperature))
    else:
        n = np.asarray(data.fixed_n)[data.branch]
        temps = data.x

    y = 1.0 / data.q_i
    sigma_y = data.sigma_qi / data.q_i**2
    weight = 1.0 / sigma_y

    init = _initial_values(data)
    init.update(frozen)
    x0 = np.array([_to_internal(name, init[name]) for name in free_names])

    def split(u):
        values = dict(frozen)
        for name, ui in zip(free_names, u):
            values[name] = _from_internal(name, ui)
        return values

    def residuals(u):
        p = _make_params(split(u), data.f0, data.t_c)
        return (np.asarray(total_inverse_qi(n, temps, p)) - y) * weight

    def jac(u):
        values = split(u)
        p = _make_params(values, data.f0, data.t_c)
        cols = _jacobian_columns(p, n, temps, free_names)
        out = np.empty((len(y), len(free_names)))
        for j, name in enumerate(free_names):
            out[:, j] = cols[name] * _dphys_dinternal(name, values[name]) * weight
        return out

    sol = least_squares(
        residuals,
        x0=x0,
        jac=jac,
        method="lm",
        xtol=xtol,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=max_iter * (len(free_names) + 1),
    )
    values = split(sol.x)
    converged = sol.status > 0

    # Covariance in physical space: inv(J^T J) with physical-parameter columns.
    cols = _jacobian_columns(_make_params(values, data.f0, data.t_c), n, temps, free_names)
    jv = np.column_stack([cols[name] * weight for name in free_names])
    try:
        cov = np.linalg.pinv(jv.T @ jv)
    except np.linalg.LinAlgError:
        cov = np.full((len(free_names), len(free_names)), np.nan)
    cov = 0.5 * (cov + cov.T)
    sigma = {
        name: float(np.sqrt(max(cov[i, i], 0.0))) for i, name in enumerate(free_names)
    }

    dof = max(len(y) - len(free_names), 1)
    red_chi2 = float(np.sum(sol.fun**2)) / dof

    params = LossModelParams(
        f_delta_tls0=values["f_delta_tls0"],
        n_c=values["n_c"],
        beta=values["beta"],
        delta_qp0=values["delta_qp0"],
        delta_other=values["delta_other"],
        t_c=data.t_c,
        f0=data.f0,
    )
    saturated = None
    if data.kind == POWER_SWEEP:
        saturated = _is_saturated(params, float(np.max(data.x)), float(data.fixed_temperature))
    outcome = FitOutcome(
        params=params,
        free_names=free_names,
        covariance=cov,
        sigma=sigma,
        reduced_chi_square=red_chi2,
        residuals=sol.fun,
        n_evaluations=int(sol.nfev),
        termination=str(sol.message),
        converged=converged,
        saturated=saturated,
    )
    if not converged:
        raise ConvergenceError(
            f"loss-model fit did not converge: {sol.message}", best_value=outcome
        )
    return outcome


def _is_saturated(params: LossModelParams, n_max: float, temperature: float) -> bool:
    """True when 1/Q_i barely changes per decade of <n> at the top power."""
    th = float(thermal_tls_factor(temperature, params.f0))
    u = n_max / params.n_c
    dtls_dlog10 = (
        params.beta * params.f_delta_tls0 * th * u / (1.0 + u) ** (params.beta + 1.0) * np.log(10.0)
    )
    total = float(total_inverse_qi(n_max, temperature, params))
    return bool(dtls_dlog10 / total < SATURATION_SLOPE_THRESHOLD)


def fit_power_sweep(
    data: SweepDataset,
    fix_n_c: float | None = None,
    fix_beta: float | None = None,
    delta_qp0: float = 0.0,
    max_iter: int = 200,
    xtol: float = 1e-10,
) -> FitOutcome:
    """Fit the saturable TLS model to a Q_i(<n>) power sweep.

    Free parameters {F*delta0_TLS, n_c, beta, delta_other}; the
    quasiparticle amplitude is frozen (negligible at the base temperature)
    unless passed explicitly. Requires at least three decades of photon
    number coverage.
    """
    if data.kind != POWER_SWEEP:
        raise ValidationError(f"expected a power sweep, got {data.kind!r}")
    decades = np.log10(float(np.max(data.x)) / float(np.min(data.x)))
    if decades < 3.0:
        raise ValidationError(
            f"power sweep spans only {decades:.2f} decades of photon number; need >= 3"
        )
    frozen = {"delta_qp0": float(delta_qp0)}
    if fix_n_c is not None:
        frozen["n_c"] = float(fix_n_c)
    if fix_beta is not None:
        frozen["beta"] = float(fix_beta)
    return _fit_loss_model(data, frozen, max_iter, xtol)


def fit_temperature_sweep(
    data: SweepDataset,
    fix_n_c: float | None = None,
    fix_beta: float | None = None,
    max_iter: int = 200,
    xtol: float = 1e-10,
) -> FitOutcome:
    """Joint fit of TLS + quasiparticle losses across all photon branches.

    All branches share {F*delta0_TLS, n_c, beta, delta0_QP, delta_other}.
    Single-branch data cannot constrain the TLS amplitude, n_c and beta at
    once; freeze n_c and/or beta in that case.
    """
    if data.kind != TEMPERATURE_SWEEP:
        raise ValidationError(f"expected a temperature sweep, got {data.kind!r}")
    if float(np.max(data.x)) < 0.4:
        raise ValidationError(
            "temperature sweep must reach at least 400 mK for the quasiparticle "
            "losses to be identifiable"
        )
    frozen = {}
    if fix_n_c is not None:
        frozen["n_c"] = float(fix_n_c)
    if fix_beta is not None:
        frozen["beta"] = float(fix_beta)
    if len(data.fixed_n) < 2 and not {"n_c", "beta"} & frozen.keys():
        raise IdentifiabilityError(
            "a single photon branch cannot determine F*delta0_TLS, n_c and beta "
            "together; freeze n_c and/or beta (fix_n_c=..., fix_beta=...)"
        )
    return _fit_loss_model(data, frozen, max_iter, xtol)


def box_stats(values) -> dict:
    """Quartiles and 1.5*IQR whiskers (whiskers end on actual data points)."""
    v = as_float_array(values, "values")
    if len(v) == 0:
        raise ValidationError("box statistics need at least one value")
    q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo = float(np.min(v[v >= q1 - 1.5 * iqr]))
    hi = float(np.max(v[v <= q3 + 1.5 * iqr]))
    return {
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "whisker_lo": lo,
        "whisker_hi": hi,
    }


@dataclass(frozen=True)
class SampleSummary:
    """Loss statistics aggregated across one sample's resonators.

    Mean +/- std of the TLS loss tangent, the best and mean single-photon
    Q_i, the mean high-power Q_i, and box-plot statistics of the
    single-photon distribution.
    """

    n_resonators: int
    f_delta_tls_mean: float
    f_delta_tls_std: float
    qi_max_single_photon: float
    qi_lp_mean: float
    qi_lp_std: float
    qi_hp_mean: float
    qi_hp_std: float
    lp_box: dict = field(default_factory=dict)
    saturated: tuple = ()

    def to_dict(self) -> dict:
        return {
            "n_resonators": self.n_resonators,
            "f_delta_tls_mean": self.f_delta_tls_mean,
            "f_delta_tls_std": self.f_delta_tls_std,
            "qi_max_single_photon": self.qi_max_single_photon,
            "qi_lp_mean": self.qi_lp_mean,
            "qi_lp_std": self.qi_lp_std,
            "qi_hp_mean": self.qi_hp_mean,
            "qi_hp_std": self.qi_hp_std,
            "lp_box": dict(self.lp_box),
            "saturated": list(self.saturated),
        }


def _mean_std(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return mean, std


def summarize_sample(fits, low_power_qis, high_power_qis) -> SampleSummary:
    """Aggregate per-resonator fits into one summary row.

    low_power_qis holds each resonator's Q_i at the measured point nearest
    <n> = 1; high_power_qis the mean Q_i over points with <n> >= 1e6.
    """
    fits = list(fits)
    lp = as_float_array(low_power_qis, "low_power_qis")
    hp = as_float_array(high_power_qis, "high_power_qis")
    if len(fits) == 0 or len(lp) == 0 or len(hp) == 0:
        raise ValidationError("summary needs at least one resonator")
    fdtls = np.array([f.params.f_delta_tls0 for f in fits])
    f_mean, f_std = _mean_std(fdtls)
    lp_mean, lp_std = _mean_std(lp)
    hp_mean, hp_std = _mean_std(hp)
    return SampleSummary(
        n_resonators=len(fits),
        f_delta_tls_mean=f_mean,
        f_delta_tls_std=f_std,
        qi_max_single_photon=float(np.max(lp)),
        qi_lp_mean=lp_mean,
        qi_lp_std=lp_std,
        qi_hp_mean=hp_mean,
        qi_hp_std=hp_std,
        lp_box=box_stats(lp),
        saturated=tuple(bool(f.saturated) if f.saturated is not None else True for f in fits),
    )


class PowerSweepFitter(BaseEstimator):
    """Estimator form of fit_power_sweep: X = <n>, y = Q_i.

    Constructor arguments mirror the functional interface; f0 must be set
    before fit. After fitting, params_, outcome_, covariance_ and sigma_
    are available and predict(X) evaluates the fitted Q_i(<n>) curve.
    """

    def __init__(
        self,
        f0=None,
        temperature=0.0257,
        t_c=4.4,
        fix_n_c=None,
        fix_beta=None,
        delta_qp0=0.0,
        max_iter=200,
        xtol=1e-10,
    ):
        self.f0 = f0
        self.temperature = temperature
        self.t_c = t_c
        self.fix_n_c = fix_n_c
        self.fix_beta = fix_beta
        self.delta_qp0 = delta_qp0
        self.max_iter = max_iter
        self.xtol = xtol

    def fit(self, X, y, sigma=None):
        if self.f0 is None:
            raise ValidationError("PowerSweepFitter needs f0 (hertz) before fitting")
        n = as_float_array(X, "X")
        q_i = as_float_array(y, "y")
        sigma_qi = as_float_array(sigma, "sigma") if sigma is not None else 1e-3 * q_i
        data = SweepDataset(
            kind=POWER_SWEEP,
            x=n,
            q_i=q_i,
            sigma_qi=sigma_qi,
            f0=self.f0,
            t_c=self.t_c,
            fixed_temperature=self.temperature,
        )
        self.outcome_ = fit_power_sweep(
            data,
            fix_n_c=self.fix_n_c,
            fix_beta=self.fix_beta,
            delta_qp0=self.delta_qp0,
            max_iter=self.max_iter,
            xtol=self.xtol,
        )
        self.params_ = self.outcome_.params
        self.covariance_ = self.outcome_.covariance
        self.sigma_ = self.outcome_.sigma
        return self

    def predict(self, X):
        if not hasattr(self, "params_"):
            raise ValidationError("fit before predict")
        n = as_float_array(X, "X")
        return 1.0 / total_inverse_qi(n, self.temperature, self.params_)


class TemperatureSweepFitter(BaseEstimator):
    """Estimator form of fit_temperature_sweep: X = columns (T, <n>), y = Q_i."""

    def __init__(self, f0=None, t_c=4.4, fix_n_c=None, fix_beta=None, max_iter=200, xtol=1e-10):
        self.f0 = f0
        self.t_c = t_c
        self.fix_n_c = fix_n_c
        self.fix_beta = fix_beta
        self.max_iter = max_iter
        self.xtol = xtol

    @staticmethod
    def _split_X(X):
        arr = np.asarray(X, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValidationError("X must be (n_samples, 2) columns [temperature, photon number]")
        return arr[:, 0], arr[:, 1]

    def fit(self, X, y, sigma=None):
        if self.f0 is None:
            raise ValidationError("TemperatureSweepFitter needs f0 (hertz) before fitting")
        temps, n = self._split_X(X)
        q_i = as_float_array(y, "y")
        sigma_qi = as_float_array(sigma, "sigma") if sigma is not None else 1e-3 * q_i
        fixed_n = tuple(sorted(set(float(v) for v in n)))
        lookup = {v: i for i, v in enumerate(fixed_n)}
        branch = np.array([lookup[float(v)] for v in n], dtype=int)
        data = SweepDataset(
            kind=TEMPERATURE_SWEEP,
            x=temps,
            q_i=q_i,
            sigma_qi=sigma_qi,
            f0=self.f0,
            t_c=self.t_c,
            fixed_n=fixed_n,
            branch=branch,
        )
        self.outcome_ = fit_temperature_sweep(
            data,
            fix_n_c=self.fix_n_c,
            fix_beta=self.fix_beta,
            max_iter=self.max_iter,
            xtol=self.xtol,
        )
        self.params_ = self.outcome_.params
        self.covariance_ = self.outcome_.covariance
        self.sigma_ = self.outcome_.sigma
        return self

    def predict(self, X):
        if not hasattr(self, "params_"):
            raise ValidationError("fit before predict")
        temps, n = self._split_X(X)
        return 1.0 / total_inverse_qi(n, temps, self.params_)
