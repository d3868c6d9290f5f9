"""Forward simulator: trace model values, noise statistics, fixed point."""

import numpy as np
import pytest

from resqfit import (
    ChipSpec,
    ForwardParams,
    LossModelParams,
    ValidationError,
    delta_tls,
    extract_quality_factors,
    fit_temperature_sweep,
    frequency_grid,
    photon_fixed_point,
    qi_sigma_fraction,
    synthesize_power_sweep,
    synthesize_temperature_sweep,
    synthesize_trace,
    total_inverse_qi,
)
from resqfit.constants import HBAR, dbm_to_watts


class TestTraceModel:
    def test_on_resonance_value(self):
        p = ForwardParams(f_r=6.0e9, q_i=1e6, q_c_mag=3e5, phi=0.0)
        grid = frequency_grid(p.f_r, p.q_l, span_linewidths=30, n_points=801)
        trace = synthesize_trace(p, grid)
        mid = trace.s21[400]  # odd grid includes f_r exactly
        assert mid.real == pytest.approx(1.0 - p.q_l / p.q_c_mag, rel=1e-12)
        assert abs(mid.imag) < 1e-12

    def test_baseline_far_from_resonance(self):
        p = ForwardParams(f_r=6.0e9, q_i=1e6, q_c_mag=3e5, phi=0.1, env_amp=0.8)
        grid = frequency_grid(p.f_r, p.q_l, span_linewidths=2000, n_points=4001)
        trace = synthesize_trace(p, grid)
        assert abs(trace.s21[0]) == pytest.approx(0.8, rel=5e-3)
        assert abs(trace.s21[-1]) == pytest.approx(0.8, rel=5e-3)

    def test_round_trip_through_extraction(self):
        p = ForwardParams(f_r=6.34e9, q_i=1.55e6, q_c_mag=4e5, phi=0.2)
        grid = frequency_grid(p.f_r, p.q_l, span_linewidths=40, n_points=801)
        r = extract_quality_factors(synthesize_trace(p, grid))
        assert r.q_i == pytest.approx(p.q_i, rel=1e-4)
        assert r.q_c_mag == pytest.approx(p.q_c_mag, rel=1e-4)

    def test_grid_must_span_resonance(self):
        p = ForwardParams(f_r=6.0e9, q_i=1e6, q_c_mag=3e5)
        with pytest.raises(ValidationError):
            synthesize_trace(p, np.linspace(6.1e9, 6.2e9, 128))

    def test_seeded_determinism(self):
        p = ForwardParams(f_r=6e9, q_i=1e6, q_c_mag=3e5, noise_snr_db=30.0, rng_seed=17)
        grid = frequency_grid(p.f_r, p.q_l, 40, 512)
        a = synthesize_trace(p, grid)
        b = synthesize_trace(p, grid)
        assert np.array_equal(a.s21, b.s21)

    def test_noise_scaling_matches_requested_snr(self):
        p0 = ForwardParams(f_r=6e9, q_i=1e6, q_c_mag=3e5, env_amp=0.9)
        grid = frequency_grid(p0.f_r, p0.q_l, 40, 2000)
        clean = synthesize_trace(p0, grid)
        for snr in (20.0, 40.0):
            p = ForwardParams(
                f_r=6e9, q_i=1e6, q_c_mag=3e5, env_amp=0.9, noise_snr_db=snr, rng_seed=1
            )
            noisy = synthesize_trace(p, grid)
            resid = noisy.s21 - clean.s21
            measured = np.sqrt(np.mean(np.abs(resid) ** 2))
            assert measured == pytest.approx(0.9 * 10 ** (-snr / 20), rel=0.05)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValidationError):
            ForwardParams(f_r=6e9, q_i=1e6, q_c_mag=3e5, phi=1.6)
        with pytest.raises(ValidationError):
            ForwardParams(f_r=6e9, q_i=-1e6, q_c_mag=3e5)
        with pytest.raises(ValidationError):
            ForwardParams(f_r=6e9, q_i=1e6, q_c_mag=3e5, noise_snr_db=0.0)


class TestChipSpec:
    def test_default_is_five_resonators_in_band(self):
        chip = ChipSpec()
        assert chip.n_resonators == 5
        assert all(5.5e9 <= f <= 7.0e9 for f in chip.f0_list)

    def test_rejects_duplicates(self):
        with pytest.raises(ValidationError):
            ChipSpec(n_resonators=2, f0_list=(6e9, 6e9))

    def test_rejects_out_of_band(self):
        with pytest.raises(ValidationError):
            ChipSpec(n_resonators=1, f0_list=(9e9,))


def truth_params(**kw):
    base = dict(
        f_delta_tls0=2.86e-6,
        n_c=1.0,
        beta=0.5,
        delta_qp0=0.0,
        delta_other=1.0 / 2.29e6,
        t_c=4.4,
        f0=6.34e9,
    )
    base.update(kw)
    return LossModelParams(**base)


class TestPhotonFixedPoint:
    def test_matches_naive_iteration(self):
        # independent oracle: plain fixed-point iteration of the same map
        p = truth_params()
        q_c = 4e5
        p_app = dbm_to_watts(-120.0)
        w0 = 2 * np.pi * p.f0
        n = 1.0
        for _ in range(300):
            q_i = 1.0 / total_inverse_qi(n, 0.0257, p)
            q_l = 1.0 / (1.0 / q_i + 1.0 / q_c)
            n = 2.0 * q_l**2 * p_app / (HBAR * w0**2 * q_c)
        assert photon_fixed_point(p, q_c, p_app, 0.0257) == pytest.approx(n, rel=1e-9)

    def test_linear_at_weak_drive(self):
        p = truth_params()
        n1 = photon_fixed_point(p, 4e5, dbm_to_watts(-170.0), 0.0257)
        n2 = photon_fixed_point(p, 4e5, dbm_to_watts(-164.0), 0.0257)
        # far below n_c the loaded Q barely moves, so <n> is ~linear in power
        assert n2 / n1 == pytest.approx(10 ** 0.6, rel=2e-2)


class TestPowerSweepSynthesis:
    def test_constant_qi_without_tls(self):
        p = truth_params(f_delta_tls0=0.0)
        data = synthesize_power_sweep(p, q_c=4e5, powers_dbm=np.arange(-162.0, -71.0, 5.0))
        assert np.ptp(data.q_i) / np.mean(data.q_i) < 1e-12

    def test_published_low_power_bracket(self):
        # bare-Ta reference values: the single-photon Q_i lands in the
        # published 0.42 +/- 0.03 neighbourhood
        p = truth_params()
        data = synthesize_power_sweep(p, q_c=4e5, powers_dbm=np.arange(-162.0, -71.0, 5.0))
        lp = data.q_i[np.argmin(np.abs(np.log10(data.x)))]
        assert 0.34e6 < lp < 0.44e6

    def test_critical_photon_number_rescaling(self):
        # Q_i(2n; 2 n_c) = Q_i(n; n_c): pure axis shift of the saturation curve
        p1 = truth_params(n_c=3.0)
        p2 = truth_params(n_c=6.0)
        n = np.logspace(-1, 8, 50)
        a = np.asarray(delta_tls(n, 0.0257, p1))
        b = np.asarray(delta_tls(2.0 * n, 0.0257, p2))
        assert np.array_equal(a, b)

    def test_power_bounds_enforced(self):
        with pytest.raises(ValidationError):
            synthesize_power_sweep(truth_params(), q_c=4e5, powers_dbm=[-50.0])

    def test_snr_lookup_noise(self):
        data = synthesize_power_sweep(
            truth_params(),
            q_c=4e5,
            powers_dbm=np.arange(-162.0, -71.0, 5.0),
            snr_db=40.0,
            seed=3,
        )
        assert np.all(data.sigma_qi > 0)
        expected = qi_sigma_fraction(40.0)
        # sigma column is frac * true Q_i; the measured Q_i itself scatters by ~frac
        assert np.allclose(data.sigma_qi / data.q_i, expected, rtol=0.15)

    def test_self_consistency_flag(self):
        p = truth_params()
        powers = np.arange(-120.0, -71.0, 5.0)
        coupled = synthesize_power_sweep(p, q_c=4e5, powers_dbm=powers)
        naive = synthesize_power_sweep(p, q_c=4e5, powers_dbm=powers, self_consistent=False)
        # with saturation, the loaded Q grows with n, so coupled <n> runs higher
        assert np.all(coupled.x > naive.x)


class TestTemperatureSweepSynthesis:
    def test_branch_structure(self):
        p = truth_params(delta_qp0=2e-3, n_c=10.0)
        branches = [10.0, 1e3, 1e6]
        temps = np.linspace(0.025, 0.998, 12)
        data = synthesize_temperature_sweep(p, branches, temps)
        assert len(data) == 36
        assert data.fixed_n == (10.0, 1e3, 1e6)
        assert np.all(np.asarray(data.branch) == np.repeat([0, 1, 2], 12))

    def test_cold_branches_differ_only_by_saturation(self):
        p = truth_params(delta_qp0=2e-3, n_c=10.0)
        temps = np.array([0.001, 0.002])
        data = synthesize_temperature_sweep(p, [10.0, 1e4], temps)
        loss = 1.0 / data.q_i
        # quasiparticle term frozen at these temperatures: branch difference
        # equals the TLS saturation difference
        diff = loss[:2] - loss[2:]
        expected = np.asarray(delta_tls(10.0, temps, p)) - np.asarray(delta_tls(1e4, temps, p))
        assert np.allclose(diff, expected, rtol=1e-12)

    def test_branch_spread_shrinks_at_high_temperature(self):
        p = truth_params(delta_qp0=2e-3, n_c=10.0)
        branches = [10.0**k for k in range(1, 7)]
        temps = np.linspace(0.4, 0.998, 15)
        data = synthesize_temperature_sweep(p, branches, temps)
        loss = (1.0 / data.q_i).reshape(len(branches), len(temps))
        spread = loss.max(axis=0) - loss.min(axis=0)
        assert np.all(np.diff(spread) < 0)

    def test_zero_noise_fit_round_trip(self):
        p = truth_params(delta_qp0=2e-3, n_c=10.0, beta=0.4, delta_other=7.5e-8)
        data = synthesize_temperature_sweep(
            p, [10.0**k for k in range(1, 7)], np.linspace(0.025, 0.998, 20)
        )
        out = fit_temperature_sweep(data)
        for name in ("f_delta_tls0", "n_c", "beta", "delta_qp0", "delta_other"):
            assert getattr(out.params, name) == pytest.approx(getattr(p, name), rel=1e-3)

    def test_temperature_bounds(self):
        with pytest.raises(ValidationError):
            synthesize_temperature_sweep(truth_params(), [10.0], [1.5])


class TestSigmaLookup:
    def test_monotone_decreasing_in_snr(self):
        values = [qi_sigma_fraction(s) for s in (20.0, 30.0, 40.0, 50.0, 60.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_extrapolation_follows_amplitude_scaling(self):
        assert qi_sigma_fraction(80.0) == pytest.approx(qi_sigma_fraction(60.0) / 10, rel=1e-12)
        assert qi_sigma_fraction(10.0) == pytest.approx(
            qi_sigma_fraction(20.0) * 10 ** 0.5, rel=1e-12
        )

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            qi_sigma_fraction(0.0)
