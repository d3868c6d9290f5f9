"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest -s tests/test_acceptance.py` to see them all).

Independent references: mpmath evaluations at 60 digits (computed live
here, not copied from the implementation) and the forward synthesizer,
which shares no resonance-model code with the extraction pipeline.
"""

import time
import warnings

import mpmath as mp
import numpy as np
import pytest

from resqfit import (
    LossModelParams,
    ForwardParams,
    delta_qp,
    delta_tls,
    extract_quality_factors,
    fit_power_sweep,
    fit_temperature_sweep,
    frequency_grid,
    kinetic_inductance,
    quasiparticle_factor,
    synthesize_power_sweep,
    synthesize_temperature_sweep,
    synthesize_trace,
    thermal_tls_factor,
    total_inverse_qi,
)
from resqfit.batch import DEFAULT_SYNTH_CONFIG, RunConfig, generate_corpus, run_batch

mp.mp.dps = 60
MP_HBAR = mp.mpf("1.054571817e-34")
MP_KB = mp.mpf("1.380649e-23")


def check(num, description, condition, detail=""):
    status = "PASS" if condition else "FAIL"
    line = f"[{status}] criterion {num}: {description}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert condition, line


def test_criterion_1_circle_fit_round_trip_grid():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    worst = {"q_i": 0.0, "q_c_mag": 0.0, "f_r": 0.0, "phi": 0.0}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(200):
            truth = ForwardParams(
                f_r=rng.uniform(5.5e9, 7.0e9),
                q_i=10 ** rng.uniform(4, 8),
                q_c_mag=10 ** rng.uniform(4, 7),
                phi=rng.uniform(-1.2, 1.2),
                env_delay=rng.uniform(0.0, 100e-9),
                env_amp=rng.uniform(0.5, 2.0),
                env_phase=rng.uniform(-np.pi, np.pi),
            )
            grid = frequency_grid(truth.f_r, truth.q_l, span_linewidths=40, n_points=801)
            result = extract_quality_factors(synthesize_trace(truth, grid))
            for name in worst:
                true = getattr(truth, name)
                rel = abs(getattr(result, name) - true) / abs(true)
                worst[name] = max(worst[name], rel)
    elapsed = time.perf_counter() - t0
    detail = (
        f"worst rel err: Qi={worst['q_i']:.2e}, |Qc|={worst['q_c_mag']:.2e}, "
        f"fr={worst['f_r']:.2e}, phi={worst['phi']:.2e}; {elapsed:.1f}s"
    )
    check(
        1,
        "200-tuple noiseless round trip recovers Qi, |Qc|, fr, phi within 0.1%",
        all(v < 1e-3 for v in worst.values()) and elapsed < 60.0,
        detail,
    )


def test_criterion_2_noise_robustness():
    values = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in range(100):
            p = ForwardParams(
                f_r=6.34e9,
                q_i=2.14e6,
                q_c_mag=4.0e5,
                phi=0.1,
                env_delay=40e-9,
                env_amp=0.97,
                env_phase=1.1,
                noise_snr_db=30.0,
                rng_seed=seed,
            )
            grid = frequency_grid(p.f_r, p.q_l, span_linewidths=40, n_points=512)
            values.append(extract_quality_factors(synthesize_trace(p, grid)).q_i)
    median = float(np.median(values))
    rel = abs(median - 2.14e6) / 2.14e6
    check(
        2,
        "median recovered Qi over 100 seeds at SNR 30 dB within 5% of 2.14e6",
        len(values) == 100 and rel < 0.05,
        f"median={median:.4g}, rel err={rel:.3f}",
    )


def test_criterion_3_tls_fit_recovery_per_published_row():
    rows = [2.86e-6, 1.11e-6, 2.26e-6, 1.17e-6, 0.89e-6, 0.58e-6]
    powers = np.arange(-162.0, -71.0, 5.0)  # 19 powers over 9 decades
    t0 = time.perf_counter()
    medians = {}
    for fd in rows:
        truth = LossModelParams(
            f_delta_tls0=fd, n_c=10.0, beta=0.4, delta_qp0=0.0,
            delta_other=6.9e-8, t_c=4.4, f0=6.34e9,
        )
        fits = []
        for seed in range(100):
            data = synthesize_power_sweep(
                truth, q_c=4e5, powers_dbm=powers, noise_frac=0.02, seed=seed
            )
            fits.append(fit_power_sweep(data).params.f_delta_tls0)
        medians[fd] = float(np.median(fits))
    elapsed = time.perf_counter() - t0
    rels = {fd: abs(m - fd) / fd for fd, m in medians.items()}
    detail = ", ".join(f"{fd * 1e6:.2f}->{r:.3f}" for fd, r in rels.items()) + f"; {elapsed:.1f}s"
    check(
        3,
        "median fitted F*delta0_TLS within 10% of each published seed value (<30s)",
        all(r < 0.10 for r in rels.values()) and elapsed < 30.0,
        detail,
    )


def test_criterion_4_quasiparticle_bracket_oracle():
    # independent high-precision evaluation at (T=1.0 K, f0=6.34 GHz, Tc=4.4 K)
    xi = MP_HBAR * 2 * mp.pi * mp.mpf("6.34e9") / (2 * MP_KB * mp.mpf("1.0"))
    reference = mp.sinh(xi) * mp.besselk(0, xi) * mp.e ** (
        -mp.mpf("1.764") * mp.mpf("4.4") / mp.mpf("1.0")
    )
    got = float(quasiparticle_factor(1.0, 6.34e9, 4.4))
    rel = abs(got - float(reference)) / float(reference)
    near_expected = abs(got - 1.30e-4) / 1.30e-4 < 0.02
    check(
        4,
        "sinh(xi)K0(xi)exp(-gap/kT) matches the mpmath oracle to 1e-6 and ~1.30e-4",
        rel < 1e-6 and near_expected,
        f"value={got:.6e}, oracle rel err={rel:.2e}",
    )


def test_criterion_5_temperature_joint_fit():
    truth = LossModelParams(
        f_delta_tls0=0.58e-6, n_c=10.0, beta=0.4, delta_qp0=2e-3,
        delta_other=7.5e-8, t_c=4.4, f0=6.34e9,
    )
    branches = [10.0**k for k in range(1, 7)]
    temps = np.linspace(0.025, 0.998, 20)
    qp, tls = [], []
    for seed in range(50):
        data = synthesize_temperature_sweep(truth, branches, temps, noise_frac=0.02, seed=seed)
        out = fit_temperature_sweep(data)
        qp.append(out.params.delta_qp0)
        tls.append(out.params.f_delta_tls0)
    rel_qp = abs(float(np.median(qp)) - truth.delta_qp0) / truth.delta_qp0
    rel_tls = abs(float(np.median(tls)) - truth.f_delta_tls0) / truth.f_delta_tls0
    check(
        5,
        "6-branch joint fit: median delta0_QP within 15%, F*delta0_TLS within 10% (50 seeds)",
        rel_qp < 0.15 and rel_tls < 0.10,
        f"rel dqp0={rel_qp:.3f}, rel fdtls={rel_tls:.3f}",
    )


def test_criterion_6_thermal_factor():
    cold = float(thermal_tls_factor(25.7e-3, 6.34e9))
    hot = float(thermal_tls_factor(0.998, 6.34e9))
    xi_hot = MP_HBAR * 2 * mp.pi * mp.mpf("6.34e9") / (2 * MP_KB * mp.mpf("0.998"))
    hot_ref = float(mp.tanh(xi_hot))
    rel_hot = abs(hot - hot_ref) / hot_ref
    check(
        6,
        "tanh factor in [0.99995, 1] at 25.7 mK and matches the oracle to 1e-10 at 998 mK",
        0.99995 <= cold <= 1.0 and rel_hot < 1e-10,
        f"cold={cold:.8f}, hot rel err={rel_hot:.2e}",
    )


def test_criterion_7_kinetic_inductance():
    lk = kinetic_inductance(2.2, 4.4)
    rel_to_published = abs(lk - 0.64e-12) / 0.64e-12
    # the formula hbar R / (pi gap) gives 0.689 pH/sq, 7.7% above the
    # published 0.64 pH/sq; both the value and the discrepancy are asserted
    check(
        7,
        "kinetic_inductance(2.2 ohm/sq, 4.4 K) within 15% of published 0.64 pH/sq",
        rel_to_published < 0.15 and lk == pytest.approx(6.8915106077496108e-13, rel=1e-9),
        f"computed={lk * 1e12:.4f} pH/sq, discrepancy={rel_to_published * 100:.1f}%",
    )


def test_criterion_8_monotonicity_property_battery():
    rng = np.random.default_rng(2024)
    n_cases = 1200
    failures = 0
    for _ in range(n_cases):
        p = LossModelParams(
            f_delta_tls0=10 ** rng.uniform(-8, -4),
            n_c=10 ** rng.uniform(-2, 4),
            beta=rng.uniform(0.05, 1.0),
            delta_qp0=10 ** rng.uniform(-6, -1),
            delta_other=10 ** rng.uniform(-9, -5),
            t_c=4.4,
            f0=rng.uniform(5.5e9, 7.0e9),
        )
        n1 = 10 ** rng.uniform(-2, 7)
        n2 = n1 * rng.uniform(1.5, 100.0)
        t1 = rng.uniform(0.02, 0.6)
        t2 = t1 + rng.uniform(0.05, 0.5)
        ok = (
            delta_tls(n2, t1, p) < delta_tls(n1, t1, p)
            and delta_tls(n1, t2, p) < delta_tls(n1, t1, p)
            and delta_qp(t2, p) > delta_qp(t1, p)
            and 1.0 / total_inverse_qi(n2, t1, p) >= 1.0 / total_inverse_qi(n1, t1, p)
        )
        failures += not ok
    check(
        8,
        f"monotonicity invariants hold on {n_cases} randomized parameter draws",
        failures == 0,
        f"failures={failures}",
    )


def test_criterion_9_pipeline_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    corpus = tmp_path / "corpus"
    generate_corpus(DEFAULT_SYNTH_CONFIG, corpus)
    cfg = RunConfig.load(corpus / "fit_config.json")
    run_batch(cfg, tmp_path / "out1", jobs=1)
    run_batch(cfg, tmp_path / "out8", jobs=8)
    b1 = (tmp_path / "out1" / "report.json").read_bytes()
    b8 = (tmp_path / "out8" / "report.json").read_bytes()
    check(
        9,
        "2-sample x 5-resonator batch reports identical at --jobs 1 and --jobs 8",
        b1 == b8,
        f"{len(b1)} bytes each",
    )
