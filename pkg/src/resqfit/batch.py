"""Batch analysis pipeline and synthetic-corpus generation.

fit:   circle-fit every trace of every resonator, convert powers to photon
       numbers, regress the loss model per resonator, aggregate per sample,
       and write report + table + plot-data files.
synth: generate archives of simulated traces from configured ground truth,
       in the same format the fit pipeline ingests.

Per-resonator work runs in a bounded process pool; results are sorted by
(sample, resonator) before assembly so the report does not depend on the
parallelism degree.
"""

from __future__ import annotations

import glob
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circlefit import extract_quality_factors
from .constants import PHOTON_NUMBER_PREFACTOR
from .errors import ConfigError, FitError, ResqfitError, ValidationError
from .fileio import TraceRecord, load_trace_records, write_archive
from .physics import LossModelParams, MeasurementContext, photon_number, total_inverse_qi
from .report import (
    FitReport,
    ResonatorRecord,
    SampleRecord,
    TraceFitRecord,
    config_hash,
)
from .sweepfit import (
    POWER_SWEEP,
    TEMPERATURE_SWEEP,
    SweepDataset,
    fit_power_sweep,
    fit_temperature_sweep,
    summarize_sample,
)
from .synth import ForwardParams, frequency_grid, photon_fixed_point, synthesize_trace

HIGH_POWER_PHOTONS = 1e6  # <n> >= this counts as "high power"
SIGMA_QI_FLOOR = 1e-6  # relative floor on per-point Q_i uncertainty


@dataclass
class RunConfig:
    """Validated batch-fit configuration."""

    inputs: list
    sweep_type: str = POWER_SWEEP
    t_c: float = 4.4
    temperature_k: float = 0.0257
    photon_prefactor: float = PHOTON_NUMBER_PREFACTOR
    fix_n_c: float | None = None
    fix_beta: float | None = None
    delta_qp0: float = 0.0
    seed: int | None = None
    jobs: int = 1
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        inputs = doc.get("inputs")
        if not inputs or not isinstance(inputs, list):
            raise ConfigError("config needs a non-empty 'inputs' list of paths or globs")
        sweep_type = doc.get("sweep_type", POWER_SWEEP)
        if sweep_type not in (POWER_SWEEP, TEMPERATURE_SWEEP):
            raise ConfigError(f"unknown sweep_type {sweep_type!r}")
        constants = doc.get("constants", {})
        fit = doc.get("fit", {})
        cfg = cls(
            inputs=[str(p) for p in inputs],
            sweep_type=sweep_type,
            t_c=float(constants.get("t_c", 4.4)),
            temperature_k=float(constants.get("temperature_k", 0.0257)),
            photon_prefactor=float(constants.get("photon_prefactor", PHOTON_NUMBER_PREFACTOR)),
            fix_n_c=fit.get("fix_n_c"),
            fix_beta=fit.get("fix_beta"),
            delta_qp0=float(fit.get("delta_qp0", 0.0)),
            seed=doc.get("seed"),
            jobs=int(doc.get("jobs", 1)),
            raw=doc,
        )
        for name, value in (("t_c", cfg.t_c), ("temperature_k", cfg.temperature_k), ("photon_prefactor", cfg.photon_prefactor)):
            if not value > 0:
                raise ConfigError(f"constant {name} must be positive, got {value}")
        if base_dir is not None:
            cfg.inputs = [str(p) if Path(p).is_absolute() else str(base_dir / p) for p in cfg.inputs]
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)


def _expand_inputs(patterns) -> list[str]:
    files: list[str] = []
    for pattern in patterns:
        if Path(pattern).exists():
            files.append(str(pattern))
            continue
        files.extend(sorted(glob.glob(pattern, recursive=True)))
    files = sorted(dict.fromkeys(files))
    if not files:
        raise ConfigError(f"input patterns matched no files: {patterns}")
    return files


@dataclass
class _ResonatorTask:
    sample_id: str
    resonator_id: str
    traces: list
    sweep_type: str
    t_c: float
    temperature_k: float
    photon_prefactor: float
    fix_n_c: float | None
    fix_beta: float | None
    delta_qp0: float


def _group_records(records: list[TraceRecord], cfg: RunConfig) -> list[_ResonatorTask]:
    groups: dict[tuple, list] = {}
    for rec in records:
        sample = rec.sample_id or "sample"
        resonator = rec.resonator_id or Path(rec.source).stem
        groups.setdefault((sample, resonator), []).append(rec.trace)
    tasks = []
    for (sample, resonator), traces in sorted(groups.items()):
        tasks.append(
            _ResonatorTask(
                sample_id=sample,
                resonator_id=resonator,
                traces=traces,
                sweep_type=cfg.sweep_type,
                t_c=cfg.t_c,
                temperature_k=cfg.temperature_k,
                photon_prefactor=cfg.photon_prefactor,
                fix_n_c=cfg.fix_n_c,
                fix_beta=cfg.fix_beta,
                delta_qp0=cfg.delta_qp0,
            )
        )
    return tasks


def _analyze_resonator(task: _ResonatorTask):
    """Worker: circle-fit all traces of one resonator and fit its sweep."""
    record = ResonatorRecord(resonator_id=task.resonator_id)
    try:
        points = []
        for trace in task.traces:
            if trace.context is None:
                raise ValidationError(
                    f"{task.sample_id}/{task.resonator_id}: trace lacks power/temperature metadata"
                )
            circ = extract_quality_factors(trace)
            n_ph = float(
                photon_number(
                    trace.context.p_app,
                    circ.f_r,
                    circ.q_l,
                    circ.q_c_mag,
                    prefactor=task.photon_prefactor,
                )
            )
            points.append((trace.context, circ, n_ph))
        points.sort(key=lambda t: (t[0].p_app, t[0].temperature))
        record.points = [
            TraceFitRecord(
                power_dbm=ctx.power_dbm,
                temperature_k=ctx.temperature,
                photon_number=n_ph,
                circle=circ.to_dict(),
            )
            for ctx, circ, n_ph in points
        ]
        record.f0 = float(np.median([c.f_r for _, c, _ in points]))

        q_i = np.array([c.q_i for _, c, _ in points])
        finite = np.isfinite(q_i)
        if not np.all(finite):
            points = [p for p, ok in zip(points, finite) if ok]
            q_i = q_i[finite]
        if len(points) == 0:
            raise FitError("no usable trace fits")
        sigma = np.array(
            [max(c.sigma.get("q_i", 0.0), SIGMA_QI_FLOOR * c.q_i) for _, c, _ in points]
        )
        n_ph = np.array([n for _, _, n in points])
        temps = np.array([ctx.temperature for ctx, _, _ in points])

        if task.sweep_type == POWER_SWEEP:
            data = SweepDataset(
                kind=POWER_SWEEP,
                x=n_ph,
                q_i=q_i,
                sigma_qi=sigma,
                f0=record.f0,
                t_c=task.t_c,
                fixed_temperature=float(np.median(temps)),
            )
            outcome = fit_power_sweep(
                data,
                fix_n_c=task.fix_n_c,
                fix_beta=task.fix_beta,
                delta_qp0=task.delta_qp0,
            )
            lp = float(q_i[np.argmin(np.abs(np.log10(n_ph)))])
            hp_mask = n_ph >= HIGH_POWER_PHOTONS
            hp = float(np.mean(q_i[hp_mask])) if hp_mask.any() else float(q_i[np.argmax(n_ph)])
        else:
            powers = np.array([ctx.p_app for ctx, _, _ in points])
            levels = np.unique(powers)
            branch = np.searchsorted(levels, powers)
            fixed_n = tuple(
                float(np.median(n_ph[branch == b])) for b in range(len(levels))
            )
            data = SweepDataset(
                kind=TEMPERATURE_SWEEP,
                x=temps,
                q_i=q_i,
                sigma_qi=sigma,
                f0=record.f0,
                t_c=task.t_c,
                fixed_n=fixed_n,
                branch=branch,
            )
            outcome = fit_temperature_sweep(
                data, fix_n_c=task.fix_n_c, fix_beta=task.fix_beta
            )
            coldest = temps <= np.quantile(temps, 0.1)
            nb = np.asarray(fixed_n)
            lp_branch = int(np.argmin(np.abs(np.log10(nb))))
            lp_mask = coldest & (branch == lp_branch)
            lp = float(np.mean(q_i[lp_mask])) if lp_mask.any() else float(q_i[np.argmin(temps)])
            hp_branches = np.where(nb >= HIGH_POWER_PHOTONS)[0]
            if len(hp_branches) == 0:
                hp_branches = [int(np.argmax(nb))]
            hp_mask = coldest & np.isin(branch, hp_branches)
            hp = float(np.mean(q_i[hp_mask])) if hp_mask.any() else float(np.max(q_i))

        record.sweep = outcome.to_dict()
        return task.sample_id, record, outcome, lp, hp, data
    except ResqfitError as exc:
        record.error = f"{type(exc).__name__}: {exc}"
        return task.sample_id, record, None, None, None, None


def _plot_rows(data: SweepDataset, outcome) -> list[tuple]:
    """x / y / sigma / fitted-curve columns for plot emission."""
    params = outcome.params
    rows = []
    if data.kind == POWER_SWEEP:
        fit_q = 1.0 / np.asarray(
            total_inverse_qi(data.x, data.fixed_temperature, params)
        )
        for n, q, s, fq in zip(data.x, data.q_i, data.sigma_qi, fit_q):
            rows.append((n, q, s, fq))
    else:
        nb = np.asarray(data.fixed_n)[data.branch]
        fit_q = 1.0 / np.asarray(total_inverse_qi(nb, data.x, params))
        for t, n, q, s, fq in zip(data.x, nb, data.q_i, data.sigma_qi, fit_q):
            rows.append((t, n, q, s, fq))
    return rows


def _write_plot_files(out_dir: Path, sample_id: str, res_records: list) -> None:
    plots = out_dir / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    lp_values = []
    for record, outcome, lp, hp, data in res_records:
        if outcome is None:
            continue
        lp_values.append(lp)
        rows = _plot_rows(data, outcome)
        path = plots / f"{sample_id}__{record.resonator_id}__{data.kind}.csv"
        with open(path, "w") as fh:
            if data.kind == POWER_SWEEP:
                fh.write("photon_number,q_i,sigma_qi,q_i_fit\n")
            else:
                fh.write("temperature_k,photon_number,q_i,sigma_qi,q_i_fit\n")
            for row in rows:
                fh.write(",".join(repr(v) for v in row) + "\n")
    if lp_values:
        from .sweepfit import box_stats

        stats = box_stats(lp_values)
        with open(plots / f"{sample_id}__single_photon_box.csv", "w") as fh:
            fh.write("q1,median,q3,whisker_lo,whisker_hi\n")
            fh.write(
                ",".join(
                    repr(stats[k]) for k in ("q1", "median", "q3", "whisker_lo", "whisker_hi")
                )
                + "\n"
            )


def run_batch(cfg: RunConfig, out_dir, jobs: int | None = None, force: bool = False) -> tuple[FitReport, bool]:
    """Run the full analysis pipeline; returns (report, all_converged)."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise ConfigError(
            f"output directory {out_dir} is not empty; pass --force to overwrite"
        )
    files = _expand_inputs(cfg.inputs)
    records: list[TraceRecord] = []
    for path in files:
        records.extend(load_trace_records(path))
    tasks = _group_records(records, cfg)

    n_jobs = jobs if jobs is not None else cfg.jobs
    if n_jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_analyze_resonator, tasks))
    else:
        results = [_analyze_resonator(t) for t in tasks]

    by_sample: dict[str, list] = {}
    for sample_id, record, outcome, lp, hp, data in results:
        by_sample.setdefault(sample_id, []).append((record, outcome, lp, hp, data))

    report = FitReport(
        config_sha256=config_hash(cfg.raw),
        seed=cfg.seed,
        sweep_type=cfg.sweep_type,
    )
    all_ok = True
    for sample_id in sorted(by_sample):
        res_records = sorted(by_sample[sample_id], key=lambda t: t[0].resonator_id)
        sample = SampleRecord(sample_id=sample_id)
        fits = [o for _, o, _, _, _ in res_records if o is not None]
        lps = [lp for _, o, lp, _, _ in res_records if o is not None]
        hps = [hp for _, o, _, hp, _ in res_records if o is not None]
        if fits:
            sample.summary = summarize_sample(fits, lps, hps).to_dict()
        sample.resonators = [r for r, _, _, _, _ in res_records]
        if any(r.error for r, _, _, _, _ in res_records) or not fits:
            all_ok = False
        report.samples.append(sample)
        _write_plot_files(out_dir, sample_id, res_records)

    report.save(out_dir / "report.json")
    from .report import emit_table

    with open(out_dir / "table.txt", "w") as fh:
        fh.write(emit_table(report) + "\n")
    return report, all_ok


# ---------------------------------------------------------------------------
# Synthetic corpus generation (the `synth` CLI verb)
# ---------------------------------------------------------------------------

DEFAULT_SYNTH_CONFIG = {
    "seed": 20,
    "sweep_type": POWER_SWEEP,
    "temperature_k": 0.0257,
    "snr_db": 60.0,
    "n_points": 512,
    "span_linewidths": 40.0,
    "powers_dbm": {"start": -162.0, "stop": -72.0, "step": 5.0},
    "samples": [
        {
            "sample_id": "demo-A",
            "f0_ghz": [5.7, 6.0, 6.34, 6.65, 6.9],
            "truth": {
                "f_delta_tls0": 5.8e-7,
                "n_c": 10.0,
                "beta": 0.4,
                "delta_qp0": 0.0,
                "delta_other": 7.5e-8,
                "t_c": 4.4,
            },
            "q_c_mag": 4.0e5,
            "phi": 0.1,
            "env_delay_ns": 40.0,
            "env_amp": 0.97,
            "env_phase_rad": 1.1,
            "resonator_spread": 0.08,
        },
        {
            "sample_id": "demo-B",
            "f0_ghz": [5.8, 6.1, 6.4, 6.7, 6.95],
            "truth": {
                "f_delta_tls0": 2.86e-6,
                "n_c": 1.0,
                "beta": 0.5,
                "delta_qp0": 0.0,
                "delta_other": 4.37e-7,
                "t_c": 4.4,
            },
            "q_c_mag": 4.0e5,
            "phi": -0.15,
            "env_delay_ns": 55.0,
            "env_amp": 1.02,
            "env_phase_rad": -0.4,
            "resonator_spread": 0.08,
        },
    ],
}


def _power_list(entry) -> list[float]:
    if isinstance(entry, dict):
        start, stop, step = float(entry["start"]), float(entry["stop"]), float(entry["step"])
        n = int(round((stop - start) / step)) + 1
        return [start + i * step for i in range(n)]
    return [float(p) for p in entry]


def generate_corpus(config: dict, out_dir) -> list[Path]:
    """Write synthetic trace archives plus a matching fit config.

    One archive per resonator, one directory per sample. Deterministic for
    a given config (per-trace seeds derive from the master seed).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_type = config.get("sweep_type", POWER_SWEEP)
    temperature = float(config.get("temperature_k", 0.0257))
    snr_db = float(config.get("snr_db", 60.0))
    n_points = int(config.get("n_points", 512))
    span_lw = float(config.get("span_linewidths", 40.0))
    powers = _power_list(config.get("powers_dbm", DEFAULT_SYNTH_CONFIG["powers_dbm"]))
    temps = [float(t) for t in config.get("temperatures_k", [])]
    master = int(config.get("seed", 0))
    rng = np.random.default_rng(master)

    if sweep_type == TEMPERATURE_SWEEP and not temps:
        raise ConfigError("temperature-sweep synthesis needs a 'temperatures_k' list")

    written = []
    for s_idx, sample_cfg in enumerate(config["samples"]):
        sample_id = sample_cfg["sample_id"]
        truth = sample_cfg["truth"]
        f0s = [f * 1e9 for f in sample_cfg["f0_ghz"]]
        spread = float(sample_cfg.get("resonator_spread", 0.0))
        for r_idx, f0 in enumerate(f0s):
            res_id = f"r{r_idx}"
            jitter = lambda: float(np.exp(spread * rng.standard_normal())) if spread > 0 else 1.0
            p_true = LossModelParams(
                f_delta_tls0=truth["f_delta_tls0"] * jitter(),
                n_c=truth["n_c"] * jitter(),
                beta=truth["beta"],
                delta_qp0=truth.get("delta_qp0", 0.0),
                delta_other=truth["delta_other"] * jitter(),
                t_c=truth.get("t_c", 4.4),
                f0=f0,
            )
            q_c = float(sample_cfg["q_c_mag"])
            conditions = (
                [(p_dbm, temperature) for p_dbm in powers]
                if sweep_type == POWER_SWEEP
                else [(p_dbm, t) for p_dbm in powers for t in temps]
            )
            recs = []
            for c_idx, (p_dbm, temp) in enumerate(conditions):
                ctx = MeasurementContext.from_dbm(p_dbm, temp)
                n_ph = photon_fixed_point(p_true, q_c, ctx.p_app, temp)
                q_i = 1.0 / float(np.asarray(total_inverse_qi(n_ph, temp, p_true)))
                fp = ForwardParams(
                    f_r=f0,
                    q_i=q_i,
                    q_c_mag=q_c,
                    phi=float(sample_cfg.get("phi", 0.0)),
                    env_delay=float(sample_cfg.get("env_delay_ns", 0.0)) * 1e-9,
                    env_amp=float(sample_cfg.get("env_amp", 1.0)),
                    env_phase=float(sample_cfg.get("env_phase_rad", 0.0)),
                    noise_snr_db=snr_db,
                    rng_seed=int(
                        np.random.SeedSequence(
                            [master, s_idx, r_idx, c_idx]
                        ).generate_state(1)[0]
                    ),
                )
                grid = frequency_grid(f0, fp.q_l, span_linewidths=span_lw, n_points=n_points)
                trace = synthesize_trace(fp, grid, context=ctx)
                recs.append(TraceRecord(trace=trace, sample_id=sample_id, resonator_id=res_id))
            path = out_dir / sample_id / f"{res_id}.json"
            write_archive(path, recs)
            written.append(path)

    fit_config = {
        "inputs": [f"{s['sample_id']}/*.json" for s in config["samples"]],
        "sweep_type": sweep_type,
        "constants": {"temperature_k": temperature, "t_c": 4.4},
        "seed": master,
    }
    with open(out_dir / "fit_config.json", "w") as fh:
        json.dump(fit_config, fh, sort_keys=True, indent=1)
        fh.write("\n")
    written.append(out_dir / "fit_config.json")
    return written
