"""Machine-readable fit reports and the rendered summary table.

The report is a single versioned JSON document. Serialization is
deterministic (sorted keys, repr-exact floats); the generation timestamp
honours SOURCE_DATE_EPOCH so archived runs can be reproduced byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError

REPORT_SCHEMA = "resqfit-report/1"
TOOL_VERSION = "0.1.0"


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class TraceFitRecord:
    """One analyzed trace: context, photon number, circle-fit parameters."""

    power_dbm: float
    temperature_k: float
    photon_number: float
    circle: dict  # CircleFitResult.to_dict()

    def to_dict(self) -> dict:
        return {
            "power_dbm": self.power_dbm,
            "temperature_k": self.temperature_k,
            "photon_number": self.photon_number,
            "circle": self.circle,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceFitRecord":
        return cls(**d)


@dataclass
class ResonatorRecord:
    resonator_id: str
    f0: float | None = None
    points: list = field(default_factory=list)  # TraceFitRecords
    sweep: dict | None = None  # FitOutcome.to_dict()
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "resonator_id": self.resonator_id,
            "f0": self.f0,
            "points": [p.to_dict() for p in self.points],
            "sweep": self.sweep,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResonatorRecord":
        return cls(
            resonator_id=d["resonator_id"],
            f0=d.get("f0"),
            points=[TraceFitRecord.from_dict(p) for p in d.get("points", [])],
            sweep=d.get("sweep"),
            error=d.get("error"),
        )


@dataclass
class SampleRecord:
    sample_id: str
    summary: dict | None = None  # SampleSummary.to_dict()
    resonators: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "summary": self.summary,
            "resonators": [r.to_dict() for r in self.resonators],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(
            sample_id=d["sample_id"],
            summary=d.get("summary"),
            resonators=[ResonatorRecord.from_dict(r) for r in d.get("resonators", [])],
        )


@dataclass
class FitReport:
    """Everything one batch run produced, in JSON-serializable form."""

    samples: list = field(default_factory=list)
    config_sha256: str = ""
    seed: int | None = None
    sweep_type: str = "power-sweep"
    schema: str = REPORT_SCHEMA
    tool_version: str = TOOL_VERSION
    generated_at: str = field(default_factory=_timestamp)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "tool_version": self.tool_version,
            "generated_at": self.generated_at,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "sweep_type": self.sweep_type,
            "samples": [s.to_dict() for s in self.samples],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValidationError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            samples=[SampleRecord.from_dict(s) for s in d.get("samples", [])],
            config_sha256=d.get("config_sha256", ""),
            seed=d.get("seed"),
            sweep_type=d.get("sweep_type", "power-sweep"),
            schema=d["schema"],
            tool_version=d.get("tool_version", TOOL_VERSION),
            generated_at=d.get("generated_at", ""),
        )

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FitReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FitReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _pm(mean: float, std: float, scale: float) -> str:
    return f"{mean / scale:.2f} +/- {std / scale:.2f}"


def emit_table(report: FitReport) -> str:
    """Render the per-sample loss table.

    Columns: sample ID; F*delta_TLS (x1e-6, mean +/- std across resonators);
    maximum single-photon Q_i (x1e6); mean low-power Q_i (x1e6 +/- std,
    <n> ~ 1 nearest point); mean high-power Q_i (x1e6 +/- std, <n> >= 1e6).
    Samples whose losses had not saturated at top power are marked *.
    """
    if not report.samples:
        raise ValidationError("report contains no samples")
    header = (
        f"{'Sample':<10} {'FdTLS (x1e-6)':<18} {'Qi_max^SP (x1e6)':<18} "
        f"{'Qi_LP (x1e6)':<18} {'Qi_HP (x1e6)':<18}"
    )
    lines = [header, "-" * len(header)]
    for sample in report.samples:
        s = sample.summary
        if s is None:
            lines.append(f"{sample.sample_id:<10} (no converged fits)")
            continue
        mark = "" if all(s.get("saturated", [])) else "*"
        lines.append(
            f"{sample.sample_id + mark:<10} "
            f"{_pm(s['f_delta_tls_mean'], s['f_delta_tls_std'], 1e-6):<18} "
            f"{s['qi_max_single_photon'] / 1e6:<18.2f} "
            f"{_pm(s['qi_lp_mean'], s['qi_lp_std'], 1e6):<18} "
            f"{_pm(s['qi_hp_mean'], s['qi_hp_std'], 1e6):<18}"
        )
    if any(sample.summary and not all(sample.summary.get("saturated", [])) for sample in report.samples):
        lines.append("* losses not yet saturated at the highest measured power")
    return "\n".join(lines)
