"""Trace-file ingestion and the native archive format.

Supported inputs:
  * delimited text (csv/tsv/whitespace) with a header naming the columns
    frequency_hz, re_s21, im_s21
  * Touchstone .s2p, two-port, RI / MA / DB variants; only S21 is used
  * the native JSON archive written by this package (many traces per file,
    measurement context embedded)

Power/temperature metadata for text and s2p files comes from a sidecar
``<file>.meta.json`` or from explicit arguments; explicit arguments win.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteSampleError, UnknownFormatError, ValidationError
from .physics import MeasurementContext
from .trace import ResonanceTrace

ARCHIVE_FORMAT = "resqfit-archive"
ARCHIVE_VERSION = 1

_TEXT_SUFFIXES = {".csv", ".tsv", ".txt", ".dat"}
_TEXT_COLUMNS = ("frequency_hz", "re_s21", "im_s21")


@dataclass
class TraceRecord:
    """A trace plus the identifiers needed to group it into a batch."""

    trace: ResonanceTrace
    sample_id: str | None = None
    resonator_id: str | None = None
    source: str = ""


def _context_from(power_dbm, temperature_k) -> MeasurementContext | None:
    if power_dbm is None or temperature_k is None:
        return None
    return MeasurementContext.from_dbm(power_dbm, temperature_k)


def _load_sidecar(path: Path) -> dict:
    for candidate in (path.with_name(path.name + ".meta.json"), path.with_suffix(".meta.json")):
        if candidate.exists():
            with open(candidate) as fh:
                return json.load(fh)
    return {}


def _finite_float(token: str, path: Path, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError as exc:
        raise NonFiniteSampleError(
            f"{path}: line {lineno}: cannot parse {what} value {token!r}"
        ) from exc
    if not math.isfinite(value):
        raise NonFiniteSampleError(f"{path}: line {lineno}: non-finite {what} value {token!r}")
    return value


def _split_delimited(line: str):
    for delim in (",", ";", "\t"):
        if delim in line:
            return [tok.strip() for tok in line.split(delim)]
    return line.split()


def _read_delimited(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        lines = fh.readlines()
    header_idx = None
    for i, line in enumerate(lines):
        if line.strip() and not line.lstrip().startswith("#"):
            header_idx = i
            break
    if header_idx is None:
        raise UnknownFormatError(f"{path}: file is empty")
    header = [tok.lower() for tok in _split_delimited(lines[header_idx].strip())]
    try:
        cols = [header.index(name) for name in _TEXT_COLUMNS]
    except ValueError:
        raise UnknownFormatError(
            f"{path}: header must name columns {', '.join(_TEXT_COLUMNS)}; got {header}"
        ) from None
    freqs, re_part, im_part = [], [], []
    for lineno, line in enumerate(lines[header_idx + 1 :], start=header_idx + 2):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = _split_delimited(stripped)
        if len(tokens) <= max(cols):
            raise UnknownFormatError(f"{path}: line {lineno}: expected at least {max(cols) + 1} columns")
        freqs.append(_finite_float(tokens[cols[0]], path, lineno, "frequency"))
        re_part.append(_finite_float(tokens[cols[1]], path, lineno, "re_s21"))
        im_part.append(_finite_float(tokens[cols[2]], path, lineno, "im_s21"))
    return np.asarray(freqs), np.asarray(re_part) + 1j * np.asarray(im_part)


_S2P_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


def _read_touchstone(path: Path) -> tuple[np.ndarray, np.ndarray]:
    unit, fmt = 1e9, "ma"  # touchstone defaults
    freqs, s21 = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("!", 1)[0].strip()
            if not line:
                continue
            if line.startswith("#"):
                tokens = line[1:].lower().split()
                for i, tok in enumerate(tokens):
                    if tok in _S2P_UNITS:
                        unit = _S2P_UNITS[tok]
                    elif tok in ("ri", "ma", "db"):
                        fmt = tok
                    elif tok == "s":
                        continue
                continue
            tokens = line.split()
            if len(tokens) != 9:
                raise UnknownFormatError(
                    f"{path}: line {lineno}: expected 9 columns for a 2-port record, got {len(tokens)}"
                )
            f = _finite_float(tokens[0], path, lineno, "frequency") * unit
            a = _finite_float(tokens[3], path, lineno, "S21 first")
            b = _finite_float(tokens[4], path, lineno, "S21 second")
            if fmt == "ri":
                value = complex(a, b)
            elif fmt == "ma":
                value = a * np.exp(1j * np.deg2rad(b))
            else:  # db
                value = 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))
            freqs.append(f)
            s21.append(value)
    if not freqs:
        raise UnknownFormatError(f"{path}: no data records found")
    return np.asarray(freqs), np.asarray(s21)


def read_archive(path) -> list[TraceRecord]:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("format") != ARCHIVE_FORMAT:
        raise UnknownFormatError(f"{path}: not a {ARCHIVE_FORMAT} document")
    if doc.get("version") != ARCHIVE_VERSION:
        raise UnknownFormatError(f"{path}: unsupported archive version {doc.get('version')!r}")
    records = []
    for entry in doc.get("traces", []):
        context = _context_from(entry.get("power_dbm"), entry.get("temperature_k"))
        trace = ResonanceTrace(
            freqs=np.asarray(entry["freqs_hz"], dtype=float),
            s21=np.asarray(entry["s21_re"], dtype=float) + 1j * np.asarray(entry["s21_im"], dtype=float),
            context=context,
        )
        records.append(
            TraceRecord(
                trace=trace,
                sample_id=entry.get("sample_id"),
                resonator_id=entry.get("resonator_id"),
                source=str(path),
            )
        )
    if not records:
        raise ValidationError(f"{path}: archive contains no traces")
    return records


def write_archive(path, records) -> None:
    """Write TraceRecords (or bare traces) to the native JSON archive."""
    entries = []
    for rec in records:
        if isinstance(rec, ResonanceTrace):
            rec = TraceRecord(trace=rec)
        ctx = rec.trace.context
        entries.append(
            {
                "sample_id": rec.sample_id,
                "resonator_id": rec.resonator_id,
                "power_dbm": None if ctx is None else ctx.power_dbm,
                "temperature_k": None if ctx is None else ctx.temperature,
                "freqs_hz": rec.trace.freqs.tolist(),
                "s21_re": rec.trace.s21.real.tolist(),
                "s21_im": rec.trace.s21.imag.tolist(),
            }
        )
    doc = {"format": ARCHIVE_FORMAT, "version": ARCHIVE_VERSION, "traces": entries}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def write_delimited(path, trace: ResonanceTrace) -> None:
    """Write one trace as a 3-column csv that ingest can read back."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(_TEXT_COLUMNS) + "\n")
        for f, z in zip(trace.freqs, trace.s21):
            fh.write(f"{float(f)!r},{float(z.real)!r},{float(z.imag)!r}\n")


def load_trace_records(path, power_dbm=None, temperature_k=None) -> list[TraceRecord]:
    """Read any supported file into TraceRecords with attached metadata."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such trace file: {path}")
    suffix = path.suffix.lower()
    if suffix == ".json":
        records = read_archive(path)
        # explicit metadata overrides the archive context
        if power_dbm is not None and temperature_k is not None:
            ctx = MeasurementContext.from_dbm(power_dbm, temperature_k)
            for rec in records:
                rec.trace.context = ctx
        return records
    if suffix == ".s2p":
        freqs, s21 = _read_touchstone(path)
    elif suffix in _TEXT_SUFFIXES:
        freqs, s21 = _read_delimited(path)
    else:
        raise UnknownFormatError(f"{path}: unsupported file extension {suffix!r}")
    sidecar = _load_sidecar(path)
    power = power_dbm if power_dbm is not None else sidecar.get("power_dbm")
    temp = temperature_k if temperature_k is not None else sidecar.get("temperature_k")
    trace = ResonanceTrace(freqs=freqs, s21=s21, context=_context_from(power, temp))
    return [
        TraceRecord(
            trace=trace,
            sample_id=sidecar.get("sample_id"),
            resonator_id=sidecar.get("resonator_id"),
            source=str(path),
        )
    ]


def ingest_trace_file(path, power_dbm=None, temperature_k=None) -> list[ResonanceTrace]:
    """Read a trace file, returning the traces themselves."""
    return [rec.trace for rec in load_trace_records(path, power_dbm, temperature_k)]
