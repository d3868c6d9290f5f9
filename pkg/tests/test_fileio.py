"""Ingestion formats, error codes, and the native archive round trip."""

import json

import numpy as np
import pytest

from resqfit import (
    ForwardParams,
    NonFiniteSampleError,
    NonMonotonicFrequencyError,
    UnknownFormatError,
    ValidationError,
    frequency_grid,
    ingest_trace_file,
    read_archive,
    synthesize_trace,
    write_archive,
    write_delimited,
)
from resqfit.fileio import TraceRecord, load_trace_records
from resqfit.physics import MeasurementContext


@pytest.fixture
def trace():
    p = ForwardParams(f_r=6.0e9, q_i=1e6, q_c_mag=3e5, phi=0.1, env_delay=20e-9)
    grid = frequency_grid(p.f_r, p.q_l, span_linewidths=30, n_points=64)
    return synthesize_trace(p, grid, context=MeasurementContext.from_dbm(-110.0, 0.0257))


class TestDelimitedText:
    def test_write_read_round_trip(self, tmp_path, trace):
        path = tmp_path / "trace.csv"
        write_delimited(path, trace)
        loaded = ingest_trace_file(path)[0]
        assert np.array_equal(loaded.freqs, trace.freqs)
        assert np.array_equal(loaded.s21, trace.s21)

    def test_header_required(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("6.0e9,0.5,0.1\n6.1e9,0.6,0.2\n")
        with pytest.raises(UnknownFormatError, match="header"):
            ingest_trace_file(path)

    def test_nan_row_names_line(self, tmp_path, trace):
        path = tmp_path / "bad.csv"
        lines = ["frequency_hz,re_s21,im_s21"]
        for i, (f, z) in enumerate(zip(trace.freqs, trace.s21)):
            lines.append(f"{f},{z.real},{'nan' if i == 15 else z.imag}")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(NonFiniteSampleError, match="line 17"):
            ingest_trace_file(path)

    def test_non_monotone_frequency(self, tmp_path, trace):
        path = tmp_path / "swapped.csv"
        freqs = trace.freqs.copy()
        freqs[3], freqs[4] = freqs[4], freqs[3]
        lines = ["frequency_hz,re_s21,im_s21"] + [
            f"{f},{z.real},{z.imag}" for f, z in zip(freqs, trace.s21)
        ]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(NonMonotonicFrequencyError):
            ingest_trace_file(path)

    def test_whitespace_delimited_with_reordered_columns(self, tmp_path, trace):
        path = tmp_path / "cols.txt"
        lines = ["im_s21 frequency_hz re_s21"] + [
            f"{z.imag} {f} {z.real}" for f, z in zip(trace.freqs, trace.s21)
        ]
        path.write_text("\n".join(lines) + "\n")
        loaded = ingest_trace_file(path)[0]
        assert np.array_equal(loaded.freqs, trace.freqs)
        assert np.array_equal(loaded.s21, trace.s21)

    def test_unknown_extension(self, tmp_path):
        path = tmp_path / "trace.xyz"
        path.write_text("whatever")
        with pytest.raises(UnknownFormatError):
            ingest_trace_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ingest_trace_file(tmp_path / "nope.csv")


def _s2p_lines(freqs, s21, fmt, unit="Hz", scale=1.0):
    # 9 columns: f, S11 pair, S21 pair, S12 pair, S22 pair
    lines = [f"# {unit} S {fmt} R 50", "! synthetic two-port file"]
    for f, z in zip(freqs, s21):
        if fmt == "RI":
            a, b = z.real, z.imag
        elif fmt == "MA":
            a, b = abs(z), np.rad2deg(np.angle(z))
        else:  # DB
            a, b = 20 * np.log10(abs(z)), np.rad2deg(np.angle(z))
        lines.append(f"{float(f) / scale!r} 1 0 {float(a)!r} {float(b)!r} 1 0 1 0")
    return "\n".join(lines) + "\n"


class TestTouchstone:
    @pytest.mark.parametrize("fmt", ["RI", "MA", "DB"])
    def test_variants_agree(self, tmp_path, trace, fmt):
        ri = tmp_path / "a.s2p"
        ri.write_text(_s2p_lines(trace.freqs, trace.s21, "RI"))
        other = tmp_path / "b.s2p"
        other.write_text(_s2p_lines(trace.freqs, trace.s21, fmt))
        za = ingest_trace_file(ri)[0].s21
        zb = ingest_trace_file(other)[0].s21
        assert np.allclose(za, zb, rtol=1e-9, atol=1e-12)

    def test_ghz_units(self, tmp_path, trace):
        path = tmp_path / "g.s2p"
        path.write_text(_s2p_lines(trace.freqs, trace.s21, "RI", unit="GHz", scale=1e9))
        loaded = ingest_trace_file(path)[0]
        assert np.allclose(loaded.freqs, trace.freqs, rtol=1e-12)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "bad.s2p"
        path.write_text("# Hz S RI R 50\n1e9 0.1 0.2 0.3\n")
        with pytest.raises(UnknownFormatError, match="9 columns"):
            ingest_trace_file(path)


class TestArchive:
    def test_round_trip_identity(self, tmp_path, trace):
        path = tmp_path / "arc.json"
        records = [TraceRecord(trace=trace, sample_id="S", resonator_id="r0")]
        write_archive(path, records)
        loaded = read_archive(path)
        assert len(loaded) == 1
        assert loaded[0].sample_id == "S"
        assert loaded[0].resonator_id == "r0"
        assert loaded[0].trace == trace
        # a second write of the loaded data is byte-identical
        path2 = tmp_path / "arc2.json"
        write_archive(path2, loaded)
        assert path.read_bytes() == path2.read_bytes()

    def test_rejects_foreign_json(self, tmp_path):
        path = tmp_path / "foreign.json"
        path.write_text(json.dumps({"format": "something-else", "traces": []}))
        with pytest.raises(UnknownFormatError):
            ingest_trace_file(path)

    def test_rejects_empty_archive(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text(json.dumps({"format": "resqfit-archive", "version": 1, "traces": []}))
        with pytest.raises(ValidationError):
            ingest_trace_file(path)


class TestSidecarMetadata:
    def test_sidecar_attaches_context(self, tmp_path, trace):
        path = tmp_path / "t.csv"
        write_delimited(path, trace)
        (tmp_path / "t.csv.meta.json").write_text(
            json.dumps({"power_dbm": -95.0, "temperature_k": 0.05, "sample_id": "X", "resonator_id": "r3"})
        )
        rec = load_trace_records(path)[0]
        assert rec.sample_id == "X"
        assert rec.resonator_id == "r3"
        assert rec.trace.context.power_dbm == pytest.approx(-95.0)
        assert rec.trace.context.temperature == 0.05

    def test_explicit_arguments_override(self, tmp_path, trace):
        path = tmp_path / "t.csv"
        write_delimited(path, trace)
        (tmp_path / "t.csv.meta.json").write_text(
            json.dumps({"power_dbm": -95.0, "temperature_k": 0.05})
        )
        loaded = ingest_trace_file(path, power_dbm=-120.0, temperature_k=0.9)[0]
        assert loaded.context.power_dbm == pytest.approx(-120.0)
        assert loaded.context.temperature == 0.9
