"""The ResonanceTrace container: one complex S21 sweep plus measurement context."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EdgeClipWarning, ValidationError
from .physics import MeasurementContext
from .validation import (
    as_complex_array,
    as_float_array,
    check_finite,
    check_same_length,
    check_strictly_increasing,
)

MIN_TRACE_POINTS = 32


@dataclass
class ResonanceTrace:
    """One complex S21 sweep: frequency grid, transmission samples, context.

    Validated on construction: at least MIN_TRACE_POINTS samples, strictly
    increasing frequencies, all values finite. If the |S21| minimum falls on
    the first or last grid point the trace is kept but a warning is issued,
    since the resonance is probably clipped by the span.
    """

    freqs: np.ndarray
    s21: np.ndarray
    context: MeasurementContext | None = field(default=None)

    def __post_init__(self):
        self.freqs = as_float_array(self.freqs, "freqs")
        self.s21 = as_complex_array(self.s21, "s21")
        check_same_length("freqs", self.freqs, "s21", self.s21)
        if len(self.freqs) < MIN_TRACE_POINTS:
            raise ValidationError(
                f"trace needs at least {MIN_TRACE_POINTS} points, got {len(self.freqs)}"
            )
        check_finite(self.freqs, "freqs")
        check_finite(self.s21.real, "Re(s21)")
        check_finite(self.s21.imag, "Im(s21)")
        check_strictly_increasing(self.freqs, "freqs")
        dip = int(np.argmin(np.abs(self.s21)))
        if dip in (0, len(self.freqs) - 1):
            warnings.warn(
                "resonance minimum sits on a grid edge; the span may not cover it",
                EdgeClipWarning,
                stacklevel=2,
            )

    def __len__(self) -> int:
        return len(self.freqs)

    @property
    def span(self) -> float:
        return float(self.freqs[-1] - self.freqs[0])

    def with_s21(self, s21: np.ndarray) -> "ResonanceTrace":
        """Copy of this trace with replaced transmission samples."""
        return ResonanceTrace(freqs=self.freqs.copy(), s21=np.asarray(s21, dtype=complex), context=self.context)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResonanceTrace):
            return NotImplemented
        return (
            np.array_equal(self.freqs, other.freqs)
            and np.array_equal(self.s21, other.s21)
            and self.context == other.context
        )
