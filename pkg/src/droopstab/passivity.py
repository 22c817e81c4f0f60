"""Passivity verdicts over sampled frequency responses.

An impedance is passive where Re{Z(jw)} >= 0, i.e. its phase lies within
+/-90 degrees.  Verdicts are computed on a log frequency grid: contiguous
runs of violating points become non-passive bands, and a report passes if no
band lies above the applicable frequency threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ratfun import RationalTF, freq_response

#: Default grid: 0.1 Hz to half the 20 kHz switching frequency, 200 pts/decade.
DEFAULT_GRID = (0.1, 10e3, 200)

#: Phase tolerance in degrees around +/-90 before a sample counts as violating.
#: An ideal constant-power load parks the composed bus phase a hair beyond
#: -90 over wide quiescent stretches; the margin absorbs that artifact (and
#: shallow filtered remnants of damped resonances) while leaving genuinely
#: resonant violations, which overshoot far past this allowance, classified
#: as non-passive.
DEFAULT_PHASE_MARGIN_DEG = 7.5


@dataclass(frozen=True)
class FrequencyGrid:
    """Logarithmic frequency grid specification."""

    f_min: float = DEFAULT_GRID[0]
    f_max: float = DEFAULT_GRID[1]
    points_per_decade: int = DEFAULT_GRID[2]

    def __post_init__(self):
        if self.f_min <= 0.0 or self.f_max <= self.f_min:
            raise ValueError("require 0 < f_min < f_max")
        if self.points_per_decade < 2:
            raise ValueError("points_per_decade must be at least 2")

    def frequencies(self) -> np.ndarray:
        decades = np.log10(self.f_max / self.f_min)
        n = max(2, int(round(decades * self.points_per_decade)) + 1)
        return np.logspace(np.log10(self.f_min), np.log10(self.f_max), n)


@dataclass(frozen=True)
class PassivityReport:
    grid: np.ndarray                       # Hz, ascending
    phase_deg: np.ndarray
    real_part: np.ndarray                  # Ohm
    non_passive_bands: tuple[tuple[float, float], ...]
    threshold: float                       # Hz; violations above it fail
    verdict: str = field(init=False)       # "PASS" | "FAIL"

    def __post_init__(self):
        failing = [b for b in self.non_passive_bands if b[1] > self.threshold]
        object.__setattr__(self, "verdict", "FAIL" if failing else "PASS")

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def bands_above(self, f_hz: float) -> tuple[tuple[float, float], ...]:
        return tuple(b for b in self.non_passive_bands if b[1] > f_hz)


def _mask_to_bands(grid: np.ndarray, mask: np.ndarray) -> tuple[tuple[float, float], ...]:
    """Contiguous True runs of mask as (f_lo, f_hi) grid-point pairs."""
    if not np.any(mask):
        return ()
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[0::2], edges[1::2] - 1
    return tuple((float(grid[i]), float(grid[j])) for i, j in zip(starts, stops))


def passivity_report(
    z: RationalTF,
    grid: np.ndarray,
    threshold: float = 0.0,
    phase_margin_deg: float = 0.0,
) -> PassivityReport:
    """Evaluate z over the grid and locate non-passive bands.

    phase_margin_deg widens the accepted phase band to +/-(90 + margin); zero
    means the exact Re{z} <= 0 criterion.
    """
    if isinstance(grid, FrequencyGrid):
        grid = grid.frequencies()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("frequency grid is empty")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("frequency grid must be strictly ascending")
    resp = freq_response(z, grid)
    phase = np.degrees(np.arctan2(resp.imag, resp.real))
    if phase_margin_deg > 0.0:
        mask = np.abs(phase) > 90.0 + phase_margin_deg
    else:
        mask = resp.real <= 0.0
    bands = _mask_to_bands(grid, mask)
    return PassivityReport(
        grid=grid,
        phase_deg=phase,
        real_part=resp.real.copy(),
        non_passive_bands=bands,
        threshold=threshold,
    )
