"""Boost-converter parameters and steady-state operating points under droop.

The operating point couples the droop law (which fixes the terminal voltage
for a given load power) with the averaged power balance of the converter
(which fixes inductor current and duty).  Conduction losses through the
source resistance and inductor ESR are included; switching losses are not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum


class DroopKind(str, Enum):
    """Feedback variable / insertion point of the droop law."""

    VI = "VI"  # voltage ref from output current, outer voltage loop
    VP = "VP"  # voltage ref from output power, outer voltage loop
    IV = "IV"  # current ref from terminal voltage, outer current loop
    PV = "PV"  # current ref from terminal voltage & power slope, outer current loop


#: Droop kinds whose reference feeds the outer voltage loop.
VOLTAGE_LOOP_KINDS = (DroopKind.VI, DroopKind.VP)
#: Droop kinds whose reference feeds the outer current loop.
CURRENT_LOOP_KINDS = (DroopKind.IV, DroopKind.PV)


class NoRealSolution(ValueError):
    """Droop law and load power admit no real high-voltage operating point."""


class NonViableDuty(ValueError):
    """Power balance forces a duty cycle outside (0, 1)."""


@dataclass(frozen=True)
class ConverterParams:
    """Physical boost-converter constants (Table-driven defaults in scenarios)."""

    E: float = 130.0        # source voltage, V
    r_bat: float = 0.03     # source series resistance, Ohm
    L: float = 2e-3         # boost inductance, H
    r_f: float = 0.01       # inductor ESR, Ohm
    C_out: float = 3.3e-3   # converter output capacitance, F
    V_o: float = 350.0      # global no-load voltage reference, V
    f_sw: float = 20e3      # switching frequency, Hz

    def __post_init__(self):
        for name in ("E", "r_bat", "L", "r_f", "C_out", "V_o", "f_sw"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.E >= self.V_o:
            raise ValueError("boost operation requires E < V_o")

    @property
    def r_series(self) -> float:
        """Total series resistance on the inductor current path."""
        return self.r_bat + self.r_f


@dataclass(frozen=True)
class DroopSpec:
    """Droop kind, coefficient, and optional feedback low-pass cutoff.

    coefficient is Ohms for VI/IV (virtual resistance d) and V/W for VP/PV
    (power slope k).  lpf_cutoff is the first-order filter cutoff in Hz on
    the droop feedback variable; None means unfiltered.
    """

    kind: DroopKind
    coefficient: float
    lpf_cutoff: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DroopKind(self.kind))
        if self.coefficient <= 0.0:
            raise ValueError("droop coefficient must be positive")
        if self.lpf_cutoff is not None and self.lpf_cutoff <= 0.0:
            raise ValueError("lpf_cutoff must be positive when present")

    def with_lpf(self, cutoff: float | None) -> "DroopSpec":
        return replace(self, lpf_cutoff=cutoff)


@dataclass(frozen=True)
class OperatingPoint:
    """Steady state at the converter terminal for a given droop and load power."""

    v_bus: float   # terminal voltage, V
    i_out: float   # output current delivered to the network, A
    i_l: float     # inductor current, A
    duty: float    # averaged duty cycle
    p_load: float  # power delivered at the terminal, W


# Fixed-point iteration settings for the inductor-current power balance.
_IL_MAX_ITER = 100
_IL_ATOL = 1e-12


def solve_operating_point(
    params: ConverterParams, droop: DroopSpec, p_load: float
) -> OperatingPoint:
    """Solve the steady state jointly satisfying droop law and power balance.

    VI/IV: v = V_o - d*i with i = P/v gives v^2 - V_o*v + d*P = 0; the
    high-voltage root is the operating branch.  VP/PV: v = V_o - k*P
    directly (the outer current loop enforces the same relation for PV).
    The inductor current then satisfies E*i_l - i_l^2*(r_bat+r_f) = P and
    (1-duty)*i_l = i_out.
    """
    if p_load <= 0.0:
        raise ValueError("p_load must be positive")

    if droop.kind in (DroopKind.VI, DroopKind.IV):
        d = droop.coefficient
        disc = params.V_o**2 - 4.0 * d * p_load
        if disc < 0.0:
            raise NoRealSolution(
                f"P={p_load:.1f} W exceeds max transferable power "
                f"{params.V_o**2 / (4.0 * d):.1f} W for d={d}"
            )
        v_bus = 0.5 * (params.V_o + math.sqrt(disc))
    else:
        v_bus = params.V_o - droop.coefficient * p_load
    if v_bus <= 0.5 * params.V_o:
        raise NoRealSolution(
            f"operating voltage {v_bus:.1f} V fell below V_o/2 (collapsed branch)"
        )

    i_out = p_load / v_bus
    p_term = v_bus * i_out

    # i_l = (P + i_l^2 * r) / E is a contraction on the low-current branch.
    r = params.r_series
    if params.E**2 < 4.0 * r * p_term:
        raise NoRealSolution(
            f"source cannot deliver {p_term:.1f} W through r={r} Ohm"
        )
    i_l = p_term / params.E
    for _ in range(_IL_MAX_ITER):
        nxt = (p_term + i_l * i_l * r) / params.E
        if abs(nxt - i_l) < _IL_ATOL:
            i_l = nxt
            break
        i_l = nxt

    duty = 1.0 - i_out / i_l
    if not 0.0 < duty < 1.0:
        raise NonViableDuty(f"duty {duty:.4f} outside (0, 1)")
    return OperatingPoint(v_bus=v_bus, i_out=i_out, i_l=i_l, duty=duty, p_load=p_load)
