"""Bus-level impedance composition and system passivity checks.

The single-feeder topology is: converter terminal -> series RL line -> load
bus carrying a bus capacitor and a constant power load.  The system check
looks into the network from the converter terminal, the port where source
meets grid (and where a perturbation injection measures the same quantity):

    Z_bus = Z_conv || (Z_line + Z_Cbus || Z_CPL)

When the load is driven below its undervoltage limit it regulates current
instead of power, and its incremental admittance vanishes; the composition
then omits the CPL member.  System-level passivity demands the composed
phase stay within +/-90 degrees (plus the shared margin) over the whole
frequency range -- no threshold leniency at the system level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .passivity import DEFAULT_PHASE_MARGIN_DEG, PassivityReport, passivity_report
from .plant import (
    ConverterParams,
    DroopKind,
    DroopSpec,
    NoRealSolution,
    OperatingPoint,
    solve_operating_point,
)
from .ratfun import RationalTF, tf_parallel

__all__ = [
    "LineParams",
    "CPLParams",
    "line_impedance",
    "cpl_impedance",
    "bus_capacitor_impedance",
    "bus_impedance",
    "single_feeder_bus_impedance",
    "system_passivity_check",
    "MinLpfOutcome",
    "min_lpf_for_passivity",
    "NetworkOperatingPoint",
    "solve_network_operating_point",
]


@dataclass(frozen=True)
class LineParams:
    """Series RL feeder between converter terminal and load bus."""

    r_per_m: float = 10e-3
    l_per_m: float = 10e-6
    length: float = 29.0

    def __post_init__(self):
        if self.r_per_m < 0.0 or self.l_per_m < 0.0:
            raise ValueError("per-meter line constants must be non-negative")
        if self.length <= 0.0:
            raise ValueError("line length must be positive")

    @property
    def r_total(self) -> float:
        return self.r_per_m * self.length

    @property
    def l_total(self) -> float:
        return self.l_per_m * self.length

    def scaled(self, length_multiple: float) -> "LineParams":
        return replace(self, length=self.length * length_multiple)


@dataclass(frozen=True)
class CPLParams:
    """Constant power load and the bus voltage it is linearized around."""

    p: float
    v_op: float
    #: Below this fraction of V_o the load regulates current, not power.
    undervoltage_limit_fraction: float = 0.5

    def __post_init__(self):
        if self.p < 0.0:
            raise ValueError("CPL power must be non-negative")
        if self.v_op <= 0.0:
            raise ValueError("linearization voltage must be positive")
        if not 0.0 < self.undervoltage_limit_fraction < 1.0:
            raise ValueError("undervoltage_limit_fraction must lie in (0, 1)")


def line_impedance(line: LineParams) -> RationalTF:
    return RationalTF((line.r_total, line.l_total))


def cpl_impedance(cpl: CPLParams) -> RationalTF:
    """Small-signal negative incremental resistance -v_op^2/p."""
    if cpl.p == 0.0:
        raise ValueError("p=0 is an open circuit; omit the CPL from the bus instead")
    return RationalTF((-cpl.v_op**2 / cpl.p,))


def bus_capacitor_impedance(c: float) -> RationalTF:
    if c <= 0.0:
        raise ValueError("capacitance must be positive")
    return RationalTF((1.0,), (0.0, c))


def bus_impedance(members: Sequence[RationalTF]) -> RationalTF:
    """Left-fold parallel combination of all impedances hanging on one node."""
    if not members:
        raise ValueError("bus needs at least one member impedance")
    z = members[0]
    for m in members[1:]:
        z = tf_parallel(z, m)
    return z


def single_feeder_bus_impedance(
    z_conv: RationalTF,
    line: LineParams,
    c_bus: float,
    cpl: CPLParams | None = None,
) -> RationalTF:
    """Composed impedance at the converter terminal of a single-feeder grid.

    The converter output impedance sits in parallel with the branch made of
    the series feeder and the load bus (capacitor in parallel with the CPL's
    incremental resistance).  Pass cpl=None when the load is current-clamped
    or absent, which removes its member from the load bus.
    """
    z_load = bus_capacitor_impedance(c_bus)
    if cpl is not None and cpl.p > 0.0:
        z_load = tf_parallel(z_load, cpl_impedance(cpl))
    return tf_parallel(z_conv, line_impedance(line) + z_load)


def system_passivity_check(
    z_bus: RationalTF,
    grid: np.ndarray,
    phase_margin_deg: float = DEFAULT_PHASE_MARGIN_DEG,
) -> PassivityReport:
    """Whole-range bus passivity: fail on any |phase| beyond 90 deg + margin."""
    return passivity_report(
        z_bus, grid, threshold=0.0, phase_margin_deg=phase_margin_deg
    )


@dataclass(frozen=True)
class MinLpfOutcome:
    """Result of the lightest-filter search.

    cutoff_hz is the selected candidate (None = the unfiltered candidate) and
    is meaningful only when passive is True; passive False means no candidate
    restored passivity.
    """

    passive: bool
    cutoff_hz: float | None = None

    @property
    def needs_filter(self) -> bool:
        return self.passive and self.cutoff_hz is not None


def min_lpf_for_passivity(
    check,
    candidate_cutoffs: Iterable[float | None],
) -> MinLpfOutcome:
    """Scan filter candidates from lightest to heaviest, keep the first pass.

    check(cutoff) must return a PassivityReport for the scenario rebuilt with
    that droop-feedback cutoff (None = no filter).  Candidates are ordered by
    decreasing cutoff (None counts as unfiltered, the lightest); passivity
    only improves as the cutoff drops, so the first pass is the lightest
    admissible filter.
    """
    ordered = sorted(
        candidate_cutoffs, key=lambda c: math.inf if c is None else c, reverse=True
    )
    for cutoff in ordered:
        if check(cutoff).passed:
            return MinLpfOutcome(passive=True, cutoff_hz=cutoff)
    return MinLpfOutcome(passive=False)


@dataclass(frozen=True)
class NetworkOperatingPoint:
    """Converter operating point consistent with line loss and load draw."""

    converter: OperatingPoint
    v_load_bus: float      # V at the CPL terminals
    p_cpl: float           # W actually drawn by the load at this point
    p_terminal: float      # W leaving the converter terminal
    clamped: bool = False  # load pinned at its undervoltage current limit


_NET_OP_MAX_ITER = 50
_NET_OP_RTOL = 1e-12


def _clamped_network_op(
    params: ConverterParams,
    droop: DroopSpec,
    line: LineParams,
    p_cpl: float,
    v_floor: float,
) -> NetworkOperatingPoint:
    """Operating point with the load current-limited at its voltage floor.

    Below the floor the load holds i = p/v_floor regardless of bus voltage,
    so the feeder current is known and the droop law fixes the terminal
    voltage directly (for power droops through v = V_o/(1 + k*i), the law's
    own fixed point at constant current).
    """
    i_out = p_cpl / v_floor
    if droop.kind in (DroopKind.VI, DroopKind.IV):
        v_t = params.V_o - droop.coefficient * i_out
    else:
        v_t = params.V_o / (1.0 + droop.coefficient * i_out)
    if v_t <= 0.0:
        raise ValueError(
            f"droop law collapses at clamped current {i_out:.3f} A"
        )
    op = solve_operating_point(params, droop, v_t * i_out)
    v_load = v_t - line.r_total * i_out
    return NetworkOperatingPoint(
        converter=op,
        v_load_bus=v_load,
        p_cpl=v_load * i_out,
        p_terminal=v_t * i_out,
        clamped=True,
    )


def solve_network_operating_point(
    params: ConverterParams,
    droop: DroopSpec,
    line: LineParams,
    p_cpl: float,
    undervoltage_fraction: float | None = None,
) -> NetworkOperatingPoint:
    """Fixed point over terminal power: P_term = P_cpl + R_line * i_out^2.

    The droop law holds at the converter terminal, so the plant solve runs on
    the terminal power, which exceeds the CPL draw by the line conduction
    loss.  Converges in a few iterations for any sane feeder.  If
    undervoltage_fraction is given and the regulating solution would leave
    the load bus below that fraction of V_o, the load clamps to constant
    current and the clamped equilibrium is returned instead.
    """
    r_line = line.r_total
    try:
        p_term = p_cpl
        op = solve_operating_point(params, droop, p_term)
        for _ in range(_NET_OP_MAX_ITER):
            p_next = p_cpl + r_line * op.i_out**2
            if abs(p_next - p_term) <= _NET_OP_RTOL * p_cpl:
                p_term = p_next
                break
            p_term = p_next
            op = solve_operating_point(params, droop, p_term)
        op = solve_operating_point(params, droop, p_term)
    except NoRealSolution:
        if undervoltage_fraction is None:
            raise
        return _clamped_network_op(
            params, droop, line, p_cpl, undervoltage_fraction * params.V_o
        )
    v_load = op.v_bus - op.i_out * r_line
    if undervoltage_fraction is not None:
        v_floor = undervoltage_fraction * params.V_o
        if v_load < v_floor:
            return _clamped_network_op(params, droop, line, p_cpl, v_floor)
    return NetworkOperatingPoint(
        converter=op, v_load_bus=v_load, p_cpl=p_cpl, p_terminal=p_term
    )
