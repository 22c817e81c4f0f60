"""PI controller synthesis from bandwidth targets.

All three loops use the same magnitude-at-crossover rule: pick the PI zero a
decade below the target bandwidth, then size the gain so the loop magnitude
is exactly one at the target.  The design plants are deliberately simple
(inner current path V_bus/Z(s), outer voltage path 1/(sC), outer current
translation 1/(1-duty)); the closed inner loop is treated as unity from the
outer loops' point of view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .plant import ConverterParams, OperatingPoint
from .ratfun import RationalTF, tf_const

#: PI zero sits this factor below the crossover frequency.
ZERO_DECADE_FACTOR = 10.0


class BandwidthInfeasible(ValueError):
    """Requested crossover cannot be met with positive PI gains."""


#: Default crossovers, Hz: inner current loop at 3000/(2 pi) Hz (3000 rad/s),
#: outer voltage loop at 100 Hz, outer current loop at 200/(2 pi) Hz
#: (200 rad/s).  The voltage loop sits between the output-current loop and
#: the inner loop so the two droop families bracket comparable dynamics.
DEFAULT_F_CC_INNER = 3000.0 / (2.0 * math.pi)
DEFAULT_F_V = 100.0
DEFAULT_F_CC_OUTER = 200.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class LoopBandwidths:
    """Target crossover frequencies for the three converter loops, Hz."""

    f_cc_inner: float = DEFAULT_F_CC_INNER
    f_v: float = DEFAULT_F_V
    f_cc_outer: float = DEFAULT_F_CC_OUTER

    def validate(self, f_sw: float) -> None:
        if self.f_cc_inner <= self.f_v or self.f_cc_inner <= self.f_cc_outer:
            raise BandwidthInfeasible("inner current loop must be the fastest loop")
        if self.f_cc_inner > f_sw / 6.0:
            raise BandwidthInfeasible(
                f"inner bandwidth {self.f_cc_inner} Hz exceeds f_sw/6 = {f_sw / 6.0} Hz"
            )


def _pi(kp: float, ki: float) -> RationalTF:
    """K_p + K_i/s as a rational TF."""
    return RationalTF((ki, kp), (0.0, 1.0))


def pi_gains_for_crossover(plant_mag: float, f_bw: float) -> tuple[float, float]:
    """Gains of K_p + K_i/s with zero at f_bw/10 and |loop| = 1 at f_bw.

    plant_mag is |P(j 2 pi f_bw)| of the design plant.  |PI(j w_bw)| =
    K_p * sqrt(1 + (w_z/w_bw)^2) with w_z = w_bw/10.
    """
    if plant_mag <= 0.0 or not math.isfinite(plant_mag):
        raise BandwidthInfeasible(f"design plant magnitude {plant_mag} at {f_bw} Hz")
    w_bw = 2.0 * math.pi * f_bw
    w_z = w_bw / ZERO_DECADE_FACTOR
    kp = 1.0 / (plant_mag * math.sqrt(1.0 + (w_z / w_bw) ** 2))
    ki = kp * w_z
    if kp <= 0.0 or ki <= 0.0:
        raise BandwidthInfeasible("non-positive PI gains")
    return kp, ki


def current_plant(params: ConverterParams, op: OperatingPoint) -> RationalTF:
    """Duty-to-inductor-current small-signal path V_bus/Z(s)."""
    return RationalTF((op.v_bus,), (params.r_series, params.L))


def design_current_controller(
    params: ConverterParams, op: OperatingPoint, f_bw: float
) -> RationalTF:
    """Inner current-loop PI sized against V_bus/Z(s)."""
    if f_bw > params.f_sw / 6.0:
        raise BandwidthInfeasible(
            f"f_bw {f_bw} Hz exceeds f_sw/6 = {params.f_sw / 6.0} Hz"
        )
    plant = current_plant(params, op)
    kp, ki = pi_gains_for_crossover(abs(plant.at(f_bw)), f_bw)
    return _pi(kp, ki)


def voltage_plant(params: ConverterParams) -> RationalTF:
    """Outer voltage-loop design plant: output current into the terminal cap."""
    return RationalTF((1.0,), (0.0, params.C_out))


def design_voltage_controller(
    params: ConverterParams,
    op: OperatingPoint,
    f_bw: float,
    f_inner: float = DEFAULT_F_CC_INNER,
) -> RationalTF:
    """Outer voltage-loop PI sized against 1/(sC) under a unity inner loop."""
    _require_separation(f_bw, f_inner)
    plant = voltage_plant(params)
    kp, ki = pi_gains_for_crossover(abs(plant.at(f_bw)), f_bw)
    return _pi(kp, ki)


def outer_current_plant(op: OperatingPoint) -> RationalTF:
    """Output-to-inductor current translation ratio i_l/i_out = 1/(1-duty)."""
    return tf_const(1.0 / (1.0 - op.duty))


def design_outer_current_controller(
    params: ConverterParams,
    op: OperatingPoint,
    f_bw: float,
    f_inner: float = DEFAULT_F_CC_INNER,
) -> RationalTF:
    """Outer current-loop PI sized against the static 1/(1-duty) translation."""
    _require_separation(f_bw, f_inner)
    plant = outer_current_plant(op)
    kp, ki = pi_gains_for_crossover(abs(plant.at(f_bw)), f_bw)
    return _pi(kp, ki)


def droop_lpf(cutoff: float) -> RationalTF:
    """First-order unity-DC-gain low-pass w_c/(s + w_c) on the droop feedback."""
    if cutoff <= 0.0:
        raise ValueError("cutoff must be positive")
    w_c = 2.0 * math.pi * cutoff
    return RationalTF((w_c,), (w_c, 1.0))


def _require_separation(f_bw: float, f_inner: float) -> None:
    if f_bw * 4.0 > f_inner:
        raise BandwidthInfeasible(
            f"outer loop at {f_bw} Hz is not at least 4x below inner {f_inner} Hz"
        )


@dataclass(frozen=True)
class ControllerSet:
    """The designed loop controllers for one operating point."""

    g_c: RationalTF            # inner current PI
    g_v: RationalTF            # outer voltage PI (VI/VP path)
    g_cc: RationalTF           # outer current PI (IV/PV path)
    bandwidths: LoopBandwidths


def design_controllers(
    params: ConverterParams, op: OperatingPoint, loops: LoopBandwidths
) -> ControllerSet:
    loops.validate(params.f_sw)
    g_c = design_current_controller(params, op, loops.f_cc_inner)
    g_v = design_voltage_controller(params, op, loops.f_v, loops.f_cc_inner)
    g_cc = design_outer_current_controller(
        params, op, loops.f_cc_outer, loops.f_cc_inner
    )
    return ControllerSet(g_c=g_c, g_v=g_v, g_cc=g_cc, bandwidths=loops)


def pi_coefficients(pi: RationalTF) -> tuple[float, float]:
    """Recover (K_p, K_i) from a PI built by this module."""
    ki, kp = pi.num[0], pi.num[1]
    return kp, ki
