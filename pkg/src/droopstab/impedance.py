"""Closed-loop small-signal output impedance of the droop-controlled boost.

Every droop variant closes a feedback chain around the same averaged power
stage.  Linearizing the stage about its operating point (series path
Z(s) = r_bat + r_f + L*s, terminal capacitance C_out, duty-to-current gain
V, current-to-terminal transfer (1-Dc)) and writing the inductor and
capacitor balances with the control chain folded in gives two equations in
the inductor current i_l and terminal voltage v, driven by the output
current i_o:

  (Z(s) + V*Gc) * i_l + ((1-Dc) - V*Gc*a_v) * v = V*Gc*a_i * i_o
  ((1-Dc) + I_L*Gc) * i_l - (s*C + I_L*Gc*a_v) * v = (1 + I_L*Gc*a_i) * i_o

where Gc is the inner current PI and the pair (a_v, a_i) captures how the
outer control chain turns the measured terminal voltage and output current
into the inductor-current reference, i_ref = a_v*v + a_i*i_o:

  VI: a_v = -Gv,               a_i = -Gv*d*H       (filtered current droop)
  VP: a_v = -Gv*(1 + k*Io*H),  a_i = -Gv*k*V*H     (filtered power droop)
  IV: a_v = -Gcc*H/d,          a_i = -Gcc*H
  PV: a_v = -Gcc*H*V_o/(k*V^2), a_i = -Gcc*H

For the voltage-loop family (VI, VP) the low-pass H(s) sits on the measured
droop feedback inside the reference.  For the current-loop family (IV, PV)
the droop law is itself the outer reference generator, so H filters the
whole outer-loop error (reference minus measured output current), which is
what the single filter state realizes in the time-domain model.  Solving
the pair for v and negating yields Z_out = -v/i_o (i_o drawn out of the
terminal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import ControllerSet, LoopBandwidths, design_controllers, droop_lpf
from .passivity import (
    DEFAULT_PHASE_MARGIN_DEG,
    PassivityReport,
    passivity_report,
)
from .plant import ConverterParams, DroopKind, DroopSpec, OperatingPoint
from .ratfun import RationalTF, tf_cancel_origin, tf_const, tf_s


class UnsolvedOperatingPoint(ValueError):
    """Operating point is missing or not a valid converter steady state."""


class InconsistentDroopKind(ValueError):
    """Operating point does not satisfy the droop law it is paired with."""


@dataclass(frozen=True)
class ConverterImpedanceModel:
    """Assembled converter output impedance with its diagnostic sub-blocks."""

    droop: DroopSpec
    op: OperatingPoint
    z: RationalTF
    components: dict[str, RationalTF]


def _validate_bindings(
    params: ConverterParams, droop: DroopSpec, op: OperatingPoint
) -> None:
    vals = (op.v_bus, op.i_out, op.i_l, op.duty, op.p_load)
    if not all(np.isfinite(v) for v in vals):
        raise UnsolvedOperatingPoint(f"non-finite operating point {op}")
    if not 0.0 < op.duty < 1.0 or op.v_bus <= 0.0:
        raise UnsolvedOperatingPoint(f"invalid steady state {op}")
    if droop.kind in (DroopKind.VI, DroopKind.IV):
        v_law = params.V_o - droop.coefficient * op.i_out
    else:
        v_law = params.V_o - droop.coefficient * op.p_load
    if abs(op.v_bus - v_law) > 1e-6 * params.V_o:
        raise InconsistentDroopKind(
            f"op.v_bus={op.v_bus:.6f} V violates the {droop.kind.value} droop law "
            f"(expected {v_law:.6f} V); was the point solved for another droop?"
        )


def analytic_output_impedance(
    params: ConverterParams,
    droop: DroopSpec,
    op: OperatingPoint,
    loops: LoopBandwidths,
    controllers: ControllerSet | None = None,
) -> ConverterImpedanceModel:
    """Build the closed-loop output impedance for one droop variant."""
    _validate_bindings(params, droop, op)
    ctl = controllers if controllers is not None else design_controllers(params, op, loops)

    s = tf_s()
    z_path = RationalTF((params.r_series, params.L))      # Z(s)
    h = droop_lpf(droop.lpf_cutoff) if droop.lpf_cutoff else tf_const(1.0)
    g_c, g_v, g_cc = ctl.g_c, ctl.g_v, ctl.g_cc

    v = op.v_bus
    il = op.i_l
    one_m_d = 1.0 - op.duty

    # Reference sensitivities i_ref = a_v*v + a_i*i_o for the droop chain.
    if droop.kind is DroopKind.VI:
        a_v = -1.0 * g_v
        a_i = -droop.coefficient * (g_v * h)
    elif droop.kind is DroopKind.VP:
        a_v = -1.0 * (g_v * (1.0 + droop.coefficient * op.i_out * h))
        a_i = -(droop.coefficient * v) * (g_v * h)
    elif droop.kind is DroopKind.IV:
        a_v = -(1.0 / droop.coefficient) * (g_cc * h)
        a_i = -1.0 * (g_cc * h)
    else:
        a_v = -(params.V_o / (droop.coefficient * v * v)) * (g_cc * h)
        a_i = -1.0 * (g_cc * h)

    # Two-equation port solve for v under output-current drive.
    a11 = z_path + v * g_c
    a12 = one_m_d - v * (g_c * a_v)
    a21 = one_m_d + il * g_c
    a22 = -1.0 * (s * params.C_out + il * (g_c * a_v))
    b1 = v * (g_c * a_i)
    b2 = 1.0 + il * (g_c * a_i)
    num = a11 * b2 - a21 * b1
    den = a11 * a22 - a12 * a21

    z_out = tf_cancel_origin(-1.0 * (num / den))
    components = {
        "Z": z_path,
        "G_c": g_c,
        "G_v": g_v,
        "G_cc": g_cc,
        "H_lpf": h,
    }
    return ConverterImpedanceModel(droop=droop, op=op, z=z_out, components=components)


#: Converter-level passivity is only demanded above this frequency by default.
DEFAULT_CONVERTER_THRESHOLD_HZ = 300.0


def converter_passivity_report(
    model: ConverterImpedanceModel,
    grid: np.ndarray,
    threshold: float = DEFAULT_CONVERTER_THRESHOLD_HZ,
    phase_margin_deg: float = DEFAULT_PHASE_MARGIN_DEG,
) -> PassivityReport:
    """Non-passive band detection with a frequency threshold verdict.

    A band only fails the verdict if it extends above the threshold;
    below-threshold phase excursions are reported but tolerated, because
    the source converter is not required to look passive at frequencies
    where the droop action itself must shape the bus.
    """
    return passivity_report(
        model.z, grid, threshold=threshold, phase_margin_deg=phase_margin_deg
    )
