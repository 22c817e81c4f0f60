"""Nonlinear averaged time-domain simulation and injection measurement.

Runs the full microgrid (converter, feeder, bus capacitor, constant power
load) or a converter-only current-sink bench through fixed-step RK4, with
the dual-loop droop control chain advanced alongside the plant states.
Provides step-scenario traces, an oscillation classifier, and sinusoidal
perturbation-injection impedance measurement with single-bin correlation
extraction.
"""

from __future__ import annotations

from dataclasses import dataclass
import csv
import math

import numpy as np

from . import _kernels as _k
from .control import (
    ControllerSet,
    LoopBandwidths,
    design_controllers,
    pi_coefficients,
)
from .network import (
    CPLParams,
    LineParams,
    solve_network_operating_point,
)
from .plant import (
    VOLTAGE_LOOP_KINDS,
    ConverterParams,
    DroopKind,
    DroopSpec,
    OperatingPoint,
    solve_operating_point,
)

__all__ = [
    "DEFAULT_DT",
    "DEFAULT_DECIMATION",
    "DUTY_LIMITS",
    "EVENT_KINDS",
    "STATE_FIELDS",
    "InvalidTimestep",
    "UnstableBase",
    "PoorExcitation",
    "WindowTooShort",
    "SimEvent",
    "SimTrace",
    "OscillationVerdict",
    "InjectionSetup",
    "SweepPoint",
    "simulate",
    "steady_state_vector",
    "detect_oscillation",
    "converter_injection_setup",
    "bus_injection_setup",
    "snapped_frequency",
    "measure_impedance_injection",
    "frequency_sweep_measured",
    "measure_rlc_reference",
    "rlc_reference_impedance",
    "trace_to_csv",
]

DEFAULT_DT = 2e-6
DEFAULT_DECIMATION = 50
DUTY_LIMITS = (0.05, 0.95)
EVENT_KINDS = ("set_cpl_power", "inject_start", "inject_stop")
STATE_FIELDS = (
    "i_l",
    "v_cout",
    "i_line",
    "v_cbus",
    "x_cc",
    "x_v",
    "x_occ",
    "x_lpf",
)

_KIND_CODE = {
    DroopKind.VI: _k.KIND_VI,
    DroopKind.VP: _k.KIND_VP,
    DroopKind.IV: _k.KIND_IV,
    DroopKind.PV: _k.KIND_PV,
}

# Load-bus shed threshold as a fraction of V_o (below this the CPL drops out).
SHED_FRACTION = 0.1


class InvalidTimestep(ValueError):
    """dt is non-positive or too coarse for the fastest control loop."""


class UnstableBase(RuntimeError):
    """The scenario does not settle, so impedance cannot be measured on it."""


class PoorExcitation(RuntimeError):
    """Injected or measured phasor is below the numerical floor."""


class WindowTooShort(ValueError):
    """Requested analysis window cannot resolve a 10 Hz oscillation."""


@dataclass(frozen=True)
class SimEvent:
    """Timed change applied during a run.

    kind "set_cpl_power" takes a power in W; "inject_start" takes
    (frequency Hz, amplitude A) for a bus-node current source;
    "inject_stop" takes no value.
    """

    t: float
    kind: str
    value: object = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.t < 0.0:
            raise ValueError("event time must be >= 0")
        if self.kind == "set_cpl_power":
            if not isinstance(self.value, (int, float)) or self.value < 0.0:
                raise ValueError("set_cpl_power needs a power >= 0 W")
        elif self.kind == "inject_start":
            try:
                f_hz, amp = self.value
            except (TypeError, ValueError):
                raise ValueError("inject_start needs (frequency_hz, amplitude_a)")
            if f_hz <= 0.0 or amp <= 0.0:
                raise ValueError("injection frequency and amplitude must be > 0")


@dataclass
class SimTrace:
    """Decimated record of a simulation run.

    states columns follow STATE_FIELDS; v_bus is the load-bus voltage
    (v_cbus).  diverged marks a run aborted on state blow-up; the arrays
    then cover only the integrated span.
    """

    t: np.ndarray
    states: np.ndarray
    duty: np.ndarray
    p_cpl: np.ndarray
    events: tuple[SimEvent, ...]
    dt: float
    decimation: int
    diverged: bool = False

    @property
    def v_bus(self) -> np.ndarray:
        return self.states[:, 3]

    @property
    def v_cout(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def i_l(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def i_line(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def sample_dt(self) -> float:
        return self.dt * self.decimation


@dataclass(frozen=True)
class OscillationVerdict:
    """Classification of the trace tail plus its supporting metrics."""

    verdict: str               # "stable" | "marginal" | "unstable"
    pkpk_ratio: float          # peak-to-peak over mean in the window
    dominant_freq: float       # Hz, largest DFT bin of the detrended window


def _feedback_steady_state(droop: DroopSpec, op: OperatingPoint) -> float:
    # VI/VP filter the measured droop variable; IV/PV filter the outer-loop
    # error, which is zero whenever the droop law holds.
    if droop.kind is DroopKind.VI:
        return op.i_out
    if droop.kind is DroopKind.VP:
        return op.v_bus * op.i_out
    return 0.0


def steady_state_vector(
    droop: DroopSpec,
    op: OperatingPoint,
    line: LineParams | None = None,
) -> np.ndarray:
    """Exact equilibrium state for the given operating point.

    With line given, the full-network layout is produced (load-bus voltage
    lowered by the feeder drop); without it, the converter-only bench.
    """
    x = np.zeros(_k.NSTATE)
    x[0] = op.i_l
    x[1] = op.v_bus
    if line is not None:
        x[2] = op.i_out
        x[3] = op.v_bus - op.i_out * line.r_total
    x[4] = op.duty
    if droop.kind in VOLTAGE_LOOP_KINDS:
        x[5] = op.i_l
    else:
        x[6] = op.i_l
    x[7] = _feedback_steady_state(droop, op)
    return x


def _param_vector(
    params: ConverterParams,
    droop: DroopSpec,
    controllers: ControllerSet,
    *,
    topology: int,
    line: LineParams | None = None,
    c_bus: float | None = None,
    p_cpl: float = 0.0,
    i_sink: float = 0.0,
    uv_fraction: float = 0.5,
) -> np.ndarray:
    p = np.zeros(_k.NPARAM)
    p[_k.P_E] = params.E
    p[_k.P_RSER] = params.r_series
    p[_k.P_L] = params.L
    p[_k.P_COUT] = params.C_out
    p[_k.P_VO] = params.V_o
    if line is not None:
        p[_k.P_RLINE] = line.r_total
        p[_k.P_LLINE] = line.l_total
    p[_k.P_CBUS] = c_bus if c_bus is not None else params.C_out
    p[_k.P_PCPL] = p_cpl
    kp_c, ki_c = pi_coefficients(controllers.g_c)
    kp_v, ki_v = pi_coefficients(controllers.g_v)
    kp_occ, ki_occ = pi_coefficients(controllers.g_cc)
    p[_k.P_KP_C] = kp_c
    p[_k.P_KI_C] = ki_c
    p[_k.P_KP_V] = kp_v
    p[_k.P_KI_V] = ki_v
    p[_k.P_KP_OCC] = kp_occ
    p[_k.P_KI_OCC] = ki_occ
    p[_k.P_DCOEF] = droop.coefficient
    p[_k.P_WLPF] = (
        2.0 * math.pi * droop.lpf_cutoff if droop.lpf_cutoff is not None else 0.0
    )
    p[_k.P_VCLAMP] = uv_fraction * params.V_o
    p[_k.P_VSHED] = SHED_FRACTION * params.V_o
    p[_k.P_DMIN], p[_k.P_DMAX] = DUTY_LIMITS
    p[_k.P_KIND] = _KIND_CODE[droop.kind]
    p[_k.P_TOPO] = topology
    p[_k.P_ISINK] = i_sink
    return p


def _validate_dt(dt: float, loops: LoopBandwidths) -> None:
    if dt <= 0.0 or dt > 1.0 / (20.0 * loops.f_cc_inner):
        raise InvalidTimestep(
            f"dt={dt} must be in (0, 1/(20*f_cc_inner)] = "
            f"(0, {1.0 / (20.0 * loops.f_cc_inner):.3g}] s"
        )


def simulate(
    params: ConverterParams,
    droop: DroopSpec,
    line: LineParams,
    cpl: CPLParams,
    loops: LoopBandwidths,
    events: tuple[SimEvent, ...] | list[SimEvent] = (),
    t_end: float = 2.0,
    dt: float = DEFAULT_DT,
    decimation: int = DEFAULT_DECIMATION,
    c_bus: float | None = None,
    controllers: ControllerSet | None = None,
    initial_state: np.ndarray | None = None,
) -> SimTrace:
    """Integrate the full microgrid from its initial operating point.

    The run starts at the exact equilibrium of the initial CPL power unless
    initial_state overrides it.  Event times are snapped to the decimated
    sample grid (dt*decimation, 0.1 ms at defaults).  Divergence truncates
    the trace and sets the diverged flag instead of raising.
    """
    _validate_dt(dt, loops)
    if t_end <= 0.0:
        raise ValueError("t_end must be > 0")
    if decimation < 1:
        raise ValueError("decimation must be >= 1")
    events = tuple(events)
    times = [ev.t for ev in events]
    if times != sorted(times):
        raise ValueError("events must be time-ordered")
    if times and times[-1] >= t_end:
        raise ValueError("all event times must precede t_end")

    netop = solve_network_operating_point(
        params, droop, line, cpl.p,
        undervoltage_fraction=cpl.undervoltage_limit_fraction,
    )
    op = netop.converter
    if controllers is None:
        controllers = design_controllers(params, op, loops)
    x = (
        np.array(initial_state, dtype=float).copy()
        if initial_state is not None
        else steady_state_vector(droop, op, line)
    )
    if x.shape != (_k.NSTATE,):
        raise ValueError(f"initial_state must have shape ({_k.NSTATE},)")

    block = decimation
    n_total = max(block, int(round(t_end / dt)))
    n_total = ((n_total + block - 1) // block) * block

    # Constant-parameter segments between event boundaries, boundaries
    # snapped to the decimated grid.
    p_now = cpl.p
    inj = None  # (f_hz, amp, tref_step)
    segments: list[tuple[int, int, float, tuple | None]] = []
    cursor = 0
    for ev in events:
        n_ev = min(int(round(ev.t / dt / block)) * block, n_total)
        if n_ev > cursor:
            segments.append((cursor, n_ev, p_now, inj))
            cursor = n_ev
        if ev.kind == "set_cpl_power":
            p_now = float(ev.value)
        elif ev.kind == "inject_start":
            f_hz, amp = ev.value
            inj = (float(f_hz), float(amp), cursor)
        else:
            inj = None
    if cursor < n_total:
        segments.append((cursor, n_total, p_now, inj))

    n_samples = n_total // block + 1
    rec_t = np.empty(n_samples)
    rec_x = np.empty((n_samples, _k.NSTATE))
    rec_duty = np.empty(n_samples)
    rec_p = np.empty(n_samples)

    idx = 0
    diverged = False
    for si, (n0, n1, p_seg, inj_seg) in enumerate(segments):
        p = _param_vector(
            params,
            droop,
            controllers,
            topology=_k.TOPO_FULL,
            line=line,
            c_bus=c_bus,
            p_cpl=p_seg,
            uv_fraction=cpl.undervoltage_limit_fraction,
        )
        if inj_seg is not None:
            f_hz, amp, tref_step = inj_seg
            p[_k.P_INJ_AMP] = amp
            p[_k.P_INJ_W] = 2.0 * math.pi * f_hz
            p[_k.P_INJ_NODE] = _k.NODE_BUS
            p[_k.P_INJ_TREF] = tref_step * dt
        idx, done, diverged = _k.run_record(
            x, p, n0 * dt, dt, n1 - n0, block,
            rec_t, rec_x, rec_duty, rec_p, idx, si == 0,
        )
        if diverged:
            break

    return SimTrace(
        t=rec_t[:idx],
        states=rec_x[:idx],
        duty=rec_duty[:idx],
        p_cpl=rec_p[:idx],
        events=events,
        dt=dt,
        decimation=decimation,
        diverged=diverged,
    )


_MIN_WINDOW_S = 1.0          # ten cycles of 10 Hz
_PKPK_MARGINAL = 0.01
_PKPK_UNSTABLE = 0.05
_GROWTH_FACTOR = 1.25


def detect_oscillation(
    trace: SimTrace, settle_window: float = _MIN_WINDOW_S
) -> OscillationVerdict:
    """Classify the final settle_window of the load-bus voltage.

    unstable: peak-to-peak exceeds 5% of the mean, the envelope grows, or
    the run diverged.  marginal: peak-to-peak within [1%, 5%] and
    non-growing.  stable: below 1%.
    """
    if settle_window < _MIN_WINDOW_S:
        raise WindowTooShort(
            f"settle_window {settle_window} s cannot hold ten 10 Hz cycles"
        )
    if trace.diverged:
        return OscillationVerdict(
            verdict="unstable",
            pkpk_ratio=math.inf,
            dominant_freq=_dominant_freq(trace.v_bus, trace.sample_dt),
        )
    rate = trace.sample_dt
    n_w = int(round(settle_window / rate))
    if n_w < 16 or len(trace.t) < n_w:
        raise WindowTooShort(
            f"trace holds {len(trace.t) * rate:.3f} s, need {settle_window} s"
        )
    v = trace.v_bus[-n_w:]
    mean = float(np.mean(v))
    scale = abs(mean) if abs(mean) > 1e-9 else 1e-9
    pkpk = float(np.ptp(v))
    ratio = pkpk / scale
    half = n_w // 2
    pk1 = float(np.ptp(v[:half]))
    pk2 = float(np.ptp(v[half:]))
    growing = pk2 > _GROWTH_FACTOR * pk1 and pk2 / scale > _PKPK_MARGINAL
    if ratio > _PKPK_UNSTABLE or growing:
        verdict = "unstable"
    elif ratio >= _PKPK_MARGINAL:
        verdict = "marginal"
    else:
        verdict = "stable"
    return OscillationVerdict(
        verdict=verdict,
        pkpk_ratio=ratio,
        dominant_freq=_dominant_freq(v, rate),
    )


def _dominant_freq(v: np.ndarray, rate: float) -> float:
    n = len(v)
    if n < 16 or not np.all(np.isfinite(v)):
        return 0.0
    t = np.arange(n) * rate
    slope, intercept = np.polyfit(t, v, 1)
    detrended = v - (slope * t + intercept)
    spectrum = np.abs(np.fft.rfft(detrended))
    if len(spectrum) < 2:
        return 0.0
    k = 1 + int(np.argmax(spectrum[1:]))
    return k / (n * rate)


# --- Perturbation-injection impedance measurement ---


@dataclass(frozen=True)
class InjectionSetup:
    """What to measure: a converter on a current-sink bench, or the load bus
    of the full network.  Use the converter_/bus_injection_setup builders."""

    node: str  # "converter" | "bus"
    params: ConverterParams
    droop: DroopSpec
    loops: LoopBandwidths
    p_load: float
    line: LineParams | None = None
    cpl: CPLParams | None = None
    c_bus: float | None = None
    controllers: ControllerSet | None = None


def converter_injection_setup(
    params: ConverterParams,
    droop: DroopSpec,
    loops: LoopBandwidths,
    p_load: float,
    controllers: ControllerSet | None = None,
) -> InjectionSetup:
    """Converter alone feeding a DC current sink; inject at its terminal."""
    return InjectionSetup(
        node="converter",
        params=params,
        droop=droop,
        loops=loops,
        p_load=p_load,
        controllers=controllers,
    )


def bus_injection_setup(
    params: ConverterParams,
    droop: DroopSpec,
    loops: LoopBandwidths,
    line: LineParams,
    cpl: CPLParams,
    c_bus: float | None = None,
    controllers: ControllerSet | None = None,
) -> InjectionSetup:
    """Full network; inject at the load bus to measure Z_bus."""
    return InjectionSetup(
        node="bus",
        params=params,
        droop=droop,
        loops=loops,
        p_load=cpl.p,
        line=line,
        cpl=cpl,
        c_bus=c_bus,
        controllers=controllers,
    )


def _phasor_pair(sums: np.ndarray) -> tuple[complex, complex]:
    t_w = sums[8]
    mean_v = sums[2] / t_w
    mean_i = sums[5] / t_w
    v_ph = (2.0 / t_w) * complex(
        sums[0] - mean_v * sums[6], -(sums[1] - mean_v * sums[7])
    )
    i_ph = (2.0 / t_w) * complex(
        sums[3] - mean_i * sums[6], -(sums[4] - mean_i * sums[7])
    )
    return v_ph, i_ph


def snapped_frequency(f_hz: float, dt: float) -> float:
    """The frequency actually excited by an injection at nominal f_hz.

    Injection periods are an integer number of timesteps (at least 8), so
    the realized frequency differs slightly from the request; analytic
    references must be evaluated here for a fair comparison.
    """
    if f_hz <= 0.0:
        raise ValueError("frequency must be positive")
    steps_per_period = max(8, int(round(1.0 / (f_hz * dt))))
    return 1.0 / (steps_per_period * dt)


def measure_impedance_injection(
    setup: InjectionSetup,
    f_hz: float,
    amplitude_fraction: float = 0.01,
    dt: float = DEFAULT_DT,
    settle_time: float = 0.5,
    discard_periods: int = 10,
    measure_periods: int = 20,
) -> complex:
    """Measure the small-signal impedance at the setup's node.

    A sinusoidal current source (amplitude_fraction of the node's DC
    current) is superposed at the node; after discard_periods of injection,
    voltage and current fundamental phasors are extracted by single-bin
    correlation over measure_periods and the ratio returned.  The frequency
    is snapped to an integer number of timesteps per period (error below
    one part in 2/(f*dt)).
    """
    if f_hz <= 0.0:
        raise ValueError("frequency must be positive")
    if not 0.0 < amplitude_fraction < 0.5:
        raise ValueError("amplitude_fraction must be in (0, 0.5)")
    _validate_dt(dt, setup.loops)
    if setup.node == "converter":
        op = solve_operating_point(setup.params, setup.droop, setup.p_load)
        i_dc = op.i_out
        topology = _k.TOPO_BENCH
        node_state = 1
        inj_node = _k.NODE_TERMINAL
        line = None
        uv = 0.5
        p_cpl = 0.0
        v_ref_scale = op.v_bus
    elif setup.node == "bus":
        if setup.line is None or setup.cpl is None:
            raise ValueError("bus measurement needs line and cpl")
        netop = solve_network_operating_point(
            setup.params, setup.droop, setup.line, setup.cpl.p,
            undervoltage_fraction=setup.cpl.undervoltage_limit_fraction,
        )
        op = netop.converter
        i_dc = netop.p_cpl / netop.v_load_bus
        topology = _k.TOPO_FULL
        node_state = 3
        inj_node = _k.NODE_BUS
        line = setup.line
        uv = setup.cpl.undervoltage_limit_fraction
        p_cpl = setup.cpl.p
        v_ref_scale = netop.v_load_bus
    else:
        raise ValueError(f"unknown measurement node {setup.node!r}")

    controllers = setup.controllers or design_controllers(
        setup.params, op, setup.loops
    )
    p = _param_vector(
        setup.params,
        setup.droop,
        controllers,
        topology=topology,
        line=line,
        c_bus=setup.c_bus,
        p_cpl=p_cpl,
        i_sink=i_dc if topology == _k.TOPO_BENCH else 0.0,
        uv_fraction=uv,
    )
    x = steady_state_vector(setup.droop, op, line)

    # Settle and verify the base point is quiet enough to measure on.
    n_settle = max(1, int(round(settle_time / dt)))
    decim = max(1, n_settle // 4000)
    n_rec = n_settle // decim + 2
    rec_t = np.empty(n_rec)
    rec_x = np.empty((n_rec, _k.NSTATE))
    rec_duty = np.empty(n_rec)
    rec_p = np.empty(n_rec)
    idx, _, diverged = _k.run_record(
        x, p, 0.0, dt, n_settle, decim, rec_t, rec_x, rec_duty, rec_p, 0, True
    )
    if diverged:
        raise UnstableBase("scenario diverged while settling")
    v_tail = rec_x[max(0, idx // 2) : idx, node_state]
    v_mean = float(np.mean(v_tail))
    if abs(v_mean) < 1.0 or np.ptp(v_tail) / abs(v_mean) > 0.01:
        raise UnstableBase(
            "scenario does not settle at its operating point "
            f"(residual ripple {np.ptp(v_tail) / max(abs(v_mean), 1e-9):.2%})"
        )

    # Snap frequency to the step grid so correlation spans whole periods.
    steps_per_period = max(8, int(round(1.0 / (f_hz * dt))))
    w = 2.0 * math.pi * snapped_frequency(f_hz, dt)
    amp = amplitude_fraction * abs(i_dc)
    if amp <= 0.0:
        raise PoorExcitation("zero DC current at the measurement node")
    t0 = n_settle * dt
    p[_k.P_INJ_AMP] = amp
    p[_k.P_INJ_W] = w
    p[_k.P_INJ_NODE] = inj_node
    p[_k.P_INJ_TREF] = t0

    n_skip = discard_periods * steps_per_period
    idx2, _, diverged = _k.run_record(
        x, p, t0, dt, n_skip, n_skip, rec_t, rec_x, rec_duty, rec_p, 0, False
    )
    if diverged:
        raise UnstableBase("scenario diverged under injection")

    n_meas = measure_periods * steps_per_period
    sums, diverged = _k.run_measure(
        x, p, t0 + n_skip * dt, dt, n_meas, node_state
    )
    if diverged:
        raise UnstableBase("scenario diverged during measurement window")

    v_ph, i_ph = _phasor_pair(sums)
    if abs(i_ph) < 0.25 * amp:
        raise PoorExcitation("injected current phasor below expected level")
    if abs(v_ph) < 1e-10 * max(abs(v_ref_scale), 1.0):
        raise PoorExcitation("voltage response below numerical floor")
    return v_ph / i_ph


@dataclass(frozen=True)
class SweepPoint:
    f_hz: float
    z: complex | None
    error: str | None = None


def frequency_sweep_measured(
    setup: InjectionSetup,
    frequencies,
    amplitude_fraction: float = 0.01,
    **kwargs,
) -> list[SweepPoint]:
    """Map measure_impedance_injection over a grid; failures are flagged
    per-point, never fatal."""
    points: list[SweepPoint] = []
    for f_hz in frequencies:
        try:
            z = measure_impedance_injection(
                setup, float(f_hz), amplitude_fraction, **kwargs
            )
            points.append(SweepPoint(f_hz=float(f_hz), z=z))
        except (UnstableBase, PoorExcitation) as exc:
            points.append(
                SweepPoint(f_hz=float(f_hz), z=None, error=type(exc).__name__)
            )
    return points


def rlc_reference_impedance(
    r: float, l: float, c: float, r_load: float, f_hz: float
) -> complex:
    """Closed-form bus impedance of the self-test network: (r + jwL) in
    parallel with r_load and 1/(jwC)."""
    s = 2j * math.pi * f_hz
    y = 1.0 / (r + l * s) + 1.0 / r_load + c * s
    return 1.0 / y


def measure_rlc_reference(
    v_src: float,
    r: float,
    l: float,
    c: float,
    r_load: float,
    f_hz: float,
    amplitude: float = 0.1,
    dt: float = DEFAULT_DT,
    settle_time: float = 0.2,
    discard_periods: int = 10,
    measure_periods: int = 20,
) -> complex:
    """Injection measurement on a passive RLC divider with an ideal source.

    Exercises the same correlation recipe as the converter measurement on a
    network whose impedance is known in closed form; used to validate the
    extraction machinery.
    """
    steps_per_period = max(8, int(round(1.0 / (f_hz * dt))))
    w = 2.0 * math.pi * snapped_frequency(f_hz, dt)
    x = np.array([v_src / (r + r_load), v_src * r_load / (r + r_load)])
    sums = _k.run_rlc_measure(
        v_src,
        r,
        l,
        c,
        r_load,
        amplitude,
        w,
        x,
        0.0,
        dt,
        max(1, int(round(settle_time / dt))),
        discard_periods * steps_per_period,
        measure_periods * steps_per_period,
    )
    v_ph, i_ph = _phasor_pair(sums)
    if abs(i_ph) < 0.25 * amplitude:
        raise PoorExcitation("injected current phasor below expected level")
    return v_ph / i_ph


def trace_to_csv(trace: SimTrace, path) -> None:
    """Write the decimated trace with columns t, v_bus, i_l, i_line, duty,
    p_cpl (one row per sample, '%.12g' formatting)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "v_bus", "i_l", "i_line", "duty", "p_cpl"])
        for i in range(len(trace.t)):
            writer.writerow(
                format(val, ".12g")
                for val in (
                    trace.t[i],
                    trace.states[i, 3],
                    trace.states[i, 0],
                    trace.states[i, 2],
                    trace.duty[i],
                    trace.p_cpl[i],
                )
            )
