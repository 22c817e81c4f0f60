"""Scenario matrix assembly, JSON configuration, and report emission.

A scenario is one cell of (droop kind x CPL power multiple x LPF candidate
x line-length multiple).  Each cell gets an analytic converter passivity
report, an analytic bus passivity report, the lightest-filter search result
for its (droop, power, line) group, and a time-domain step verdict.  All
defaults reproduce the baseline system table, so an empty config runs the
reference matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import concurrent.futures
import csv
import json
import math
import os

from .control import LoopBandwidths, design_controllers
from .impedance import (
    DEFAULT_CONVERTER_THRESHOLD_HZ,
    analytic_output_impedance,
    converter_passivity_report,
)
from .network import (
    CPLParams,
    LineParams,
    MinLpfOutcome,
    min_lpf_for_passivity,
    single_feeder_bus_impedance,
    solve_network_operating_point,
    system_passivity_check,
)
from .passivity import DEFAULT_GRID, FrequencyGrid, PassivityReport
from .plant import ConverterParams, DroopKind, DroopSpec
from .ratfun import RationalTF, freq_response
from .sim import (
    OscillationVerdict,
    SimEvent,
    SimTrace,
    detect_oscillation,
    simulate,
    trace_to_csv,
)

__all__ = [
    "DEFAULT_RATED_POWER",
    "DEFAULT_DROOPS",
    "ParseError",
    "ValidationError",
    "SimSettings",
    "ScenarioConfig",
    "ScenarioResult",
    "default_config",
    "load_config",
    "scenario_cells",
    "run_scenario",
    "run_scenario_matrix",
    "emit_reports",
]

DEFAULT_RATED_POWER = 3600.0
DEFAULT_DROOP_RESISTANCE = 1.0            # Ohm, VI/IV virtual resistance
DEFAULT_POWER_SLOPE = 10.0 / 3600.0       # V/W, VP/PV droop slope
#: Input capacitance of the load stage hanging on the bus, F.  Small against
#: the converter's 3.3 mF terminal capacitance: the load bus is decoupled by
#: its own filter capacitor only.
DEFAULT_BUS_CAPACITANCE = 150e-6
DEFAULT_DROOPS = (
    DroopSpec(DroopKind.VI, DEFAULT_DROOP_RESISTANCE),
    DroopSpec(DroopKind.VP, DEFAULT_POWER_SLOPE),
    DroopSpec(DroopKind.IV, DEFAULT_DROOP_RESISTANCE),
    DroopSpec(DroopKind.PV, DEFAULT_POWER_SLOPE),
)


class ParseError(ValueError):
    """Config file is not valid JSON."""


class ValidationError(ValueError):
    """Config contents violate an invariant."""


@dataclass(frozen=True)
class SimSettings:
    """Time-domain protocol knobs for the matrix runs."""

    dt: float = 2e-6
    dwell: float = 1.0             # seconds at the target power before the verdict window
    settle_window: float = 1.0     # verdict window length, seconds
    step_time: float = 0.2         # when the power step lands, seconds
    decimation: int = 50

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValidationError("sim.dt must be > 0")
        if self.dwell <= 0.0 or self.settle_window <= 0.0 or self.step_time <= 0.0:
            raise ValidationError("sim durations must be > 0")
        if self.decimation < 1:
            raise ValidationError("sim.decimation must be >= 1")

    @property
    def t_end(self) -> float:
        return self.step_time + self.dwell + self.settle_window


@dataclass(frozen=True)
class ScenarioConfig:
    converter: ConverterParams = ConverterParams()
    droops: tuple[DroopSpec, ...] = DEFAULT_DROOPS
    line: LineParams = LineParams()
    rated_power: float = DEFAULT_RATED_POWER
    cpl_multiples: tuple[float, ...] = (1.0, 3.0, 4.0)
    lpf_candidates: tuple[float | None, ...] = (None, 30.0)
    line_multiples: tuple[float, ...] = (1.0,)
    loops: LoopBandwidths = LoopBandwidths()
    grid: FrequencyGrid = FrequencyGrid(*DEFAULT_GRID)
    sim: SimSettings = SimSettings()
    c_bus: float | None = None      # defaults to DEFAULT_BUS_CAPACITANCE
    cpl_undervoltage_fraction: float = 0.5
    outputs: str = "out"

    def __post_init__(self):
        if not self.droops:
            raise ValidationError("droops must be non-empty")
        if not self.cpl_multiples:
            raise ValidationError("cpl_multiples must be non-empty")
        if not self.lpf_candidates:
            raise ValidationError("lpf_candidates must be non-empty")
        if not self.line_multiples:
            raise ValidationError("line_multiples must be non-empty")
        if self.rated_power <= 0.0:
            raise ValidationError("rated_power must be > 0")
        for m in self.cpl_multiples:
            if m <= 0.0:
                raise ValidationError("cpl_multiples entries must be > 0")
        for m in self.line_multiples:
            if m <= 0.0:
                raise ValidationError("line_multiples entries must be > 0")
        for c in self.lpf_candidates:
            if c is not None and c <= 0.0:
                raise ValidationError("lpf_candidates entries must be > 0 or null")
        if self.c_bus is not None and self.c_bus <= 0.0:
            raise ValidationError("c_bus must be > 0")
        if not 0.0 < self.cpl_undervoltage_fraction < 1.0:
            raise ValidationError("cpl_undervoltage_fraction must lie in (0, 1)")

    @property
    def bus_capacitance(self) -> float:
        return self.c_bus if self.c_bus is not None else DEFAULT_BUS_CAPACITANCE


@dataclass
class ScenarioResult:
    scenario_id: str
    droop: DroopSpec
    power_multiple: float
    line_multiple: float
    lpf_hz: float | None
    converter_report: PassivityReport | None = None
    bus_report: PassivityReport | None = None
    min_lpf: MinLpfOutcome | None = None
    timedomain: OscillationVerdict | None = None
    trace: SimTrace | None = None
    error: str | None = None
    artifacts: dict = field(default_factory=dict)


def _num(x) -> str:
    return format(x, "g")


def scenario_id(
    droop: DroopSpec, power_multiple: float, line_multiple: float,
    lpf_hz: float | None,
) -> str:
    lpf = "none" if lpf_hz is None else _num(lpf_hz)
    return (
        f"{droop.kind.value}_P{_num(power_multiple)}x_"
        f"L{_num(line_multiple)}x_lpf{lpf}"
    )


# --- configuration -------------------------------------------------------


def default_config() -> ScenarioConfig:
    return ScenarioConfig()


_KIND_DEFAULT_COEF = {
    DroopKind.VI: DEFAULT_DROOP_RESISTANCE,
    DroopKind.VP: DEFAULT_POWER_SLOPE,
    DroopKind.IV: DEFAULT_DROOP_RESISTANCE,
    DroopKind.PV: DEFAULT_POWER_SLOPE,
}


def _build(cls, raw: dict, key: str):
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ValidationError(f"{key}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"{key}: {exc}") from exc


def _parse_droop(raw, index: int) -> DroopSpec:
    key = f"droops[{index}]"
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        raise ValidationError(f"{key}: expected an object or kind string")
    unknown = set(raw) - {"kind", "coefficient"}
    if unknown:
        if "lpf_cutoff" in unknown:
            raise ValidationError(
                f"{key}: set lpf_candidates instead of a per-droop lpf_cutoff"
            )
        raise ValidationError(f"{key}: unknown keys {sorted(unknown)}")
    if "kind" not in raw:
        raise ValidationError(f"{key}: missing kind")
    try:
        kind = DroopKind(raw["kind"])
    except ValueError as exc:
        raise ValidationError(f"{key}: {exc}") from exc
    coefficient = raw.get("coefficient", _KIND_DEFAULT_COEF[kind])
    return _build(DroopSpec, {"kind": kind, "coefficient": coefficient}, key)


_TOP_KEYS = {
    "converter", "droops", "line", "rated_power", "cpl_multiples",
    "lpf_candidates", "line_multiples", "loops", "grid", "sim", "c_bus",
    "cpl_undervoltage_fraction", "outputs",
}


def config_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys {sorted(unknown)}")
    kwargs = {}
    if "converter" in raw:
        kwargs["converter"] = _build(ConverterParams, raw["converter"], "converter")
    if "droops" in raw:
        entries = raw["droops"]
        if not isinstance(entries, list):
            raise ValidationError("droops must be a list")
        kwargs["droops"] = tuple(
            _parse_droop(d, i) for i, d in enumerate(entries)
        )
    if "line" in raw:
        kwargs["line"] = _build(LineParams, raw["line"], "line")
    if "loops" in raw:
        kwargs["loops"] = _build(LoopBandwidths, raw["loops"], "loops")
    if "grid" in raw:
        kwargs["grid"] = _build(FrequencyGrid, raw["grid"], "grid")
    if "sim" in raw:
        kwargs["sim"] = _build(SimSettings, raw["sim"], "sim")
    for key in ("rated_power", "c_bus", "cpl_undervoltage_fraction", "outputs"):
        if key in raw:
            kwargs[key] = raw[key]
    for key in ("cpl_multiples", "line_multiples"):
        if key in raw:
            if not isinstance(raw[key], list):
                raise ValidationError(f"{key} must be a list")
            kwargs[key] = tuple(float(v) for v in raw[key])
    if "lpf_candidates" in raw:
        if not isinstance(raw["lpf_candidates"], list):
            raise ValidationError("lpf_candidates must be a list")
        kwargs["lpf_candidates"] = tuple(
            None if v is None else float(v) for v in raw["lpf_candidates"]
        )
    try:
        return ScenarioConfig(**kwargs)
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    """Parse and validate a JSON config; an empty file means all defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return default_config()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    return config_from_dict(raw)


# --- matrix execution ----------------------------------------------------


def scenario_cells(config: ScenarioConfig) -> list[tuple]:
    """Deterministic cell order: droop, line multiple, power multiple, lpf."""
    cells = []
    for droop in config.droops:
        for lm in config.line_multiples:
            for pm in config.cpl_multiples:
                for lpf in config.lpf_candidates:
                    cells.append((droop, pm, lm, lpf))
    return cells


def _cell_models(
    config: ScenarioConfig,
    droop_cell: DroopSpec,
    line: LineParams,
    p_cpl: float,
):
    """Equilibrium, controllers and impedances for one cell.

    Everything is linearized at the cell's own operating point: the
    controller gains follow the plant values there (the design rule is a
    function of the operating point), and when the load clamps below its
    undervoltage limit it contributes no incremental admittance, so the
    composed bus impedance omits it.
    """
    netop = solve_network_operating_point(
        config.converter, droop_cell, line, p_cpl,
        undervoltage_fraction=config.cpl_undervoltage_fraction,
    )
    controllers = design_controllers(
        config.converter, netop.converter, config.loops
    )
    model = analytic_output_impedance(
        config.converter, droop_cell, netop.converter, config.loops,
        controllers=controllers,
    )
    cpl = None
    if not netop.clamped:
        cpl = CPLParams(
            p=p_cpl,
            v_op=netop.v_load_bus,
            undervoltage_limit_fraction=config.cpl_undervoltage_fraction,
        )
    z_bus = single_feeder_bus_impedance(
        model.z, line, config.bus_capacitance, cpl
    )
    return netop, controllers, model, z_bus


def run_scenario(
    config: ScenarioConfig,
    droop: DroopSpec,
    power_multiple: float,
    line_multiple: float,
    lpf_hz: float | None,
) -> ScenarioResult:
    """Run one matrix cell: analytic reports, filter search, step verdict.

    The time-domain leg starts from the rated (1x) equilibrium and steps the
    load to the cell's power, using the same controllers as the analytic
    reports so both legs describe one converter.
    """
    result = ScenarioResult(
        scenario_id=scenario_id(droop, power_multiple, line_multiple, lpf_hz),
        droop=droop.with_lpf(lpf_hz),
        power_multiple=power_multiple,
        line_multiple=line_multiple,
        lpf_hz=lpf_hz,
    )
    try:
        line = config.line.scaled(line_multiple)
        droop_cell = droop.with_lpf(lpf_hz)
        p_cpl = power_multiple * config.rated_power
        netop, controllers, model, z_bus = _cell_models(
            config, droop_cell, line, p_cpl
        )
        result.converter_report = converter_passivity_report(
            model, config.grid, DEFAULT_CONVERTER_THRESHOLD_HZ
        )
        result.bus_report = system_passivity_check(z_bus, config.grid)

        def _check(cutoff: float | None) -> PassivityReport:
            z = _cell_models(config, droop.with_lpf(cutoff), line, p_cpl)[3]
            return system_passivity_check(z, config.grid)

        result.min_lpf = min_lpf_for_passivity(_check, config.lpf_candidates)

        events = []
        if power_multiple != 1.0:
            events.append(
                SimEvent(t=config.sim.step_time, kind="set_cpl_power", value=p_cpl)
            )
        trace = simulate(
            config.converter,
            droop_cell,
            line,
            CPLParams(
                p=config.rated_power,
                v_op=config.converter.V_o,
                undervoltage_limit_fraction=config.cpl_undervoltage_fraction,
            ),
            config.loops,
            events=events,
            t_end=config.sim.t_end,
            dt=config.sim.dt,
            decimation=config.sim.decimation,
            c_bus=config.bus_capacitance,
            controllers=controllers,
        )
        result.trace = trace
        result.timedomain = detect_oscillation(trace, config.sim.settle_window)
    except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _run_cell(args) -> ScenarioResult:
    config, droop, pm, lm, lpf = args
    return run_scenario(config, droop, pm, lm, lpf)


def run_scenario_matrix(config: ScenarioConfig, jobs: int = 1) -> list[ScenarioResult]:
    """Run every cell; failures stay inside their cell's result."""
    cells = scenario_cells(config)
    work = [(config, droop, pm, lm, lpf) for droop, pm, lm, lpf in cells]
    if jobs <= 1 or len(work) <= 1:
        return [_run_cell(w) for w in work]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, work))


# --- report emission -----------------------------------------------------


_FMT = ".12g"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, float):
        return format(value, _FMT)
    return str(value)


def _bands_str(report: PassivityReport | None) -> str:
    if report is None:
        return ""
    return ";".join(
        f"{format(lo, '.6g')}-{format(hi, '.6g')}"
        for lo, hi in report.non_passive_bands
    )


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _frequency_csv(
    path: str,
    grid: FrequencyGrid,
    z_conv: RationalTF | None,
    z_bus: RationalTF | None,
) -> None:
    f = grid.frequencies()
    resp_c = freq_response(z_conv, f) if z_conv is not None else None
    resp_b = freq_response(z_bus, f) if z_bus is not None else None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(
            [
                "f_hz",
                "conv_re", "conv_im", "conv_mag_db", "conv_phase_deg",
                "bus_re", "bus_im", "bus_mag_db", "bus_phase_deg",
            ]
        )
        for i, fi in enumerate(f):
            row = [format(fi, _FMT)]
            for resp in (resp_c, resp_b):
                if resp is None:
                    row.extend(["", "", "", ""])
                    continue
                z = resp[i]
                mag_db = 20.0 * math.log10(abs(z)) if abs(z) > 0 else -math.inf
                row.extend(
                    [
                        format(z.real, _FMT),
                        format(z.imag, _FMT),
                        format(mag_db, _FMT),
                        format(math.degrees(math.atan2(z.imag, z.real)), _FMT),
                    ]
                )
            w.writerow(row)


SUMMARY_COLUMNS = [
    "scenario_id", "droop_kind", "droop_coefficient", "power_multiple",
    "line_multiple", "lpf_hz", "converter_verdict", "converter_bands",
    "bus_verdict", "bus_bands", "min_lpf_passive", "min_lpf_hz",
    "td_verdict", "td_pkpk_ratio", "td_dominant_freq_hz", "error",
]


def emit_reports(
    results: list[ScenarioResult],
    out_dir: str,
    config: ScenarioConfig,
    write_traces: bool = True,
    write_frequency: bool = True,
) -> list[str]:
    """Write per-scenario CSVs plus the summary CSV and text narrative.

    Identical inputs produce byte-identical files: all floats use one
    format, rows follow the deterministic cell order, and no timestamps are
    embedded.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    for res in results:
        if write_frequency and res.error is None:
            line = config.line.scaled(res.line_multiple)
            p_cpl = res.power_multiple * config.rated_power
            _, _, model, z_bus = _cell_models(config, res.droop, line, p_cpl)
            path = os.path.join(out_dir, f"freq_{res.scenario_id}.csv")
            try:
                _frequency_csv(path, config.grid, model.z, z_bus)
            except OSError as exc:
                raise OSError(f"writing {path}: {exc}") from exc
            res.artifacts["frequency_csv"] = path
            written.append(path)
        if write_traces and res.trace is not None:
            path = os.path.join(out_dir, f"trace_{res.scenario_id}.csv")
            try:
                trace_to_csv(res.trace, path)
            except OSError as exc:
                raise OSError(f"writing {path}: {exc}") from exc
            res.artifacts["trace_csv"] = path
            written.append(path)

    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for res in results:
            td = res.timedomain
            w.writerow(
                [
                    res.scenario_id,
                    res.droop.kind.value,
                    _fmt(res.droop.coefficient),
                    _fmt(res.power_multiple),
                    _fmt(res.line_multiple),
                    "" if res.lpf_hz is None else _fmt(res.lpf_hz),
                    res.converter_report.verdict if res.converter_report else "",
                    _bands_str(res.converter_report),
                    res.bus_report.verdict if res.bus_report else "",
                    _bands_str(res.bus_report),
                    "" if res.min_lpf is None else str(res.min_lpf.passive),
                    (
                        ""
                        if res.min_lpf is None or res.min_lpf.cutoff_hz is None
                        else _fmt(res.min_lpf.cutoff_hz)
                    ),
                    td.verdict if td else "",
                    _fmt(td.pkpk_ratio) if td else "",
                    _fmt(td.dominant_freq) if td else "",
                    res.error or "",
                ]
            )
    written.append(summary_path)
    for res in results:
        res.artifacts["summary_csv"] = summary_path

    text_path = os.path.join(out_dir, "summary.txt")
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(_text_summary(results, config))
    written.append(text_path)
    return written


def _text_summary(results: list[ScenarioResult], config: ScenarioConfig) -> str:
    lines = []
    lines.append("Droop microgrid passivity assessment")
    lines.append(
        f"rated power {_num(config.rated_power)} W, "
        f"line {_num(config.line.length)} m, "
        f"bus capacitance {_num(config.bus_capacitance)} F"
    )
    lines.append("")
    for res in results:
        lpf = "no LPF" if res.lpf_hz is None else f"{_num(res.lpf_hz)} Hz LPF"
        head = (
            f"{res.droop.kind.value} droop, P={_num(res.power_multiple)}x, "
            f"line {_num(res.line_multiple)}x, {lpf}"
        )
        if res.error is not None:
            lines.append(f"{head}: ERROR {res.error}")
            continue
        bus = res.bus_report.verdict if res.bus_report else "n/a"
        conv = res.converter_report.verdict if res.converter_report else "n/a"
        td = res.timedomain.verdict if res.timedomain else "n/a"
        need = ""
        if res.min_lpf is not None:
            if not res.min_lpf.passive:
                need = "; no candidate filter restores passivity"
            elif res.min_lpf.cutoff_hz is None:
                need = "; passive without any filter"
            else:
                need = (
                    "; lightest passivating filter "
                    f"{_num(res.min_lpf.cutoff_hz)} Hz"
                )
        lines.append(
            f"{head}: bus passivity {bus}, converter passivity above "
            f"{_num(DEFAULT_CONVERTER_THRESHOLD_HZ)} Hz {conv}, "
            f"time-domain {td}{need}"
        )
    lines.append("")
    return "\n".join(lines)
