"""Command-line surface.

Subcommands: assess (full scenario matrix), impedance (analytic frequency
responses for one scenario), simulate (time-domain trace for one scenario),
verify (analytic-vs-measured impedance cross-check).  Exit codes: 0 when
every requested computation completed (stability verdicts are results, not
errors), 1 on configuration problems, 2 on internal numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import math
import os
import sys

import numpy as np

from .control import design_controllers
from .impedance import (
    DEFAULT_CONVERTER_THRESHOLD_HZ,
    analytic_output_impedance,
    converter_passivity_report,
)
from .network import system_passivity_check
from .passivity import FrequencyGrid
from .plant import DroopKind, solve_operating_point
from .scenarios import (
    ParseError,
    ScenarioConfig,
    ValidationError,
    _cell_models,
    _frequency_csv,
    default_config,
    emit_reports,
    load_config,
    run_scenario,
    run_scenario_matrix,
    scenario_id,
    _text_summary,
)
from .sim import (
    converter_injection_setup,
    measure_impedance_injection,
    snapped_frequency,
    trace_to_csv,
)

__all__ = ["main"]


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config path (omit for defaults)")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument(
        "--grid",
        help="frequency grid override as fmin,fmax,points_per_decade",
    )


def _add_selection(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--droop",
        choices=[k.value for k in DroopKind],
        default=DroopKind.VI.value,
        help="droop kind for the single scenario",
    )
    p.add_argument("--power-multiple", type=float, default=1.0)
    p.add_argument("--line-multiple", type=float, default=1.0)
    p.add_argument(
        "--lpf",
        default="none",
        help="droop feedback LPF cutoff in Hz, or 'none'",
    )


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="droopstab",
        description=(
            "Passivity-based stability assessment of droop-controlled DC "
            "microgrids with constant power loads"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_assess = sub.add_parser(
        "assess", help="run the full scenario matrix and write all reports"
    )
    _add_common(p_assess)

    p_imp = sub.add_parser(
        "impedance", help="analytic converter and bus impedance for one scenario"
    )
    _add_common(p_imp)
    _add_selection(p_imp)

    p_sim = sub.add_parser(
        "simulate", help="time-domain step trace for one scenario"
    )
    _add_common(p_sim)
    _add_selection(p_sim)

    p_ver = sub.add_parser(
        "verify",
        help="cross-check analytic impedance against injection measurement",
    )
    _add_common(p_ver)
    p_ver.add_argument(
        "--points", type=int, default=20, help="log-spaced frequencies"
    )
    p_ver.add_argument("--fmin", type=float, default=1.0)
    p_ver.add_argument("--fmax", type=float, default=1000.0)
    p_ver.add_argument(
        "--droop",
        choices=[k.value for k in DroopKind],
        help="restrict to one droop kind",
    )
    return parser


def _load(args) -> ScenarioConfig:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = default_config()
    if args.grid:
        parts = args.grid.split(",")
        if len(parts) != 3:
            raise ValidationError("--grid expects fmin,fmax,points_per_decade")
        try:
            grid = FrequencyGrid(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise ValidationError(f"--grid: {exc}") from exc
        config = type(config)(
            **{**_config_kwargs(config), "grid": grid}
        )
    return config


def _config_kwargs(config: ScenarioConfig) -> dict:
    return {
        name: getattr(config, name)
        for name in (
            "converter", "droops", "line", "rated_power", "cpl_multiples",
            "lpf_candidates", "line_multiples", "loops", "grid", "sim",
            "c_bus", "cpl_undervoltage_fraction", "outputs",
        )
    }


def _select_droop(config: ScenarioConfig, kind_str: str):
    kind = DroopKind(kind_str)
    for droop in config.droops:
        if droop.kind is kind:
            return droop
    raise ValidationError(f"droop kind {kind_str} not present in config")


def _parse_lpf(text: str) -> float | None:
    if text.lower() in ("none", "off", ""):
        return None
    value = float(text)
    if value <= 0.0:
        raise ValidationError("--lpf must be positive or 'none'")
    return value


def _cmd_assess(args) -> int:
    config = _load(args)
    out_dir = args.out or config.outputs
    results = run_scenario_matrix(config, jobs=args.jobs)
    emit_reports(results, out_dir, config)
    sys.stdout.write(_text_summary(results, config))
    return 0


def _cmd_impedance(args) -> int:
    config = _load(args)
    out_dir = args.out or config.outputs
    droop = _select_droop(config, args.droop).with_lpf(_parse_lpf(args.lpf))
    line = config.line.scaled(args.line_multiple)
    p_cpl = args.power_multiple * config.rated_power
    _, _, model, z_bus = _cell_models(config, droop, line, p_cpl)
    conv_report = converter_passivity_report(
        model, config.grid, DEFAULT_CONVERTER_THRESHOLD_HZ
    )
    bus_report = system_passivity_check(z_bus, config.grid)
    os.makedirs(out_dir, exist_ok=True)
    sid = scenario_id(droop, args.power_multiple, args.line_multiple, droop.lpf_cutoff)
    path = os.path.join(out_dir, f"freq_{sid}.csv")
    _frequency_csv(path, config.grid, model.z, z_bus)
    sys.stdout.write(
        f"{sid}: converter passivity above "
        f"{DEFAULT_CONVERTER_THRESHOLD_HZ:g} Hz {conv_report.verdict}, "
        f"bus passivity {bus_report.verdict}\n{path}\n"
    )
    return 0


def _cmd_simulate(args) -> int:
    config = _load(args)
    out_dir = args.out or config.outputs
    droop = _select_droop(config, args.droop)
    result = run_scenario(
        config,
        droop,
        args.power_multiple,
        args.line_multiple,
        _parse_lpf(args.lpf),
    )
    if result.error is not None:
        raise RuntimeError(f"scenario failed: {result.error}")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"trace_{result.scenario_id}.csv")
    trace_to_csv(result.trace, path)
    td = result.timedomain
    sys.stdout.write(
        f"{result.scenario_id}: time-domain {td.verdict} "
        f"(pkpk {td.pkpk_ratio:.3%}, dominant {td.dominant_freq:.4g} Hz)\n"
        f"{path}\n"
    )
    return 0


def _verify_case(args_tuple):
    config, droop, lpf, frequencies = args_tuple
    droop_case = droop.with_lpf(lpf)
    op = solve_operating_point(config.converter, droop_case, config.rated_power)
    controllers = design_controllers(config.converter, op, config.loops)
    model = analytic_output_impedance(
        config.converter, droop_case, op, config.loops, controllers=controllers
    )
    setup = converter_injection_setup(
        config.converter, droop_case, config.loops, config.rated_power,
        controllers=controllers,
    )
    rows = []
    for f_hz in frequencies:
        # The injection realizes whole timesteps per period; compare the
        # analytic model at the frequency actually excited.
        f_snap = snapped_frequency(float(f_hz), config.sim.dt)
        z_ref = model.z.at(f_snap)
        try:
            z_meas = measure_impedance_injection(setup, f_hz, dt=config.sim.dt)
            err_mag = abs(abs(z_meas) - abs(z_ref)) / abs(z_ref)
            err_ph = abs(
                math.degrees(
                    math.atan2(z_meas.imag, z_meas.real)
                    - math.atan2(z_ref.imag, z_ref.real)
                )
            )
            err_ph = min(err_ph, 360.0 - err_ph)
            ok = err_mag <= 0.05 and err_ph <= 5.0
            rows.append(
                (
                    droop_case.kind.value,
                    "" if lpf is None else format(lpf, "g"),
                    f_snap, z_ref, z_meas, err_mag, err_ph,
                    "PASS" if ok else "FAIL",
                )
            )
        except Exception as exc:  # noqa: BLE001 - flagged per point
            rows.append(
                (
                    droop_case.kind.value,
                    "" if lpf is None else format(lpf, "g"),
                    f_snap, z_ref, None, math.nan, math.nan,
                    f"ERROR:{type(exc).__name__}",
                )
            )
    return rows


def _cmd_verify(args) -> int:
    config = _load(args)
    out_dir = args.out or config.outputs
    frequencies = np.logspace(
        math.log10(args.fmin), math.log10(args.fmax), args.points
    )
    droops = [
        d for d in config.droops
        if args.droop is None or d.kind.value == args.droop
    ]
    if not droops:
        raise ValidationError("no droop kinds selected")
    cases = [
        (config, droop, lpf, frequencies)
        for droop in droops
        for lpf in config.lpf_candidates
    ]
    if args.jobs > 1 and len(cases) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            all_rows = list(pool.map(_verify_case, cases))
    else:
        all_rows = [_verify_case(c) for c in cases]

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "verify.csv")
    worst_mag = 0.0
    worst_ph = 0.0
    n_fail = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            [
                "droop_kind", "lpf_hz", "f_hz",
                "analytic_re", "analytic_im", "measured_re", "measured_im",
                "mag_err_fraction", "phase_err_deg", "status",
            ]
        )
        for rows in all_rows:
            for kind, lpf, f_hz, z_ref, z_meas, err_mag, err_ph, status in rows:
                w.writerow(
                    [
                        kind, lpf, format(f_hz, ".12g"),
                        format(z_ref.real, ".12g"), format(z_ref.imag, ".12g"),
                        "" if z_meas is None else format(z_meas.real, ".12g"),
                        "" if z_meas is None else format(z_meas.imag, ".12g"),
                        "" if math.isnan(err_mag) else format(err_mag, ".6g"),
                        "" if math.isnan(err_ph) else format(err_ph, ".6g"),
                        status,
                    ]
                )
                if status != "PASS":
                    n_fail += 1
                if not math.isnan(err_mag):
                    worst_mag = max(worst_mag, err_mag)
                    worst_ph = max(worst_ph, err_ph)
    total = sum(len(rows) for rows in all_rows)
    sys.stdout.write(
        f"verify: {total - n_fail}/{total} points within 5% magnitude / "
        f"5 deg phase (worst {worst_mag:.2%}, {worst_ph:.2f} deg)\n{path}\n"
    )
    return 0


_COMMANDS = {
    "assess": _cmd_assess,
    "impedance": _cmd_impedance,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ValidationError, OSError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
