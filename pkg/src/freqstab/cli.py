"""Batch command-line front end.

Subcommands
-----------
simulate   step-disturbance trajectory, metrics block, CSV + SVG
freqresp   disturbance response ratio / sensitivity / loop gain curves
modes      eigenvalues and damping ratios of open and closed loop
allocate   droop reallocation under a peak-|R_zd| cap
reproduce  run the four bundled studies and print the comparison table

Exit codes: 0 success, 1 validation failure, 2 numerical failure,
3 allocation did not converge.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import allocate as allocate_mod
from . import freqdom, modal, report, timesim
from .linalg import EigenConvergenceError
from .linearize import close_loop, linearize
from .scenario import ScenarioError, load_bundled_scenario, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_NOT_CONVERGED = 3

BUNDLED = ("high_inertia", "low_inertia", "high_droop_bus3", "mitigated_allocation")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (freqdom.SingularFrequencyError, EigenConvergenceError,
            FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="freqstab",
        description="Locational screening of fast frequency reserves on "
                    "linearized multi-machine grid models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True,
                           help="scenario file path, or a bundled name "
                                f"({', '.join(BUNDLED)})")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", choices=("csv", "svg", "both"), default="both",
                       help="csv: data only; svg/both: figures plus the "
                            "underlying data (figures never ship without CSV)")

    p = sub.add_parser("simulate", help="step-disturbance trajectory and metrics")
    common(p)
    p.add_argument("--horizon", type=float, default=None, help="horizon [s]")
    p.add_argument("--dt", type=float, default=None, help="integration step [s]")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("freqresp", help="frequency-domain screening curves")
    common(p)
    _grid_flags(p)
    p.set_defaults(func=cmd_freqresp)

    p = sub.add_parser("modes", help="eigenvalues and damping ratios")
    common(p)
    p.add_argument("--dump-matrices", action="store_true",
                   help="also write the labeled state-space matrices as CSV")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("allocate", help="droop reallocation under a |R_zd| cap")
    common(p)
    p.add_argument("--cap", type=float, default=1.35,
                   help="maximum allowed per-controller peak |R_zd|")
    p.add_argument("--step", type=float, default=0.01,
                   help="share moved per iteration (fraction of total droop)")
    p.add_argument("--buses", type=int, nargs="+", default=None,
                   help="candidate buses (default: all IBR buses)")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("reproduce", help="run the bundled study suite")
    common(p, scenario=False)
    p.set_defaults(func=cmd_reproduce)
    return parser


def _grid_flags(p):
    p.add_argument("--omega-min", type=float, default=None)
    p.add_argument("--omega-max", type=float, default=None)
    p.add_argument("--omega-per-decade", type=int, default=None)


def _load(arg):
    path = Path(arg)
    if path.exists():
        return load_scenario(path)
    if arg in BUNDLED or arg.replace(".scn", "") in BUNDLED:
        return load_bundled_scenario(arg)
    raise ScenarioError(f"scenario file {arg!r} not found")


def _grid(scenario, args):
    study = scenario.study
    omega_min = args.omega_min if getattr(args, "omega_min", None) else study.omega_min
    omega_max = args.omega_max if getattr(args, "omega_max", None) else study.omega_max
    ppd = args.omega_per_decade if getattr(args, "omega_per_decade", None) \
        else study.points_per_decade
    if not omega_min < omega_max:
        raise ValueError("need omega_min < omega_max")
    return freqdom.log_grid(omega_min, omega_max, ppd)


def _want(args, kind):
    # data files are the contract and are always written; the flag only
    # decides whether figures are rendered next to them
    if kind == "csv":
        return True
    return args.format in ("svg", "both")


def cmd_simulate(args):
    scenario = _load(args.scenario)
    if not scenario.disturbances:
        raise ScenarioError(f"{scenario.name}: no disturbance to simulate")
    cl = close_loop(linearize(scenario), scenario.ibr_controllers)
    trajectory = timesim.step_response(cl, scenario.disturbances[0], scenario,
                                       horizon_s=args.horizon, dt_s=args.dt)
    m = timesim.metrics(trajectory)
    out = Path(args.out)
    if _want(args, "csv"):
        report.trajectory_csv(out / f"{scenario.name}_trajectory.csv", trajectory)
    if _want(args, "svg"):
        report.trajectory_figure(out / f"{scenario.name}_trajectory.svg", trajectory,
                                 title=f"{scenario.name}: step response")
    print(_metrics_block(scenario, m, trajectory))
    return EXIT_OK


def _metrics_block(scenario, m, trajectory):
    osc = m.dominant_oscillation
    lines = [
        f"scenario:        {scenario.name}",
        f"disturbance:     {scenario.disturbances[0].magnitude_mw:g} MW at "
        f"bus {scenario.disturbances[0].bus}",
        f"nadir:           {m.nadir_hz:.4f} Hz at t = {m.nadir_time_s:.2f} s",
        f"rocof (0.5 s):   {m.rocof_hz_per_s:.4f} Hz/s",
        f"rocof (t=0+):    {m.rocof_initial_hz_per_s:.4f} Hz/s",
        f"steady state:    {m.steady_state_hz:.4f} Hz",
        f"integrator vs expm checkpoints: {trajectory.integration_check_error:.3e}",
    ]
    if osc is None:
        lines.append("oscillation:     none detected")
    else:
        lines.append(f"oscillation:     {osc.frequency_hz:.3f} Hz, amplitude "
                     f"{osc.amplitude_hz * 1e3:.2f} mHz, {osc.trend}")
    return "\n".join(lines)


def cmd_freqresp(args):
    scenario = _load(args.scenario)
    omega = _grid(scenario, args)
    model = linearize(scenario)
    controllers = scenario.ibr_controllers
    out = Path(args.out)
    curves = []

    r_full = freqdom.disturbance_response_ratio(model, controllers, omega)
    curves.append(("R_zd (all loops)", f"{scenario.name}_rzd", r_full))
    active = [c for c in controllers if c.droop_gain > 0]
    if len(active) > 1:
        for ctl in active:
            r_k = freqdom.disturbance_response_ratio(model, controllers, omega,
                                                     probe_bus=ctl.bus)
            curves.append((f"R_zd^{ctl.bus}", f"{scenario.name}_rzd_bus{ctl.bus}", r_k))
    if len(active) == 1:
        s_curve = freqdom.sensitivity(model, active, omega)
        l_curve = freqdom.loop_gain(model, active, omega)
        curves.append((f"S (bus {active[0].bus})", f"{scenario.name}_sensitivity", s_curve))
        curves.append((f"L (bus {active[0].bus})", f"{scenario.name}_loopgain", l_curve))
        dist, at = freqdom.nyquist_margin(model, active, omega)
        print(f"nyquist margin:  min |1 + L| = {dist:.4f} at {at:.3f} rad/s")

    if _want(args, "csv"):
        for _, stem, curve in curves:
            report.curve_csv(out / f"{stem}.csv", curve)
    if _want(args, "svg"):
        report.magnitude_figure(out / f"{scenario.name}_freqresp.svg",
                                [(label, c) for label, _, c in curves],
                                title=f"{scenario.name}: frequency response")
    wc = freqdom.crossover_frequency(r_full)
    w_pk, m_pk = freqdom.peak(r_full)
    print(f"R_zd crossover:  {'none' if wc is None else f'{wc:.4f} rad/s'}")
    print(f"R_zd peak:       {m_pk:.4f} at {w_pk:.4f} rad/s")
    return EXIT_OK


def cmd_modes(args):
    scenario = _load(args.scenario)
    model = linearize(scenario)
    cl = close_loop(model, scenario.ibr_controllers)
    open_set = modal.eigenvalues(model.a)
    closed_set = modal.eigenvalues(cl.a)
    out = Path(args.out)
    if _want(args, "csv"):
        report.modes_csv(out / f"{scenario.name}_modes_open.csv", open_set)
        report.modes_csv(out / f"{scenario.name}_modes_closed.csv", closed_set)
    if args.dump_matrices:
        report.model_matrices_csv(out, model, f"{scenario.name}_open")
        report.model_matrices_csv(out, cl, f"{scenario.name}_closed")
    if _want(args, "svg"):
        report.modes_figure(out / f"{scenario.name}_modes.svg", closed_set,
                            title=f"{scenario.name}: closed-loop spectrum")
    for label, ms in (("open loop", open_set), ("closed loop", closed_set)):
        worst = ms.worst_mode()
        print(f"{label}: {len(ms.modes)} eigenvalues, stable={ms.stable}, "
              f"min zeta={ms.min_damping():.4f} at {worst.frequency_hz:.3f} Hz, "
              f"residual={ms.max_residual:.2e}")
    return EXIT_OK


def cmd_allocate(args):
    scenario = _load(args.scenario)
    buses = tuple(args.buses) if args.buses else tuple(
        c.bus for c in scenario.ibr_controllers)
    total = sum(c.droop_gain for c in scenario.ibr_controllers
                if c.bus in buses) / scenario.total_droop_gain()
    problem = allocate_mod.AllocationProblem(
        scenario=scenario, candidate_buses=buses, total_ibr_share=total,
        cap=args.cap, step=args.step)
    result = allocate_mod.allocate_droop(problem)
    out = Path(args.out)
    if _want(args, "csv"):
        report.allocation_trace_csv(out / f"{scenario.name}_allocation_trace.csv",
                                    result, buses)
    print(_allocation_block(result, buses))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _allocation_block(result, buses):
    lines = [f"converged:       {result.converged} after {result.iterations} moves"]
    for b in buses:
        lines.append(f"bus {b}: share {result.shares[b]:.4f}, peak |R_zd| "
                     f"{result.peaks_before[b]:.4f} -> {result.peaks_after[b]:.4f}")
    lines.append(f"min damping:     {result.min_zeta_before:.4f} -> "
                 f"{result.min_zeta_after:.4f}")
    if result.diagnostics:
        lines.append(f"diagnostics:     {result.diagnostics}")
    return "\n".join(lines)


def cmd_reproduce(args):
    out = Path(args.out)
    checks = []
    summary = ["bundled study suite", "==================="]

    placements = {}
    for name in ("high_inertia", "low_inertia"):
        scenario = _load(name)
        ibr_total = sum(c.droop_gain for c in scenario.ibr_controllers)
        for bus in (1, 3):
            variant = scenario.with_ibr_gains(
                {1: ibr_total if bus == 1 else 0.0,
                 3: ibr_total if bus == 3 else 0.0})
            variant = replace(variant, name=f"{name}_ibr_bus{bus}")
            model = linearize(variant)
            cl = close_loop(model, variant.ibr_controllers)
            trajectory = timesim.step_response(cl, variant.disturbances[0], variant)
            m = timesim.metrics(trajectory)
            omega = freqdom.default_grid(variant.study)
            r_curve = freqdom.disturbance_response_ratio(
                model, variant.ibr_controllers, omega)
            wc = freqdom.crossover_frequency(r_curve)
            w_pk, m_pk = freqdom.peak(r_curve)
            placements[(name, bus)] = dict(nadir=m.nadir_hz, rocof=m.rocof_hz_per_s,
                                           rocof0=m.rocof_initial_hz_per_s,
                                           wc=wc, peak=m_pk)
            if _want(args, "csv"):
                report.trajectory_csv(out / name / f"trajectory_ibr_bus{bus}.csv",
                                      trajectory)
                report.curve_csv(out / name / f"rzd_ibr_bus{bus}.csv", r_curve)
            if _want(args, "svg"):
                report.trajectory_figure(out / name / f"trajectory_ibr_bus{bus}.svg",
                                         trajectory, title=variant.name)
                report.magnitude_figure(out / name / f"rzd_ibr_bus{bus}.svg",
                                        [("R_zd", r_curve)], title=variant.name)
        a, b = placements[(name, 1)], placements[(name, 3)]
        fmt_wc = lambda v: "none" if v is None else f"{v:.3f} rad/s"
        summary += [
            "",
            f"{name} (980 MW at bus 2, 40 % IBR droop)",
            f"  reserves at bus 1: nadir {a['nadir']:.4f} Hz, crossover "
            f"{fmt_wc(a['wc'])}, peak |R_zd| {a['peak']:.3f}",
            f"  reserves at bus 3: nadir {b['nadir']:.4f} Hz, crossover "
            f"{fmt_wc(b['wc'])}, peak |R_zd| {b['peak']:.3f}",
            f"  initial RoCoF: {a['rocof0']:.4f} / {b['rocof0']:.4f} Hz/s",
        ]
        checks.append((f"{name}: nadir(bus 1) > nadir(bus 3)",
                       a["nadir"] > b["nadir"]))
        checks.append((f"{name}: crossover(bus 1) > crossover(bus 3)",
                       a["wc"] is not None and b["wc"] is not None and a["wc"] > b["wc"]))

    gap_high = placements[("high_inertia", 1)]["nadir"] - placements[("high_inertia", 3)]["nadir"]
    gap_low = placements[("low_inertia", 1)]["nadir"] - placements[("low_inertia", 3)]["nadir"]
    summary.append("")
    summary.append(f"locational nadir gap: high {1e3 * gap_high:+.1f} mHz, "
                   f"low {1e3 * gap_low:+.1f} mHz")
    checks.append(("nadir gap widens as inertia drops", gap_low > gap_high))

    scenario = _load("high_droop_bus3")
    model = linearize(scenario)
    cl = close_loop(model, scenario.ibr_controllers)
    modes = modal.eigenvalues(cl.a)
    omega = freqdom.default_grid(scenario.study)
    r_curve = freqdom.disturbance_response_ratio(model, scenario.ibr_controllers, omega)
    w_pk, m_pk = freqdom.peak(r_curve)
    trajectory = timesim.step_response(cl, scenario.disturbances[0], scenario)
    m = timesim.metrics(trajectory)
    if _want(args, "csv"):
        report.trajectory_csv(out / "high_droop_bus3" / "trajectory.csv", trajectory)
        report.curve_csv(out / "high_droop_bus3" / "rzd.csv", r_curve)
        report.modes_csv(out / "high_droop_bus3" / "modes_closed.csv", modes)
    if _want(args, "svg"):
        report.trajectory_figure(out / "high_droop_bus3" / "trajectory.svg",
                                 trajectory, title="high_droop_bus3")
        report.magnitude_figure(out / "high_droop_bus3" / "rzd.svg",
                                [("R_zd", r_curve)], title="high_droop_bus3")
    osc = m.dominant_oscillation
    summary += [
        "",
        "high_droop_bus3 (560 MW at bus 2, 80 % IBR droop at bus 3)",
        f"  min damping ratio: {modes.min_damping():.4f}",
        f"  peak |R_zd| {m_pk:.3f} at {w_pk:.3f} rad/s ({w_pk / (2 * np.pi):.3f} Hz)",
        f"  oscillation: " + ("none" if osc is None else
                              f"{osc.frequency_hz:.3f} Hz ({osc.trend})"),
    ]
    checks.append(("high_droop_bus3: peak |R_zd| amplifies disturbances (> 1.35)",
                   m_pk > 1.35))

    scenario = _load("mitigated_allocation")
    problem = allocate_mod.AllocationProblem(
        scenario=scenario, candidate_buses=(1, 3), total_ibr_share=0.8)
    result = allocate_mod.allocate_droop(problem)
    if _want(args, "csv"):
        report.allocation_trace_csv(out / "mitigated_allocation" / "trace.csv",
                                    result, (1, 3))
    summary += [
        "",
        "mitigated_allocation (cap 1.35 on per-controller peak |R_zd|)",
        f"  converged: {result.converged} in {result.iterations} moves",
        f"  shares: bus 1 {result.shares[1]:.2f}, bus 3 {result.shares[3]:.2f}",
        f"  peaks: bus 1 {result.peaks_after[1]:.3f}, bus 3 {result.peaks_after[3]:.3f}",
        f"  min damping: {result.min_zeta_before:.4f} -> {result.min_zeta_after:.4f}",
    ]
    checks.append(("allocation converged with peaks <= 1.35",
                   result.converged
                   and all(p <= 1.35 for p in result.peaks_after.values())))
    checks.append(("allocation favors bus 1 over bus 3",
                   result.shares[1] > result.shares[3]))
    checks.append(("allocation improves min damping",
                   result.min_zeta_after > result.min_zeta_before))

    summary += ["", "checks", "------"]
    summary += [f"  [{'PASS' if ok else 'FAIL'}] {label}" for label, ok in checks]
    text = "\n".join(summary)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reproduce_summary.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
