"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -v -s tests/test_acceptance.py`` to see the per-criterion
lines.  Exact nadir values from the reference study are not reproducible
(the underlying generator/AVR data is not public), so the criteria are
property- and ordering-based with internal cross-oracle checks.
"""

import subprocess
import sys

import numpy as np
import pytest

import freqstab as fs
from freqstab import freqdom, modal, timesim
from freqstab.allocate import AllocationProblem, allocate_droop


def verdict(n, ok, detail):
    print(f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def locational(high_inertia, low_inertia):
    """Both reserve placements for both inertia levels: nadir, wc, rocof."""
    out = {}
    for name, scenario in (("high", high_inertia), ("low", low_inertia)):
        total = sum(c.droop_gain for c in scenario.ibr_controllers)
        for bus in (1, 3):
            scn = scenario.with_ibr_gains({1: total if bus == 1 else 0.0,
                                           3: total if bus == 3 else 0.0})
            model = fs.linearize(scn)
            cl = fs.close_loop(model, scn.ibr_controllers)
            tr = timesim.step_response(cl, scn.disturbances[0], scn)
            m = timesim.metrics(tr)
            omega = freqdom.default_grid(scn.study)
            r = fs.disturbance_response_ratio(model, scn.ibr_controllers, omega)
            out[(name, bus)] = {
                "nadir": m.nadir_hz,
                "rocof_initial": m.rocof_initial_hz_per_s,
                "wc": fs.crossover_frequency(r),
                "check_error": tr.integration_check_error,
            }
    return out


@pytest.fixture(scope="module")
def bus3_sweep(high_droop):
    gains = [0.0, 100.0, 200.0, 300.0, 400.0, 500.0]
    return modal.damping_sweep(high_droop, 3, gains)


def test_criterion_1_rzd_identity(all_scenarios):
    worst = 0.0
    for scenario in all_scenarios.values():
        model = fs.linearize(scenario)
        cl = fs.close_loop(model, scenario.ibr_controllers)
        omega = freqdom.default_grid(scenario.study)
        r = fs.disturbance_response_ratio(model, scenario.ibr_controllers, omega)
        t_zd = freqdom.evaluate_tf(cl, "d_bus2", "omega_coi", omega).values
        g_zd = freqdom.evaluate_tf(model, "d_bus2", "omega_coi", omega).values
        rel = np.max(np.abs(r.values - t_zd / g_zd) / np.abs(t_zd / g_zd))
        worst = max(worst, rel)
    verdict(1, worst < 1e-9,
            f"ratio formula vs closed-loop T_zd/G_zd, worst rel err {worst:.2e}")


def test_criterion_2_zero_controller_neutrality(high_inertia):
    zeroed = high_inertia.with_ibr_gains({1: 0.0, 3: 0.0})
    model = fs.linearize(zeroed)
    omega = freqdom.default_grid(zeroed.study)
    r = fs.disturbance_response_ratio(model, zeroed.ibr_controllers, omega)
    r_dev = float(np.max(np.abs(np.abs(r.values) - 1.0)))

    cl = fs.close_loop(model, zeroed.ibr_controllers)
    plain = fs.close_loop(model, [])
    tr_cl = timesim.step_response(cl, zeroed.disturbances[0], zeroed,
                                  horizon_s=20.0, check=False)
    tr_open = timesim.step_response(plain, zeroed.disturbances[0], zeroed,
                                    horizon_s=20.0, check=False)
    step_dev = float(np.max(np.abs(tr_cl.signals["f_coi_hz"]
                                   - tr_open.signals["f_coi_hz"]))) / 50.0
    ok = r_dev < 1e-10 and step_dev < 1e-12
    verdict(2, ok, f"|R|-1 max {r_dev:.2e}, closed-vs-open step {step_dev:.2e} pu")


def test_criterion_3_locational_ordering(locational):
    a, b = locational[("high", 1)], locational[("high", 3)]
    ok = a["nadir"] > b["nadir"] and a["wc"] > b["wc"]
    verdict(3, ok,
            f"high inertia: nadir {a['nadir']:.4f} > {b['nadir']:.4f} Hz and "
            f"crossover {a['wc']:.3f} > {b['wc']:.3f} rad/s with reserves at bus 1")


def test_criterion_4_inertia_interaction(locational):
    gap_high = locational[("high", 1)]["nadir"] - locational[("high", 3)]["nadir"]
    gap_low = locational[("low", 1)]["nadir"] - locational[("low", 3)]["nadir"]
    ok = gap_low > gap_high > 0.0
    verdict(4, ok, f"nadir gap low {1e3 * gap_low:.1f} mHz > "
                   f"high {1e3 * gap_high:.1f} mHz")


def test_criterion_5_rocof_invariance(locational, high_inertia, low_inertia):
    msgs = []
    ok = True
    for name, scenario in (("high", high_inertia), ("low", low_inertia)):
        r1 = locational[(name, 1)]["rocof_initial"]
        r3 = locational[(name, 3)]["rocof_initial"]
        d_pu = scenario.disturbances[0].magnitude_mw / scenario.s_base_mva
        analytic = -d_pu * scenario.f0_hz / \
            (2.0 * scenario.total_kinetic_energy_gws() * 1000.0 / scenario.s_base_mva)
        spread = abs(r1 - r3)
        rel = max(abs(r1 - analytic), abs(r3 - analytic)) / abs(analytic)
        ok = ok and spread < 1e-6 and rel < 1e-3
        msgs.append(f"{name}: spread {spread:.1e} Hz/s, vs analytic "
                    f"{analytic:.4f} rel {rel:.1e}")
    verdict(5, ok, "; ".join(msgs))


def test_criterion_6_oscillation_peak_coincidence(high_droop, bus3_sweep):
    crit = bus3_sweep.critical_gain
    assert crit is not None
    scn = high_droop.with_ibr_gains({3: 0.999 * crit})
    model = fs.linearize(scn)
    cl = fs.close_loop(model, scn.ibr_controllers)
    omega = freqdom.default_grid(scn.study)
    r = fs.disturbance_response_ratio(model, scn.ibr_controllers, omega)
    w_pk, _ = fs.peak(r)
    f_pk = w_pk / (2.0 * np.pi)

    horizon = 60.0
    tr = timesim.step_response(cl, scn.disturbances[0], scn, horizon_s=horizon)
    osc = timesim.metrics(tr).dominant_oscillation
    bin_hz = 1.0 / (timesim.OSCILLATION_FRACTION * horizon)
    ok = osc is not None and abs(osc.frequency_hz - f_pk) <= bin_hz
    verdict(6, ok,
            f"near-critical oscillation {osc.frequency_hz:.3f} Hz vs arg-max "
            f"|R_zd| {f_pk:.3f} Hz (bin {bin_hz:.3f} Hz)")


def test_criterion_7_destabilization_monotonicity(high_droop, bus3_sweep):
    zetas = np.array(bus3_sweep.min_zeta)
    crit = bus3_sweep.critical_gain
    monotone = bool(np.all(np.diff(zetas) < 0)) and zetas[0] > 0 > zetas[-1]

    agree = True
    for factor, expect_growing in ((0.8, False), (1.2, True)):
        scn = high_droop.with_ibr_gains({3: factor * crit})
        cl = fs.closed_loop(scn)
        stable = modal.eigenvalues(cl.a).stable
        tr = timesim.step_response(cl, scn.disturbances[0], scn)
        osc = timesim.metrics(tr).dominant_oscillation
        grows = osc is not None and osc.trend == "growing"
        agree = agree and (grows == expect_growing) and (stable != expect_growing)
    ok = monotone and crit is not None and agree
    verdict(7, ok,
            f"min zeta falls {zetas[0]:+.4f} -> {zetas[-1]:+.4f} through 0 at "
            f"gain {crit:.1f}; modal and trajectory verdicts agree on both sides")


def test_criterion_8_mitigation_efficacy(mitigated):
    problem = AllocationProblem(scenario=mitigated, candidate_buses=(1, 3),
                                total_ibr_share=0.8, cap=1.35, step=0.01)
    result = allocate_droop(problem)
    ok = (result.converged
          and all(p <= 1.35 for p in result.peaks_after.values())
          and result.shares[1] > result.shares[3]
          and result.min_zeta_after > result.min_zeta_before)
    verdict(8, ok,
            f"converged={result.converged}, peaks ({result.peaks_after[1]:.3f}, "
            f"{result.peaks_after[3]:.3f}) <= 1.35, shares bus1 "
            f"{result.shares[1]:.2f} > bus3 {result.shares[3]:.2f}, min zeta "
            f"{result.min_zeta_before:.4f} -> {result.min_zeta_after:.4f}")


def test_criterion_9_numerical_oracles(all_scenarios, high_inertia, high_droop):
    # integrator vs matrix exponential on every bundled scenario
    worst_int = 0.0
    for scenario in all_scenarios.values():
        cl = fs.closed_loop(scenario)
        tr = timesim.step_response(cl, scenario.disturbances[0], scenario)
        worst_int = max(worst_int, tr.integration_check_error)

    # eigen-solver residuals
    worst_res = 0.0
    for scenario in all_scenarios.values():
        cl = fs.closed_loop(scenario)
        worst_res = max(worst_res, modal.eigenvalues(cl.a).max_residual)

    # steady state vs DC transfer
    cl = fs.closed_loop(high_inertia)
    tr = timesim.step_response(cl, high_inertia.disturbances[0], high_inertia,
                               horizon_s=360.0, dt_s=5e-3)
    m = timesim.metrics(tr)
    t_dc = freqdom.evaluate_tf(cl, "d_bus2", "omega_coi", [1e-7]).values[0]
    d_pu = high_inertia.disturbances[0].magnitude_mw / high_inertia.s_base_mva
    ss_err = abs(m.steady_state_hz - 50.0 * (1.0 + (t_dc * d_pu).real))

    # eigen damping vs log decrement on the worst bundled mode
    worst = modal.eigenvalues(fs.closed_loop(high_droop).a).worst_mode()
    sigma, omega_d = worst.eigenvalue.real, abs(worst.eigenvalue.imag)
    a2 = np.array([[sigma, omega_d], [-omega_d, sigma]])
    dt = 1e-3
    x = np.array([1.0, 0.0])
    xs = [1.0]
    for _ in range(int(12 * 2 * np.pi / omega_d / dt)):
        k1 = a2 @ x
        k2 = a2 @ (x + 0.5 * dt * k1)
        k3 = a2 @ (x + 0.5 * dt * k2)
        k4 = a2 @ (x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        xs.append(x[0])
    sig = np.array(xs)
    peaks = [i for i in range(1, len(sig) - 1)
             if sig[i] > sig[i - 1] and sig[i] > sig[i + 1]]
    delta = np.log(sig[peaks[0]] / sig[peaks[-1]]) / (len(peaks) - 1)
    zeta_ld = delta / np.sqrt(4 * np.pi ** 2 + delta ** 2)
    ld_rel = abs(zeta_ld - worst.damping_ratio) / abs(worst.damping_ratio)

    ok = worst_int < 1e-6 and worst_res < 1e-8 and ss_err < 1e-4 and ld_rel < 0.05
    verdict(9, ok,
            f"integrator {worst_int:.1e} < 1e-6 pu, eig residual {worst_res:.1e} "
            f"< 1e-8, steady state {ss_err:.1e} < 1e-4 Hz, log-decrement "
            f"{100 * ld_rel:.1f}% < 5%")


def test_criterion_10_reproduce_determinism(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        proc = subprocess.run(
            [sys.executable, "-m", "freqstab.cli", "reproduce",
             "--out", str(out), "--format", "csv"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    files_a = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.csv"))
    files_b = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*.csv"))
    identical = files_a == files_b and len(files_a) > 0 and all(
        (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files_a)
    verdict(10, identical,
            f"{len(files_a)} CSV files byte-identical across repeated runs")
