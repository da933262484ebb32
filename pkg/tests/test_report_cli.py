"""Output files and the command-line front end."""

import subprocess
import sys

import freqstab as fs
from freqstab import freqdom, report, timesim


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "freqstab.cli", *args],
                          capture_output=True, text=True)
    return proc


def test_csv_float_formatting(tmp_path):
    path = report.write_csv(tmp_path / "x.csv", ["a", "b"],
                            [(1.0, 0.5), (1e-12, 123456.789)])
    text = path.read_text()
    assert text == "a,b\n1,0.5\n1e-12,123456.789\n"


def test_trajectory_csv_columns(tmp_path, high_inertia):
    cl = fs.closed_loop(high_inertia)
    tr = timesim.step_response(cl, high_inertia.disturbances[0], high_inertia,
                               horizon_s=10.0, dt_s=0.01)
    path = report.trajectory_csv(tmp_path / "traj.csv", tr)
    header = path.read_text().splitlines()[0].split(",")
    assert header == ["t_s", "f_bus1_hz", "f_bus2_hz", "f_bus3_hz", "f_bus4_hz",
                      "f_bus5_hz", "f_coi_hz", "p_ibr_bus1_pu", "p_ibr_bus3_pu"]


def test_curve_csv_columns(tmp_path, high_inertia):
    m = fs.linearize(high_inertia)
    omega = freqdom.log_grid(0.1, 10.0, 10)
    r = fs.disturbance_response_ratio(m, high_inertia.ibr_controllers, omega)
    path = report.curve_csv(tmp_path / "rzd.csv", r)
    lines = path.read_text().splitlines()
    assert lines[0] == "omega_rad_s,re,im,mag,phase_deg"
    assert len(lines) == len(omega) + 1


def test_cli_simulate_writes_csv_and_svg(tmp_path):
    proc = run_cli("simulate", "--scenario", "high_inertia",
                   "--out", str(tmp_path), "--horizon", "12")
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "high_inertia_trajectory.csv").exists()
    assert (tmp_path / "high_inertia_trajectory.svg").exists()
    assert "nadir" in proc.stdout


def test_cli_freqresp_flags_and_outputs(tmp_path):
    proc = run_cli("freqresp", "--scenario", "high_droop_bus3",
                   "--out", str(tmp_path),
                   "--omega-min", "0.05", "--omega-max", "20",
                   "--omega-per-decade", "40")
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "high_droop_bus3_rzd.csv").exists()
    assert (tmp_path / "high_droop_bus3_sensitivity.csv").exists()
    assert (tmp_path / "high_droop_bus3_loopgain.csv").exists()
    assert (tmp_path / "high_droop_bus3_freqresp.svg").exists()
    assert "crossover" in proc.stdout

    # a figure-producing run always writes the underlying CSV too
    svg_only = tmp_path / "svgonly"
    proc = run_cli("freqresp", "--scenario", "high_droop_bus3",
                   "--out", str(svg_only), "--format", "svg")
    assert proc.returncode == 0
    assert (svg_only / "high_droop_bus3_freqresp.svg").exists()
    assert (svg_only / "high_droop_bus3_rzd.csv").exists()

    # csv mode emits no figures
    csv_only = tmp_path / "csvonly"
    proc = run_cli("freqresp", "--scenario", "high_droop_bus3",
                   "--out", str(csv_only), "--format", "csv")
    assert proc.returncode == 0
    assert (csv_only / "high_droop_bus3_rzd.csv").exists()
    assert not (csv_only / "high_droop_bus3_freqresp.svg").exists()


def test_cli_modes(tmp_path):
    proc = run_cli("modes", "--scenario", "low_inertia", "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    closed = tmp_path / "low_inertia_modes_closed.csv"
    assert closed.exists()
    assert closed.read_text().splitlines()[0] == "re,im,zeta,freq_hz,is_reference"
    assert "min zeta" in proc.stdout


def test_cli_validation_exit_code(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("buses: [{id: 1, kinetic_energy_gws: -1, rated_power_mw: 10}]\n",
                   encoding="utf-8")
    proc = run_cli("simulate", "--scenario", str(bad), "--out", str(tmp_path))
    assert proc.returncode == 1
    assert "validation error" in proc.stderr


def test_cli_allocate_not_converged_exit_code(tmp_path):
    proc = run_cli("allocate", "--scenario", "mitigated_allocation",
                   "--out", str(tmp_path), "--cap", "1.01", "--step", "0.05")
    assert proc.returncode == 3
    assert (tmp_path / "mitigated_allocation_allocation_trace.csv").exists()


def test_cli_allocate_converges(tmp_path):
    proc = run_cli("allocate", "--scenario", "mitigated_allocation",
                   "--out", str(tmp_path))
    assert proc.returncode == 0, proc.stderr
    assert "converged:       True" in proc.stdout


def test_trajectory_figure_written_without_display(tmp_path, high_inertia):
    cl = fs.closed_loop(high_inertia)
    tr = timesim.step_response(cl, high_inertia.disturbances[0], high_inertia,
                               horizon_s=10.0, dt_s=0.01)
    path = report.trajectory_figure(tmp_path / "traj.svg", tr, title="t")
    assert path.stat().st_size > 0
    assert path.read_text().startswith("<?xml")
