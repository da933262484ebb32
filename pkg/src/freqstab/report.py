"""Study outputs: delimited data files and the matplotlib figures that
accompany them.

CSV files are the data contract; figures are rendered next to them from
the same arrays.  Float formatting is fixed (shortest round-trip via
``repr``-style ``%.12g``) and rows are emitted in deterministic order so
repeated runs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "freqstab"   # deterministic element ids
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FLOAT_FMT = "%.12g"


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return FLOAT_FMT % value
    return str(value)


def write_csv(path, header, rows):
    """Write rows of numbers/strings as CSV with deterministic formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def trajectory_csv(path, trajectory):
    """Columns: t_s, f_bus<i>_hz ..., f_coi_hz, p_ibr_bus<k>_pu ..."""
    freq_cols = sorted(trajectory.frequency_columns(),
                       key=lambda c: int(c.split("bus")[1].split("_")[0]))
    ibr_cols = sorted(trajectory.ibr_columns(),
                      key=lambda c: int(c.split("bus")[1].split("_")[0]))
    header = ["t_s"] + freq_cols + ["f_coi_hz"] + ibr_cols
    columns = [trajectory.t] + [trajectory.signals[c] for c in freq_cols] \
        + [trajectory.signals["f_coi_hz"]] + [trajectory.signals[c] for c in ibr_cols]
    rows = zip(*[list(map(float, col)) for col in columns])
    return write_csv(path, header, rows)


def curve_csv(path, curve):
    """Columns: omega_rad_s, re, im, mag, phase_deg."""
    header = ["omega_rad_s", "re", "im", "mag", "phase_deg"]
    rows = [
        (float(w), float(v.real), float(v.imag), float(abs(v)), float(p))
        for w, v, p in zip(curve.omega, curve.values, curve.phase_deg)
    ]
    return write_csv(path, header, rows)


def matrix_csv(path, matrix, row_labels, col_labels):
    """One model matrix with a labeled header row and label column."""
    header = [""] + list(col_labels)
    rows = [[label] + [float(v) for v in row]
            for label, row in zip(row_labels, matrix)]
    return write_csv(path, header, rows)


def model_matrices_csv(out_dir, model, prefix):
    """Dump A, B_u, B_d, C_y, C_z of a model as labeled CSV files."""
    out_dir = Path(out_dir)
    x = model.state_labels
    written = [
        matrix_csv(out_dir / f"{prefix}_a.csv", model.a, x, x),
        matrix_csv(out_dir / f"{prefix}_b_u.csv", model.b_u, x, model.input_labels),
        matrix_csv(out_dir / f"{prefix}_b_d.csv", model.b_d, x, model.disturbance_labels),
        matrix_csv(out_dir / f"{prefix}_c_y.csv", model.c_y, model.output_labels, x),
        matrix_csv(out_dir / f"{prefix}_c_z.csv", model.c_z, model.performance_labels, x),
    ]
    return written


def modes_csv(path, mode_set):
    """Columns: re, im, zeta, freq_hz, is_reference."""
    header = ["re", "im", "zeta", "freq_hz", "is_reference"]
    rows = [
        (float(m.eigenvalue.real), float(m.eigenvalue.imag),
         float(m.damping_ratio), float(m.frequency_hz), m.is_reference)
        for m in mode_set.modes
    ]
    return write_csv(path, header, rows)


def allocation_trace_csv(path, result, buses):
    """Columns: iter, share_bus<k>..., peak_bus<k>..., min_zeta."""
    buses = list(buses)
    header = ["iter"] + [f"share_bus{b}" for b in buses] \
        + [f"peak_bus{b}" for b in buses] + ["min_zeta"]
    rows = [
        [it] + [float(shares[b]) for b in buses] + [float(peaks[b]) for b in buses]
        + [float(zeta)]
        for it, shares, peaks, zeta in result.trace
    ]
    return write_csv(path, header, rows)


def _new_figure():
    fig, ax = plt.subplots(figsize=(7.0, 4.2), dpi=100)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def trajectory_figure(path, trajectory, title=""):
    """Bus and COI frequencies against time."""
    fig, ax = _new_figure()
    for col in sorted(trajectory.frequency_columns(),
                      key=lambda c: int(c.split("bus")[1].split("_")[0])):
        label = col.replace("f_bus", "bus ").replace("_hz", "")
        ax.plot(trajectory.t, trajectory.signals[col], lw=0.8, label=label)
    ax.plot(trajectory.t, trajectory.signals["f_coi_hz"], "k", lw=1.8, label="COI")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("frequency [Hz]")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8, ncol=2)
    return _save(fig, path)


def magnitude_figure(path, curves, title="", unit_line=True):
    """Log-log magnitude plot of one or more curves, with the |R| = 1 line."""
    fig, ax = _new_figure()
    for label, curve in curves:
        ax.loglog(curve.omega, curve.magnitude, lw=1.4, label=label)
    if unit_line:
        ax.axhline(1.0, color="k", ls="--", lw=0.8, label="|R| = 1")
    ax.set_xlabel("angular frequency [rad/s]")
    ax.set_ylabel("magnitude")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def modes_figure(path, mode_set, title=""):
    """s-plane scatter of the spectrum; reference mode marked."""
    fig, ax = _new_figure()
    re = [m.eigenvalue.real for m in mode_set.modes if not m.is_reference]
    im = [m.eigenvalue.imag for m in mode_set.modes if not m.is_reference]
    ax.scatter(re, im, s=18, marker="x", label="modes")
    if mode_set.reference_mode is not None:
        ax.scatter([mode_set.reference_mode.eigenvalue.real],
                   [mode_set.reference_mode.eigenvalue.imag],
                   s=40, marker="o", facecolors="none", edgecolors="r",
                   label="reference")
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("Re [1/s]")
    ax.set_ylabel("Im [rad/s]")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)
