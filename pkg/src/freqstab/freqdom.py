"""Frequency-domain screening: sensitivity, loop gain, Nyquist distance,
and the disturbance response ratio.

All transfer functions are sampled on an angular-frequency grid by a
complex linear solve of ``(jw I - A) X = B`` per grid point (never an
explicit inverse).  The central metric is the disturbance response ratio

    R_zd(jw) = 1 - G_zu C (1 + G_yu C)^{-1} G_yd / G_zd

i.e. the ratio of the closed-loop to the open-loop transfer from a bus
power deficit to the COI frequency.  ``|R_zd| < 1`` at a frequency means
the droop controllers attenuate disturbance content there; ``> 1`` means
they amplify it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linearize import close_loop


class SingularFrequencyError(RuntimeError):
    """(jw I - A) was numerically singular at a grid point."""

    def __init__(self, omega):
        super().__init__(f"(jwI - A) singular at omega = {omega} rad/s; "
                         "perturb the grid to avoid the undamped mode")
        self.omega = float(omega)


@dataclass(frozen=True)
class FrequencyResponseCurve:
    """A sampled complex transfer function over an ascending omega grid.

    ``masked_omega`` lists grid points that were dropped (currently only
    where the open-loop reference |G_zd| fell below the ratio guard).
    """

    omega: np.ndarray
    values: np.ndarray
    channel: tuple[str, str]
    kind: str
    masked_omega: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.omega) != len(self.values):
            raise ValueError("omega and values must have equal length")
        if len(self.omega) == 0:
            raise ValueError("empty curve")
        if np.any(self.omega <= 0) or np.any(np.diff(self.omega) <= 0):
            raise ValueError("omega grid must be strictly increasing and positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve contains non-finite samples")

    @property
    def magnitude(self):
        return np.abs(self.values)

    @property
    def phase_deg(self):
        return np.degrees(np.angle(self.values))


def default_grid(study):
    """Logarithmic omega grid from the scenario study settings."""
    return log_grid(study.omega_min, study.omega_max, study.points_per_decade)


def log_grid(omega_min, omega_max, points_per_decade):
    decades = np.log10(omega_max / omega_min)
    n = max(2, int(round(decades * points_per_decade)) + 1)
    return np.logspace(np.log10(omega_min), np.log10(omega_max), n)


def _sweep(model, omega, b_cols, c_rows, d=None):
    """Sample C (jwI - A)^-1 B + D over the grid; returns (nw, ny, nu)."""
    a = model.a
    n = a.shape[0]
    eye = np.eye(n)
    out = np.empty((len(omega), c_rows.shape[0], b_cols.shape[1]), dtype=complex)
    for i, w in enumerate(omega):
        try:
            x = np.linalg.solve(1j * w * eye - a, b_cols)
        except np.linalg.LinAlgError:
            raise SingularFrequencyError(w) from None
        out[i] = c_rows @ x
        if d is not None:
            out[i] += d
    return out


def evaluate_tf(model, input_channel, output_channel, omega):
    """Sample one scalar transfer function of the model.

    Parameters
    ----------
    model : StateSpaceModel or ClosedLoopModel
    input_channel : str or int
        An input (``u_bus<k>``) or disturbance (``d_bus<k>``) label; a
        bare int selects the u channel at that bus, falling back to the
        d channel.
    output_channel : str or int
        A measured-output (``y_bus<k>``) or performance (``omega_coi``)
        label; a bare int selects the y channel at that bus.
    omega : array_like
        Ascending angular-frequency grid, rad/s.

    Returns
    -------
    FrequencyResponseCurve
    """
    omega = np.asarray(omega, dtype=float)
    in_label, b_col, d_from_u = _resolve_input(model, input_channel)
    out_label, c_row, selector = _resolve_output(model, output_channel)
    d = None
    if selector == "y":
        y_idx = model.output_labels.index(out_label)
        d_mat = model.d_yu if d_from_u == "u" else model.d_yd
        col = (model.input_labels if d_from_u == "u" else model.disturbance_labels).index(in_label)
        d = d_mat[y_idx:y_idx + 1, col:col + 1]
    values = _sweep(model, omega, b_col, c_row, d)[:, 0, 0]
    return FrequencyResponseCurve(omega=omega, values=values,
                                  channel=(in_label, out_label), kind="G")


def _resolve_input(model, channel):
    if isinstance(channel, str):
        if channel in model.input_labels:
            j = model.input_labels.index(channel)
            return channel, model.b_u[:, j:j + 1], "u"
        if channel in model.disturbance_labels:
            j = model.disturbance_labels.index(channel)
            return channel, model.b_d[:, j:j + 1], "d"
        raise KeyError(f"no input or disturbance channel {channel!r}")
    label = f"u_bus{channel}"
    if label in model.input_labels:
        return _resolve_input(model, label)
    return _resolve_input(model, f"d_bus{channel}")


def _resolve_output(model, channel):
    if isinstance(channel, str):
        if channel in model.output_labels:
            i = model.output_labels.index(channel)
            return channel, model.c_y[i:i + 1, :], "y"
        if channel in model.performance_labels:
            i = model.performance_labels.index(channel)
            return channel, model.c_z[i:i + 1, :], "z"
        raise KeyError(f"no output channel {channel!r}")
    return _resolve_output(model, f"y_bus{channel}")


def controller_tf(controller, omega):
    """Frequency response of one droop controller.

    The droop gain acts through the response filter and the local
    frequency-measurement lag:  K / ((1 + jw t_filter)(1 + jw t_measure)).
    """
    s = 1j * np.asarray(omega, dtype=float)
    return controller.droop_gain / ((1.0 + s * controller.t_filter)
                                    * (1.0 + s * controller.t_measure))


def _scalar_loop(model, controllers, loop_bus):
    """Pick the probed loop and absorb all other loops into the plant."""
    controllers = list(controllers)
    if loop_bus is None:
        if len(controllers) != 1:
            raise ValueError("multiple controllers active; pass loop_bus to "
                             "select the scalar loop")
        probe = controllers[0]
    else:
        match = [c for c in controllers if c.bus == loop_bus]
        if not match:
            raise ValueError(f"no controller at bus {loop_bus}")
        probe = match[0]
    others = [c for c in controllers if c.bus != probe.bus]
    plant = close_loop(model, others) if others else model
    return probe, plant


def loop_gain(model, controllers, omega, loop_bus=None):
    """Open-loop gain L = G_yu * C of one droop loop.

    With several controllers active, the others are absorbed into the
    plant first, so L describes the last loop to close.
    """
    omega = np.asarray(omega, dtype=float)
    probe, plant = _scalar_loop(model, controllers, loop_bus)
    g_yu = evaluate_tf(plant, f"u_bus{probe.bus}", f"y_bus{probe.bus}", omega)
    values = g_yu.values * controller_tf(probe, omega)
    return FrequencyResponseCurve(omega=omega, values=values,
                                  channel=(f"u_bus{probe.bus}", f"y_bus{probe.bus}"),
                                  kind="L")


def sensitivity(model, controllers, omega, loop_bus=None):
    """Sensitivity S = 1 / (1 + L) of one droop loop."""
    l_curve = loop_gain(model, controllers, omega, loop_bus)
    return FrequencyResponseCurve(omega=l_curve.omega,
                                  values=1.0 / (1.0 + l_curve.values),
                                  channel=l_curve.channel, kind="S")


def nyquist_margin(model, controllers, omega, loop_bus=None):
    """Minimum distance of the Nyquist curve of L to the point (-1, 0).

    Returns
    -------
    (distance, omega_at) : tuple of float
        Smallest ``|1 + L(jw)|`` over the grid and the frequency
        attaining it.
    """
    l_curve = loop_gain(model, controllers, omega, loop_bus)
    dist = np.abs(1.0 + l_curve.values)
    i = int(np.argmin(dist))
    return float(dist[i]), float(l_curve.omega[i])


GZD_FLOOR = 1e-12


def disturbance_response_ratio(model, controllers, omega, disturbance=None,
                               probe_bus=None):
    """Disturbance response ratio R_zd over the grid.

    Parameters
    ----------
    model : StateSpaceModel
        Open-loop plant with u channels for every controller.
    controllers : iterable of IbrControllerSpec
        Active droop controllers.
    omega : array_like
        Angular-frequency grid.
    disturbance : str or int or None
        Disturbance channel (defaults to the model's only one).
    probe_bus : int or None
        If None, the ratio of the fully closed loop to the fully open
        plant (matrix form over all controllers).  If a bus id, the
        per-controller ratio for that loop with every other loop first
        absorbed into the plant, and the open-loop reference taken from
        that partially closed plant.

    Returns
    -------
    FrequencyResponseCurve
        Kind ``R_zd``; grid points where the reference |G_zd| falls
        below 1e-12 are dropped and reported in ``masked_omega``.
    """
    omega = np.asarray(omega, dtype=float)
    controllers = list(controllers)
    d_label = _disturbance_label(model, disturbance)

    if probe_bus is None:
        active = [c for c in controllers if c.droop_gain != 0.0] or controllers[:1]
        if not active:
            return FrequencyResponseCurve(omega=omega,
                                          values=np.ones(len(omega), dtype=complex),
                                          channel=(d_label, "omega_coi"), kind="R_zd")
        return _ratio_matrix(model, active, omega, d_label)
    probe, plant = _scalar_loop(model, controllers, probe_bus)
    return _ratio_matrix(plant, [probe], omega, d_label)


def _disturbance_label(model, disturbance):
    if disturbance is None:
        if len(model.disturbance_labels) != 1:
            raise ValueError("model has several disturbances; name one")
        return model.disturbance_labels[0]
    if isinstance(disturbance, int):
        return f"d_bus{disturbance}"
    return disturbance


def _ratio_matrix(plant, controllers, omega, d_label):
    """Evaluate R_zd with the given loops applied to the given plant."""
    m = len(controllers)
    u_idx = [plant.input_index(c.bus) for c in controllers]
    y_idx = [plant.output_index(c.bus) for c in controllers]
    d_idx = plant.disturbance_labels.index(d_label)
    b = np.hstack([plant.b_u[:, u_idx], plant.b_d[:, [d_idx]]])
    c = np.vstack([plant.c_y[y_idx, :], plant.c_z])
    resp = _sweep(plant, omega, b, c)
    c_diag = np.stack([controller_tf(ctl, omega) for ctl in controllers], axis=1)

    values = np.empty(len(omega), dtype=complex)
    masked = []
    eye = np.eye(m)
    for i in range(len(omega)):
        g_yu = resp[i, :m, :m]
        g_yd = resp[i, :m, m]
        g_zu = resp[i, m, :m]
        g_zd = resp[i, m, m]
        if abs(g_zd) < GZD_FLOOR:
            masked.append(float(omega[i]))
            values[i] = np.nan
            continue
        cmat = np.diag(c_diag[i])
        correction = g_zu @ cmat @ np.linalg.solve(eye + g_yu @ cmat, g_yd)
        values[i] = 1.0 - correction / g_zd
    if masked:
        keep = ~np.isnan(values)
        omega = omega[keep]
        values = values[keep]
    return FrequencyResponseCurve(omega=omega, values=values,
                                  channel=(d_label, "omega_coi"), kind="R_zd",
                                  masked_omega=tuple(masked))


def crossover_frequency(curve):
    """Smallest omega where |curve| crosses 1 from below to above.

    Located by log-linear interpolation (linear in magnitude against
    log-omega) between the bracketing grid points; None when the curve
    never crosses upward.
    """
    mag = curve.magnitude
    for i in range(1, len(mag)):
        if mag[i - 1] < 1.0 <= mag[i]:
            logw0, logw1 = np.log(curve.omega[i - 1]), np.log(curve.omega[i])
            frac = (1.0 - mag[i - 1]) / (mag[i] - mag[i - 1])
            return float(np.exp(logw0 + frac * (logw1 - logw0)))
    return None


def peak(curve):
    """Location and magnitude of the curve's largest |value|.

    The grid argmax (lowest omega on ties) is refined by quadratic
    interpolation of log-magnitude over the three neighboring points
    when the maximum is interior.

    Returns
    -------
    (omega_peak, magnitude) : tuple of float
    """
    mag = curve.magnitude
    i = int(np.argmax(mag))           # argmax takes the first (lowest omega) tie
    if i == 0 or i == len(mag) - 1:
        return float(curve.omega[i]), float(mag[i])
    logw = np.log(curve.omega[i - 1:i + 2])
    logm = np.log(np.maximum(mag[i - 1:i + 2], 1e-300))
    denom = (logm[0] - 2.0 * logm[1] + logm[2])
    if denom >= 0.0:
        return float(curve.omega[i]), float(mag[i])
    shift = 0.5 * (logm[0] - logm[2]) / denom
    shift = float(np.clip(shift, -1.0, 1.0))
    # quadratic vertex in log-omega / log-magnitude coordinates
    w_pk = np.exp(logw[1] + shift * 0.5 * (logw[2] - logw[0]))
    m_pk = np.exp(logm[1] - 0.25 * (logm[0] - logm[2]) * shift)
    return float(w_pk), float(m_pk)
