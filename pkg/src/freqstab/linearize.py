"""Assemble linear state-space models of the multi-machine system.

Each generator is a classical machine: swing equation behind a transient
reactance, with hydro units carrying a three-state governor (transient
droop compensation, servo lag, non-minimum-phase water column).  The
line network plus the machine internal reactances are reduced onto the
machine internal nodes, so bus power injections (IBRs, disturbances)
spread over the machines according to electrical distance, and each bus
frequency is the corresponding mixture of machine speeds.

The model form is

    xdot = A x + B_u u + B_d d
    y    = C_y x            (local bus frequency deviations, pu)
    z    = C_z x            (inertia-weighted COI frequency deviation, pu)

with one ``u`` column and one ``y`` row per IBR controller bus and one
``d`` column per disturbance.  Feedthrough terms are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import network


class _ChannelLookup:
    """Shared channel addressing for plant models."""

    @property
    def n_states(self):
        return self.a.shape[0]

    def input_index(self, label_or_bus):
        return _channel_index(self.input_labels, "u", label_or_bus)

    def output_index(self, label_or_bus):
        return _channel_index(self.output_labels, "y", label_or_bus)

    def disturbance_index(self, label_or_bus):
        return _channel_index(self.disturbance_labels, "d", label_or_bus)


@dataclass(frozen=True)
class StateSpaceModel(_ChannelLookup):
    """Open-loop plant matrices with labeled channels."""

    a: np.ndarray
    b_u: np.ndarray
    b_d: np.ndarray
    c_y: np.ndarray
    c_z: np.ndarray
    d_yu: np.ndarray
    d_yd: np.ndarray
    state_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    disturbance_labels: tuple[str, ...]
    output_labels: tuple[str, ...]
    performance_labels: tuple[str, ...]

    def __post_init__(self):
        n = self.a.shape[0]
        checks = [
            (self.a.shape, (n, n), "a"),
            (self.b_u.shape, (n, len(self.input_labels)), "b_u"),
            (self.b_d.shape, (n, len(self.disturbance_labels)), "b_d"),
            (self.c_y.shape, (len(self.output_labels), n), "c_y"),
            (self.c_z.shape, (len(self.performance_labels), n), "c_z"),
            (self.d_yu.shape, (len(self.output_labels), len(self.input_labels)), "d_yu"),
            (self.d_yd.shape, (len(self.output_labels), len(self.disturbance_labels)), "d_yd"),
            ((len(self.state_labels),), (n,), "state_labels"),
        ]
        for got, want, name in checks:
            if got != want:
                raise ValueError(f"{name}: shape {got} inconsistent with labels (want {want})")


@dataclass(frozen=True)
class ClosedLoopModel(_ChannelLookup):
    """Plant with a set of IBR droop loops absorbed into the state matrix.

    Unclosed input channels remain available in ``b_u`` so further loops
    (or per-loop probing) can still be applied.  ``controller_map``
    records, per closed controller, the bus and the indices of its two
    appended states (frequency-measurement state, droop-output state).
    """

    a: np.ndarray
    b_u: np.ndarray
    b_d: np.ndarray
    c_y: np.ndarray
    c_z: np.ndarray
    d_yu: np.ndarray
    d_yd: np.ndarray
    state_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    disturbance_labels: tuple[str, ...]
    output_labels: tuple[str, ...]
    performance_labels: tuple[str, ...]
    controller_map: tuple = ()


def _channel_index(labels, prefix, label_or_bus):
    if isinstance(label_or_bus, int):
        label = f"{prefix}_bus{label_or_bus}"
    else:
        label = label_or_bus
    try:
        return labels.index(label)
    except ValueError:
        raise KeyError(f"no channel {label!r}; have {list(labels)}") from None


def reduced_network(scenario):
    """Reduce lines + machine reactances onto the machine internal nodes.

    Returns
    -------
    l_red : (n, n) ndarray
        Symmetric zero-row-sum synchronizing-susceptance matrix coupling
        machine internal angles.
    spread : (n, n) ndarray
        Column k gives each machine's share of a power injection at bus
        k; columns sum to one (lossless network).
    mix : (n, n) ndarray
        Row k gives the machine-speed mixture seen as the frequency of
        bus k; rows sum to one.
    """
    n = len(scenario.buses)
    b_line = network.susceptance_matrix(scenario)
    b_int = np.zeros(n)
    for g in scenario.generators:
        rated_pu = scenario.bus(g.bus).rated_power_mw / scenario.s_base_mva
        b_int[g.bus - 1] = rated_pu / g.transient_reactance
    if np.any(b_int <= 0):
        missing = [i + 1 for i in range(n) if b_int[i] <= 0]
        raise ValueError(f"every bus must host a generator; missing at {missing}")
    y_bus = b_line + np.diag(b_int)
    z_bus = np.linalg.solve(y_bus, np.eye(n))
    mix = z_bus @ np.diag(b_int)                 # bus angle = mix @ machine angle
    spread = np.diag(b_int) @ z_bus              # machine share of bus injections
    l_red = np.diag(b_int) - np.diag(b_int) @ z_bus @ np.diag(b_int)
    return l_red, spread, mix


def _governor_entries(gen, rated_pu):
    """Time constants and gains of the three-state hydro governor.

    The cascade is droop_gain * (1 + s t_reset) / (1 + s t_lag) into a
    servo lag 1/(1 + s t_servo) into the water-column turbine
    (1 - s t_water) / (1 + 0.5 s t_water); t_lag comes from the
    transient-droop ratio on the machine base so that the compensator
    shape is independent of the system base.
    """
    gov = gen.governor
    r_machine = rated_pu / gov.droop_gain
    t_lag = (gov.transient_droop / r_machine) * gov.t_reset
    return gov.droop_gain, t_lag, gov.t_reset, gov.t_servo, gov.t_water


def linearize(scenario):
    """Build the open-loop state-space model of a validated scenario.

    States are ordered: machine angles (rad), machine speeds (pu), then
    three governor states per hydro unit with a governor.  Inputs are IBR
    power injections (pu, system base) at the controller buses;
    disturbances are bus power deficits (pu).  Measured outputs are the
    local bus frequency deviations at the controller buses; the single
    performance output is the inertia-weighted COI frequency deviation.

    Raises
    ------
    ValueError
        If an IBR or disturbance references a bus without a generator
        (injections need a machine node to act on).
    """
    n = len(scenario.buses)
    omega_base = 2.0 * np.pi * scenario.f0_hz
    h_sys = np.array([scenario.inertia_constant_system(b.id) for b in scenario.buses])
    if np.any(h_sys <= 0):
        bad = [b.id for b in scenario.buses if scenario.inertia_constant_system(b.id) <= 0]
        raise ValueError(f"buses {bad} have zero kinetic energy; classical model needs inertia")
    rated_pu = np.array([b.rated_power_mw / scenario.s_base_mva for b in scenario.buses])
    l_red, spread, mix = reduced_network(scenario)

    governed = [g for g in scenario.generators if g.governor is not None
                and g.governor.droop_gain > 0]
    nx = 2 * n + 3 * len(governed)
    state_labels = [f"delta_bus{b.id}" for b in scenario.buses]
    state_labels += [f"omega_bus{b.id}" for b in scenario.buses]

    a = np.zeros((nx, nx))
    a[0:n, n:2 * n] = omega_base * np.eye(n)
    damping_sys = np.array([scenario.generator(b.id).damping for b in scenario.buses]) * rated_pu
    for i in range(n):
        a[n + i, 0:n] = -l_red[i] / (2.0 * h_sys[i])
        a[n + i, n + i] -= damping_sys[i] / (2.0 * h_sys[i])

    for k, gen in enumerate(governed):
        i = gen.bus - 1
        gain, t_lag, t_reset, t_servo, t_water = _governor_entries(gen, rated_pu[i])
        x1 = 2 * n + 3 * k      # transient-droop lead-lag state
        x2 = x1 + 1             # servo state
        x3 = x1 + 2             # water-column lag state
        state_labels += [f"gov_droop_bus{gen.bus}", f"gov_servo_bus{gen.bus}",
                         f"gov_water_bus{gen.bus}"]
        # lead-lag: y1 = x1 + gain*(t_reset/t_lag) * e, e = -omega_i
        a[x1, x1] = -1.0 / t_lag
        a[x1, n + i] = -gain * (1.0 - t_reset / t_lag) / t_lag
        a[x2, x2] = -1.0 / t_servo
        a[x2, x1] = 1.0 / t_servo
        a[x2, n + i] = -gain * (t_reset / t_lag) / t_servo
        # turbine (1 - s tw)/(1 + 0.5 s tw) = -2 + 3/(1 + 0.5 s tw)
        a[x3, x3] = -2.0 / t_water
        a[x3, x2] = 6.0 / t_water
        # mechanical power x3 - 2 x2 into the swing equation
        a[n + i, x3] += 1.0 / (2.0 * h_sys[i])
        a[n + i, x2] += -2.0 / (2.0 * h_sys[i])

    gen_buses = {g.bus for g in scenario.generators}
    input_labels = []
    b_u = np.zeros((nx, len(scenario.ibr_controllers)))
    c_y = np.zeros((len(scenario.ibr_controllers), nx))
    output_labels = []
    for k, ctl in enumerate(scenario.ibr_controllers):
        if ctl.bus not in gen_buses:
            raise ValueError(f"IBR at bus {ctl.bus}: no generator to absorb the injection")
        b_u[n:2 * n, k] = spread[:, ctl.bus - 1] / (2.0 * h_sys)
        c_y[k, n:2 * n] = mix[ctl.bus - 1]
        input_labels.append(f"u_bus{ctl.bus}")
        output_labels.append(f"y_bus{ctl.bus}")

    disturbance_labels = []
    b_d = np.zeros((nx, len(scenario.disturbances)))
    for k, dist in enumerate(scenario.disturbances):
        if dist.bus not in gen_buses:
            raise ValueError(f"disturbance at bus {dist.bus}: no generator to absorb it")
        b_d[n:2 * n, k] = -spread[:, dist.bus - 1] / (2.0 * h_sys)
        disturbance_labels.append(f"d_bus{dist.bus}")

    c_z = np.zeros((1, nx))
    c_z[0, n:2 * n] = h_sys / h_sys.sum()

    return StateSpaceModel(
        a=a,
        b_u=b_u,
        b_d=b_d,
        c_y=c_y,
        c_z=c_z,
        d_yu=np.zeros((c_y.shape[0], b_u.shape[1])),
        d_yd=np.zeros((c_y.shape[0], b_d.shape[1])),
        state_labels=tuple(state_labels),
        input_labels=tuple(input_labels),
        disturbance_labels=tuple(disturbance_labels),
        output_labels=tuple(output_labels),
        performance_labels=("omega_coi",),
    )


def close_loop(model, controllers):
    """Absorb droop controllers into the plant, one loop per controller.

    Each controller contributes two states: a first-order estimate of its
    bus frequency (time constant ``t_measure``) and the filtered droop
    output (time constant ``t_filter``):

        t_measure * qdot = y_local - q
        t_filter  * pdot = -droop_gain * q - p

    with ``p`` injected at the controller bus.  Controllers whose input
    channel is absent from the model are rejected; channels not being
    closed remain open in ``b_u``.

    Parameters
    ----------
    model : StateSpaceModel or ClosedLoopModel
        Plant (possibly already partially closed).
    controllers : iterable of IbrControllerSpec
        Loops to absorb.  An empty list returns the plant unchanged (as a
        ClosedLoopModel).

    Raises
    ------
    ValueError
        On duplicate controllers for one bus or a missing channel.
    """
    controllers = list(controllers)
    buses = [c.bus for c in controllers]
    if len(set(buses)) != len(buses):
        raise ValueError(f"duplicate controller buses in {buses}")

    n0 = model.n_states
    m = len(controllers)
    closed_idx = [model.input_index(c.bus) for c in controllers]
    for c in controllers:
        model.output_index(c.bus)

    nx = n0 + 2 * m
    a = np.zeros((nx, nx))
    a[:n0, :n0] = model.a
    state_labels = list(model.state_labels)
    controller_map = list(getattr(model, "controller_map", ()))
    for k, ctl in enumerate(controllers):
        q = n0 + 2 * k
        p = q + 1
        state_labels += [f"fmeas_bus{ctl.bus}", f"p_ibr_bus{ctl.bus}"]
        y_row = model.c_y[model.output_index(ctl.bus)]
        a[q, :n0] = y_row / ctl.t_measure
        a[q, q] = -1.0 / ctl.t_measure
        a[p, q] = -ctl.droop_gain / ctl.t_filter
        a[p, p] = -1.0 / ctl.t_filter
        a[:n0, p] = model.b_u[:, model.input_index(ctl.bus)]
        controller_map.append((ctl, q, p))

    keep = [j for j in range(len(model.input_labels)) if j not in closed_idx]
    b_u = np.zeros((nx, len(keep)))
    b_u[:n0, :] = model.b_u[:, keep]
    b_d = np.vstack([model.b_d, np.zeros((2 * m, model.b_d.shape[1]))])
    c_y = np.hstack([model.c_y, np.zeros((model.c_y.shape[0], 2 * m))])
    c_z = np.hstack([model.c_z, np.zeros((model.c_z.shape[0], 2 * m))])

    return ClosedLoopModel(
        a=a,
        b_u=b_u,
        b_d=b_d,
        c_y=c_y,
        c_z=c_z,
        d_yu=np.zeros((c_y.shape[0], b_u.shape[1])),
        d_yd=np.zeros((c_y.shape[0], b_d.shape[1])),
        state_labels=tuple(state_labels),
        input_labels=tuple(model.input_labels[j] for j in keep),
        disturbance_labels=model.disturbance_labels,
        output_labels=model.output_labels,
        performance_labels=model.performance_labels,
        controller_map=tuple(controller_map),
    )


def closed_loop(scenario):
    """Linearize a scenario and close all of its IBR loops."""
    model = linearize(scenario)
    return close_loop(model, scenario.ibr_controllers)
