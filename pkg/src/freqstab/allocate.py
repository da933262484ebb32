"""Droop reallocation under a disturbance-response-ratio cap.

Mechanizes the mitigation procedure of shifting primary-control share
away from locations whose per-controller disturbance response ratio
peaks too high: starting from the configured allocation, droop share is
moved in fixed steps from the candidate bus with the largest peak
|R_zd^k| to the one with the smallest, re-evaluating both per-controller
curves after every move, until all peaks respect the cap.

The procedure is deliberately a deterministic greedy walk rather than an
optimization; identical inputs produce identical iteration traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import freqdom, modal
from .linearize import close_loop, linearize

SHARE_SUM_TOL = 1e-9


@dataclass(frozen=True)
class AllocationProblem:
    """Redistribute the IBR part of the system droop between candidate buses.

    ``total_ibr_share`` is the fraction of the total system droop
    (governors + IBRs) carried by the candidate IBRs; it is conserved by
    every move.  ``step`` is the share granularity moved per iteration,
    also as a fraction of total system droop.
    """

    scenario: object
    candidate_buses: tuple
    total_ibr_share: float
    cap: float = 1.35
    step: float = 0.01

    def __post_init__(self):
        if not (0.0 <= self.total_ibr_share <= 1.0):
            raise ValueError("total_ibr_share must lie in [0, 1]")
        if self.cap <= 1.0:
            raise ValueError("cap must exceed 1 (|R_zd| -> 1 as gains -> 0)")
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        if len(self.candidate_buses) < 2:
            raise ValueError("need at least two candidate buses")


@dataclass(frozen=True)
class AllocationResult:
    shares: dict                   # bus -> fraction of total system droop
    peaks_before: dict
    peaks_after: dict
    min_zeta_before: float
    min_zeta_after: float
    converged: bool
    iterations: int
    trace: tuple                   # rows: (iter, {bus: share}, {bus: peak}, min_zeta)
    diagnostics: dict = field(default_factory=dict)


def allocate_droop(problem):
    """Run the greedy reallocation.

    Termination: all candidate peaks at or below the cap (``converged``);
    otherwise when shares hit their bounds or a move increases the worst
    peak, in which case the best allocation seen is returned with
    ``converged=False`` and, if every single-bus extreme also violates
    the cap, infeasibility diagnostics.

    Returns
    -------
    AllocationResult
    """
    scenario = problem.scenario
    buses = list(problem.candidate_buses)
    gov_droop = sum(g.governor.droop_gain for g in scenario.generators
                    if g.governor is not None)
    ibr_droop = {c.bus: c.droop_gain for c in scenario.ibr_controllers}
    for bus in buses:
        if bus not in ibr_droop:
            raise ValueError(f"candidate bus {bus} has no IBR controller in the scenario")
    fixed_ibr = sum(g for b, g in ibr_droop.items() if b not in buses)
    k_total = gov_droop + sum(ibr_droop.values())
    if k_total <= 0:
        raise ValueError("scenario has no primary droop response")

    shares = {b: ibr_droop[b] / k_total for b in buses}
    if abs(sum(shares.values()) - problem.total_ibr_share) > max(
            SHARE_SUM_TOL, 1e-6 * problem.total_ibr_share):
        raise ValueError(
            f"scenario IBR shares sum to {sum(shares.values()):.6f}; problem "
            f"declares total_ibr_share = {problem.total_ibr_share}")

    omega = freqdom.default_grid(scenario.study)

    def refined_peak(model, controllers, bus):
        """Grid peak with a dense local re-sample around the argmax.

        Sharp near-critical resonances alias on the study grid; taking
        the max over an extra local sweep keeps the walk monotone in
        the droop share instead of jittering with the sampling.
        """
        curve = freqdom.disturbance_response_ratio(
            model, controllers, omega, probe_bus=bus)
        w_pk, mag = freqdom.peak(curve)
        i = int(np.argmax(curve.magnitude))
        lo = curve.omega[max(0, i - 1)]
        hi = curve.omega[min(len(curve.omega) - 1, i + 1)]
        if hi > lo:
            local = np.geomspace(lo, hi, 64)
            local_curve = freqdom.disturbance_response_ratio(
                model, controllers, local, probe_bus=bus)
            mag = max(mag, freqdom.peak(local_curve)[1])
        return mag

    def evaluate(current):
        gains = {b: current[b] * k_total for b in buses}
        scn = scenario.with_ibr_gains(gains)
        model = linearize(scn)
        peaks = {b: refined_peak(model, scn.ibr_controllers, b) for b in buses}
        closed = close_loop(model, scn.ibr_controllers)
        min_zeta = modal.eigenvalues(closed.a, check_residuals=False).min_damping()
        return peaks, min_zeta

    peaks, min_zeta = evaluate(shares)
    peaks_before = dict(peaks)
    zeta_before = min_zeta
    trace = [(0, dict(shares), dict(peaks), min_zeta)]

    best = (max(peaks.values()), dict(shares), dict(peaks), min_zeta)
    max_moves = int(np.ceil(2.0 * problem.total_ibr_share / problem.step)) + 2
    iterations = 0
    converged = all(p <= problem.cap for p in peaks.values())

    while not converged and iterations < max_moves:
        donor = max(buses, key=lambda b: (peaks[b], b))
        receiver = min(buses, key=lambda b: (peaks[b], b))
        amount = min(problem.step, shares[donor])
        if donor == receiver or amount <= 0.0:
            break                          # shares at their bounds
        worst_before = max(peaks.values())
        shares[donor] -= amount
        shares[receiver] += amount
        iterations += 1
        peaks, min_zeta = evaluate(shares)
        trace.append((iterations, dict(shares), dict(peaks), min_zeta))
        if max(peaks.values()) < best[0]:
            best = (max(peaks.values()), dict(shares), dict(peaks), min_zeta)
        converged = all(p <= problem.cap for p in peaks.values())
        if not converged and max(peaks.values()) > worst_before:
            break                          # move made the worst peak worse

    diagnostics = {}
    if not converged:
        shares = best[1]
        peaks = best[2]
        min_zeta = best[3]
        extremes = {}
        for b in buses:
            extreme = {bb: 0.0 for bb in buses}
            extreme[b] = problem.total_ibr_share
            ext_peaks, _ = evaluate(extreme)
            extremes[b] = max(ext_peaks.values())
        diagnostics["single_bus_extreme_peaks"] = extremes
        diagnostics["infeasible_cap"] = all(p > problem.cap for p in extremes.values())

    return AllocationResult(
        shares=dict(shares),
        peaks_before=peaks_before,
        peaks_after=dict(peaks),
        min_zeta_before=zeta_before,
        min_zeta_after=min_zeta,
        converged=converged,
        iterations=iterations,
        trace=tuple(trace),
        diagnostics=diagnostics,
    )
