"""Eigenvalue and damping-ratio analysis of the linearized system.

The absolute-angle formulation keeps one structural zero eigenvalue (the
angle-reference mode); it is identified here and excluded from damping
and stability verdicts.  Eigenvalues come from the in-repo Hessenberg +
shifted-QR solver in :mod:`freqstab.linalg`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .linearize import close_loop, linearize

REFERENCE_MODULUS = 1e-6      # |eigenvalue| below this marks the reference mode
STABILITY_MARGIN = 1e-8       # non-reference Re(eig) must be below -this


@dataclass(frozen=True)
class Mode:
    eigenvalue: complex
    damping_ratio: float
    frequency_hz: float
    is_reference: bool = False


@dataclass(frozen=True)
class ModeSet:
    modes: tuple
    reference_mode: Mode | None
    stable: bool
    max_residual: float

    def non_reference(self):
        return [m for m in self.modes if not m.is_reference]

    def min_damping(self):
        """Smallest non-reference damping ratio (None if no modes)."""
        others = self.non_reference()
        if not others:
            return None
        return min(m.damping_ratio for m in others)

    def worst_mode(self):
        others = self.non_reference()
        if not others:
            return None
        return min(others, key=lambda m: m.damping_ratio)


def eigenvalues(a, check_residuals=True):
    """Full spectrum of a real square matrix as a ModeSet.

    Damping ratio is -Re / |eigenvalue| and frequency |Im| / 2 pi.  The
    reference mode is the unique eigenvalue of modulus below 1e-6; more
    than one candidate is an assembly error and raises.  ``stable``
    ignores the reference mode.

    A couple of eigenpairs (largest modulus, worst damping) are verified
    by inverse iteration; the largest relative residual is reported in
    ``max_residual``.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] > 200:
        raise ValueError("dense solver is intended for systems up to ~200 states")
    w = linalg.eigvals(a)

    small = [lam for lam in w if abs(lam) < REFERENCE_MODULUS]
    if len(small) > 1:
        raise ValueError(f"{len(small)} near-zero eigenvalues {small}; expected "
                         "at most one angle-reference mode")
    reference = small[0] if small else None

    modes = []
    ref_mode = None
    for lam in sorted(w, key=lambda v: (v.real, abs(v.imag))):
        mod = abs(lam)
        zeta = -lam.real / mod if mod > 0 else 1.0
        mode = Mode(eigenvalue=complex(lam),
                    damping_ratio=float(zeta),
                    frequency_hz=float(abs(lam.imag) / (2.0 * np.pi)),
                    is_reference=(reference is not None and lam == reference))
        modes.append(mode)
        if mode.is_reference:
            ref_mode = mode

    max_residual = 0.0
    if check_residuals and len(w):
        probes = {int(np.argmax(np.abs(w)))}
        non_ref = [i for i, m in enumerate(modes) if not m.is_reference]
        if non_ref:
            worst = min(non_ref, key=lambda i: modes[i].damping_ratio)
            probes.add(worst)
            lams = [modes[i].eigenvalue for i in probes]
        else:
            lams = [w[i] for i in probes]
        for lam in lams:
            max_residual = max(max_residual, linalg.eig_residual(a, lam))
        if max_residual > 1e-6:
            raise RuntimeError(f"eigen-solver residual {max_residual:.2e} "
                               "exceeds sanity bound")

    stable = all(m.eigenvalue.real < -STABILITY_MARGIN for m in modes
                 if not m.is_reference)
    return ModeSet(modes=tuple(modes), reference_mode=ref_mode,
                   stable=stable, max_residual=max_residual)


@dataclass(frozen=True)
class DampingSweep:
    bus: int
    gains: tuple
    min_zeta: tuple
    critical_gain: float | None


def damping_sweep(scenario, bus, gains, refine=True):
    """Minimum damping ratio versus IBR droop gain at one bus.

    For each gain the scenario's controller at ``bus`` is replaced (or
    added) with that droop gain, every configured loop is closed, and
    the worst non-reference damping ratio recorded.  When the sweep
    brackets a sign change, the critical gain where min-damping crosses
    zero is refined by bisection.

    Parameters
    ----------
    scenario : Scenario
    bus : int
        Bus whose droop gain is swept.
    gains : sequence of float
        Ascending non-negative droop gains (pu/pu, system base).
    refine : bool
        Bisect for the critical gain when a crossing is bracketed.
    """
    gains = [float(g) for g in gains]
    if any(g < 0 for g in gains) or any(g1 < g0 for g0, g1 in zip(gains, gains[1:])):
        raise ValueError("gains must be ascending and non-negative")

    def min_zeta_at(gain):
        closed = _closed_with_gain(scenario, bus, gain)
        return eigenvalues(closed.a, check_residuals=False).min_damping()

    zetas = [min_zeta_at(g) for g in gains]

    critical = None
    if refine:
        for (g0, z0), (g1, z1) in zip(zip(gains, zetas), zip(gains[1:], zetas[1:])):
            if z0 > 0.0 >= z1:
                lo, hi = g0, g1
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if min_zeta_at(mid) > 0.0:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo <= 1e-9 * max(1.0, hi):
                        break
                critical = 0.5 * (lo + hi)
                break

    return DampingSweep(bus=bus, gains=tuple(gains), min_zeta=tuple(zetas),
                        critical_gain=critical)


def _closed_with_gain(scenario, bus, gain):
    modified = scenario.with_ibr_gains({bus: gain})
    return close_loop(linearize(modified), modified.ibr_controllers)
