"""Dense linear-algebra kernels kept in-repo: Hessenberg reduction, a
Francis double-shift QR eigenvalue solver, and a scaling-and-squaring
matrix exponential.

The eigenvalue path deliberately avoids ``numpy.linalg.eig`` so the modal
analysis can be cross-checked against it (and against analytic spectra)
in the test suite.  System sizes here are tens of states, so a plain
dense implementation is more than fast enough.
"""

from __future__ import annotations

import numpy as np


class EigenConvergenceError(RuntimeError):
    """QR iteration failed to isolate an eigenvalue within the sweep budget.

    Carries the eigenvalues recovered so far in ``partial``.
    """

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def hessenberg(a):
    """Reduce a real square matrix to upper Hessenberg form.

    Uses Householder reflections applied symmetrically, so the result is
    orthogonally similar to the input.

    Parameters
    ----------
    a : (n, n) ndarray
        Real square matrix.

    Returns
    -------
    h : (n, n) ndarray
        Upper Hessenberg matrix with the same eigenvalues as ``a``.
    """
    h = np.array(a, dtype=float, copy=True)
    n = h.shape[0]
    if h.ndim != 2 or h.shape[1] != n:
        raise ValueError("matrix must be square")
    for k in range(n - 2):
        x = h[k + 1:, k]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(normx, x[0])
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        # P = I - 2 v v^T applied from both sides
        h[k + 1:, k:] -= 2.0 * np.outer(v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def _eig2x2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]] as a complex pair."""
    tr = 0.5 * (a + d)
    det = a * d - b * c
    disc = tr * tr - det
    if disc >= 0.0:
        q = np.sqrt(disc)
        # avoid cancellation: compute the larger root first
        if tr >= 0.0:
            l1 = tr + q
        else:
            l1 = tr - q
        l2 = det / l1 if l1 != 0.0 else tr - np.copysign(q, tr)
        return complex(l1), complex(l2)
    q = np.sqrt(-disc)
    return complex(tr, q), complex(tr, -q)


def eigvals(a, max_sweeps=60):
    """All eigenvalues of a real square matrix via Hessenberg + shifted QR.

    Implicit Francis double-shift iteration on the Hessenberg form, with
    ad-hoc exceptional shifts every ten stalled sweeps.

    Parameters
    ----------
    a : (n, n) ndarray
        Real square matrix.
    max_sweeps : int
        Iteration budget per eigenvalue before giving up.

    Returns
    -------
    w : (n,) complex ndarray
        Eigenvalues; complex ones appear in conjugate pairs.

    Raises
    ------
    EigenConvergenceError
        If some eigenvalue fails to deflate within the budget.  The
        exception carries the partial spectrum found so far.
    """
    a = np.asarray(a, dtype=float)
    maxabs = np.max(np.abs(a)) if a.size else 0.0
    if maxabs == 0.0:
        return np.zeros(a.shape[0], dtype=complex)
    # scale by an exact power of two so shift products cannot under/overflow
    pre_scale = 2.0 ** np.floor(np.log2(maxabs))
    h = hessenberg(a / pre_scale)
    n = h.shape[0]
    eps = np.finfo(float).eps
    anorm = np.sum(np.abs(h))
    out = []
    nn = n - 1
    t_shift = 0.0
    its = 0
    while nn >= 0:
        # find l such that h[l, l-1] is negligible
        l = nn
        while l > 0:
            s = abs(h[l - 1, l - 1]) + abs(h[l, l])
            if s == 0.0:
                s = anorm
            if abs(h[l, l - 1]) <= eps * s:
                h[l, l - 1] = 0.0
                break
            l -= 1
        if l == nn:                       # 1x1 block deflates
            out.append(complex(h[nn, nn] + t_shift))
            nn -= 1
            its = 0
            continue
        if l == nn - 1:                   # 2x2 block deflates
            l1, l2 = _eig2x2(h[nn - 1, nn - 1], h[nn - 1, nn],
                             h[nn, nn - 1], h[nn, nn])
            out.append(l1 + t_shift)
            out.append(l2 + t_shift)
            nn -= 2
            its = 0
            continue
        if its >= max_sweeps:
            raise EigenConvergenceError(
                f"QR iteration stalled with {nn + 1} eigenvalues remaining",
                np.array(out, dtype=complex))
        # Francis double shift from the trailing 2x2 of the active block
        x = h[nn, nn]
        y = h[nn - 1, nn - 1]
        w = h[nn, nn - 1] * h[nn - 1, nn]
        if its > 0 and its % 10 == 0:
            # exceptional shift to break symmetry-induced stalls
            t_shift += x
            for i in range(nn + 1):
                h[i, i] -= x
            s = abs(h[nn, nn - 1]) + abs(h[nn - 1, nn - 2])
            x = y = 0.75 * s
            w = -0.4375 * s * s
        its += 1
        # look for two consecutive small subdiagonals to start the chase
        m = nn - 2
        while m >= l:
            zz = h[m, m]
            r = x - zz
            s = y - zz
            p = (r * s - w) / h[m + 1, m] + h[m, m + 1]
            q = h[m + 1, m + 1] - zz - r - s
            rr = h[m + 2, m + 1]
            scale = abs(p) + abs(q) + abs(rr)
            p /= scale
            q /= scale
            rr /= scale
            if m == l:
                break
            u = abs(h[m, m - 1]) * (abs(q) + abs(rr))
            v = abs(p) * (abs(h[m - 1, m - 1]) + abs(zz) + abs(h[m + 1, m + 1]))
            if u <= eps * v:
                break
            m -= 1
        for i in range(m + 2, nn + 1):
            h[i, i - 2] = 0.0
            if i > m + 2:
                h[i, i - 3] = 0.0
        # chase the bulge down the active block
        for k in range(m, nn):
            if k != m:
                p = h[k, k - 1]
                q = h[k + 1, k - 1]
                rr = h[k + 2, k - 1] if k != nn - 1 else 0.0
                x = abs(p) + abs(q) + abs(rr)
                if x == 0.0:
                    continue
                p /= x
                q /= x
                rr /= x
            s = np.copysign(np.sqrt(p * p + q * q + rr * rr), p)
            if s == 0.0:
                continue
            if k == m:
                if l != m:
                    h[k, k - 1] = -h[k, k - 1]
            else:
                h[k, k - 1] = -s * x
            p += s
            x = p / s
            y = q / s
            zz = rr / s
            q /= p
            rr /= p
            # row update
            jhi = nn + 1
            for j in range(k, jhi):
                p = h[k, j] + q * h[k + 1, j]
                if k != nn - 1:
                    p += rr * h[k + 2, j]
                    h[k + 2, j] -= p * zz
                h[k + 1, j] -= p * y
                h[k, j] -= p * x
            # column update
            ilo = l
            ihi = min(nn, k + 3)
            for i in range(ilo, ihi + 1):
                p = x * h[i, k] + y * h[i, k + 1]
                if k != nn - 1:
                    p += zz * h[i, k + 2]
                    h[i, k + 2] -= p * rr
                h[i, k + 1] -= p * q
                h[i, k] -= p

    w = np.array(out, dtype=complex) * pre_scale
    # collapse rounding-level imaginary parts so real eigenvalues stay real
    w = np.where(np.abs(w.imag) < eps * max(anorm * pre_scale, 1.0), w.real + 0j, w)
    return w


def eig_residual(a, lam, rng_seed=0):
    """Relative residual ``||A v - lam v|| / ||A||`` for one eigenvalue.

    The eigenvector is recovered by two steps of inverse iteration with a
    slightly perturbed shift, which is independent of the QR path that
    produced ``lam``.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    anorm = np.linalg.norm(a, ord="fro")
    if anorm == 0.0:
        return 0.0
    shift = lam + 1e-10 * (1.0 + abs(lam))
    m = a.astype(complex) - shift * np.eye(n)
    rng = np.random.default_rng(rng_seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(3):
        try:
            v = np.linalg.solve(m, v)
        except np.linalg.LinAlgError:
            # shift hit the eigenvalue exactly; nudge once more
            m += 1e-8 * anorm * np.eye(n)
            v = np.linalg.solve(m, v)
        v /= np.linalg.norm(v)
    return float(np.linalg.norm(a @ v - lam * v) / anorm)


def expm(a):
    """Matrix exponential by scaling and squaring with a Taylor core.

    The argument is scaled by ``2**-s`` until its 1-norm is below 0.25,
    the exponential of the scaled matrix is summed to machine precision,
    and the result is squared ``s`` times.  Independent of any ODE
    integrator in this package; used as the analytic oracle for them.

    Parameters
    ----------
    a : (n, n) ndarray
        Real square matrix.

    Returns
    -------
    (n, n) ndarray
        ``exp(a)``.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("matrix must be square")
    norm = np.linalg.norm(a, 1)
    s = 0
    if norm > 0.25:
        s = int(np.ceil(np.log2(norm / 0.25)))
    m = a / (2.0 ** s)
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 30):
        term = term @ m / k
        result = result + term
        if np.linalg.norm(term, 1) < np.finfo(float).eps * np.linalg.norm(result, 1):
            break
    for _ in range(s):
        result = result @ result
    return result


def step_response_exact(a, b, t):
    """Exact state of ``xdot = a x + b`` from rest at time ``t``.

    Uses the augmented-matrix trick ``exp([[a, b], [0, 0]] t)`` so a
    singular ``a`` (the angle-reference zero mode) needs no special
    casing.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = a.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = a * t
    aug[:n, n] = b * t
    return expm(aug)[:n, n]
