"""Small dense symmetric eigensolvers.

``jacobi_eigh`` is a cyclic Jacobi solver with a fixed sweep order, so two
runs on the same matrix produce bit-identical output. ``eigh`` dispatches
between it and LAPACK; LAPACK is the default because the cyclic solver is
interpreted Python and the fuzz campaigns call the eigensolver hundreds of
thousands of times.
"""
from __future__ import annotations

import numpy as np

JACOBI_OFF_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100


def _off_norm(a):
    off = a - np.diag(np.diag(a))
    return np.sqrt(np.sum(off * off))


def jacobi_eigh(matrix, tol: float = JACOBI_OFF_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ascending and ``matrix @ v = v * w``.
    Sweeps visit pairs ``(p, q)`` with ``p < q`` in row-major order and stop
    once the off-diagonal Frobenius norm drops below ``tol`` times the
    matrix norm (absolute ``tol`` for the zero matrix).
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1.0)
    for _ in range(max_sweeps):
        if _off_norm(a) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise RuntimeError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigh(matrix, method: str = "lapack"):
    """Symmetric eigen-decomposition, eigenvalues ascending."""
    if method == "jacobi":
        return jacobi_eigh(matrix)
    if method == "lapack":
        m = np.asarray(matrix, dtype=float)
        return np.linalg.eigh(0.5 * (m + m.T))
    raise ValueError(f"unknown method {method!r}")
