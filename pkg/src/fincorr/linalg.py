"""Symmetric eigensolver based on Jacobi rotations.

Pairs are visited in round-robin (tournament) order, so each round applies
``n/2`` disjoint rotations at once; disjoint rotations commute, which lets a
whole round be written as one column update followed by one row update.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, InputError


def _round_robin(n: int):
    """Rounds of disjoint index pairs covering every pair exactly once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(a, tol: float = 1e-12, max_rotations: int | None = None):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Iterates until the off-diagonal Frobenius norm falls below ``tol`` times
    the matrix norm, or until ``max_rotations`` (default ``100 n^2``) plane
    rotations have been applied, in which case :class:`ConvergenceError` is
    raised with the final relative residual.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("matrix must be square")
    n = a.shape[0]
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise InputError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    if max_rotations is None:
        max_rotations = 100 * n * n
    scale = np.linalg.norm(a) or 1.0
    rounds = _round_robin(n)
    rotations = 0
    resid = off_norm(a) / scale
    while resid >= tol:
        if rotations >= max_rotations:
            raise ConvergenceError(
                f"Jacobi did not converge in {rotations} rotations (residual {resid:.3e})", resid
            )
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            # tangent of the rotation angle, smaller root for stability
            t = np.ones_like(theta)
            big = np.abs(theta) > 1e150
            mid = ~big & (theta != 0)
            t[mid] = np.sign(theta[mid]) / (np.abs(theta[mid]) + np.sqrt(theta[mid] ** 2 + 1.0))
            t[big] = 0.5 / theta[big]
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
            rotations += p.size
        resid = off_norm(a) / scale
    w = a.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is non-negative."""
    vectors = np.array(vectors, dtype=float, copy=True)
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs
