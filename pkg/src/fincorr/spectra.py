"""Correlation matrices and their spectra, compared against random-matrix bounds."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataWarning, InputError, NumericalError
from .linalg import fix_signs, jacobi_eigh
from .panel import ReturnPanel


@dataclass(eq=False)
class CorrMatrix:
    labels: tuple
    C: np.ndarray
    window: tuple  # (start_date, end_date, T)

    @property
    def n(self) -> int:
        return len(self.labels)

    def mean_offdiag(self, absolute: bool = False) -> float:
        off = self.C[~np.eye(self.n, dtype=bool)]
        return float(np.mean(np.abs(off) if absolute else off))

    def permuted(self, perm) -> "CorrMatrix":
        perm = np.asarray(perm)
        return CorrMatrix(tuple(self.labels[i] for i in perm), self.C[np.ix_(perm, perm)], self.window)


def correlation_from_returns(R: np.ndarray) -> np.ndarray:
    """Equal-time correlation of the rows of ``R`` after normalizing each row."""
    R = np.asarray(R, dtype=float)
    if R.shape[1] < 2:
        raise InputError("correlation window needs at least 2 observations")
    z = R - R.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.mean(z * z, axis=1))
    scale = np.abs(R).max(axis=1)
    if np.any((sd <= 1e-12 * scale) | (scale == 0)):
        raise NumericalError("constant series inside correlation window")
    z /= sd[:, None]
    C = z @ z.T / R.shape[1]
    C = 0.5 * (C + C.T)
    np.clip(C, -1.0, 1.0, out=C)
    np.fill_diagonal(C, 1.0)
    return C


def correlation(returns: ReturnPanel, window=None) -> CorrMatrix:
    """Correlation matrix over the whole panel or a half-open date range ``(start, end)``.

    Returns are re-normalized inside the window, so the diagonal is exactly 1.
    """
    if window is not None:
        returns = returns.between(*window)
    C = correlation_from_returns(returns.R)
    return CorrMatrix(returns.labels, C, (returns.dates[0], returns.dates[-1], returns.length))


@dataclass
class MpLaw:
    Q: float
    lambda_min: float
    lambda_max: float


def mp_bounds(N: int, L: int) -> MpLaw:
    """Marchenko-Pastur support for ``N`` uncorrelated series of length ``L``."""
    if N < 2:
        raise InputError("need N >= 2")
    Q = L / N
    if Q < 1:
        raise InputError(f"Q = L/N = {Q:.4g} < 1")
    root = 1.0 / np.sqrt(Q)
    return MpLaw(Q, (1.0 - root) ** 2, (1.0 + root) ** 2)


def mp_density(law: MpLaw, lambda_grid) -> np.ndarray:
    """Marchenko-Pastur eigenvalue density, zero outside its support."""
    lam = np.asarray(lambda_grid, dtype=float)
    out = np.zeros_like(lam)
    inside = (lam > law.lambda_min) & (lam < law.lambda_max) & (lam > 0)
    li = lam[inside]
    out[inside] = law.Q / (2 * np.pi) * np.sqrt((law.lambda_max - li) * (li - law.lambda_min)) / li
    return out


@dataclass
class Spectrum:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # column k pairs with eigenvalue k
    ipr: np.ndarray
    labels: tuple = ()

    @property
    def top(self) -> np.ndarray:
        """Eigenvector of the largest eigenvalue."""
        return self.eigenvectors[:, -1]


def ipr(vectors) -> np.ndarray:
    """Inverse participation ratio ``sum_l u_l^4`` of each column (or of one vector)."""
    if isinstance(vectors, Spectrum):
        vectors = vectors.eigenvectors
    u = np.asarray(vectors, dtype=float)
    return np.sum(u**4, axis=0)


def eigendecompose(C, method: str = "jacobi") -> Spectrum:
    """Full eigensystem of a correlation matrix.

    ``method="jacobi"`` uses the in-package rotation solver;
    ``method="lapack"`` defers to :func:`numpy.linalg.eigh`.  Eigenvectors are
    sign-normalized so their largest-magnitude component is non-negative.
    """
    labels = ()
    if isinstance(C, CorrMatrix):
        labels, C = C.labels, C.C
    C = np.asarray(C, dtype=float)
    if method == "jacobi":
        w, v = jacobi_eigh(C)
    elif method == "lapack":
        if not np.allclose(C, C.T, rtol=0, atol=1e-12):
            raise InputError("matrix is not symmetric")
        w, v = np.linalg.eigh(C)
    else:
        raise InputError(f"unknown eigensolver {method!r}")
    v = fix_signs(v)
    return Spectrum(w, v, ipr(v), labels)


def mean_abs_correlation(C: np.ndarray) -> np.ndarray:
    """``<|C|>_m``: mean absolute correlation of each index with the others."""
    C = np.asarray(C)
    n = C.shape[0]
    return (np.abs(C).sum(axis=1) - np.abs(np.diag(C))) / (n - 1)


def correlation_index(C: np.ndarray, top_vector: np.ndarray):
    """Return ``(CI, X, S)`` with ``X_m = u_m^2 S_m`` and ``CI = sum X_m``."""
    S = mean_abs_correlation(C)
    X = np.asarray(top_vector) ** 2 * S
    return float(X.sum()), X, S


@dataclass
class WindowTrace:
    window_index: int
    start_date: np.datetime64
    end_date: np.datetime64
    largest: tuple  # three largest eigenvalues, descending
    smallest: float
    ipr_last: float
    ci: float
    S: np.ndarray
    X: np.ndarray
    u_last: np.ndarray


def sliding_spectra(
    returns: ReturnPanel, T: int = 25, step: int = 25, method: str = "jacobi"
) -> list[WindowTrace]:
    """Eigen-dynamics over windows of ``T`` returns advancing by ``step``.

    Windows holding a constant series are skipped with a :class:`DataWarning`.
    """
    L = returns.length
    if T < 2 or T > L:
        raise InputError(f"window T={T} must lie in [2, {L}]")
    if step < 1:
        raise InputError("step must be >= 1")
    traces = []
    for k, t0 in enumerate(range(0, L - T + 1, step)):
        block = returns.R[:, t0 : t0 + T]
        try:
            C = correlation_from_returns(block)
        except NumericalError as exc:
            warnings.warn(f"window {k} skipped: {exc}", DataWarning, stacklevel=2)
            continue
        sp = eigendecompose(C, method)
        u = sp.top
        ci, X, S = correlation_index(C, u)
        lam = sp.eigenvalues
        traces.append(
            WindowTrace(
                k,
                returns.dates[t0],
                returns.dates[t0 + T - 1],
                tuple(float(x) for x in lam[::-1][:3]),
                float(lam[0]),
                float(sp.ipr[-1]),
                ci,
                S,
                X,
                u,
            )
        )
    return traces


@dataclass
class MpComparison:
    bin_edges: np.ndarray
    empirical: np.ndarray
    grid: np.ndarray
    theoretical: np.ndarray
    below: int
    inside: int
    above: int
    law: MpLaw

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def sup_deviation(self, relative: bool = False) -> float:
        """Largest gap between histogram heights and the law at bin centres."""
        dev = np.max(np.abs(self.empirical - mp_density(self.law, self.bin_centers)))
        if relative:
            dev /= np.max(mp_density(self.law, self.grid))
        return float(dev)


def mp_compare(spectra, law: MpLaw, bins: int = 30, grid_points: int = 512) -> MpComparison:
    """Histogram of pooled eigenvalues next to the Marchenko-Pastur curve."""
    if bins < 1:
        raise InputError("bins must be >= 1")
    if isinstance(spectra, Spectrum):
        spectra = [spectra]
    spectra = list(spectra)
    if not spectra:
        raise InputError("need at least one spectrum")
    lam = np.concatenate([np.asarray(s.eigenvalues) for s in spectra])
    lo, hi = float(lam.min()), float(lam.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(lam, bins=bins, range=(lo, hi))
    density = counts / (lam.size * np.diff(edges))
    g_lo = min(lo, law.lambda_min)
    g_hi = max(hi, law.lambda_max)
    grid = np.linspace(g_lo, g_hi, grid_points)
    below = int(np.sum(lam < law.lambda_min))
    above = int(np.sum(lam > law.lambda_max))
    return MpComparison(edges, density, grid, mp_density(law, grid), below, lam.size - below - above, above, law)
