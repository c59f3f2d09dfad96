"""Multifractal detrended fluctuation analysis with surrogate baselines.

The pipeline is profile -> per-segment detrended variances (both ends of the
series) -> q-order generalized means -> log-log slopes h(q).  Shuffled and
IAAFT surrogates separate correlation-driven from distribution-driven
multifractality, and the binomial multifractal model (BMFM) gives a
one-parameter reference family with known exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InputError, NumericalError

#: Generator used for every seeded routine in this module.
RNG_NAME = f"numpy.random.PCG64 (numpy {np.__version__})"

DEFAULT_Q = tuple(float(q) for q in np.arange(-10.0, 10.5, 0.5) if q != 0)

MIN_SERIES_LENGTH = 16
UNRELIABLE_FRACTION = 0.01


def _as_series(g) -> np.ndarray:
    x = np.asarray(g, dtype=float)
    if x.ndim != 1:
        raise InputError("series must be one-dimensional")
    if not np.all(np.isfinite(x)):
        raise InputError("series contains non-finite values")
    return x


def profile(g) -> np.ndarray:
    """Cumulative sum of the mean-centred series, ``Y(i) = sum_{k<=i} (g_k - <g>)``."""
    x = _as_series(g)
    if x.size < MIN_SERIES_LENGTH:
        raise InputError(f"series length {x.size} < {MIN_SERIES_LENGTH}")
    if np.ptp(x) == 0:
        raise NumericalError("constant series has an identically zero profile")
    # correctly rounded mean keeps the final partial sum at rounding level
    return np.cumsum(x - math.fsum(x) / x.size)


def default_scales(n: int, order: int = 1, n_scales: int = 20) -> np.ndarray:
    """Log-spaced integer scales in ``[max(order+2, 16), n//4]``."""
    lo = max(order + 2, 16)
    hi = n // 4
    if hi < lo:
        raise InputError(f"series length {n} too short for scales >= {lo}")
    s = np.unique(np.round(np.geomspace(lo, hi, n_scales)).astype(int))
    return s


@lru_cache(maxsize=256)
def _trend_basis(s: int, order: int) -> np.ndarray:
    # orthonormal basis of polynomials of degree <= order sampled on s points
    x = np.linspace(-1.0, 1.0, s)
    q, _ = np.linalg.qr(np.vander(x, order + 1, increasing=True))
    return q


def segment_variances(Y, s: int, order: int = 1) -> np.ndarray:
    """Detrended variance of each of the ``2*N_s`` segments of length ``s``.

    The first ``N_s`` entries come from segments laid from the start of the
    profile, the last ``N_s`` from segments laid from its end (segment
    ``N_s+1`` is the final ``s`` points).  Variances below rounding level are
    returned as exact zeros.
    """
    y = np.asarray(Y, dtype=float)
    n = y.size
    s = int(s)
    if s < order + 2:
        raise InputError(f"scale {s} < order + 2 = {order + 2}")
    if s > n // 4:
        raise InputError(f"scale {s} > N/4 = {n // 4}")
    ns = n // s
    fwd = y[: ns * s].reshape(ns, s)
    bwd = y[n - ns * s :].reshape(ns, s)[::-1]
    segs = np.vstack([fwd, bwd])
    basis = _trend_basis(s, order)
    resid = segs - (segs @ basis) @ basis.T
    var = np.mean(resid**2, axis=1)
    floor = (1e-12 * max(np.abs(y).max(), 1e-300)) ** 2
    var[var < floor] = 0.0
    return var


@dataclass
class FluctuationTable:
    scales: np.ndarray
    q_values: np.ndarray
    F: np.ndarray  # shape (len(q_values), len(scales))
    excluded: np.ndarray  # zero-variance segments dropped per (q, s)
    n_segments: np.ndarray  # 2*N_s per scale
    unreliable: np.ndarray  # per q row

    def rows(self):
        """Yield ``(s, q, F)`` triples in long format."""
        for j, s in enumerate(self.scales):
            for i, q in enumerate(self.q_values):
                yield int(s), float(q), float(self.F[i, j])


def fluctuation(
    variances: Mapping[int, np.ndarray],
    q_values: Sequence[float] = DEFAULT_Q,
    include_zero: bool = False,
) -> FluctuationTable:
    """q-order fluctuation functions from per-scale segment variances.

    ``F_q(s) = (mean_nu F2(s,nu)^(q/2))^(1/q)``, evaluated in log space so
    that ``|q|`` up to tens stays finite.  With ``include_zero`` a ``q = 0``
    row is added using the logarithmic average ``exp(mean(ln F2) / 2)``.

    Segments with zero variance cannot enter a negative-q mean; they are
    dropped and counted, and a q row loses reliability once more than 1% of
    its segments were dropped.
    """
    scales = np.array(sorted(variances), dtype=int)
    q = np.array([float(v) for v in q_values], dtype=float)
    if np.any(q == 0):
        raise InputError("q = 0 is not a valid order; use include_zero=True")
    if include_zero:
        q = np.sort(np.append(q, 0.0))
    F = np.empty((q.size, scales.size))
    excluded = np.zeros((q.size, scales.size), dtype=int)
    nseg = np.empty(scales.size, dtype=int)
    for j, s in enumerate(scales):
        f2 = np.asarray(variances[s], dtype=float)
        if np.any(f2 < 0):
            raise InputError(f"negative variance at scale {s}")
        nseg[j] = f2.size
        zero = f2 == 0
        with np.errstate(divide="ignore"):
            logf2 = np.log(f2)
        for i, qi in enumerate(q):
            if qi < 0 or qi == 0:
                keep = logf2[~zero]
                excluded[i, j] = int(zero.sum())
            else:
                keep = logf2
            if keep.size == 0:
                F[i, j] = np.nan if qi <= 0 else 0.0
                continue
            if qi == 0:
                F[i, j] = np.exp(0.5 * keep.mean())
            else:
                lm = logsumexp(0.5 * qi * keep) - np.log(keep.size)
                F[i, j] = np.exp(lm / qi)
    unreliable = excluded.sum(axis=1) > UNRELIABLE_FRACTION * nseg.sum()
    return FluctuationTable(scales, q, F, excluded, nseg, unreliable)


def fluctuation_table(g, scales=None, q_values=DEFAULT_Q, order: int = 1, include_zero=False):
    """Run profile, segmentation and averaging on a raw series."""
    y = profile(g)
    if scales is None:
        scales = default_scales(y.size, order)
    var = {int(s): segment_variances(y, int(s), order) for s in scales}
    return fluctuation(var, q_values, include_zero=include_zero)


@dataclass
class HqCurve:
    q_values: np.ndarray
    h: np.ndarray
    r2: np.ndarray
    H: float
    delta_h: float
    variant: str = "original"

    def at(self, q: float) -> float:
        idx = np.flatnonzero(np.isclose(self.q_values, q))
        if idx.size == 0:
            raise KeyError(q)
        return float(self.h[idx[0]])


def fit_hq(table: FluctuationTable, s_fit_range=None, variant: str = "original") -> HqCurve:
    """Least-squares slopes of ``log F_q(s)`` against ``log s``.

    ``H`` is ``h(2)`` (NaN if 2 is not on the grid); ``delta_h`` is
    ``h(q_min) - h(q_max)`` over the nonzero q values.
    """
    s = table.scales.astype(float)
    mask = np.ones(s.size, dtype=bool)
    if s_fit_range is not None:
        lo, hi = s_fit_range
        mask = (s >= lo) & (s <= hi)
    if mask.sum() < 4:
        raise InputError("need at least 4 scales inside the fit range")
    x = np.log(s[mask])
    if np.ptp(x) == 0:
        raise NumericalError("degenerate fit: all scales equal")
    h = np.full(table.q_values.size, np.nan)
    r2 = np.full(table.q_values.size, np.nan)
    for i in range(table.q_values.size):
        f = table.F[i, mask]
        if not np.all(np.isfinite(f) & (f > 0)):
            continue
        y = np.log(f)
        slope, icpt = np.polyfit(x, y, 1)
        h[i] = slope
        ss_res = np.sum((y - (slope * x + icpt)) ** 2)
        ss_tot = np.sum((y - y.mean()) ** 2)
        r2[i] = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    nz = table.q_values != 0
    qv, hv = table.q_values[nz], h[nz]
    H = float(hv[np.isclose(qv, 2.0)][0]) if np.any(np.isclose(qv, 2.0)) else float("nan")
    delta_h = float(hv[np.argmin(qv)] - hv[np.argmax(qv)])
    return HqCurve(table.q_values.copy(), h, r2, H, delta_h, variant)


def mfdfa(g, q_values=DEFAULT_Q, scales=None, order: int = 1, s_fit_range=None, variant="original"):
    """Convenience wrapper returning ``(FluctuationTable, HqCurve)``."""
    table = fluctuation_table(g, scales, q_values, order)
    return table, fit_hq(table, s_fit_range, variant)


# -- surrogates -------------------------------------------------------------


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def shuffle(g, seed: int) -> np.ndarray:
    """Seeded random permutation (Fisher-Yates) of the series."""
    x = _as_series(g)
    return x[_rng(seed).permutation(x.size)]


@dataclass(frozen=True)
class SurrogateSpec:
    kind: str = "iaaft"
    seed: int = 0
    iaaft_max_iter: int = 1000
    iaaft_tol: float = 0.0

    def __post_init__(self):
        if self.kind not in ("shuffle", "iaaft"):
            raise InputError(f"unknown surrogate kind {self.kind!r}")
        if self.seed < 0:
            raise InputError("seed must be non-negative")


@dataclass
class IaaftResult:
    series: np.ndarray
    converged: bool
    iterations: int
    spectral_error: float


def _spectral_error(x, target_amp):
    amp = np.abs(np.fft.rfft(x))
    return float(np.sqrt(np.mean((amp - target_amp) ** 2)) / np.sqrt(np.mean(target_amp**2)))


def iaaft(g, spec: SurrogateSpec | None = None) -> IaaftResult:
    """Iterated amplitude-adjusted Fourier transform surrogate.

    Alternates Fourier-magnitude replacement with rank remapping onto the
    sorted original values until the rank order stops changing (or the
    spectral mismatch drops below ``iaaft_tol``).  The returned series is
    always a rank-remapped iterate, so its values are an exact permutation
    of the input.
    """
    spec = spec or SurrogateSpec()
    x = _as_series(g)
    if x.size < 32:
        raise InputError("IAAFT needs at least 32 samples")
    if np.ptp(x) == 0:
        return IaaftResult(x.copy(), True, 0, 0.0)
    target_amp = np.abs(np.fft.rfft(x))
    sorted_x = np.sort(x, kind="stable")
    surr = shuffle(x, spec.seed)
    ranks = np.argsort(np.argsort(surr, kind="stable"), kind="stable")
    best, best_err = surr, _spectral_error(surr, target_amp)
    converged = False
    it = 0
    for it in range(1, spec.iaaft_max_iter + 1):
        spectrum = np.fft.rfft(surr)
        phase = np.exp(1j * np.angle(spectrum))
        filtered = np.fft.irfft(target_amp * phase, n=x.size)
        new_ranks = np.argsort(np.argsort(filtered, kind="stable"), kind="stable")
        surr = sorted_x[new_ranks]
        err = _spectral_error(surr, target_amp)
        if err < best_err:
            best, best_err = surr, err
        if np.array_equal(new_ranks, ranks) or err <= spec.iaaft_tol:
            converged = True
            best, best_err = surr, err
            break
        ranks = new_ranks
    return IaaftResult(best, converged, it, best_err)


def surrogate(g, spec: SurrogateSpec) -> np.ndarray:
    if spec.kind == "shuffle":
        return shuffle(g, spec.seed)
    return iaaft(g, spec).series


# -- binomial multifractal model --------------------------------------------


def popcount(k) -> np.ndarray | int:
    """Number of ones in the binary representation of ``k``."""
    if np.isscalar(k):
        return bin(int(k)).count("1")
    return np.bitwise_count(np.asarray(k, dtype=np.uint64)).astype(int)


@dataclass(frozen=True)
class BmfmParams:
    a: float
    n_max: int = 12

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise InputError("BMFM parameter a must lie in (0, 1)")
        if self.n_max < 4:
            raise InputError("n_max must be >= 4")

    @property
    def length(self) -> int:
        return 2**self.n_max


def bmfm_generate(params: BmfmParams) -> np.ndarray:
    """``x_k = a^n(k-1) (1-a)^(n_max - n(k-1))`` for ``k = 1..2^n_max``."""
    n = popcount(np.arange(params.length))
    return params.a**n * (1.0 - params.a) ** (params.n_max - n)


def bmfm_hq_analytic(q, a: float) -> np.ndarray:
    """Generalized Hurst exponents of the binomial cascade."""
    q = np.asarray(q, dtype=float)
    lq = np.logaddexp(q * np.log(a), q * np.log1p(-a))
    return 1.0 / q - lq / (q * np.log(2.0))


@lru_cache(maxsize=512)
def _bmfm_hq(a: float, n_max: int, q_values: tuple, order: int, scales: tuple | None) -> np.ndarray:
    x = bmfm_generate(BmfmParams(a, n_max))
    _, curve = mfdfa(x, q_values, None if scales is None else np.array(scales), order)
    return curve.h


def default_a_grid(step: float = 0.0125) -> np.ndarray:
    """Grid over (0, 1) without 0.5 (where the model is flat)."""
    k = np.arange(1, int(round(1.0 / step)))
    grid = np.round(k * step, 10)
    return grid[~np.isclose(grid, 0.5)]


@dataclass
class BmfmFit:
    a_best: float
    distance: float
    candidates: list = field(default_factory=list)  # all a within tie tolerance
    mirrored: bool = False  # True when 1 - a_best also ties
    distances: np.ndarray | None = None


def bmfm_fit(
    target: HqCurve,
    a_grid=None,
    n_max: int = 12,
    order: int = 1,
    scales=None,
    refine: bool = False,
    tie_tol: float = 1e-3,
) -> BmfmFit:
    """Pick the cascade parameter whose MF-DFA h(q) is closest (RMS) to ``target``.

    The model is scanned on ``a_grid`` with the same q grid as ``target``.
    Because a series and its ``1 - a`` mirror are reversals of each other,
    near-equal distances are expected; every grid point within ``tie_tol``
    of the best distance is reported in ``candidates``.
    """
    grid = default_a_grid() if a_grid is None else np.asarray(a_grid, dtype=float)
    if grid.size == 0:
        raise InputError("empty a grid")
    q_key = tuple(float(v) for v in target.q_values)
    s_key = None if scales is None else tuple(int(s) for s in scales)
    ok = np.isfinite(target.h)

    def dist(a):
        h = _bmfm_hq(float(a), n_max, q_key, order, s_key)
        m = ok & np.isfinite(h)
        return float(np.sqrt(np.mean((h[m] - target.h[m]) ** 2)))

    d = np.array([dist(a) for a in grid])
    i = int(np.argmin(d))
    a_best, d_best = float(grid[i]), float(d[i])
    if refine and grid.size > 2:
        from scipy.optimize import minimize_scalar

        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(dist, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4})
        if res.fun < d_best:
            a_best, d_best = float(res.x), float(res.fun)
    ties = [float(a) for a, v in zip(grid, d) if v - d_best <= tie_tol]
    mirrored = any(np.isclose(t, 1.0 - a_best, atol=1e-9) for t in ties)
    return BmfmFit(a_best, d_best, ties, mirrored, d)


# -- report -------------------------------------------------------------------


@dataclass
class MfConfig:
    q_values: tuple = DEFAULT_Q
    order: int = 1
    scales: tuple | None = None
    s_fit_range: tuple | None = None
    seed: int = 0
    iaaft_max_iter: int = 1000
    iaaft_tol: float = 0.0


@dataclass
class MfReport:
    original: HqCurve
    shuffled: HqCurve
    surrogate: HqCurve
    tables: dict
    iaaft_converged: bool
    iaaft_iterations: int
    rng: str = RNG_NAME

    def curves(self):
        return {"original": self.original, "shuffled": self.shuffled, "surrogate": self.surrogate}


def mf_report(g, config: MfConfig | None = None) -> MfReport:
    """MF-DFA of a series, its shuffle and its IAAFT surrogate on shared settings."""
    config = config or MfConfig()
    x = _as_series(g)
    if x.size < 256:
        raise InputError(f"series length {x.size} < 256")
    scales = config.scales
    if scales is None:
        scales = default_scales(x.size, config.order)
    scales = np.asarray(scales, dtype=int)
    sur = iaaft(x, SurrogateSpec("iaaft", config.seed, config.iaaft_max_iter, config.iaaft_tol))
    variants = {
        "original": x,
        "shuffled": shuffle(x, config.seed),
        "surrogate": sur.series,
    }
    curves, tables = {}, {}
    for name, series in variants.items():
        t, c = mfdfa(series, config.q_values, scales, config.order, config.s_fit_range, name)
        tables[name] = t
        curves[name] = c
    return MfReport(
        curves["original"],
        curves["shuffled"],
        curves["surrogate"],
        tables,
        sur.converged,
        sur.iterations,
    )
