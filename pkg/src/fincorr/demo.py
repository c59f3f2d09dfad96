"""Synthetic 20-index demo panel with planted regional structure.

Returns follow a one-global-factor plus one-regional-factor model, so
indices of the same region are more correlated with each other than with the
rest of the world.  A few indices additionally get a binomial-cascade
volatility envelope, which makes them visibly multifractal.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .mfdfa import BmfmParams, bmfm_generate

REGIONS = {
    "Americas": ["Argentina", "Brazil", "Mexico", "US"],
    "Europe": ["Austria", "France", "Germany", "Switzerland", "UK"],
    "Asia/Pacific": [
        "Australia", "Hong Kong", "India", "Indonesia", "Japan",
        "Malaysia", "Singapore", "South Korea", "Taiwan",
    ],
    "Africa/Middle East": ["Egypt", "Israel"],
}
LABELS = [lab for members in REGIONS.values() for lab in members]
REGION_OF = {lab: region for region, members in REGIONS.items() for lab in members}

# cascade parameter of the volatility envelope for the "irregular" markets
CASCADE_A = {"Egypt": 0.85, "Indonesia": 0.725, "Malaysia": 0.65, "Singapore": 0.675, "Taiwan": 0.6}

N_RETURNS = 3088
START_DATE = "1997-07-02"


def demo_returns(
    seed: int,
    n_returns: int = N_RETURNS,
    global_loading: float = 0.45,
    region_loading: float = 0.6,
) -> np.ndarray:
    """Log-return matrix (20 x n_returns) of the planted factor model."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(LABELS)
    region_names = list(REGIONS)
    f_global = rng.standard_normal(n_returns)
    f_region = rng.standard_normal((len(region_names), n_returns))
    idio = rng.standard_normal((n, n_returns))
    sigma = rng.uniform(0.009, 0.018, n)
    idio_w = np.sqrt(1.0 - global_loading**2 - region_loading**2)
    R = np.empty((n, n_returns))
    for i, lab in enumerate(LABELS):
        k = region_names.index(REGION_OF[lab])
        z = global_loading * f_global + region_loading * f_region[k] + idio_w * idio[i]
        R[i] = sigma[i] * z
        if lab in CASCADE_A:
            cascade = bmfm_generate(BmfmParams(CASCADE_A[lab], 12))
            env = np.sqrt(cascade.size * np.roll(cascade, rng.integers(cascade.size)))
            R[i] *= env[:n_returns]
    return R


def demo_frame(seed: int, n_returns: int = N_RETURNS, closure_rate: float = 0.01) -> pd.DataFrame:
    """Wide price table with occasional single-market closures (never > 30%)."""
    rng = np.random.Generator(np.random.PCG64([seed, 1]))
    R = demo_returns(seed, n_returns)
    prices = 1000.0 * np.exp(np.concatenate([np.zeros((R.shape[0], 1)), np.cumsum(R, axis=1)], axis=1))
    dates = pd.bdate_range(START_DATE, periods=n_returns + 1)
    closed = rng.random(prices.shape) < closure_rate
    closed[:, 0] = False
    # keep every date well inside the 30% rule
    too_many = closed.sum(axis=0) > 3
    closed[:, too_many] = False
    df = pd.DataFrame(np.round(prices.T, 6), columns=LABELS)
    df = df.astype(object)
    df[closed.T] = ""
    df.insert(0, "date", dates.strftime("%Y-%m-%d"))
    return df


def write_demo_csv(path, seed: int) -> None:
    demo_frame(seed).to_csv(path, index=False)
