"""Price ingestion, calendar alignment, returns and volatility.

Markets trade on different calendars.  Alignment works on the union of all
observed dates: a date is dropped when more than ``closed_fraction_max`` of
the markets have no quote for it; otherwise each missing quote is filled with
that market's previous retained close and flagged in ``fill_mask``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataWarning, InputError, NumericalError


def _to_days(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


@dataclass(frozen=True, eq=False)
class RawSeries:
    label: str
    dates: np.ndarray
    closes: np.ndarray

    def __post_init__(self):
        d = _to_days(self.dates)
        c = np.asarray(self.closes, dtype=float)
        if d.shape != c.shape:
            raise InputError(f"{self.label}: dates and closes differ in length")
        if d.size > 1 and np.any(np.diff(d) <= np.timedelta64(0, "D")):
            raise InputError(f"{self.label}: dates must be strictly increasing")
        if np.any(~np.isfinite(c)) or np.any(c <= 0):
            raise InputError(f"{self.label}: closes must be finite and positive")
        object.__setattr__(self, "dates", d)
        object.__setattr__(self, "closes", c)

    def __len__(self):
        return self.dates.size

    def __eq__(self, other):
        if not isinstance(other, RawSeries):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.closes, other.closes)
        )


def _parse_closes(label, dates, values):
    """Turn raw strings into a RawSeries, warning about unusable rows."""
    keep_d, keep_c, bad = [], [], []
    for d, v in zip(dates, values):
        v = v.strip()
        if v == "":
            continue  # market closed
        try:
            x = float(v)
        except ValueError:
            bad.append(d)
            continue
        if not np.isfinite(x) or x <= 0:
            bad.append(d)
            continue
        keep_d.append(d)
        keep_c.append(x)
    if bad:
        warnings.warn(
            f"{label}: dropped {len(bad)} row(s) with unusable close "
            f"(first: {bad[0]})",
            DataWarning,
            stacklevel=3,
        )
    if not keep_d:
        return None
    d = _to_days(keep_d)
    c = np.asarray(keep_c)
    order = np.argsort(d, kind="stable")
    return RawSeries(label, d[order], c[order])


def load_raw(path, format: str = "auto") -> list[RawSeries]:
    """Read closing prices from a wide or long CSV file.

    Wide files have a ``date`` column followed by one column per index;
    an empty cell means the market was closed.  Long files have the columns
    ``date,label,close``.  ``format="auto"`` picks long when the header is
    exactly that triple.
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    cols = [c.strip() for c in df.columns]
    df.columns = cols
    if format == "auto":
        format = "long" if cols == ["date", "label", "close"] else "wide"
    if not cols or cols[0] != "date":
        raise InputError(f"{path}: first column must be 'date'")
    try:
        dates = list(_to_days(df["date"].str.strip()).astype(str))
    except ValueError as exc:
        raise InputError(f"{path}: bad date: {exc}") from exc

    out = []
    if format == "wide":
        if len(set(cols)) != len(cols):
            raise InputError(f"{path}: duplicate column labels")
        if len(set(dates)) != len(dates):
            dup = pd.Series(dates)[pd.Series(dates).duplicated()].iloc[0]
            raise InputError(f"{path}: duplicate date {dup}")
        for label in cols[1:]:
            s = _parse_closes(label, dates, df[label].tolist())
            if s is not None:
                out.append(s)
    elif format == "long":
        if cols != ["date", "label", "close"]:
            raise InputError(f"{path}: long format needs header date,label,close")
        df["date"] = dates
        df["label"] = df["label"].str.strip()
        dup = df.duplicated(["label", "date"])
        if dup.any():
            row = df[dup].iloc[0]
            raise InputError(f"{path}: duplicate pair ({row['label']}, {row['date']})")
        for label in pd.unique(df["label"]):
            sub = df[df["label"] == label]
            s = _parse_closes(label, sub["date"].tolist(), sub["close"].tolist())
            if s is not None:
                out.append(s)
    else:
        raise InputError(f"unknown format {format!r}")
    if not out:
        raise InputError(f"{path}: no parsable series")
    return out


@dataclass(eq=False)
class PricePanel:
    labels: tuple
    dates: np.ndarray  # (L+1,) datetime64[D]
    prices: np.ndarray  # (N, L+1)
    fill_mask: np.ndarray  # (N, L+1) bool
    removed_dates: np.ndarray = field(default_factory=lambda: np.array([], dtype="datetime64[D]"))

    @property
    def n(self) -> int:
        return len(self.labels)

    def to_series(self) -> list[RawSeries]:
        return [RawSeries(lab, self.dates, self.prices[i]) for i, lab in enumerate(self.labels)]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.prices.T, columns=list(self.labels))
        df.insert(0, "date", self.dates.astype(str))
        return df

    def to_csv(self, path) -> tuple[Path, Path]:
        """Write the wide price file and its ``.mask.csv`` sibling."""
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.10g")
        mask = pd.DataFrame(self.fill_mask.T.astype(int), columns=list(self.labels))
        mask.insert(0, "date", self.dates.astype(str))
        mpath = path.with_name(path.stem + ".mask.csv")
        mask.to_csv(mpath, index=False)
        return path, mpath


def read_panel(path) -> PricePanel:
    """Load a panel written by :meth:`PricePanel.to_csv` (mask optional)."""
    path = Path(path)
    series = load_raw(path, "wide")
    panel = align(series, closed_fraction_max=0.0)
    mpath = path.with_name(path.stem + ".mask.csv")
    if mpath.exists():
        m = pd.read_csv(mpath)
        panel.fill_mask = m[list(panel.labels)].to_numpy().T.astype(bool)
    return panel


def align(series: list[RawSeries], closed_fraction_max: float = 0.30) -> PricePanel:
    """Align per-market series onto a shared trading calendar.

    A union date is removed when strictly more than ``closed_fraction_max``
    of markets have no quote on it; dates before a market's first quote count
    as closed for it.  On retained dates, gaps take the previous retained
    close.
    """
    if len(series) < 2:
        raise InputError("need at least two series to align")
    labels = tuple(s.label for s in series)
    if len(set(labels)) != len(labels):
        raise InputError("duplicate series labels")
    union = np.unique(np.concatenate([s.dates for s in series]))
    if union.size == 0:
        raise InputError("empty union calendar")
    n = len(series)
    obs = np.full((n, union.size), np.nan)
    for i, s in enumerate(series):
        obs[i, np.searchsorted(union, s.dates)] = s.closes
    closed = np.isnan(obs).sum(axis=0)
    keep = closed <= closed_fraction_max * n + 1e-9
    kept = obs[:, keep]
    for i, lab in enumerate(labels):
        if np.all(np.isnan(kept[i])):
            raise InputError(f"{lab}: no observations left after alignment")
    missing = np.isnan(kept)
    filled = pd.DataFrame(kept.T).ffill().to_numpy().T
    if np.isnan(filled).any():
        i, j = np.argwhere(np.isnan(filled))[0]
        raise InputError(
            f"{labels[i]}: no prior close to carry forward on {union[keep][j]}"
        )
    return PricePanel(labels, union[keep], filled, missing, union[~keep])


@dataclass(eq=False)
class ReturnPanel:
    labels: tuple
    dates: np.ndarray  # (L,) date of the closing price ending each return
    R: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    r: np.ndarray
    g: np.ndarray

    @classmethod
    def from_log_returns(cls, labels, dates, R) -> "ReturnPanel":
        R = np.asarray(R, dtype=float)
        mu = R.mean(axis=1)
        # population standard deviation
        sigma = np.sqrt(np.mean((R - mu[:, None]) ** 2, axis=1))
        scale = np.abs(R).max(axis=1)
        degenerate = (sigma <= 1e-12 * scale) | (scale == 0)
        if degenerate.any():
            bad = [labels[i] for i in np.flatnonzero(degenerate)]
            raise NumericalError(f"constant returns (sigma = 0) for {bad}")
        r = (R - mu[:, None]) / sigma[:, None]
        g = R / sigma[:, None]
        return cls(tuple(labels), _to_days(dates), R, mu, sigma, r, g)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def length(self) -> int:
        return self.R.shape[1]

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"unknown index label {label!r}") from None

    def between(self, start=None, end=None) -> "ReturnPanel":
        """Sub-panel on the half-open date range ``[start, end)``, renormalized."""
        sel = np.ones(self.length, dtype=bool)
        if start is not None:
            sel &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            sel &= self.dates < np.datetime64(end, "D")
        if sel.sum() < 2:
            raise InputError(f"period [{start}, {end}) holds fewer than 2 returns")
        return ReturnPanel.from_log_returns(self.labels, self.dates[sel], self.R[:, sel])


def to_returns(panel: PricePanel) -> ReturnPanel:
    """Log returns, normalized returns and sigma-scaled returns of a panel."""
    if panel.prices.shape[1] < 3:
        raise InputError("need at least 3 dates to form returns")
    R = np.diff(np.log(panel.prices), axis=1)
    return ReturnPanel.from_log_returns(panel.labels, panel.dates[1:], R)


@dataclass
class VolatilitySeries:
    label: str
    window_T: int
    end_dates: np.ndarray
    values: np.ndarray

    def __len__(self):
        return self.values.size


def _window_starts(length: int, T: int, step: int) -> np.ndarray:
    if T < 2:
        raise InputError("window T must be >= 2")
    if step < 1:
        raise InputError("step must be >= 1")
    if T > length:
        raise InputError(f"window T={T} exceeds series length {length}")
    return np.arange(0, length - T + 1, step)


def _abs_window_sums(x: np.ndarray, T: int, starts: np.ndarray) -> np.ndarray:
    # left-to-right accumulation, same rounding as a plain loop over the window
    a = np.abs(x)
    acc = np.zeros(x.shape[:-1] + (starts.size,))
    for k in range(T):
        acc += a[..., starts + k]
    return acc


def volatility(returns: ReturnPanel, index, T: int = 25, step: int | None = None) -> VolatilitySeries:
    """Windowed volatility ``sum |R| / (T - 1)`` of one index.

    Windows hold ``T`` returns and advance by ``step`` (default ``T``, i.e.
    disjoint blocks).
    """
    step = T if step is None else step
    i = returns.index(index) if isinstance(index, str) else int(index)
    starts = _window_starts(returns.length, T, step)
    v = _abs_window_sums(returns.R[i], T, starts) / (T - 1)
    return VolatilitySeries(returns.labels[i], T, returns.dates[starts + T - 1], v)


def mean_volatility(returns: ReturnPanel, T: int = 25, step: int | None = None) -> VolatilitySeries:
    """Cross-sectional average of per-index windowed volatility."""
    step = T if step is None else step
    starts = _window_starts(returns.length, T, step)
    v = _abs_window_sums(returns.R, T, starts) / (T - 1)
    return VolatilitySeries("mean", T, returns.dates[starts + T - 1], v.mean(axis=0))
