"""Run configuration: a small TOML file with one table per pipeline stage.

Grammar (every key optional; defaults shown)::

    seed = 20080915            # unsigned 64-bit master seed
    out = "out"                # output directory

    [input]
    path = "prices.csv"        # wide or long closing-price CSV
    format = "auto"            # auto | wide | long
    closed_fraction_max = 0.3  # drop a date when more markets than this are closed
    labels = []                # optional subset of index labels, in order

    [periods]                  # name = [start, end), ISO dates, half-open
    before = ["2006-06-07", "2007-12-01"]
    during = ["2007-12-01", "2009-07-01"]
    allow_overlap = false      # reserved key, not a period

    [rmt]
    window = 25
    step = 25
    bins = 30
    eigensolver = "jacobi"     # jacobi | lapack

    [network]
    thetas = [0.0, 0.1, ..., 0.9]

    [mfdfa]
    q_min = -10.0
    q_max = 10.0
    q_step = 0.5
    order = 1
    scales = []                # empty: ~20 log-spaced scales in [16, N/4]
    fit_range = []             # [s_lo, s_hi] or empty for all scales
    iaaft_max_iter = 1000
    volatility_window = 25
    bmfm_n_max = 12
    bmfm_step = 0.0125
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InputError

DEFAULT_PERIODS = {
    "before": ("2006-06-07", "2007-12-01"),
    "during": ("2007-12-01", "2009-07-01"),
}
FULL_PERIOD = "full"


@dataclass
class InputConfig:
    path: str = "prices.csv"
    format: str = "auto"
    closed_fraction_max: float = 0.30
    labels: list = field(default_factory=list)


@dataclass
class RmtConfig:
    window: int = 25
    step: int = 25
    bins: int = 30
    eigensolver: str = "jacobi"


@dataclass
class NetworkConfig:
    thetas: list = field(default_factory=lambda: [round(0.1 * k, 1) for k in range(10)])


@dataclass
class MfdfaConfig:
    q_min: float = -10.0
    q_max: float = 10.0
    q_step: float = 0.5
    order: int = 1
    scales: list = field(default_factory=list)
    fit_range: list = field(default_factory=list)
    iaaft_max_iter: int = 1000
    volatility_window: int = 25
    bmfm_n_max: int = 12
    bmfm_step: float = 0.0125

    def q_values(self) -> tuple:
        n = int(round((self.q_max - self.q_min) / self.q_step))
        q = np.round(self.q_min + self.q_step * np.arange(n + 1), 10)
        return tuple(float(v) for v in q if v != 0)


@dataclass
class RunConfig:
    seed: int = 20080915
    out: str = "out"
    input: InputConfig = field(default_factory=InputConfig)
    periods: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_PERIODS.items()})
    allow_overlap: bool = False
    rmt: RmtConfig = field(default_factory=RmtConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    mfdfa: MfdfaConfig = field(default_factory=MfdfaConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be an unsigned 64-bit integer")
        if self.input.format not in ("auto", "wide", "long"):
            raise InputError(f"unknown input format {self.input.format!r}")
        spans = []
        for name, span in self.periods.items():
            if name == FULL_PERIOD:
                raise InputError(f"period name {FULL_PERIOD!r} is reserved")
            if len(span) != 2:
                raise InputError(f"period {name!r} needs [start, end]")
            try:
                a, b = (np.datetime64(str(d), "D") for d in span)
            except ValueError as exc:
                raise InputError(f"period {name!r}: {exc}") from exc
            if not a < b:
                raise InputError(f"period {name!r} is empty")
            spans.append((a, b, name))
        if not self.allow_overlap:
            spans.sort()
            for (a1, b1, n1), (a2, b2, n2) in zip(spans, spans[1:]):
                if a2 < b1:
                    raise InputError(f"periods {n1!r} and {n2!r} overlap")
        if self.rmt.eigensolver not in ("jacobi", "lapack"):
            raise InputError(f"unknown eigensolver {self.rmt.eigensolver!r}")
        if self.mfdfa.order not in (1, 2, 3):
            raise InputError("detrending order must be 1, 2 or 3")
        if self.mfdfa.fit_range and len(self.mfdfa.fit_range) != 2:
            raise InputError("fit_range must be [s_lo, s_hi]")

    def period_spans(self) -> dict:
        return {k: (str(v[0]), str(v[1])) for k, v in self.periods.items()}

    def to_dict(self) -> dict:
        d = asdict(self)
        periods = {k: [str(x) for x in v] for k, v in d.pop("periods").items()}
        periods["allow_overlap"] = d.pop("allow_overlap")
        d["periods"] = periods
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        periods = dict(d.pop("periods", {k: list(v) for k, v in DEFAULT_PERIODS.items()}))
        allow = bool(periods.pop("allow_overlap", d.pop("allow_overlap", False)))
        sections = {"input": InputConfig, "rmt": RmtConfig, "network": NetworkConfig, "mfdfa": MfdfaConfig}
        kw = {}
        for key, typ in sections.items():
            sub = d.pop(key, {})
            names = {f.name for f in fields(typ)}
            bad = set(sub) - names
            if bad:
                raise InputError(f"unknown keys in [{key}]: {sorted(bad)}")
            kw[key] = typ(**sub)
        return cls(periods={k: [str(x) for x in v] for k, v in periods.items()}, allow_overlap=allow, **kw, **d)

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.dumps())
        return path

    def digest(self) -> str:
        """Hash of the analysis settings; location-independent (the input is
        identified by file name here and by content in the manifest)."""
        d = self.to_dict()
        d.pop("out")
        d["input"]["path"] = Path(d["input"]["path"]).name
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def loads(text: str) -> RunConfig:
    try:
        return RunConfig.from_dict(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"bad config: {exc}") from exc
    except TypeError as exc:
        raise InputError(f"bad config: {exc}") from exc


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    cfg = loads(text)
    # relative input paths are resolved against the config file's directory
    if not Path(cfg.input.path).is_absolute():
        cfg.input.path = str((path.parent / cfg.input.path).resolve())
    return cfg
