"""End-to-end commands: each one reads the configured input, writes CSV figure
data under its own subdirectory of the output folder, and refreshes the run
manifest.  Timings go to ``timings.json``, which the manifest does not list,
so that manifests of identical runs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, graphnet, mfdfa, panel, spectra
from .config import FULL_PERIOD, RunConfig
from .errors import DataWarning, InputError

log = logging.getLogger(__name__)

FLOAT_FMT = "%.12g"
MANIFEST = "manifest.json"
TIMINGS = "timings.json"


def _slug(text) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", str(text)).strip("_")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_csv(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FMT, lineterminator="\n")
    return path


def _write_json(obj, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")
    return path


@contextmanager
def _timed(out: Path, name: str):
    t0 = time.perf_counter()
    yield
    path = out / TIMINGS
    data = json.loads(path.read_text()) if path.exists() else {}
    data[name] = round(time.perf_counter() - t0, 4)
    _write_json(data, path)


def write_manifest(out: Path, cfg: RunConfig) -> Path:
    """List every artifact under ``out`` with its SHA-256."""
    out = Path(out)
    files = sorted(
        p for p in out.rglob("*") if p.is_file() and p.name not in (MANIFEST, TIMINGS)
    )
    inp = Path(cfg.input.path)
    manifest = {
        "toolkit": "fincorr",
        "version": __version__,
        "config_sha256": cfg.digest(),
        "input": inp.name,
        "input_sha256": _sha256(inp) if inp.exists() else None,
        "rng": mfdfa.RNG_NAME.split(" (")[0],
        "artifacts": [{"path": p.relative_to(out).as_posix(), "sha256": _sha256(p)} for p in files],
    }
    return _write_json(manifest, out / MANIFEST)


# -- shared loading -------------------------------------------------------------


def load_panel(cfg: RunConfig):
    """Load and align the configured input; returns ``(PricePanel, warnings)``."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DataWarning)
        series = panel.load_raw(cfg.input.path, cfg.input.format)
    if cfg.input.labels:
        by_label = {s.label: s for s in series}
        missing = [lab for lab in cfg.input.labels if lab not in by_label]
        if missing:
            raise InputError(f"labels not found in input: {missing}")
        series = [by_label[lab] for lab in cfg.input.labels]
    aligned = panel.align(series, cfg.input.closed_fraction_max)
    return aligned, [str(w.message) for w in caught]


def period_returns(cfg: RunConfig, returns: panel.ReturnPanel, only: str | None = None) -> dict:
    """Named return sub-panels: every configured period plus the full sample."""
    spans = cfg.period_spans()
    names = list(spans) + [FULL_PERIOD]
    if only is not None:
        if only not in names:
            raise InputError(f"unknown period {only!r}; choose from {names}")
        names = [only]
    out = {}
    for name in names:
        out[name] = returns if name == FULL_PERIOD else returns.between(*spans[name])
    return out


def _derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0])


# -- commands -------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, out) -> dict:
    out = Path(out)
    with _timed(out, "ingest"):
        aligned, warns = load_panel(cfg)
        returns = panel.to_returns(aligned)
        d = out / "ingest"
        d.mkdir(parents=True, exist_ok=True)
        aligned.to_csv(d / "panel.csv")
        ret = pd.DataFrame(returns.R.T, columns=list(returns.labels))
        ret.insert(0, "date", returns.dates.astype(str))
        _write_csv(ret, d / "returns.csv")
        report = {
            "n_indices": aligned.n,
            "n_dates": int(aligned.dates.size),
            "n_returns": returns.length,
            "first_date": str(aligned.dates[0]),
            "last_date": str(aligned.dates[-1]),
            "removed_dates": [str(x) for x in aligned.removed_dates],
            "fill_counts": {lab: int(aligned.fill_mask[i].sum()) for i, lab in enumerate(aligned.labels)},
            "load_warnings": warns,
        }
        _write_json(report, d / "ingest_report.json")
    write_manifest(out, cfg)
    log.info("ingest: %d indices, %d dates, %d removed", aligned.n, aligned.dates.size, len(aligned.removed_dates))
    return report


def cmd_rmt(cfg: RunConfig, out, only_period: str | None = None) -> dict:
    out = Path(out)
    rc = cfg.rmt
    with _timed(out, "rmt"):
        aligned, _ = load_panel(cfg)
        returns = panel.to_returns(aligned)
        d = out / "rmt"
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DataWarning)
            traces = spectra.sliding_spectra(returns, rc.window, rc.step, rc.eigensolver)
        if not traces:
            raise InputError("no usable sliding windows")
        _write_csv(
            pd.DataFrame(
                {
                    "window": [t.window_index for t in traces],
                    "end_date": [str(t.end_date) for t in traces],
                    "l1": [t.largest[0] for t in traces],
                    "l2": [t.largest[1] for t in traces],
                    "l3": [t.largest[2] for t in traces],
                    "l_min": [t.smallest for t in traces],
                    "ipr_last": [t.ipr_last for t in traces],
                    "ci": [t.ci for t in traces],
                }
            ),
            d / "traces.csv",
        )
        rows = []
        for t in traces:
            for m, lab in enumerate(returns.labels):
                rows.append((t.window_index, str(t.end_date), lab, t.u_last[m], t.S[m], t.X[m]))
        _write_csv(pd.DataFrame(rows, columns=["window", "end_date", "label", "u_m", "S_m", "X_m"]), d / "traces_components.csv")

        mv = panel.mean_volatility(returns, rc.window)
        _write_csv(pd.DataFrame({"end_date": mv.end_dates.astype(str), "volatility": mv.values}), d / "mean_volatility.csv")

        summary = []
        for name, sub in period_returns(cfg, returns, only_period).items():
            pd_dir = d / _slug(name)
            C = spectra.correlation(sub)
            sp = spectra.eigendecompose(C, rc.eigensolver)
            law = spectra.mp_bounds(C.n, sub.length)
            cmp = spectra.mp_compare(sp, law, rc.bins)
            cdf = pd.DataFrame(C.C, columns=list(C.labels))
            cdf.insert(0, "label", list(C.labels))
            _write_csv(cdf, pd_dir / "correlation.csv")
            _write_csv(
                pd.DataFrame({"k": np.arange(1, C.n + 1), "eigenvalue": sp.eigenvalues, "ipr": sp.ipr}),
                pd_dir / "spectrum.csv",
            )
            ev = pd.DataFrame(sp.eigenvectors, columns=[f"u{k}" for k in range(1, C.n + 1)])
            ev.insert(0, "label", list(C.labels))
            _write_csv(ev, pd_dir / "eigenvectors.csv")
            _write_csv(pd.DataFrame({"lambda": cmp.bin_centers, "density": cmp.empirical}), pd_dir / "mp_empirical.csv")
            _write_csv(pd.DataFrame({"lambda": cmp.grid, "density": cmp.theoretical}), pd_dir / "mp_theoretical.csv")
            vols = [panel.volatility(sub, i, rc.window).values.mean() for i in range(sub.n)]
            _write_csv(pd.DataFrame({"label": list(sub.labels), "volatility": vols}), pd_dir / "volatility.csv")
            summary.append(
                {
                    "period": name,
                    "start": str(sub.dates[0]),
                    "end": str(sub.dates[-1]),
                    "N": C.n,
                    "L": sub.length,
                    "Q": law.Q,
                    "lambda_min_rand": law.lambda_min,
                    "lambda_max_rand": law.lambda_max,
                    "lambda_min_real": float(sp.eigenvalues[0]),
                    "lambda_max_real": float(sp.eigenvalues[-1]),
                    "mean_c": C.mean_offdiag(),
                    "mean_abs_c": C.mean_offdiag(absolute=True),
                    "below": cmp.below,
                    "inside": cmp.inside,
                    "above": cmp.above,
                }
            )
        _write_csv(pd.DataFrame(summary), d / "summary.csv")
        _write_json({"skipped_windows": [str(w.message) for w in caught]}, d / "rmt_report.json")
    write_manifest(out, cfg)
    return {"windows": len(traces), "periods": summary}


def cmd_network(cfg: RunConfig, out, only_period: str | None = None) -> dict:
    out = Path(out)
    with _timed(out, "network"):
        aligned, _ = load_panel(cfg)
        returns = panel.to_returns(aligned)
        d = out / "network"
        mats = {name: spectra.correlation(sub) for name, sub in period_returns(cfg, returns, only_period).items()}
        thetas = [float(t) for t in cfg.network.thetas]
        sweep = graphnet.theta_sweep(mats, thetas)
        metrics, detail = [], []
        for row in sweep:
            m = row["metrics"]
            metrics.append(
                {
                    "period": row["period"],
                    "theta": row["theta"],
                    "mean_degree": m.mean_degree,
                    "clustering": m.global_clustering,
                    "components": m.component_count,
                    "max_component": m.max_component_size,
                    "max_clique": m.max_clique_size,
                }
            )
            detail.append(
                {
                    "period": row["period"],
                    "theta": row["theta"],
                    "edges": m.n_edges,
                    "average_clustering": m.average_clustering,
                    "max_clique_members": ";".join(m.max_clique),
                    "components": "|".join(";".join(c) for c in m.components),
                }
            )
        _write_csv(pd.DataFrame(metrics), d / "metrics.csv")
        _write_csv(pd.DataFrame(detail), d / "metrics_detail.csv")
        msts = {}
        for name, C in mats.items():
            for th in thetas:
                g = graphnet.build_graph(C, th)
                e = [(C.labels[i], C.labels[j], C.C[i, j]) for i, j in g.edges()]
                _write_csv(
                    pd.DataFrame(e, columns=["source", "target", "weight"]),
                    d / f"edges_{_slug(name)}_theta{th:.2f}.csv",
                )
            tree = graphnet.mst_prim(graphnet.distance_matrix(C), C.labels)
            msts[name] = tree.total_weight
            _write_csv(pd.DataFrame(tree.label_edges(), columns=["source", "target", "weight"]), d / f"mst_{_slug(name)}.csv")
    write_manifest(out, cfg)
    return {"rows": len(metrics), "mst_total_weight": msts}


def cmd_mfdfa(cfg: RunConfig, out, only_period: str | None = None) -> dict:
    out = Path(out)
    mc = cfg.mfdfa
    q = mc.q_values()
    with _timed(out, "mfdfa"):
        aligned, _ = load_panel(cfg)
        returns = panel.to_returns(aligned)
        d = out / "mfdfa"
        a_grid = mfdfa.default_a_grid(mc.bmfm_step)
        result = {}
        for p_idx, (name, sub) in enumerate(period_returns(cfg, returns, only_period).items()):
            pdir = d / _slug(name)
            summary, table = [], []
            for i, lab in enumerate(sub.labels):
                conf = mfdfa.MfConfig(
                    q_values=q,
                    order=mc.order,
                    scales=tuple(mc.scales) or None,
                    s_fit_range=tuple(mc.fit_range) or None,
                    seed=_derived_seed(cfg.seed, p_idx, i),
                    iaaft_max_iter=mc.iaaft_max_iter,
                )
                rep = mfdfa.mf_report(sub.g[i], conf)
                for variant, curve in rep.curves().items():
                    summary.append({"label": lab, "variant": variant, "H": curve.H, "delta_h": curve.delta_h})
                    _write_csv(
                        pd.DataFrame({"q": curve.q_values, "h": curve.h, "r2": curve.r2}),
                        pdir / "hq" / f"{_slug(lab)}_{variant}.csv",
                    )
                    _write_csv(
                        pd.DataFrame(list(rep.tables[variant].rows()), columns=["s", "q", "F"]),
                        pdir / "fq" / f"{_slug(lab)}_{variant}.csv",
                    )
                fit = mfdfa.bmfm_fit(rep.original, a_grid, n_max=mc.bmfm_n_max, order=mc.order)
                vol = panel.volatility(sub, i, mc.volatility_window).values.mean()
                table.append(
                    {
                        "label": lab,
                        "dh_orig": rep.original.delta_h,
                        "dh_shuf": rep.shuffled.delta_h,
                        "dh_sur": rep.surrogate.delta_h,
                        "volatility": vol,
                        "bmfm_a": fit.a_best,
                        "bmfm_distance": fit.distance,
                        "bmfm_mirrored": fit.mirrored,
                        "iaaft_converged": rep.iaaft_converged,
                    }
                )
            _write_csv(pd.DataFrame(summary), pdir / "summary.csv")
            _write_csv(pd.DataFrame(table), pdir / "multifractality.csv")
            result[name] = table
    write_manifest(out, cfg)
    return result


def cmd_report(cfg: RunConfig, out) -> list:
    """Render figures next to the CSV outputs already present in ``out``."""
    from . import plotting

    out = Path(out)
    with _timed(out, "report"):
        written = plotting.render_all(out)
    write_manifest(out, cfg)
    return written


def cmd_demo(out, seed: int = 20080915, figures: bool = True) -> RunConfig:
    """Generate the synthetic demo panel and run every command on it."""
    from .demo import write_demo_csv

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    csv = out / "demo_prices.csv"
    write_demo_csv(csv, seed)
    cfg = RunConfig(seed=seed, out=".")
    cfg.input.path = csv.name
    cfg.save(out / "demo_config.toml")
    cfg.input.path = str(csv)
    cmd_ingest(cfg, out)
    cmd_rmt(cfg, out)
    cmd_network(cfg, out)
    cmd_mfdfa(cfg, out)
    if figures:
        cmd_report(cfg, out)
    return cfg
