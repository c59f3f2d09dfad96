"""Figures rendered from the CSV outputs of the pipeline commands.

Every figure reads only files already on disk, so ``fincorr report`` can be
re-run on an old output folder.  PNGs are written next to the CSVs they
visualize.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .pipeline import _slug  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
# fixed PNG metadata keeps reruns byte-identical
PNG_META = {"Software": "fincorr"}


def new_figure(width=6.4, height=None, nrows=1, ncols=1, **kw):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    height = height or width * golden
    with plt.rc_context(STYLE):
        return plt.subplots(nrows, ncols, figsize=(width, height), **kw)


def save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)
    return path


def _periods(base: Path):
    return sorted(p.name for p in base.iterdir() if p.is_dir()) if base.exists() else []


def plot_prices_returns(out: Path) -> list:
    d = out / "ingest"
    if not (d / "panel.csv").exists():
        return []
    prices = pd.read_csv(d / "panel.csv", parse_dates=["date"])
    rets = pd.read_csv(d / "returns.csv", parse_dates=["date"])
    fig, (a1, a2) = new_figure(7.5, 5.5, nrows=2, sharex=True)
    for col in prices.columns[1:]:
        a1.plot(prices["date"], prices[col], lw=0.5)
        a2.plot(rets["date"], rets[col], lw=0.3)
    a1.set_yscale("log")
    a1.set_ylabel("closing price")
    a2.set_ylabel("log return")
    return [save(fig, d / "prices_returns.png")]


def plot_rmt(out: Path) -> list:
    d = out / "rmt"
    if not (d / "traces.csv").exists():
        return []
    written = []
    tr = pd.read_csv(d / "traces.csv", parse_dates=["end_date"])

    fig, ax = new_figure()
    for col, lab in (("l1", "largest"), ("l2", "2nd largest"), ("l3", "3rd largest")):
        ax.plot(tr["end_date"], tr[col], lw=0.8, label=lab)
    ax.set_ylabel("eigenvalue")
    ax.legend()
    written.append(save(fig, d / "largest_eigenvalues.png"))

    fig, ax = new_figure()
    ax.plot(tr["end_date"], tr["l_min"], lw=0.8, color="k")
    ax.set_ylabel("smallest eigenvalue")
    written.append(save(fig, d / "smallest_eigenvalues.png"))

    comp = pd.read_csv(d / "traces_components.csv")
    n = comp["label"].nunique()
    fig, ax = new_figure()
    ax.plot(tr["end_date"], tr["ipr_last"], lw=0.8)
    ax.axhline(1.0 / n, ls="--", color="gray")
    ax.set_ylabel("IPR of top eigenvector")
    written.append(save(fig, d / "ipr_top.png"))

    fig, ax = new_figure()
    ax.plot(tr["end_date"], tr["ci"], lw=0.8, color="C3")
    ax.set_ylabel("correlation index")
    written.append(save(fig, d / "correlation_index.png"))

    fig, ax = new_figure()
    u = comp["u_m"].to_numpy()
    s = comp["S_m"].to_numpy()
    ax.scatter(s, u, s=3, alpha=0.4)
    slope, icpt = np.polyfit(s, u, 1)
    xs = np.linspace(s.min(), s.max(), 2)
    ax.plot(xs, slope * xs + icpt, color="k", lw=1, label=f"slope = {slope:.4f}")
    ax.set_xlabel(r"$\langle|C|\rangle_m$")
    ax.set_ylabel("top eigenvector component")
    ax.legend()
    written.append(save(fig, d / "top_vector_vs_mean_corr.png"))

    mv = pd.read_csv(d / "mean_volatility.csv", parse_dates=["end_date"])
    fig, ax = new_figure()
    ax.bar(mv["end_date"], mv["volatility"], width=20)
    ax.set_ylabel("mean volatility")
    written.append(save(fig, d / "mean_volatility.png"))

    periods = [p for p in _periods(d) if (d / p / "spectrum.csv").exists()]
    if periods:
        fig, ax = new_figure(7.5)
        width = 0.8 / len(periods)
        for k, p in enumerate(periods):
            v = pd.read_csv(d / p / "volatility.csv")
            ax.bar(np.arange(len(v)) + k * width, v["volatility"], width, label=p)
        ax.set_xticks(np.arange(len(v)) + 0.4 - width / 2)
        ax.set_xticklabels(v["label"], rotation=70)
        ax.set_ylabel("volatility")
        ax.legend()
        written.append(save(fig, d / "volatility_by_period.png"))

        fig, ax = new_figure()
        for p in periods:
            c = pd.read_csv(d / p / "correlation.csv").iloc[:, 1:].to_numpy()
            off = c[~np.eye(c.shape[0], dtype=bool)]
            ax.hist(off, bins=30, density=True, histtype="step", label=f"{p} <|C|>={np.abs(off).mean():.3f}")
        ax.set_xlabel(r"$C_{ij}$")
        ax.set_ylabel("density")
        ax.legend()
        written.append(save(fig, d / "cij_density.png"))

    for p in periods:
        emp = pd.read_csv(d / p / "mp_empirical.csv")
        th = pd.read_csv(d / p / "mp_theoretical.csv")
        fig, ax = new_figure()
        width = np.diff(emp["lambda"]).mean() if len(emp) > 1 else 0.1
        ax.bar(emp["lambda"], emp["density"], width=width, alpha=0.5, label="empirical")
        ax.plot(th["lambda"], th["density"], color="k", lw=1, label="random-matrix law")
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(r"$P(\lambda)$")
        ax.set_title(p)
        ax.legend()
        written.append(save(fig, d / p / "mp_comparison.png"))

    if periods:
        ev = {p: pd.read_csv(d / p / "eigenvectors.csv") for p in periods}
        n = len(next(iter(ev.values())))
        for rank, name in ((0, "first"), (1, "second"), (2, "third")):
            fig, ax = new_figure(7.5)
            col = f"u{n - rank}"
            width = 0.8 / len(periods)
            for k, p in enumerate(periods):
                ax.bar(np.arange(n) + k * width, ev[p][col], width, label=p)
            labels = next(iter(ev.values()))["label"]
            ax.set_xticks(np.arange(n) + 0.4 - width / 2)
            ax.set_xticklabels(labels, rotation=70)
            ax.set_ylabel(f"eigenvector of {name} largest eigenvalue")
            ax.legend()
            written.append(save(fig, d / f"eigenvector_{name}.png"))
    return written


def _circle_layout(labels):
    ang = 2 * np.pi * np.arange(len(labels)) / len(labels)
    return {lab: (np.cos(a), np.sin(a)) for lab, a in zip(labels, ang)}


def _tree_layout(edges, labels):
    """Radial tree: the highest-degree vertex sits at the centre, BFS depth
    sets the radius and each subtree gets a wedge sized by its leaf count."""
    adj = {lab: [] for lab in labels}
    for s, t in edges:
        adj[s].append(t)
        adj[t].append(s)
    root = max(labels, key=lambda v: (len(adj[v]), -labels.index(v)))
    children, seen, queue = {}, {root}, [root]
    while queue:
        v = queue.pop(0)
        children[v] = [w for w in adj[v] if w not in seen]
        seen.update(children[v])
        queue.extend(children[v])

    def leaves(v):
        return max(1, sum(leaves(c) for c in children[v]))

    pos = {}

    def place(v, depth, lo, hi):
        mid = 0.5 * (lo + hi)
        pos[v] = (depth * np.cos(mid), depth * np.sin(mid))
        start = lo
        total = sum(leaves(c) for c in children[v])
        for c in children[v]:
            span = (hi - lo) * leaves(c) / total
            place(c, depth + 1, start, start + span)
            start += span

    place(root, 0, 0.0, 2 * np.pi)
    return pos


def _draw(ax, pos, edges, title):
    for s, t in edges:
        ax.plot([pos[s][0], pos[t][0]], [pos[s][1], pos[t][1]], color="gray", lw=0.7, zorder=1)
    xy = np.array(list(pos.values()))
    ax.scatter(xy[:, 0], xy[:, 1], s=30, zorder=2)
    for lab, (x, y) in pos.items():
        ax.annotate(lab, (x, y), fontsize=6, ha="center", va="bottom")
    ax.set_title(title)
    ax.set_axis_off()
    ax.set_aspect("equal")


def plot_network(out: Path) -> list:
    d = out / "network"
    if not (d / "metrics.csv").exists():
        return []
    written = []
    m = pd.read_csv(d / "metrics.csv")
    fig, axes = new_figure(9, 6, nrows=2, ncols=3)
    cols = [
        ("mean_degree", "mean degree"),
        ("clustering", "global clustering"),
        ("components", "component number"),
        ("max_component", "max component size"),
        ("max_clique", "max clique size"),
    ]
    for ax, (col, lab) in zip(axes.flat, cols):
        for p, sub in m.groupby("period", sort=True):
            ax.plot(sub["theta"], sub[col], marker="o", ms=3, label=p)
        ax.set_xlabel(r"$\theta$")
        ax.set_ylabel(lab)
    axes.flat[0].legend()
    axes.flat[-1].set_axis_off()
    written.append(save(fig, d / "metrics_vs_theta.png"))

    for mst in sorted(d.glob("mst_*.csv")):
        period = mst.stem[len("mst_"):]
        e = pd.read_csv(mst)
        labels = list(dict.fromkeys(list(e["source"]) + list(e["target"])))
        edges = list(zip(e["source"], e["target"]))
        fig, ax = new_figure(6, 6)
        _draw(ax, _tree_layout(edges, labels), edges, f"MST ({period})")
        written.append(save(fig, d / f"mst_{period}.png"))

        files = sorted(d.glob(f"edges_{period}_theta*.csv"))
        if files:
            ncols = 4
            nrows = int(np.ceil(len(files) / ncols))
            fig, axes = new_figure(10, 2.6 * nrows, nrows=nrows, ncols=ncols, squeeze=False)
            pos = _circle_layout(labels_from_corr(out, period) or labels)
            for ax, f in zip(axes.flat, files):
                ge = pd.read_csv(f)
                theta = f.stem.split("theta")[-1]
                _draw(ax, pos, list(zip(ge["source"], ge["target"])), rf"$\theta$={theta}")
            for ax in list(axes.flat)[len(files):]:
                ax.set_axis_off()
            written.append(save(fig, d / f"networks_{period}.png"))
    return written


def labels_from_corr(out: Path, period: str):
    f = out / "rmt" / period / "correlation.csv"
    return list(pd.read_csv(f)["label"]) if f.exists() else None


def plot_mfdfa(out: Path) -> list:
    d = out / "mfdfa"
    written = []
    periods = [p for p in _periods(d) if (d / p / "multifractality.csv").exists()]
    if not periods:
        return written
    tables = {p: pd.read_csv(d / p / "multifractality.csv") for p in periods}
    summaries = {p: pd.read_csv(d / p / "summary.csv") for p in periods}
    labels = tables[periods[0]]["label"]
    x = np.arange(len(labels))
    width = 0.8 / len(periods)

    for col, ylab, fname in (("H", "Hurst exponent h(2)", "hurst_by_period.png"), ("delta_h", r"$\Delta h$", "delta_h_by_period.png")):
        fig, ax = new_figure(7.5)
        for k, p in enumerate(periods):
            s = summaries[p]
            s = s[s["variant"] == "original"]
            ax.bar(x + k * width, s[col], width, label=p)
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels(labels, rotation=70)
        ax.set_ylabel(ylab)
        ax.legend()
        written.append(save(fig, d / fname))

    for p in periods:
        t = tables[p]
        fig, ax = new_figure(7.5)
        for k, (col, lab) in enumerate((("dh_orig", "original"), ("dh_shuf", "shuffled"), ("dh_sur", "surrogate"))):
            ax.bar(x + k * 0.27, t[col], 0.27, label=lab)
        ax.set_xticks(x + 0.27)
        ax.set_xticklabels(t["label"], rotation=70)
        ax.set_ylabel(r"$\Delta h$")
        ax.set_title(p)
        ax.legend()
        written.append(save(fig, d / p / "delta_h_variants.png"))

        hq_dir = d / p / "hq"
        fig, ax = new_figure()
        for lab in t["label"]:
            f = hq_dir / f"{_slug(lab)}_original.csv"
            if f.exists():
                h = pd.read_csv(f)
                ax.plot(h["q"], h["h"], lw=0.8, label=lab)
        ax.set_xlabel("q")
        ax.set_ylabel("h(q)")
        ax.legend(ncol=2, fontsize=5)
        written.append(save(fig, d / p / "hq_original.png"))
    return written


def render_all(out) -> list:
    out = Path(out)
    written = []
    for fn in (plot_prices_returns, plot_rmt, plot_network, plot_mfdfa):
        written.extend(fn(out))
    return [str(p.relative_to(out)) for p in written]
