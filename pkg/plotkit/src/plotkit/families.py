"""Figure builders for the seven experiment CSV families."""

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DB_FLOOR = -60.0


class SchemaError(Exception):
    """Input CSV is missing required columns or has no data rows."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: input CSVs, figure kind, output image path."""

    kind: str
    inputs: tuple
    out_path: str


@dataclass(frozen=True)
class RenderedFigure:
    family: str
    path: str


def load_table(path, required) -> dict:
    """Read a CSV into a dict of column -> array, validating the schema.

    Numeric columns come back as float arrays, everything else as string
    arrays. Missing columns and empty files are hard errors.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"missing input file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r]
    if not rows:
        raise SchemaError(f"{path.name}: empty file")
    header = rows[0]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path.name}: missing columns {missing} (have {header})")
    body = rows[1:]
    if not body:
        raise SchemaError(f"{path.name}: no data rows")
    cols = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) for v in raw])
        except ValueError:
            cols[name] = np.array(raw)
    return cols


def _to_db(values: np.ndarray) -> np.ndarray:
    """Normalize to a 0 dB peak with the standard valley floor."""
    peak = values.max()
    if peak <= 0:
        raise SchemaError("surface has no positive values to normalize")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(values / peak)
    return np.maximum(db, DB_FLOOR)


def _pivot_surface(tab, term):
    sel = tab["term"] == term
    if not sel.any():
        raise SchemaError(f"term {term!r} absent from surface CSV")
    taus = np.unique(tab["tau"][sel])
    nus = np.unique(tab["nu"][sel])
    grid = np.full((len(taus), len(nus)), np.nan)
    ti = np.searchsorted(taus, tab["tau"][sel])
    ni = np.searchsorted(nus, tab["nu"][sel])
    grid[ti, ni] = tab["value"][sel]
    if np.isnan(grid).any():
        raise SchemaError(f"term {term!r} does not fill a full (tau, nu) grid")
    return taus, nus, grid


def _fig_af(inputs, out_path):
    tab = load_table(inputs[0], ("tau", "nu", "value", "term"))
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, term, title in zip(axes, ("mc", "total"), ("Monte Carlo", "closed form")):
        taus, nus, grid = _pivot_surface(tab, term)
        im = ax.pcolormesh(nus, taus, _to_db(grid), vmin=DB_FLOOR, vmax=0.0,
                           shading="nearest", cmap="viridis")
        ax.set_title(title)
        ax.set_xlabel("Doppler bin")
    axes[0].set_ylabel("delay tap")
    fig.colorbar(im, ax=axes, label="dB")
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _fig_slices(inputs, out_path):
    tab = load_table(inputs[0], ("tau", "nu", "value", "term"))
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    cuts = ((tab["nu"] == 0, "tau", "delay tap"), (tab["tau"] == 0, "nu", "Doppler bin"))
    for ax, (cut, axis, label) in zip(axes, cuts):
        for term in ("total", "t1", "t2", "t3"):
            sel = cut & (tab["term"] == term)
            if not sel.any():
                raise SchemaError(f"term {term!r} absent from slice CSV")
            order = np.argsort(tab[axis][sel])
            ax.plot(tab[axis][sel][order], tab["value"][sel][order], label=term)
        ax.set_yscale("symlog", linthresh=1e-3)
        ax.set_xlabel(label)
        ax.legend()
    axes[0].set_ylabel("expected squared AF")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _fig_ber(inputs, out_path):
    tab = load_table(
        inputs[0], ("snr_db", "ber_theory_ring", "ber_theory_union", "ber_sim", "n_errors")
    )
    fig, ax = plt.subplots(figsize=(6, 4.5))
    order = np.argsort(tab["snr_db"])
    snr = tab["snr_db"][order]
    ax.semilogy(snr, tab["ber_theory_ring"][order], "-o", label="theory (ring)")
    ax.semilogy(snr, tab["ber_theory_union"][order], "--", label="theory (union)")
    ax.semilogy(snr, tab["ber_sim"][order], "s", mfc="none", label="simulation")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _fig_pareto(inputs, out_path):
    tab = load_table(inputs[0], ("omega", "mu4", "throughput", "sigma_x2"))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    order = np.argsort(tab["mu4"])
    ax.plot(tab["mu4"][order], tab["throughput"][order], "-o")
    for w, m, t in zip(tab["omega"][order], tab["mu4"][order], tab["throughput"][order]):
        ax.annotate(f"w={w:g}", (m, t), textcoords="offset points", xytext=(5, 5),
                    fontsize=8)
    ax.set_xlabel("kurtosis mu4 (sensing, lower is better)")
    ax.set_ylabel("effective throughput (bits/symbol)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


PMF_LABELS = ("comm", "balanced", "sensing")


def _fig_pmf(inputs, out_path):
    fig, axes = plt.subplots(1, len(inputs), figsize=(4 * len(inputs), 4), sharey=True)
    axes = np.atleast_1d(axes)
    for ax, path, label in zip(axes, inputs, PMF_LABELS):
        tab = load_table(path, ("re", "im", "probability"))
        p = tab["probability"]
        ax.scatter(tab["re"], tab["im"], s=2000 * p / max(p.max(), 1e-12), alpha=0.6)
        ax.set_title(label)
        ax.set_xlabel("I")
        ax.set_aspect("equal")
    axes[0].set_ylabel("Q")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _fig_cfar(inputs, out_path):
    tab = load_table(inputs[0], ("variant", "snr_db", "pd", "trials"))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for variant in sorted(set(tab["variant"])):
        sel = tab["variant"] == variant
        order = np.argsort(tab["snr_db"][sel])
        ax.plot(tab["snr_db"][sel][order], tab["pd"][sel][order], "-o", label=variant)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("detection probability")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def _fig_music(inputs, out_path):
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for path, label in zip(inputs, PMF_LABELS):
        tab = load_table(path, ("velocity", "power_db"))
        order = np.argsort(tab["velocity"])
        ax.plot(tab["velocity"][order],
                np.maximum(tab["power_db"][order], DB_FLOOR), label=label)
    ax.set_xlabel("velocity (m/s)")
    ax.set_ylabel("pseudospectrum (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


# family name -> (input file names, renderer)
FAMILIES = {
    "af": (("af_surfaces.csv",), _fig_af),
    "slices": (("slices_closed.csv",), _fig_slices),
    "ber": (("ber_sweep.csv",), _fig_ber),
    "pareto": (("pcs_pareto.csv",), _fig_pareto),
    "pmf": (tuple(f"pcs_pmf_{n}.csv" for n in PMF_LABELS), _fig_pmf),
    "cfar": (("cfar_pd.csv",), _fig_cfar),
    "music": (tuple(f"music_{n}.csv" for n in PMF_LABELS), _fig_music),
}


def render(spec: FigureSpec) -> str:
    if spec.kind not in FAMILIES:
        raise ValueError(f"unknown figure kind {spec.kind!r}")
    Path(spec.out_path).parent.mkdir(parents=True, exist_ok=True)
    FAMILIES[spec.kind][1](spec.inputs, spec.out_path)
    return spec.out_path


def render_family(family: str, csv_dir, out_dir) -> RenderedFigure:
    if family not in FAMILIES:
        raise ValueError(f"unknown figure family {family!r}; known: {sorted(FAMILIES)}")
    names, _ = FAMILIES[family]
    spec = FigureSpec(
        kind=family,
        inputs=tuple(str(Path(csv_dir) / n) for n in names),
        out_path=str(Path(out_dir) / f"{family}.png"),
    )
    return RenderedFigure(family, render(spec))


def render_all(csv_dir, out_dir) -> list:
    return [render_family(f, csv_dir, out_dir) for f in FAMILIES]
