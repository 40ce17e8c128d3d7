"""Publication-style plots of datasets with fit overlays and annotations."""

import re
from pathlib import Path
from typing import List, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import FitResult, get_model  # noqa: E402
from .experiments import Dataset  # noqa: E402

_LORENTZ_RE = re.compile(r"^lorentzian_multi\((\d+)\)$")


def evaluate_fit(fr: FitResult, x) -> np.ndarray:
    """Evaluate a FitResult's model at its fitted parameters."""
    m = _LORENTZ_RE.match(fr.model)
    model = (get_model("lorentzian_multi", int(m.group(1))) if m
             else get_model(fr.model))
    p = np.array([fr.value(n) for n in model.param_names])
    return model(p, np.asarray(x, dtype=float))


def _fmt(value: float, unit: str, scale: float, digits: int = 3) -> str:
    return f"{value / scale:.{digits}f} {unit}"


def _annotations(ds: Dataset) -> List[str]:
    md = ds.metadata
    lines = []
    fr = ds.fit
    if fr is not None and fr.converged:
        if fr.model == "rabi_eq4":
            lines.append("Omega = " + _fmt(fr.value("omega"), "MHz", 1e6))
            lines.append("T2* = " + _fmt(fr.value("t2_star"), "ns", 1e-9, 1))
        elif fr.model.startswith("lorentzian_multi"):
            lines.append("contrast = "
                         + f"{100 * fr.value('a0'):.2f} %")
            lines.append("FWHM = " + _fmt(fr.value("fwhm0"), "MHz", 1e6, 2))
        elif fr.model in ("exp_decay", "stretched_exp"):
            label = ("T2" if md.get("experiment") == "hahn_echo" else
                     "T2*" if md.get("experiment") == "ramsey" else "tau")
            lines.append(f"{label} = " + _fmt(fr.value("tau"), "ns", 1e-9, 1))
    for key, label, unit, scale in (
            ("tau_pi", "tau_pi", "ns", 1e-9),
            ("tau_pi_2", "tau_pi/2", "ns", 1e-9),
            ("t2_star", "T2*", "ns", 1e-9),
            ("inferred_bz_t", "Bz", "uT", 1e-6)):
        if key in md:
            lines.append(f"{label} = " + _fmt(md[key], unit, scale, 1))
    centers = md.get("dip_centers_hz", [])
    if len(centers) == 2:
        lines.append("splitting = "
                     + _fmt(centers[1] - centers[0], "MHz", 1e6, 2))
    return lines


def _annotate(ax, lines: List[str]) -> None:
    if lines:
        ax.text(0.98, 0.02, "\n".join(lines), transform=ax.transAxes,
                ha="right", va="bottom", fontsize=9,
                bbox=dict(boxstyle="round", facecolor="white", alpha=0.8))


def _render_scan(ds: Dataset, ax) -> None:
    y, x = ds.axes[0].values, ds.axes[1].values
    extent = [x[0], x[-1], y[0], y[-1]]
    im = ax.imshow(ds.values, origin="lower", extent=extent, aspect="equal",
                   cmap="inferno")
    plt.colorbar(im, ax=ax, label="counts")
    ax.set_xlabel("x (um)")
    ax.set_ylabel("y (um)")


def _render_xy(ds: Dataset, ax, x_scale: float, x_label: str) -> None:
    x = ds.axes[-1].values
    fit_x = x
    if ds.metadata.get("fit_x") == "total_free_evolution":
        x = 2.0 * x
        fit_x = x
        x_label = "total free evolution " + x_label[x_label.find("("):]
    ax.errorbar(x / x_scale, ds.values, yerr=ds.uncertainty, fmt="o",
                ms=3, lw=1, capsize=2, label="data")
    fr = ds.fit
    if fr is not None and fr.converged:
        xf = np.linspace(fit_x[0], fit_x[-1], 400)
        ax.plot(xf / x_scale, evaluate_fit(fr, xf), "-", lw=1.5, label="fit")
        ax.legend(loc="upper right", fontsize=9)
    ax.set_xlabel(x_label)


def _render_time_trace(ds: Dataset, ax) -> None:
    t = ds.axes[1].values
    labels = ds.metadata.get("channels",
                             [f"ch{i}" for i in range(ds.values.shape[0])])
    for row, label in zip(ds.values, labels):
        ax.plot(t / 1e-6, row, lw=1, label=label)
    ax.legend(loc="upper right", fontsize=9)
    ax.set_xlabel("time (us)")
    ax.set_ylabel("counts / bin")


def _render_histogram(ds: Dataset, ax) -> None:
    t = ds.axes[0].values
    ax.semilogy(t / 1e-9, np.maximum(ds.values, 0.5), ".", ms=2,
                label="data")
    fr = ds.fit
    if fr is not None and fr.converged:
        xf = np.linspace(t[0], t[-1], 400)
        ax.semilogy(xf / 1e-9, np.maximum(evaluate_fit(fr, xf), 0.5), "-",
                    lw=1.5, label="fit")
        ax.legend(loc="upper right", fontsize=9)
    ax.set_xlabel("time after laser edge (ns)")
    ax.set_ylabel("counts / bin")


def render_dataset(ds: Dataset, out: Union[str, Path],
                   dpi: int = 150) -> Path:
    """Render a dataset to a PNG image; returns the written path."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    title = ds.metadata.get("experiment", ds.kind)
    if ds.aborted:
        title += " (aborted)"
    ax.set_title(title)
    if ds.kind == "scan2d":
        _render_scan(ds, ax)
    elif ds.kind == "spectrum":
        _render_xy(ds, ax, 1e9, "MW frequency (GHz)")
        ax.set_ylabel("normalized PL")
    elif ds.kind == "sweep":
        _render_xy(ds, ax, 1e-9, "pulse / evolution time (ns)")
        ax.set_ylabel("normalized PL")
    elif ds.kind == "time_trace":
        _render_time_trace(ds, ax)
    elif ds.kind == "histogram":
        _render_histogram(ds, ax)
    _annotate(ax, _annotations(ds))
    out_path = Path(out)
    fig.tight_layout()
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)
    return out_path
