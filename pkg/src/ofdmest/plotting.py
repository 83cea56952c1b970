"""
Plot-data tables and SVG figures for sweep and probe output.

The CSV tables are the canonical output; the SVG files are a convenience
rendered with matplotlib's SVG backend.  Figures are built on bare
:class:`~matplotlib.figure.Figure` objects (no pyplot state) and written
with a fixed hash salt and no date stamp so reruns give identical bytes.
"""

import csv
import io
from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

import numpy as np

_LOG_METRICS = ("ber", "mse", "rmse")
_LABELS = {"ber": "BER", "mse": "normalized MSE", "rmse": "RMSE"}


def plot_table(records, metric: str):
    """Pivot records into ``(methods, snr_grid, values)`` with values ``(snr, method)``."""
    methods = list(dict.fromkeys(r.method for r in records))
    snrs = sorted({r.snr_db for r in records})
    values = np.full((len(snrs), len(methods)), np.nan)
    for r in records:
        values[snrs.index(r.snr_db), methods.index(r.method)] = getattr(r, metric)
    return methods, np.array(snrs), values


def plot_csv(records, metric: str) -> str:
    """``snr_db`` column followed by one column per method."""
    methods, snrs, values = plot_table(records, metric)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db"] + methods)
    for s, row in zip(snrs, values):
        w.writerow([format(s, ".17g")] + [format(v, ".17g") for v in row])
    return buf.getvalue()


def _save_svg(fig: Figure, path):
    with matplotlib.rc_context({"svg.hashsalt": "ofdmest", "svg.fonttype": "path"}):
        FigureCanvasSVG(fig)
        fig.savefig(path, format="svg", metadata={"Date": None})


def metric_figure(records, metric: str) -> Figure:
    methods, snrs, values = plot_table(records, metric)
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(111)
    markers = "osd^v<>ph*"
    for j, name in enumerate(methods):
        y = values[:, j]
        # log axes cannot show zeros (perfect-CSI mse, error-free ber)
        shown = y > 0 if metric in _LOG_METRICS else np.isfinite(y)
        if not shown.any():
            continue
        ax.plot(snrs[shown], y[shown], marker=markers[j % len(markers)], label=name)
    if metric in _LOG_METRICS and np.any(values > 0):
        ax.set_yscale("log")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(_LABELS.get(metric, metric))
    ax.grid(True, which="both", alpha=0.3)
    if ax.lines:
        ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


def save_metric_svg(records, metric: str, path):
    _save_svg(metric_figure(records, metric), Path(path))


def save_probe_svg(lags, empirical, reference, path):
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(111)
    ax.plot(lags, reference, "-", label="J0 reference")
    ax.plot(lags, empirical, "o", label="empirical")
    ax.set_xlabel("lag (symbols)")
    ax.set_ylabel("normalized autocorrelation")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save_svg(fig, Path(path))


def save_estimate_svg(h_true, h_hat, path):
    k = np.arange(len(h_true))
    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(111)
    ax.plot(k, np.abs(h_true), "-", label="|H| true")
    ax.plot(k, np.abs(h_hat), ".", label="|H| estimate")
    ax.set_xlabel("subcarrier")
    ax.set_ylabel("magnitude")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save_svg(fig, Path(path))
