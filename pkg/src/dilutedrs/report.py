"""Delimited outputs, manifests and optional matplotlib figures."""

from __future__ import annotations

import csv
import json
import os
import platform
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class ResultRecord:
    experiment: str
    quantity: str
    value: float
    error_bar: float
    method: str
    regime: str
    config_digest: str
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    CSV_FIELDS = ("experiment", "quantity", "value", "error_bar", "method", "regime",
                  "config_digest")

    def row(self) -> list:
        return [self.experiment, self.quantity, _fmt(self.value), _fmt(self.error_bar),
                self.method, self.regime, self.config_digest]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def regime_string(flags: dict) -> str:
    on = [k for k, v in flags.items() if v]
    return "+".join(on) if on else "out_of_regime"


class Output:
    """Collects CSV tables and records for one command invocation."""

    def __init__(self, out_dir: str, command: str, config_digest: str, config: dict):
        self.dir = out_dir
        self.command = command
        self.digest = config_digest
        self.config = config
        self.records: list[ResultRecord] = []
        self.files: list[str] = []
        self.figures: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.dir, name)

    def add(self, rec: ResultRecord) -> None:
        self.records.append(rec)

    def table(self, name: str, header, rows) -> str:
        """Write ``name.csv``; values are repr-formatted so reruns are byte-identical."""
        p = self.path(f"{name}.csv")
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) if isinstance(x, (float, np.floating, int, np.integer))
                            and not isinstance(x, bool) else x for x in r])
        self.files.append(os.path.basename(p))
        return p

    def finish(self, status: int) -> None:
        by_q: dict[str, list[ResultRecord]] = {}
        for r in self.records:
            by_q.setdefault(r.quantity, []).append(r)
        for q, recs in by_q.items():
            self.table(f"result_{q}", ResultRecord.CSV_FIELDS, [r.row() for r in recs])
        manifest = {
            "command": self.command,
            "status": status,
            "config_digest": self.digest,
            "config": self.config,
            "files": sorted(set(self.files)),
            "figures": self.figures,
            "records": [asdict(r) for r in self.records],
            "python": platform.python_version(),
        }
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=float)


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_trace(out: Output, trace, tol: float, name: str = "trace") -> str:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    it = np.arange(1, len(trace) + 1)
    ax.semilogy(it, np.maximum(np.asarray(trace, float), 1e-16), lw=1)
    ax.axhline(tol, color="k", ls="--", lw=0.8, label="tol")
    ax.set_xlabel("generation")
    ax.set_ylabel("distance to previous pool")
    ax.legend(frameon=False)
    return _save(out, fig, name)


def plot_pool(out: Output, values, points, name: str = "pool") -> str:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    values = np.atleast_2d(values)
    if values.shape[1] <= 8:
        for j in range(values.shape[1]):
            ax.hist(values[:, j], bins=80, histtype="step", label=f"t={points[j]:g}")
        ax.set_xlabel("field value")
        ax.legend(frameon=False, fontsize=7)
    else:
        qs = np.quantile(values, [0.1, 0.5, 0.9], axis=0)
        ax.fill_between(points, qs[0], qs[2], alpha=0.3, lw=0)
        ax.plot(points, qs[1], lw=1)
        ax.set_xlabel("t")
        ax.set_ylabel("field (median, 10-90%)")
    return _save(out, fig, name)


def plot_series(out: Output, x, ys: dict, xlabel: str, ylabel: str, name: str,
                errs: dict | None = None) -> str:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for label, y in ys.items():
        e = None if errs is None else errs.get(label)
        ax.errorbar(x, y, yerr=e, marker="o", ms=3, lw=1, capsize=2, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    return _save(out, fig, name)


def _save(out: Output, fig, name: str) -> str:
    d = os.path.join(out.dir, "figures")
    os.makedirs(d, exist_ok=True)
    p = os.path.join(d, f"{name}.png")
    fig.tight_layout()
    fig.savefig(p, dpi=120)
    _pyplot().close(fig)
    out.figures.append(os.path.relpath(p, out.dir))
    return p
