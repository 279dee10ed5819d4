"""Correlation estimates from shot tables, with jackknife errors, and error reports.

Site labels in tables are 1-based (anchor ``i=10`` means the tenth site).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .simulator import ShotRecord


@dataclass
class CorrelationTable:
    anchor: int
    basis: str
    n_shots: int
    distances: np.ndarray
    connected: np.ndarray
    connected_err: np.ndarray
    onsite: np.ndarray
    onsite_err: np.ndarray
    label: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "index", "mean", "stderr", "n_shots"])
        for j, (m, e) in enumerate(zip(self.onsite, self.onsite_err), start=1):
            w.writerow(["onsite", j, repr(float(m)), repr(float(e)), self.n_shots])
        for r, m, e in zip(self.distances, self.connected, self.connected_err):
            w.writerow(["connected", int(r), repr(float(m)), repr(float(e)), self.n_shots])
        return buf.getvalue()

    def to_plot_series(self) -> dict:
        return {
            "label": self.label,
            "anchor": self.anchor,
            "basis": self.basis,
            "x": [int(r) for r in self.distances],
            "y": [float(v) for v in self.connected],
            "yerr": [float(v) for v in self.connected_err],
        }


def _stack(shots) -> tuple[np.ndarray, str]:
    if isinstance(shots, ShotRecord):
        shots = [shots]
    shots = list(shots)
    if not shots:
        raise ValueError("no shots")
    bases = {s.basis for s in shots}
    if len(bases) > 1:
        raise ValueError(f"mixed measurement bases {sorted(bases)}")
    return np.concatenate([s.values for s in shots], axis=0).astype(float), bases.pop()


def estimate_correlations(shots, anchor: int, label: str = "") -> CorrelationTable:
    """Onsite means and connected C(anchor, r) with leave-one-out jackknife errors."""
    x, basis = _stack(shots)
    n, L = x.shape
    if not 1 <= anchor <= L:
        raise ValueError(f"anchor {anchor} outside 1..{L}")
    if n < 2:
        raise ValueError("need at least two shots for error bars")
    a = anchor - 1
    mean = x.mean(axis=0)
    onsite_err = x.std(axis=0, ddof=1) / np.sqrt(n)
    xa = x[:, a : a + 1]
    xr = x[:, a + 1 :]
    s_a, s_r, s_ar = xa.sum(0), xr.sum(0), (xa * xr).sum(0)
    conn = s_ar / n - (s_a / n) * (s_r / n)
    # leave-one-out replicates, shape (n, L - anchor)
    loo = (s_ar - xa * xr) / (n - 1) - ((s_a - xa) / (n - 1)) * ((s_r - xr) / (n - 1))
    err = np.sqrt((n - 1) / n * np.sum((loo - loo.mean(0)) ** 2, axis=0))
    distances = np.arange(1, L - a)
    return CorrelationTable(anchor, basis, n, distances, conn, err, mean, onsite_err, label)


@dataclass
class ErrorReport:
    distances: np.ndarray
    abs_error: np.ndarray
    z_scores: np.ndarray
    window_max: dict = field(default_factory=dict)  # R -> max |error| over r <= R
    window_argmax: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return float(np.max(self.abs_error)) if self.abs_error.size else 0.0

    def to_dict(self) -> dict:
        return {
            "distances": [int(r) for r in self.distances],
            "abs_error": [float(v) for v in self.abs_error],
            "z_scores": [float(v) for v in self.z_scores],
            "max_error": self.max_error,
            "window_max": {str(k): float(v) for k, v in self.window_max.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def compare(table: CorrelationTable, reference, windows=(), distances=None) -> ErrorReport:
    """Per-distance error of ``table.connected`` against exact ``reference`` values.

    ``reference`` is indexed like ``table.distances`` (entry r-1 for distance
    r); pass ``distances`` to compare a subset.
    """
    ref = np.asarray(reference, dtype=float)
    if ref.shape != table.connected.shape:
        raise ValueError(f"grid mismatch: table {table.connected.shape} vs reference {ref.shape}")
    sel = np.ones(len(ref), dtype=bool) if distances is None else np.isin(table.distances, distances)
    r = table.distances[sel]
    diff = table.connected[sel] - ref[sel]
    err = table.connected_err[sel]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(err > 0, diff / np.where(err > 0, err, 1), np.where(diff == 0, 0.0, np.inf))
    report = ErrorReport(r, np.abs(diff), z)
    for w in windows:
        m = r <= w
        if not np.any(m):
            raise ValueError(f"window {w} contains no distances")
        k = int(np.argmax(np.abs(diff[m])))
        report.window_max[int(w)] = float(np.abs(diff[m])[k])
        report.window_argmax[int(w)] = int(r[m][k])
    return report


def write_plot_data(tables, references: dict | None = None) -> str:
    series = [t.to_plot_series() for t in tables]
    out = {"series": series, "xlabel": "r", "ylabel": "C(i, i+r)"}
    if references:
        out["references"] = {k: [float(v) for v in vals] for k, vals in references.items()}
    return json.dumps(out, indent=1)
