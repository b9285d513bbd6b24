"""Verification statistics over recorded spike trains.

Per population: single-neuron firing rates (Hz), coefficient of variation of
interspike intervals, and pairwise Pearson correlation of binned spike
counts over a seeded neuron sample. Each sample is smoothed with a Gaussian
KDE (Scott's rule bandwidth) and two runs are compared by the KL divergence
between the smoothed curves on a common grid.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import rng
from .engine import SpikeTrain
from .errors import StatsError

STATS_VERSION = 1
KDE_GRID_POINTS = 512
KL_FLOOR = 1e-12
DEFAULT_BIN_MS = 2.0
DEFAULT_SAMPLE_SIZE = 200
STAT_NAMES = ("rate", "cv_isi", "correlation")


def _post_warmup(train: SpikeTrain):
    keep = train.ticks >= train.warmup_ticks
    return train.ticks[keep], train.neurons[keep]


def _duration_s(train: SpikeTrain) -> float:
    return (train.n_ticks - train.warmup_ticks) * train.dt / 1000.0


def firing_rates(train: SpikeTrain) -> list[np.ndarray]:
    """Per-neuron rates in Hz after warm-up, grouped by population."""
    if train.warmup_ticks >= train.n_ticks:
        raise StatsError("warm-up covers the whole run")
    _, neurons = _post_warmup(train)
    total = max(b for _, b in train.pop_bounds) if train.pop_bounds else 0
    counts = np.bincount(neurons, minlength=max(total, 1))
    dur = _duration_s(train)
    return [counts[s:e] / dur for s, e in train.pop_bounds]


def cv_isi(train: SpikeTrain) -> list[np.ndarray]:
    """Per-neuron coefficient of variation of ISIs; needs >= 3 spikes."""
    ticks, neurons = _post_warmup(train)
    order = np.argsort(neurons, kind="stable")  # ticks stay ascending per neuron
    neu = neurons[order]
    tks = ticks[order].astype(np.int64)
    out = []
    for s, e in train.pop_bounds:
        lo, hi = np.searchsorted(neu, [s, e])
        vals = []
        pos = lo
        while pos < hi:
            end = pos
            while end < hi and neu[end] == neu[pos]:
                end += 1
            if end - pos >= 3:
                isi = np.diff(tks[pos:end]) * train.dt
                m = isi.mean()
                sd = isi.std(ddof=1)
                if m > 0:
                    vals.append(sd / m)
            pos = end
        out.append(np.asarray(vals, dtype=np.float64))
    return out


def pearson_binned(train: SpikeTrain, bin_ms: float = DEFAULT_BIN_MS,
                   sample_size: int = DEFAULT_SAMPLE_SIZE,
                   seed: int = 0) -> list[np.ndarray]:
    """All within-sample pairwise Pearson coefficients of binned counts.

    The per-population sample is drawn without replacement from a seeded
    stream; zero-variance trains are excluded from pairing. Oversized
    requests are clipped to the population.
    """
    bin_ticks = int(np.floor(bin_ms / train.dt + 0.5))
    if bin_ticks < 1 or abs(bin_ticks * train.dt - bin_ms) > 1e-9:
        raise StatsError("bin_ms must be a positive multiple of dt")
    ticks, neurons = _post_warmup(train)
    span = train.n_ticks - train.warmup_ticks
    n_bins = span // bin_ticks
    if n_bins < 2:
        raise StatsError("run too short for the requested bin width")
    rel = (ticks.astype(np.int64) - train.warmup_ticks) // bin_ticks
    keep = rel < n_bins
    rel, neu = rel[keep], neurons[keep].astype(np.int64)
    out = []
    for pop_idx, (s, e) in enumerate(train.pop_bounds):
        size = min(sample_size, e - s)
        if size < sample_size:
            warnings.warn(
                f"sample_size {sample_size} clipped to population size {e - s}",
                stacklevel=2)
        stream = rng.Stream(seed, rng.STREAM_SAMPLE, pop_idx)
        chosen = stream.sample_without_replacement(e - s, size) + s
        lookup = np.full(e - s, -1, dtype=np.int64)
        lookup[chosen - s] = np.arange(size)
        in_pop = (neu >= s) & (neu < e)
        trains = np.zeros((size, n_bins), dtype=np.float64)
        row = lookup[neu[in_pop] - s]
        sel = row >= 0
        np.add.at(trains, (row[sel], rel[in_pop][sel]), 1.0)
        sd = trains.std(axis=1)
        live = np.flatnonzero(sd > 0)
        if live.size < 2:
            out.append(np.empty(0, dtype=np.float64))
            continue
        cm = np.corrcoef(trains[live])
        iu = np.triu_indices(live.size, k=1)
        out.append(cm[iu])
    return out


@dataclass
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray

    @property
    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


def kde(sample: np.ndarray, grid_points: int = KDE_GRID_POINTS) -> KdeCurve:
    """Gaussian KDE with Scott's-rule bandwidth, normalized on its grid."""
    sample = np.asarray(sample, dtype=np.float64)
    n = sample.shape[0]
    if n < 2:
        raise StatsError("KDE needs a sample of at least 2 values")
    sd = sample.std(ddof=1)
    if sd == 0:
        raise StatsError("KDE sample has zero variance")
    h = sd * n ** (-1.0 / 5.0)
    grid = np.linspace(sample.min() - 3 * h, sample.max() + 3 * h, grid_points)
    dens = np.zeros(grid_points, dtype=np.float64)
    chunk = max(1, 4_000_000 // grid_points)
    for a in range(0, n, chunk):
        z = (grid[None, :] - sample[a:a + chunk, None]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=0)
    dens /= n * h * np.sqrt(2.0 * np.pi)
    dens /= np.trapezoid(dens, grid)
    return KdeCurve(grid=grid, density=dens)


def kl_divergence(p_curve: KdeCurve, q_curve: KdeCurve,
                  grid_points: int = KDE_GRID_POINTS,
                  floor: float = KL_FLOOR) -> float:
    """KL(P || Q) in nats on a shared union-span grid, floored densities."""
    lo = min(p_curve.grid[0], q_curve.grid[0])
    hi = max(p_curve.grid[-1], q_curve.grid[-1])
    grid = np.linspace(lo, hi, grid_points)
    step = grid[1] - grid[0]
    p = np.interp(grid, p_curve.grid, p_curve.density, left=0.0, right=0.0)
    q = np.interp(grid, q_curve.grid, q_curve.density, left=0.0, right=0.0)
    p = np.maximum(p, floor)
    q = np.maximum(q, floor)
    p /= p.sum() * step
    q /= q.sum() * step
    return float(np.sum(p * np.log(p / q)) * step)


@dataclass
class StatsReport:
    meta: dict
    samples: dict      # {pop_name: {stat_name: np.ndarray}}
    curves: dict       # {pop_name: {stat_name: KdeCurve | None}}

    @property
    def pop_names(self) -> list:
        return list(self.samples.keys())


def build_report(train: SpikeTrain, meta: dict | None = None,
                 bin_ms: float = DEFAULT_BIN_MS,
                 sample_size: int = DEFAULT_SAMPLE_SIZE,
                 stats_seed: int = 0) -> StatsReport:
    header = {
        "stats_version": STATS_VERSION,
        "n_ticks": train.n_ticks,
        "warmup_ticks": train.warmup_ticks,
        "dt": train.dt,
        "bin_ms": bin_ms,
        "sample_size": sample_size,
        "stats_seed": stats_seed,
        "kde_grid_points": KDE_GRID_POINTS,
        "kl_floor": KL_FLOOR,
    }
    header.update(meta or {})
    rates = firing_rates(train)
    cvs = cv_isi(train)
    corrs = pearson_binned(train, bin_ms, sample_size, stats_seed)
    samples, curves = {}, {}
    for i, name in enumerate(train.pop_names):
        per_stat = {"rate": rates[i], "cv_isi": cvs[i], "correlation": corrs[i]}
        samples[name] = per_stat
        curves[name] = {}
        for stat, sample in per_stat.items():
            try:
                curves[name][stat] = kde(sample)
            except StatsError:
                curves[name][stat] = None
    return StatsReport(meta=header, samples=samples, curves=curves)


_COMPAT_KEYS = ("bin_ms", "sample_size", "stats_seed", "kde_grid_points",
                "kl_floor", "dt", "warmup_ticks")


def compare_runs(a: StatsReport, b: StatsReport) -> dict:
    """Per-population, per-statistic KL(a || b) table."""
    for key in _COMPAT_KEYS:
        if a.meta.get(key) != b.meta.get(key):
            raise StatsError(f"reports differ in {key}: "
                             f"{a.meta.get(key)} vs {b.meta.get(key)}")
    if a.pop_names != b.pop_names:
        raise StatsError("reports cover different populations")
    table = {}
    for pop in a.pop_names:
        table[pop] = {}
        for stat in STAT_NAMES:
            ca, cb = a.curves[pop][stat], b.curves[pop][stat]
            table[pop][stat] = (kl_divergence(ca, cb)
                                if ca is not None and cb is not None else None)
    return table


def median_kl_by_stat(table: dict) -> dict:
    out = {}
    for stat in STAT_NAMES:
        vals = [row[stat] for row in table.values() if row[stat] is not None]
        out[stat] = float(np.median(vals)) if vals else None
    return out


def report_to_json(report: StatsReport) -> str:
    doc = {"meta": report.meta, "populations": {}}
    for pop in report.pop_names:
        entry = {}
        for stat in STAT_NAMES:
            entry[stat] = report.samples[pop][stat].tolist()
            curve = report.curves[pop][stat]
            entry[f"{stat}_kde"] = (
                {"grid": curve.grid.tolist(), "density": curve.density.tolist()}
                if curve is not None else None)
        doc["populations"][pop] = entry
    return json.dumps(doc)


def report_from_json(text: str) -> StatsReport:
    doc = json.loads(text)
    if doc.get("meta", {}).get("stats_version") != STATS_VERSION:
        raise StatsError("unsupported or missing stats_version")
    samples, curves = {}, {}
    for pop, entry in doc["populations"].items():
        samples[pop] = {s: np.asarray(entry[s], dtype=np.float64)
                        for s in STAT_NAMES}
        curves[pop] = {}
        for s in STAT_NAMES:
            c = entry.get(f"{s}_kde")
            curves[pop][s] = (KdeCurve(grid=np.asarray(c["grid"]),
                                       density=np.asarray(c["density"]))
                              if c else None)
    return StatsReport(meta=doc["meta"], samples=samples, curves=curves)
