"""Synthetic benchmark: data from a fixed sum-product target and the four sweeps.

Random numbers come from ``numpy.random.default_rng`` (PCG64) seeded per
trial with ``seed * 10**6 + trial``; the sweep value does not enter the seed,
so every sweep point of a trial shares its random stream.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from joblib import Parallel, delayed

from .basis import standard_catalog
from .solver import Dataset, FitConfig, clipped_loss, fit, predict

log = logging.getLogger(__name__)

SIGMA = 0.05
DEFAULT_TRIALS = 20
Z95 = 1.96

CSV_COLUMNS = ("experiment", "sweep_var", "sweep_value", "trial", "error", "mean", "ci95")


def g_star(X) -> np.ndarray:
    """0.3 sin(3 pi x1) cos(2 pi x2) + 0.4 x3^2 - 0.3 x4."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return (0.3 * np.sin(3 * np.pi * X[:, 0]) * np.cos(2 * np.pi * X[:, 1])
            + 0.4 * X[:, 2] ** 2 - 0.3 * X[:, 3])


@dataclass(frozen=True)
class SynthSpec:
    p: int
    n_train: int
    n_test: int | None = None
    sigma: float = SIGMA
    seed: int = 0

    @property
    def test_size(self) -> int:
        return math.ceil(self.n_train / 3) if self.n_test is None else self.n_test


def generate(spec: SynthSpec) -> tuple[Dataset, Dataset]:
    """Train/test split with X ~ U[0,1]^p and y = g*(x) + N(0, sigma^2)."""
    if spec.p < 4:
        raise ValueError("the target uses x1..x4, so p must be >= 4")
    if spec.n_train < 1:
        raise ValueError("n_train must be >= 1")
    n_total = spec.n_train + spec.test_size
    rng = np.random.default_rng(spec.seed)
    X = rng.uniform(0.0, 1.0, size=(n_total, spec.p))
    noise = rng.normal(0.0, spec.sigma, size=n_total) if spec.sigma > 0 else np.zeros(n_total)
    y = g_star(X) + noise
    n = spec.n_train
    train = Dataset(X[:n], y[:n])
    test = Dataset(X[n:], y[n:]) if spec.test_size else None
    return train, test


# --- experiment grid -------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentDef:
    id: int
    sweep_var: str
    values: tuple[int, ...]
    fixed: dict = field(hash=False)


EXPERIMENTS = {
    1: ExperimentDef(1, "n", (50, 100, 150, 200, 250), {"p": 100, "q": 40, "k": 10}),
    2: ExperimentDef(2, "p", (10, 20, 50, 100, 200), {"n": 250, "q": 40, "k": 10}),
    3: ExperimentDef(3, "k", (1, 5, 10, 20), {"p": 100, "q": 40, "n": 250}),
    4: ExperimentDef(4, "q", (10, 20, 50, 100), {"p": 20, "n": 250, "k": 10}),
}

_FLOORS = {"n": 10, "p": 4, "q": 1, "k": 1}


def _scaled(name: str, value: int, scale: float) -> int:
    return max(_FLOORS[name], int(math.floor(value * scale + 0.5)))


def experiment_grid(exp_id: int, scale: float = 1.0) -> tuple[str, list[int], dict]:
    """Sweep variable, sweep values and fixed settings, every size multiplied by ``scale``."""
    if exp_id not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {exp_id}; expected 1-4")
    if scale <= 0:
        raise ValueError("scale must be positive")
    e = EXPERIMENTS[exp_id]
    values = sorted({_scaled(e.sweep_var, v, scale) for v in e.values})
    fixed = {name: _scaled(name, v, scale) for name, v in e.fixed.items()}
    return e.sweep_var, values, fixed


@dataclass
class ExperimentResult:
    experiment: int
    sweep_variable: str
    sweep_value: int
    trial_errors: list[float]

    @property
    def trials(self) -> int:
        return len(self.trial_errors)

    @property
    def mean(self) -> float:
        errs = np.asarray(self.trial_errors, dtype=float)
        errs = errs[np.isfinite(errs)]
        return float(errs.mean()) if errs.size else float("nan")

    @property
    def ci95_half_width(self) -> float:
        errs = np.asarray(self.trial_errors, dtype=float)
        errs = errs[np.isfinite(errs)]
        if errs.size < 2:
            return 0.0
        return float(Z95 * errs.std(ddof=1) / math.sqrt(errs.size))


METRICS = ("gap", "test")


def trial_error(settings: dict, seed: int, trial: int, sigma: float = SIGMA, metric: str = "gap",
                early_stop: bool = True) -> float:
    """Fit one trial and score it.

    ``gap``: clipped test risk minus clipped training risk (the quantity the
    uniform-convergence bound controls); ``test``: clipped test risk.
    """
    spec = SynthSpec(p=settings["p"], n_train=settings["n"], sigma=sigma, seed=seed * 10**6 + trial)
    train, test = generate(spec)
    basis = standard_catalog(settings["q"])
    model = fit(train, basis, FitConfig(iters=settings["k"], early_stop=early_stop))
    test_risk = float(np.mean(clipped_loss(test.y, predict(model, test.X))))
    if metric == "test":
        return test_risk
    if metric == "gap":
        train_risk = float(np.mean(clipped_loss(train.y, predict(model, train.X))))
        return test_risk - train_risk
    raise ValueError(f"unknown metric {metric!r}")


def _safe_trial(settings, seed, trial, sigma, metric, early_stop):
    try:
        return trial_error(settings, seed, trial, sigma, metric, early_stop)
    except Exception as exc:  # one failed trial must not sink the sweep
        log.warning("trial %d at %s failed: %s", trial, settings, exc)
        return float("nan")


def run_experiment(exp_id: int, trials: int = DEFAULT_TRIALS, seed: int = 0, scale: float = 1.0,
                   overrides: dict | None = None, sigma: float = SIGMA, metric: str = "gap",
                   n_jobs: int | None = None, early_stop: bool = True) -> list[ExperimentResult]:
    """Run one sweep; returns one result per sweep value, sorted by value.

    ``overrides`` replaces fixed settings or, under the key ``"values"``, the
    sweep values themselves.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    var, values, fixed = experiment_grid(exp_id, scale)
    overrides = dict(overrides or {})
    values = sorted(overrides.pop("values", values))
    fixed.update(overrides)
    jobs = []
    for v in values:
        settings = dict(fixed, **{var: v})
        for t in range(trials):
            jobs.append((v, t, settings))
    n_jobs = n_jobs or os.cpu_count() or 1
    errors = Parallel(n_jobs=n_jobs)(
        delayed(_safe_trial)(settings, seed, t, sigma, metric, early_stop) for _, t, settings in jobs
    )
    by_value: dict[int, list[float]] = {v: [math.nan] * trials for v in values}
    for (v, t, _), err in zip(jobs, errors):
        by_value[v][t] = err
    return [ExperimentResult(exp_id, var, v, by_value[v]) for v in values]


# --- trend checks -------------------------------------------------------------------

def trend_violations(results: list[ExperimentResult], direction: str) -> list[tuple[int, int, bool]]:
    """Adjacent sweep pairs that break the trend, with whether their CIs overlap."""
    if direction not in ("increasing", "decreasing"):
        raise ValueError("direction must be 'increasing' or 'decreasing'")
    rs = sorted(results, key=lambda r: r.sweep_value)
    out = []
    for a, b in zip(rs, rs[1:]):
        wrong = b.mean < a.mean if direction == "increasing" else b.mean > a.mean
        if wrong:
            overlap = (a.mean - a.ci95_half_width <= b.mean + b.ci95_half_width
                       and b.mean - b.ci95_half_width <= a.mean + a.ci95_half_width)
            out.append((a.sweep_value, b.sweep_value, overlap))
    return out


def trend_holds(results: list[ExperimentResult], direction: str, allowed: int = 1) -> bool:
    """Monotone up to ``allowed`` violations, each of which must stay inside CI overlap."""
    bad = trend_violations(results, direction)
    return len(bad) <= allowed and all(overlap for *_, overlap in bad)


EXPECTED_DIRECTION = {1: "decreasing", 2: "increasing", 3: "increasing", 4: "increasing"}


# --- output -----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "nan" if not math.isfinite(x) else "%.17g" % x


def results_csv(results: list[ExperimentResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(results, key=lambda r: (r.experiment, r.sweep_value)):
        mean, ci = _fmt(r.mean), _fmt(r.ci95_half_width)
        for t, err in enumerate(r.trial_errors):
            w.writerow([r.experiment, r.sweep_variable, r.sweep_value, t, _fmt(err), mean, ci])
    return buf.getvalue()


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 12))
        v += step
    return ticks


def results_svg(results: list[ExperimentResult], width: int = 800, height: int = 600) -> str:
    """Line chart of mean error against the sweep value with 95% CI error bars."""
    rs = sorted(results, key=lambda r: r.sweep_value)
    var = rs[0].sweep_variable
    exp_id = rs[0].experiment
    left, right, top, bottom = 90, 30, 50, 70
    xs = [float(r.sweep_value) for r in rs]
    lows = [r.mean - r.ci95_half_width for r in rs if math.isfinite(r.mean)]
    highs = [r.mean + r.ci95_half_width for r in rs if math.isfinite(r.mean)]
    ylo, yhi = (min(lows), max(highs)) if lows else (0.0, 1.0)
    yticks = _nice_ticks(ylo, yhi)
    ylo, yhi = min(yticks[0], ylo), max(yticks[-1], yhi)
    xlo, xhi = min(xs), max(xs)
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return top + (yhi - v) / (yhi - ylo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">'
        f'{escape(f"Experiment {exp_id}: error vs {var}")}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for v in xs:
        out.append(f'<line x1="{sx(v):.2f}" y1="{top + ph}" x2="{sx(v):.2f}" y2="{top + ph + 6}" stroke="black"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{top + ph + 22}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="12">{v:g}</text>')
    for v in yticks:
        out.append(f'<line x1="{left - 6}" y1="{sy(v):.2f}" x2="{left}" y2="{sy(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 10}" y="{sy(v) + 4:.2f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="12">{v:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 20}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="14">{escape(var)}</text>')
    out.append(f'<text x="22" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="14" '
               f'transform="rotate(-90 22 {top + ph / 2:.1f})">mean clipped risk</text>')
    pts = [(sx(float(r.sweep_value)), sy(r.mean), r) for r in rs if math.isfinite(r.mean)]
    if pts:
        out.append('<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="'
                   + " ".join(f"{x:.2f},{y:.2f}" for x, y, _ in pts) + '"/>')
    for x, y, r in pts:
        y0, y1 = sy(r.mean - r.ci95_half_width), sy(r.mean + r.ci95_half_width)
        out.append(f'<line x1="{x:.2f}" y1="{y0:.2f}" x2="{x:.2f}" y2="{y1:.2f}" stroke="#1f77b4"/>')
        for yy in (y0, y1):
            out.append(f'<line x1="{x - 5:.2f}" y1="{yy:.2f}" x2="{x + 5:.2f}" y2="{yy:.2f}" stroke="#1f77b4"/>')
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="#1f77b4"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_results(results: list[ExperimentResult], path) -> list[Path]:
    """Write ``results.csv`` plus one ``experiment_<id>.svg`` per experiment into directory ``path``."""
    if not results:
        raise ValueError("no results to emit")
    out_dir = Path(path)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = out_dir / "results.csv"
    csv_path.write_text(results_csv(results), encoding="utf-8")
    written.append(csv_path)
    for exp_id in sorted({r.experiment for r in results}):
        svg_path = out_dir / f"experiment_{exp_id}.svg"
        svg_path.write_text(results_svg([r for r in results if r.experiment == exp_id]), encoding="utf-8")
        written.append(svg_path)
    return written
