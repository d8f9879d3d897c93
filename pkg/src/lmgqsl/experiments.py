"""Parameter sweeps and fits over (lambda, alpha, N, tau_e).

Scan points are independent; they are farmed out to a process pool when more
than one worker is requested and always collected back in grid order, so the
output does not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NumericalError
from .qsl_metrics import MetricSample, QubitAngles, refined_metrics
from .quench import decompose_quench

WORKERS_ENV = "LMGQSL_WORKERS"
ALPHA_C = 0.8
DEFAULT_LAMBDA = (0.05, 2.0, 0.005)
DEFAULT_ALPHAS = tuple(round(0.08 * k, 2) for k in range(10))
DEFAULT_SIZES = tuple(range(200, 2001, 200))
DEFAULT_TAUS = tuple(float(k) for k in range(1, 11))


@dataclass(frozen=True)
class ScanGrid:
    axis: str
    values: np.ndarray
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError(f"{self.axis} grid must be a non-empty sequence")
        if values.size > 1 and np.any(np.diff(values) <= 0):
            raise ValueError(f"{self.axis} grid must be strictly increasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ScanResult:
    grid: ScanGrid
    samples: list[MetricSample]
    metric: str
    values: np.ndarray
    argmax_index: int

    @property
    def argmax(self) -> float:
        return float(self.grid.values[self.argmax_index])

    @property
    def max_value(self) -> float:
        return float(self.values[self.argmax_index])


@dataclass(frozen=True)
class FitResult:
    mu: float
    intercept: float
    rss: float
    n: int


@dataclass(frozen=True)
class Heatmap:
    taus: np.ndarray
    lambdas: np.ndarray
    tau_qsl: np.ndarray  # (len(taus), len(lambdas))
    row_argmax: np.ndarray  # index into lambdas, per tau


def uniform_grid(start: float, stop: float, step: float, decimals: int = 10) -> np.ndarray:
    """start, start + step, ... up to stop inclusive, rounded to kill drift."""
    if step <= 0:
        raise ValueError(f"grid step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"grid stop {stop} is below start {start}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return np.round(start + step * np.arange(n + 1), decimals)


def lambda_grid(
    alpha: float,
    start: float = DEFAULT_LAMBDA[0],
    stop: float = DEFAULT_LAMBDA[1],
    step: float = DEFAULT_LAMBDA[2],
    require_critical: bool = True,
    **fixed,
) -> ScanGrid:
    """Uniform lambda grid; it must contain the analytic critical coupling when in range."""
    values = uniform_grid(start, stop, step)
    if require_critical and alpha <= ALPHA_C:
        lc = analytic_critical_coupling(alpha)
        if values[0] <= lc <= values[-1] and not np.any(np.isclose(values, lc, atol=1e-9)):
            raise ValueError(
                f"lambda grid from {start} step {step} misses the critical coupling {lc:g}"
            )
    return ScanGrid("lambda", values, dict(fixed, alpha=alpha))


def argmax_first(values: Sequence[float]) -> int:
    """Index of the maximum; ties go to the earliest (smallest axis value)."""
    values = np.asarray(values, dtype=float)
    if np.any(np.isnan(values)):
        raise NumericalError("NaN in scan values")
    return int(np.argmax(values))


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _pmap(fn: Callable, items: Iterable, workers: int | None) -> list:
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * n))))


def analytic_critical_coupling(alpha: float) -> float:
    """Coupling that puts the quenched mean energy on the separatrix: 2 - 5 alpha / 2."""
    if not 0.0 <= alpha <= ALPHA_C:
        raise ValueError(f"critical coupling defined for 0 <= alpha <= 0.8, got {alpha}")
    return 2.0 - 2.5 * alpha


def mean_field_check(alpha: float, lam: float) -> tuple[float, float, float]:
    """Mean-field energies per spin: (ground, quenched mean, separatrix).

    All three are in the frame where the separatrix sits at zero. The deformed
    ground state has cos(theta*) = -alpha / (4 (1 - alpha)).
    """
    if not 0.0 <= alpha < ALPHA_C:
        raise ValueError(f"deformed phase requires 0 <= alpha < 0.8, got {alpha}")
    c = -alpha / (4.0 * (1.0 - alpha))
    ground = -(1.0 - alpha) * (1.0 - c * c) + 0.5 * alpha * (1.0 + c)
    mean = ground + 0.5 * lam * (1.0 + c)
    return ground, mean, 0.0


def _metrics_task(args) -> list[MetricSample]:
    N, alpha, lam, taus, theta, frame, rtol = args
    dec = decompose_quench(N, alpha, lam, frame)
    return refined_metrics(dec, taus, QubitAngles(theta), rtol=rtol)


def _run_points(points, workers) -> list[list[MetricSample]]:
    try:
        results = _pmap(_metrics_task, points, workers)
    except (ValueError, NumericalError, FloatingPointError) as exc:
        raise NumericalError(f"scan failed: {exc}") from exc
    for samples in results:
        for s in samples:
            if not np.isfinite(s.tau_qsl) or s.tau_qsl > s.tau_e * (1 + 1e-9):
                raise NumericalError(f"tau_QSL={s.tau_qsl} exceeds tau_e={s.tau_e} at {s.params}")
    return results


def _scan(grid: ScanGrid, N, alpha, tau_e, theta, frame, rtol, workers, metric) -> ScanResult:
    points = [(N, alpha, float(lam), (tau_e,), theta, frame, rtol) for lam in grid.values]
    samples = [res[0] for res in _run_points(points, workers)]
    values = np.array([getattr(s, metric) for s in samples])
    return ScanResult(grid, samples, metric, values, argmax_first(values))


def lambda_scan(
    grid: ScanGrid,
    N: int,
    alpha: float,
    tau_e: float,
    theta: float = math.pi / 2,
    frame: str = "critical",
    rtol: float = 1e-6,
    workers: int | None = None,
) -> ScanResult:
    """tau_QSL along a lambda grid; the argmax is the numerical critical coupling."""
    return _scan(grid, N, alpha, tau_e, theta, frame, rtol, workers, "tau_qsl")


def nm_scan(
    grid: ScanGrid,
    N: int,
    alpha: float,
    tau_e: float,
    theta: float = math.pi / 2,
    frame: str = "critical",
    rtol: float = 1e-6,
    workers: int | None = None,
) -> ScanResult:
    """Non-Markovianity along a lambda grid."""
    return _scan(grid, N, alpha, tau_e, theta, frame, rtol, workers, "nm")


def critical_locus(
    alphas: Sequence[float],
    N: int = 1000,
    tau_e: float = 1.0,
    lambda_range: tuple[float, float, float] = DEFAULT_LAMBDA,
    frame: str = "critical",
    workers: int | None = None,
) -> np.ndarray:
    """Rows (alpha, numerical lambda_c, analytic lambda_c)."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas < 0) or np.any(alphas > 0.72 + 1e-12):
        raise ValueError("critical locus alphas must lie in [0, 0.72]")
    rows = []
    for a in alphas:
        grid = lambda_grid(float(a), *lambda_range)
        scan = lambda_scan(grid, N, float(a), tau_e, frame=frame, workers=workers)
        rows.append((a, scan.argmax, analytic_critical_coupling(float(a))))
    return np.array(rows)


def fit_power_law(sizes: Sequence[float], values: Sequence[float]) -> FitResult:
    """Least squares of log(values) = intercept - mu log(sizes), equal weights."""
    x = np.log(np.asarray(sizes, dtype=float))
    y_raw = np.asarray(values, dtype=float)
    if np.any(y_raw <= 0):
        raise NumericalError("power-law fit needs strictly positive values")
    y = np.log(y_raw)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    rss = float(np.sum((A @ np.array([slope, intercept]) - y) ** 2))
    return FitResult(float(-slope), float(intercept), rss, len(x))


def size_scaling(
    sizes: Sequence[int] = DEFAULT_SIZES,
    alpha: float = 0.4,
    tau_e: float = 1.0,
    lam: float | None = None,
    frame: str = "critical",
    workers: int | None = None,
) -> tuple[FitResult, np.ndarray]:
    """Fit 1 - tau_QSL(lambda_c) ~ N^-mu. Returns the fit and tau_QSL per size."""
    sizes = [int(n) for n in sizes]
    if len(sizes) < 5:
        raise ValueError("size scaling needs at least 5 sizes")
    if any(n % 2 for n in sizes):
        raise ValueError("all sizes must be even")
    lam = analytic_critical_coupling(alpha) if lam is None else lam
    points = [(n, alpha, lam, (tau_e,), math.pi / 2, frame, 1e-6) for n in sizes]
    taus = np.array([res[0].tau_qsl for res in _run_points(points, workers)])
    if np.any(taus >= tau_e):
        raise NumericalError("tau_QSL >= tau_e: 1 - tau_QSL is not positive")
    return fit_power_law(sizes, tau_e - taus), taus


def qsl_heatmap(
    taus: Sequence[float],
    grid: ScanGrid,
    N: int = 1000,
    alpha: float = 0.4,
    theta: float = math.pi / 2,
    frame: str = "critical",
    workers: int | None = None,
) -> Heatmap:
    """tau_QSL over (tau_e, lambda). Each lambda uses one series out to max(tau_e)."""
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or np.any(np.diff(taus) <= 0):
        raise ValueError("tau_e grid must be strictly increasing")
    points = [(N, alpha, float(lam), tuple(taus), theta, frame, 1e-6) for lam in grid.values]
    columns = _run_points(points, workers)
    matrix = np.array([[s.tau_qsl for s in col] for col in columns]).T
    row_argmax = np.array([argmax_first(row) for row in matrix])
    return Heatmap(taus, np.asarray(grid.values), matrix, row_argmax)
