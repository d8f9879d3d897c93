"""Qubit-level metrics built on the decoherence factor M(t).

The qubit starts in cos(theta/2)|0> + exp(-i phi) sin(theta/2)|1>. Its reduced
state keeps its populations and has the coherence scaled by M(t), so every
quantity here is a closed-form function of M and dM/dt.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .quench import DecoherenceSeries, QuenchDecomposition, decoherence_series, max_time_step

log = logging.getLogger(__name__)

MODULUS_EPS = 1e-12


@dataclass(frozen=True)
class QubitAngles:
    theta: float = math.pi / 2
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi must lie in [0, 2pi), got {self.phi}")


@dataclass(frozen=True)
class MetricSample:
    tau_e: float
    tau_qsl: float
    gamma_inf: float
    nm: float
    params: dict = field(default_factory=dict)


def _angles(angles) -> QubitAngles:
    if isinstance(angles, QubitAngles):
        return angles
    return QubitAngles(float(angles))


def reduced_density(angles: QubitAngles, M: complex) -> np.ndarray:
    """2x2 reduced state of the qubit for decoherence factor ``M``."""
    a = _angles(angles)
    if abs(M) > 1 + 1e-12:
        raise ValueError(f"|M| = {abs(M)} exceeds 1")
    coh = 0.5 * math.sin(a.theta) * np.exp(-1j * a.phi) * M
    return np.array(
        [
            [math.cos(a.theta / 2) ** 2, np.conj(coh)],
            [coh, math.sin(a.theta / 2) ** 2],
        ],
        dtype=complex,
    )


def bures_angle(angles: QubitAngles, M: complex) -> float:
    a = _angles(angles)
    s2 = 0.5 * math.sin(a.theta) ** 2 * (1.0 - float(np.real(M)))
    if s2 < -1e-9 or s2 > 1 + 1e-9:
        log.warning("sin^2 of the Bures angle clamped from %.3g", s2)
    return math.asin(math.sqrt(min(max(s2, 0.0), 1.0)))


def liouvillian_norms(theta: float, rate: float) -> tuple[float, float, float]:
    """Schatten 1, 2 and infinity norms of dρ/dt for decoherence rate |dM/dt|."""
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    # dρ/dt is Hermitian and off-diagonal: two equal singular values
    s = 0.5 * math.sin(theta) * rate
    return 2.0 * s, math.sqrt(2.0) * s, s


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    rho1 = np.asarray(rho1, dtype=complex)
    rho2 = np.asarray(rho2, dtype=complex)
    for rho in (rho1, rho2):
        if not np.allclose(rho, rho.conj().T, atol=1e-12, rtol=0):
            raise ValueError("density matrix is not Hermitian")
    diff = rho1 - rho2
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def modulus_derivative(series: DecoherenceSeries) -> np.ndarray:
    """d|M|/dt = Re(M* dM/dt) / |M|; one-sided differences where |M| ~ 0."""
    M, t = series.M, series.t
    mod = np.abs(M)
    fd = np.gradient(mod, t, edge_order=1)
    if series.dM is None:
        return fd
    out = fd.copy()
    ok = mod > MODULUS_EPS
    out[ok] = np.real(np.conj(M[ok]) * series.dM[ok]) / mod[ok]
    return out


def _variation(t: np.ndarray, f: np.ndarray, df: np.ndarray) -> float:
    """int |df/dt| dt over a sampled curve.

    Monotone steps contribute |f1 - f0| exactly. In a step where the slope
    changes sign the turning value is estimated from a linear slope model,
    so the step contributes |f_ext - f0| + |f1 - f_ext| >= |f1 - f0|.
    """
    h = np.diff(t)
    d0, d1 = df[:-1], df[1:]
    total = np.abs(np.diff(f))
    turn = d0 * d1 < 0
    if np.any(turn):
        s = h[turn] * d0[turn] / (d0[turn] - d1[turn])
        f0, f1 = f[:-1][turn], f[1:][turn]
        f_ext = f0 + 0.5 * d0[turn] * s
        total[turn] = np.abs(f_ext - f0) + np.abs(f1 - f_ext)
    return float(total.sum())


def non_markovianity(series: DecoherenceSeries) -> float:
    """Trace-distance non-Markovianity for the equatorial antipodal pair.

    N = (int_0^tau |d|M|/dt| dt + |M(tau)| - 1) / 2. The integral is the total
    variation of |M|, which makes N >= 0 on any grid (up to rounding).
    """
    mod = np.abs(series.M)
    flow = _variation(series.t, mod, modulus_derivative(series))
    value = 0.5 * (flow + mod[-1] - 1.0)
    if -1e-12 < value < 0:
        value = 0.0
    return float(value)


def qsl_time(series: DecoherenceSeries, angles: QubitAngles | float = QubitAngles()) -> MetricSample:
    """Speed-limit time for evolving over the whole series, [0, tau_e].

    A vanishing rate integral or an uncoupled qubit (lambda = 0) gives 0.
    """
    a = _angles(angles)
    tau = series.tau_e
    mean_rate = float(np.trapezoid(series.rate, series.t)) / tau
    gamma_inf = 0.5 * math.sin(a.theta) * mean_rate
    uncoupled = series.params.get("lambda") == 0
    if mean_rate == 0.0 or uncoupled:
        tau_qsl = 0.0
    else:
        tau_qsl = math.sin(a.theta) * (1.0 - float(np.real(series.M[-1]))) / mean_rate
    params = dict(series.params, theta=a.theta, phi=a.phi)
    return MetricSample(tau, tau_qsl, gamma_inf, non_markovianity(series), params)


def refined_metrics(
    dec: QuenchDecomposition,
    taus,
    angles: QubitAngles | float = QubitAngles(),
    rtol: float = 1e-6,
    max_halvings: int = 6,
) -> list[MetricSample]:
    """Metrics at several evolution times from one series, with step refinement.

    One series is evaluated up to max(taus) on a grid that contains every tau.
    The step is halved until tau_QSL changes by less than ``rtol`` (relative)
    at every tau, or ``max_halvings`` is reached (logged).
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus <= 0):
        raise ValueError("evolution times must be positive")
    tau_max = float(taus.max())
    # common step dividing every tau: tau_k = n_k * unit
    unit = _common_unit(taus)
    step = min(max_time_step(dec, float(taus.min())), max_time_step(dec, tau_max))
    sub = max(1, math.ceil(unit / step - 1e-9))

    def evaluate(sub: int) -> list[MetricSample]:
        n_steps = int(round(tau_max / unit)) * sub
        series = decoherence_series(dec, tau_max, n_steps=n_steps)
        return [qsl_time(series.truncated(t), angles) for t in taus]

    current = evaluate(sub)
    for _ in range(max_halvings):
        sub *= 2
        finer = evaluate(sub)
        converged = all(
            abs(f.tau_qsl - c.tau_qsl) <= rtol * max(abs(f.tau_qsl), 1e-300)
            for f, c in zip(finer, current)
        )
        current = finer
        if converged:
            break
    else:
        log.info("tau_QSL not converged to rtol=%g for %s", rtol, dec.params)
    return current


def _common_unit(taus: np.ndarray) -> float:
    """Largest step u (up to rounding) with every tau an integer multiple of u."""
    scale = 1e6
    ints = np.rint(taus * scale).astype(np.int64)
    if not np.allclose(ints / scale, taus, rtol=0, atol=1e-9):
        raise ValueError("evolution times must be multiples of 1e-6")
    return float(np.gcd.reduce(ints)) / scale
