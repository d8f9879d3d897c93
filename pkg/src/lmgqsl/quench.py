"""Quench of the environment ground state and the resulting time series.

The environment starts in the even-parity ground state G of the branch-0
Hamiltonian and evolves under branch 1. Everything downstream follows from
the decomposition of G in the branch-1 eigenbasis:

    M(t)      = sum_k w_k exp(-i E_k t)
    dM/dt     = -i sum_k w_k E_k exp(-i E_k t)

with w_k = |<k|G>|^2 and E_k the branch-1 energies in the chosen frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .spectral import DensityProfile, diagonalize
from .spin_core import build_basis, build_effective

# Components with weight below this are dropped when evaluating time series.
WEIGHT_CUTOFF = 1e-18
# Largest phase advance max|E_k| * dt allowed on a series grid.
MAX_PHASE_STEP = 0.1
DEFAULT_POINTS = 2000


@lru_cache(maxsize=64)
def _ground_state(N: int, alpha: float) -> tuple[float, np.ndarray]:
    basis = build_basis(N)
    h0 = build_effective(basis, alpha, 0.0, branch=0, block="even")
    spec = diagonalize(h0, params={"N": N, "alpha": alpha, "branch": 0})
    g = np.array(spec.eigenvectors[:, 0])
    # fix the overall sign so the output is reproducible
    if g[np.argmax(np.abs(g))] < 0:
        g = -g
    g.setflags(write=False)
    return float(spec.eigenvalues[0]), g


def ground_state(N: int, alpha: float) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of the even block of the branch-0 Hamiltonian."""
    return _ground_state(int(N), float(alpha))


@dataclass(frozen=True)
class QuenchDecomposition:
    weights: np.ndarray
    energies: np.ndarray
    ground_energy: float
    N: int
    alpha: float
    lam: float
    frame: str

    @property
    def params(self) -> dict:
        return {"N": self.N, "alpha": self.alpha, "lambda": self.lam, "frame": self.frame}

    def active(self, cutoff: float = WEIGHT_CUTOFF) -> tuple[np.ndarray, np.ndarray]:
        keep = self.weights > cutoff
        return self.weights[keep], self.energies[keep]


def decompose_quench(
    N: int, alpha: float, lam: float, frame: str = "critical"
) -> QuenchDecomposition:
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    e0, g = ground_state(N, alpha)
    basis = build_basis(N)
    # eigenvectors are frame independent, so diagonalize in the interaction frame
    h1 = build_effective(basis, alpha, lam, branch=1, frame="interaction", block="even")
    spec = diagonalize(h1, params={"N": N, "alpha": alpha, "lambda": lam, "branch": 1})
    w = (spec.eigenvectors.T @ g) ** 2
    w = w / w.sum()
    if frame == "critical":
        energies = spec.eigenvalues + (alpha + lam) * N / 2
    elif frame == "interaction":
        energies = spec.eigenvalues - e0
    else:
        raise ValueError(f"unknown frame {frame!r}")
    w.setflags(write=False)
    energies = np.array(energies)
    energies.setflags(write=False)
    return QuenchDecomposition(w, energies, e0, int(N), float(alpha), float(lam), frame)


def energy_moments(dec: QuenchDecomposition) -> tuple[float, float]:
    """Weighted mean and variance of the quenched energy distribution."""
    w, e = dec.weights, dec.energies
    mean = float(np.dot(w, e))
    # shifted second moment keeps the variance frame invariant to rounding
    var = float(np.dot(w, (e - mean) ** 2))
    return mean, max(var, 0.0)


@dataclass(frozen=True)
class DecoherenceSeries:
    t: np.ndarray
    M: np.ndarray
    dM: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def tau_e(self) -> float:
        return float(self.t[-1])

    @property
    def rate(self) -> np.ndarray:
        """|dM/dt|; falls back to centred differences for synthetic series."""
        if self.dM is not None:
            return np.abs(self.dM)
        return np.abs(np.gradient(self.M, self.t))

    def index_of(self, tau: float) -> int:
        i = int(round(tau / self.dt))
        if i < 1 or i >= len(self.t) or abs(self.t[i] - tau) > 1e-9 * max(1.0, tau):
            raise ValueError(f"tau_e={tau} is not a point of the series grid")
        return i

    def truncated(self, tau: float) -> DecoherenceSeries:
        i = self.index_of(tau)
        dM = None if self.dM is None else self.dM[: i + 1]
        return DecoherenceSeries(self.t[: i + 1], self.M[: i + 1], dM, self.params)


def max_time_step(dec: QuenchDecomposition, tau_e: float) -> float:
    """Default step: min(tau_e / 2000, 0.1 / max|E_k|) over active components."""
    _, e = dec.active()
    emax = float(np.abs(e).max()) if e.size else 0.0
    step = tau_e / DEFAULT_POINTS
    if emax > 0:
        step = min(step, MAX_PHASE_STEP / emax)
    return step


def decoherence_series(
    dec: QuenchDecomposition,
    tau_e: float,
    dt: float | None = None,
    n_steps: int | None = None,
    block: int = 1024,
) -> DecoherenceSeries:
    """Evaluate M(t) and dM/dt exactly on a uniform grid over [0, tau_e].

    ``dt`` is an upper bound: the grid uses n = ceil(tau_e / dt) steps so that
    tau_e is hit exactly. ``n_steps`` fixes n directly.
    """
    if tau_e <= 0:
        raise ValueError(f"tau_e must be positive, got {tau_e}")
    w, e = dec.active()
    emax = float(np.abs(e).max()) if e.size else 0.0
    if n_steps is None:
        if dt is None:
            dt = max_time_step(dec, tau_e)
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        n_steps = max(1, math.ceil(tau_e / dt - 1e-9))
    n = int(n_steps)
    if n < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    step = tau_e / n
    if emax * step > MAX_PHASE_STEP * (1 + 1e-9):
        raise ValueError(
            f"time step {step:g} under-resolves the fastest phase: "
            f"max|E|*dt = {emax * step:.3g} > {MAX_PHASE_STEP}"
        )
    t = np.arange(n + 1) * step
    t[-1] = tau_e

    # exp(-iE(t0 + s)) = exp(-iE t0) exp(-iE s): one exponential block reused per chunk
    block = min(block, n + 1)
    base = np.exp(-1j * np.outer(np.arange(block) * step, e))
    coef = np.stack([w, -1j * w * e], axis=1).astype(complex)
    out = np.empty((n + 1, 2), dtype=complex)
    for start in range(0, n + 1, block):
        stop = min(start + block, n + 1)
        phase = np.exp(-1j * e * (start * step))
        out[start:stop] = base[: stop - start] @ (coef * phase[:, None])
    M, dM = out[:, 0], out[:, 1]
    M[0] = 1.0  # <G|G>
    return DecoherenceSeries(t, M, dM, dec.params)


def _zero_aligned_edges(lo: float, hi: float, n_bins: int) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    width = (hi - lo) / n_bins
    k_lo = math.floor(lo / width)
    k_hi = math.ceil(hi / width)
    if k_hi == k_lo:
        k_hi += 1
    return np.arange(k_lo, k_hi + 1) * width


def strength_and_A(
    dec: QuenchDecomposition,
    n_bins: int = 100,
    energy_range: tuple[float, float] | None = None,
) -> tuple[DensityProfile, DensityProfile]:
    """Binned strength function omega(E) and energy-weighted A(E).

    Bins have uniform width (range / n_bins) with one edge pinned at E = 0, so
    no bin straddles zero. Each bin holds the summed weight (omega) or summed
    weight * energy (A); they are not divided by the bin width.
    """
    if n_bins < 10:
        raise ValueError(f"n_bins must be >= 10, got {n_bins}")
    e, w = dec.energies, dec.weights
    lo, hi = energy_range or (float(e.min()), float(e.max()))
    edges = _zero_aligned_edges(lo, hi, n_bins)
    omega, _ = np.histogram(e, bins=edges, weights=w)
    a, _ = np.histogram(e, bins=edges, weights=w * e)
    centres = 0.5 * (edges[:-1] + edges[1:])
    return (
        DensityProfile(centres, omega, edges, float(omega.sum()), "strength"),
        DensityProfile(centres, a, edges, float(a.sum()), "weighted_strength"),
    )

