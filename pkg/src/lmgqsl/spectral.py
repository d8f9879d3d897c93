"""Diagonalization, level curves and densities of states."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import NumericalError
from .spin_core import OperatorMatrix, build_basis, build_lmg


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    block_tag: str = "full"
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class DensityProfile:
    energies: np.ndarray  # bin centres / evaluation points
    density: np.ndarray
    edges: np.ndarray
    norm: float  # integral of the density
    kind: str

    def normalized(self) -> np.ndarray:
        return self.density / self.norm


@dataclass(frozen=True)
class LevelCurves:
    alphas: np.ndarray
    energies: np.ndarray  # (n_alpha, n_levels)
    curvature_alphas: np.ndarray  # interior points only
    curvature: np.ndarray  # (n_alpha - 2, n_levels)
    step: float
    block_tag: str


def _is_tridiagonal(h: np.ndarray) -> bool:
    return h.shape[0] > 2 and not np.any(np.triu(h, 2))


def diagonalize(
    H: OperatorMatrix, eigvals_only: bool = False, params: dict | None = None
) -> Spectrum:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix.

    Even/odd LMG blocks are tridiagonal in m order and go through the LAPACK
    tridiagonal solver; anything else uses the dense symmetric one.
    """
    h = np.asarray(H.entries)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.array_equal(h, h.T):
        raise ValueError("matrix is not symmetric")
    params = dict(params or {})
    try:
        if _is_tridiagonal(h):
            out = linalg.eigh_tridiagonal(
                np.diag(h).copy(), np.diag(h, 1).copy(), eigvals_only=eigvals_only
            )
        else:
            out = linalg.eigh(h, eigvals_only=eigvals_only)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"eigensolver failed on {H.block_tag} block of dim {H.dim} "
            f"(params={params}): {exc}"
        ) from exc
    if eigvals_only:
        values, vectors = out, None
    else:
        values, vectors = out
        vectors.setflags(write=False)
    values.setflags(write=False)
    return Spectrum(values, vectors, H.block_tag, params)


def curvature(values: np.ndarray, step: float) -> np.ndarray:
    """Central second difference along axis 0; endpoints are dropped."""
    values = np.asarray(values, dtype=float)
    return (values[2:] - 2.0 * values[1:-1] + values[:-2]) / step**2


def level_curves(N: int, alphas: Sequence[float], block: str = "even") -> LevelCurves:
    """Energies E_n(alpha) of the environment Hamiltonian and their curvature.

    Levels are tracked by sorted index inside the block; there are no
    crossings within a parity block.
    """
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or len(alphas) < 5:
        raise ValueError("alpha grid needs at least 5 points")
    steps = np.diff(alphas)
    step = float(steps.mean())
    if step <= 0 or not np.allclose(steps, step, rtol=1e-6, atol=1e-12):
        raise ValueError("alpha grid must be uniform and increasing")
    if alphas[0] < 0 or alphas[-1] > 1:
        raise ValueError("alpha grid must lie inside [0, 1]")
    basis = build_basis(N)
    energies = np.array(
        [
            diagonalize(build_lmg(basis, a, block), eigvals_only=True).eigenvalues
            for a in alphas
        ]
    )
    return LevelCurves(
        alphas, energies, alphas[1:-1], curvature(energies, step), step, block
    )


def _values(spectrum: Spectrum | np.ndarray) -> np.ndarray:
    if isinstance(spectrum, Spectrum):
        return np.asarray(spectrum.eigenvalues)
    return np.asarray(spectrum, dtype=float)


def dos_histogram(spectrum: Spectrum | np.ndarray, n_bins: int = 100) -> DensityProfile:
    """Level density: counts per uniform bin over [min E, max E] over bin width."""
    e = _values(spectrum)
    if e.size == 0:
        raise ValueError("empty spectrum")
    if n_bins < 10:
        raise ValueError(f"n_bins must be >= 10, got {n_bins}")
    lo, hi = float(e.min()), float(e.max())
    if hi == lo:
        hi = lo + 1.0
    counts, edges = np.histogram(e, bins=n_bins, range=(lo, hi))
    width = edges[1] - edges[0]
    centres = 0.5 * (edges[:-1] + edges[1:])
    return DensityProfile(centres, counts / width, edges, float(e.size), "histogram")


def classical_energy(alpha: float, cos_theta, phi):
    """Coherent-state energy per spin, h(theta, phi), of the environment."""
    return -(1.0 - alpha) * (1.0 - cos_theta**2) * np.cos(phi) ** 2 + 0.5 * alpha * (
        1.0 + cos_theta
    )


def classical_dos(
    N: int,
    alpha: float,
    energy_grid: Sequence[float],
    resolution: int = 4000,
) -> DensityProfile:
    """Smooth density of states from the phase-space volume of N*h(theta, phi).

    The sphere is sampled on a ``resolution`` x ``resolution`` midpoint grid
    that is uniform in (cos theta, phi), i.e. in the measure sin(theta)
    d theta d phi. Samples are binned onto ``energy_grid`` with one bin of
    width equal to the grid spacing per point, and the result is normalized
    so the sphere as a whole carries N + 1 states.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"classical DOS needs 0 <= alpha < 1, got {alpha}")
    grid = np.asarray(energy_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("energy grid needs at least 2 points")
    spacing = float(np.diff(grid).mean())
    if spacing <= 0 or not np.allclose(np.diff(grid), spacing, rtol=1e-6):
        raise ValueError("energy grid must be uniform and increasing")
    edges = np.concatenate([grid - spacing / 2, [grid[-1] + spacing / 2]])

    n = int(resolution)
    z = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    cos2phi = np.cos((np.arange(n) + 0.5) / n * 2.0 * np.pi) ** 2
    counts = np.zeros(len(grid), dtype=np.int64)
    chunk = max(1, 4_000_000 // n)
    for start in range(0, n, chunk):
        zz = z[start : start + chunk, None]
        e = N * (-(1.0 - alpha) * (1.0 - zz**2) * cos2phi + 0.5 * alpha * (1.0 + zz))
        idx = np.floor((e.ravel() - edges[0]) / spacing).astype(np.int64)
        idx = idx[(idx >= 0) & (idx < len(grid))]
        counts += np.bincount(idx, minlength=len(grid))

    cell_states = (N + 1) / float(n * n)
    density = counts * cell_states / spacing
    return DensityProfile(grid, density, edges, float(density.sum() * spacing), "classical")
