"""Collective spin basis, operator matrices and LMG Hamiltonians.

Operators are standard angular-momentum operators in the maximal sector
S = N/2, so S_z has eigenvalues -N/2, ..., N/2 and the full space has
dimension N + 1. Parity Pi = (-1)^(S+m) splits the space into an even block
(N/2 + 1 states, contains the ground state) and an odd block (N/2 states).

All matrices are real, dense and exactly symmetric. They are returned
read-only so they can be shared between scan workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

BLOCKS = ("full", "even", "odd")
FRAMES = ("interaction", "critical")


@dataclass(frozen=True)
class SpinBasis:
    N: int
    m_values: np.ndarray
    parity: np.ndarray  # +1 even, -1 odd

    @property
    def S(self) -> float:
        return self.N / 2

    @property
    def dim(self) -> int:
        return self.N + 1

    def indices(self, block: str) -> np.ndarray:
        """Basis indices of ``block`` in ascending m order."""
        if block == "full":
            return np.arange(self.dim)
        if block == "even":
            return np.flatnonzero(self.parity == 1)
        if block == "odd":
            return np.flatnonzero(self.parity == -1)
        raise ValueError(f"unknown block {block!r}; expected one of {BLOCKS}")


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray
    block_tag: str = "full"

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __add__(self, other: OperatorMatrix) -> OperatorMatrix:
        _check_same_block(self, other)
        return _frozen(self.entries + other.entries, self.block_tag)

    def __sub__(self, other: OperatorMatrix) -> OperatorMatrix:
        _check_same_block(self, other)
        return _frozen(self.entries - other.entries, self.block_tag)

    def scaled(self, factor: float) -> OperatorMatrix:
        return _frozen(factor * self.entries, self.block_tag)


def _check_same_block(a: OperatorMatrix, b: OperatorMatrix) -> None:
    if a.block_tag != b.block_tag or a.dim != b.dim:
        raise ValueError(
            f"operator mismatch: {a.block_tag}[{a.dim}] vs {b.block_tag}[{b.dim}]"
        )


def _frozen(entries: np.ndarray, block_tag: str) -> OperatorMatrix:
    entries = np.array(entries, dtype=float)
    entries.setflags(write=False)
    return OperatorMatrix(entries, block_tag)


def build_basis(N: int) -> SpinBasis:
    if isinstance(N, bool) or int(N) != N:
        raise ValueError(f"N must be an integer, got {N!r}")
    N = int(N)
    if N < 2 or N % 2:
        raise ValueError(f"N must be even and >= 2, got {N}")
    # m = -S..S; S + m = 0..N, so parity alternates starting with even.
    m = np.arange(N + 1, dtype=float) - N / 2
    parity = np.where(np.arange(N + 1) % 2 == 0, 1, -1)
    m.setflags(write=False)
    parity.setflags(write=False)
    return SpinBasis(N, m, parity)


def project(op: OperatorMatrix, basis: SpinBasis, block: str) -> OperatorMatrix:
    """Restrict a full-space operator to a parity block."""
    if op.block_tag != "full":
        if op.block_tag == block:
            return op
        raise ValueError(f"cannot project a {op.block_tag} block onto {block}")
    idx = basis.indices(block)
    return _frozen(op.entries[np.ix_(idx, idx)], block)


@lru_cache(maxsize=16)
def _collective_full(N: int) -> tuple[OperatorMatrix, OperatorMatrix]:
    basis = build_basis(N)
    S, m = basis.S, basis.m_values
    dim = basis.dim

    sz = np.diag(m)

    # <m+1|S_+|m> and <m-1|S_-|m>; S_x = (S_+ + S_-)/2.
    up = np.sqrt(np.maximum(S * (S + 1) - m * (m + 1), 0.0))
    down = np.sqrt(np.maximum(S * (S + 1) - m * (m - 1), 0.0))
    sxsq = np.zeros((dim, dim))
    sxsq[np.arange(dim), np.arange(dim)] = 0.25 * (up**2 + down**2)
    # <m+2|S_x^2|m> = <m+2|S_+|m+1><m+1|S_+|m> / 4
    i = np.arange(dim - 2)
    off = 0.25 * up[i] * up[i + 1]
    sxsq[i + 2, i] = off
    sxsq[i, i + 2] = off
    return _frozen(sz, "full"), _frozen(sxsq, "full")


def build_collective_operators(
    basis: SpinBasis, block: str = "full"
) -> tuple[OperatorMatrix, OperatorMatrix]:
    """Return ``(S_z, S_x^2)`` on ``block``."""
    sz, sxsq = _collective_full(basis.N)
    if block == "full":
        return sz, sxsq
    return project(sz, basis, block), project(sxsq, basis, block)


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")


def _hamiltonian(
    basis: SpinBasis, interaction: float, field: float, shift: float, block: str
) -> OperatorMatrix:
    sz, sxsq = build_collective_operators(basis, block)
    h = interaction * sxsq.entries + field * sz.entries
    if shift:
        h = h + shift * np.eye(sz.dim)
    return _frozen(h, block)


def build_lmg(basis: SpinBasis, alpha: float, block: str = "full") -> OperatorMatrix:
    """Environment Hamiltonian -4(1-a)/N S_x^2 + a (S_z + N/2)."""
    _check_alpha(alpha)
    N = basis.N
    return _hamiltonian(basis, -4.0 * (1.0 - alpha) / N, alpha, alpha * N / 2, block)


def build_effective(
    basis: SpinBasis,
    alpha: float,
    lam: float,
    branch: int,
    frame: str = "critical",
    block: str = "full",
) -> OperatorMatrix:
    """Effective environment Hamiltonian for qubit state ``branch``.

    Branch 0 is -4(1-a)/N S_x^2 + a S_z whatever the frame. Branch 1 has the
    field shifted to a + lam; in the critical frame the constant (a + lam) N/2
    is added so the separatrix of the quenched Hamiltonian sits at E = 0.
    """
    _check_alpha(alpha)
    if branch not in (0, 1):
        raise ValueError(f"branch must be 0 or 1, got {branch}")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}; expected one of {FRAMES}")
    N = basis.N
    interaction = -4.0 * (1.0 - alpha) / N
    if branch == 0:
        return _hamiltonian(basis, interaction, alpha, 0.0, block)
    field = alpha + lam
    shift = field * N / 2 if frame == "critical" else 0.0
    return _hamiltonian(basis, interaction, field, shift, block)
