"""Two-mode Kerr model: sector-blocked Hamiltonian construction and diagonalization.

The Hamiltonian (hbar = 1)

    H = omega a'a + omega0 b'b + gamma b'b'bb + g (a'b + b'a)

conserves the total excitation number a'a + b'b, so it splits into
independent blocks labelled by the total number n.  In the product basis
|k>_field (x) |n-k>_atom, k = 0..n, each block is a real-symmetric
tridiagonal (n+1) x (n+1) matrix.
"""

from dataclasses import dataclass
from math import isfinite

import numpy as np
from scipy.linalg import eigh_tridiagonal

# Beyond this the block would not fit in memory anyway; reject early.
SECTOR_LIMIT = 10**6


@dataclass(frozen=True)
class ModelParams:
    """Frequencies and couplings of the two-mode Kerr Hamiltonian.

    omega   -- field-mode frequency
    omega0  -- atomic-oscillator frequency
    gamma   -- Kerr nonlinearity strength (>= 0)
    g       -- inter-mode coupling strength (>= 0)

    Only the detuning omega0 - omega affects the mean photon number: a
    uniform shift of both frequencies adds a multiple of the conserved
    total number and is a pure gauge.  Defaults are exact resonance.
    """

    omega: float = 1.0
    omega0: float = 1.0
    gamma: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        for name in ("omega", "omega0", "gamma", "g"):
            v = float(getattr(self, name))
            if not isfinite(v):
                raise ValueError(f"ModelParams.{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.g < 0:
            raise ValueError("g must be >= 0")

    @property
    def gamma_over_g(self) -> float:
        return self.gamma / self.g if self.g != 0 else float("inf")


@dataclass(frozen=True)
class SectorBlock:
    """One total-number block of H with its eigendecomposition.

    matrix is (n+1) x (n+1) real-symmetric tridiagonal; eigenvectors is
    orthogonal with eigenvectors[:, i] belonging to eigenvalues[i].
    Immutable once built; safe to share between threads.
    """

    n: int
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.n + 1


def sector_dimension(n: int) -> int:
    """Dimension of the total-number-n block."""
    if n < 0:
        raise ValueError("sector index must be >= 0")
    return n + 1


def sector_diagonals(n: int, params: ModelParams):
    """Diagonal and first off-diagonal of the sector-n block.

    Entry k of the diagonal is omega*k + omega0*(n-k) + gamma*(n-k)(n-k-1);
    the coupling between k and k+1 is g*sqrt((k+1)(n-k)).
    """
    k = np.arange(n + 1, dtype=np.float64)
    na = n - k  # atomic quanta
    diag = params.omega * k + params.omega0 * na + params.gamma * na * (na - 1.0)
    off = params.g * np.sqrt((k[:-1] + 1.0) * (n - k[:-1]))
    return diag, off


def build_sector_block(n: int, params: ModelParams) -> SectorBlock:
    """Build and diagonalize the total-number-n block of H."""
    if n < 0:
        raise ValueError("sector index must be >= 0")
    if n > SECTOR_LIMIT:
        raise ValueError(f"sector index {n} exceeds limit {SECTOR_LIMIT}")
    diag, off = sector_diagonals(n, params)
    matrix = np.diag(diag)
    if n > 0:
        idx = np.arange(n)
        matrix[idx, idx + 1] = off
        matrix[idx + 1, idx] = off
        evals, evecs = eigh_tridiagonal(diag, off)
    else:
        evals = diag.copy()
        evecs = np.ones((1, 1))
    return SectorBlock(n=n, matrix=matrix, eigenvalues=evals, eigenvectors=evecs)


def build_blocks(nmax: int, params: ModelParams) -> list[SectorBlock]:
    """Blocks for all sectors n = 0..nmax (ascending)."""
    return [build_sector_block(n, params) for n in range(nmax + 1)]
