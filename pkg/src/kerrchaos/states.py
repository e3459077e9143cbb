"""Initial product states: coherent and photon-added coherent field states.

Both families put the atomic oscillator in its ground state, so the joint
state lives on the k = n diagonal of the sector table: the field carries
all excitation.  Coefficients are evaluated in log space (log-factorials)
so large photon-addition orders and amplitudes do not overflow.
"""

from dataclasses import dataclass
from math import exp, isfinite, lgamma, log

import numpy as np

DEFAULT_EPS_TRUNC = 1e-12
SECTOR_CAP = 4096


class TruncationError(ValueError):
    """Requested state cannot be truncated within the sector cap."""


@dataclass(frozen=True)
class StateSpec:
    """Which initial field state to build: kind is "cs" or "pacs".

    nu = |alpha|^2 is the coherent intensity; m is the photon-addition
    order (0 for a plain coherent state).  When only nu is given, alpha
    is taken real positive: the phase of alpha is generated by the photon
    number operator and drops out of every observable recorded here.
    """

    kind: str
    alpha: complex
    m: int = 0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("cs", "pacs"):
            raise ValueError(f"state kind must be 'cs' or 'pacs', got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "alpha", complex(self.alpha))
        if not (isfinite(self.alpha.real) and isfinite(self.alpha.imag)):
            raise ValueError("alpha must be finite")
        if self.m < 0:
            raise ValueError("photon-addition order m must be >= 0")
        if kind == "cs" and self.m != 0:
            raise ValueError("m must be 0 for a coherent state")

    @property
    def nu(self) -> float:
        return abs(self.alpha) ** 2

    @classmethod
    def from_nu(cls, kind: str, nu: float, m: int = 0) -> "StateSpec":
        if nu < 0:
            raise ValueError("nu must be >= 0")
        return cls(kind=kind, alpha=complex(np.sqrt(nu)), m=m)


@dataclass(frozen=True)
class QuantumState:
    """Sector-resolved coefficient table c_{n,k}, 0 <= k <= n <= nmax.

    sectors[n][k] multiplies |k>_field (x) |n-k>_atom.  norm_deficit is
    the probability lost to truncation at construction time.
    """

    nmax: int
    sectors: tuple
    norm_deficit: float

    def norm_squared(self) -> float:
        return float(sum(np.vdot(c, c).real for c in self.sectors))

    def sector_norms(self) -> np.ndarray:
        return np.array([np.vdot(c, c).real for c in self.sectors])

    def mean_photon(self) -> float:
        """<a'a> = sum over sectors of k-weighted occupation."""
        total = 0.0
        for n, c in enumerate(self.sectors):
            k = np.arange(n + 1, dtype=np.float64)
            total += float(k @ (c.real**2 + c.imag**2))
        return total

    def mean_atom(self) -> float:
        """<b'b>; complements mean_photon within each sector."""
        total = 0.0
        for n, c in enumerate(self.sectors):
            k = np.arange(n + 1, dtype=np.float64)
            total += float((n - k) @ (c.real**2 + c.imag**2))
        return total

    def joint_matrix(self) -> np.ndarray:
        """Dense joint coefficient table C[field j, atom l] = c_{j+l, j}."""
        size = self.nmax + 1
        out = np.zeros((size, size), dtype=np.complex128)
        for n, c in enumerate(self.sectors):
            for k in range(n + 1):
                out[k, n - k] = c[k]
        return out


def laguerre(m: int, x: float) -> float:
    """Laguerre polynomial L_m(x) by the stable three-term recurrence."""
    if m < 0:
        raise ValueError("Laguerre order must be >= 0")
    if m == 0:
        return 1.0
    prev, cur = 1.0, 1.0 - x
    for j in range(1, m):
        prev, cur = cur, ((2 * j + 1 - x) * cur - j * prev) / (j + 1)
    return cur


def _diagonal_state(field_coeffs: np.ndarray, norm_deficit: float) -> QuantumState:
    """Place field coefficients on the k = n diagonal (atom in |0>)."""
    nmax = len(field_coeffs) - 1
    sectors = []
    for n in range(nmax + 1):
        c = np.zeros(n + 1, dtype=np.complex128)
        c[n] = field_coeffs[n]
        sectors.append(c)
    return QuantumState(nmax=nmax, sectors=tuple(sectors), norm_deficit=norm_deficit)


def _truncate(log_weights, eps_trunc: float, sector_cap: int) -> int:
    """Smallest nmax with truncated tail probability below eps_trunc.

    log_weights(j) must return log |c_j|^2 of the normalized distribution.
    """
    cum = 0.0
    for j in range(sector_cap + 1):
        cum += exp(log_weights(j))
        if 1.0 - cum < eps_trunc:
            return j
    raise TruncationError(
        f"state truncation would exceed the sector cap ({sector_cap}); "
        "reduce nu or raise eps_trunc"
    )


def coherent_state(
    alpha: complex,
    eps_trunc: float = DEFAULT_EPS_TRUNC,
    sector_cap: int = SECTOR_CAP,
) -> QuantumState:
    """Joint state |alpha; 0> with Poissonian field statistics.

    nmax is the smallest cutoff whose Poisson tail is below eps_trunc.
    """
    if not 0.0 < eps_trunc <= 1e-6:
        raise ValueError("eps_trunc must be in (0, 1e-6]")
    alpha = complex(alpha)
    nu = abs(alpha) ** 2
    if nu == 0.0:
        return _diagonal_state(np.ones(1, dtype=np.complex128), 0.0)

    log_nu = log(nu)

    def log_poisson(j):
        return -nu + j * log_nu - lgamma(j + 1)

    nmax = _truncate(log_poisson, eps_trunc, sector_cap)
    j = np.arange(nmax + 1)
    log_mag = -nu / 2 + j * (log_nu / 2) - 0.5 * np.array([lgamma(i + 1) for i in j])
    phase = np.exp(1j * j * np.angle(alpha))
    coeffs = np.exp(log_mag) * phase
    deficit = max(0.0, 1.0 - float(np.sum(np.abs(coeffs) ** 2)))
    return _diagonal_state(coeffs, deficit)


def pacs_state(
    alpha: complex,
    m: int,
    eps_trunc: float = DEFAULT_EPS_TRUNC,
    sector_cap: int = SECTOR_CAP,
) -> QuantumState:
    """Joint state |(alpha, m); 0>: m-photon-added coherent field state.

    Field amplitude at Fock level j >= m is

        e^{-nu/2} alpha^{j-m} sqrt(j!) / ((j-m)! sqrt(m! L_m(-nu)))

    and zero below the addition order.  m = 0 recovers coherent_state.
    """
    if m < 0:
        raise ValueError("photon-addition order m must be >= 0")
    if m == 0:
        return coherent_state(alpha, eps_trunc, sector_cap)
    if not 0.0 < eps_trunc <= 1e-6:
        raise ValueError("eps_trunc must be in (0, 1e-6]")
    alpha = complex(alpha)
    nu = abs(alpha) ** 2
    log_norm = lgamma(m + 1) + log(laguerre(m, -nu))

    if nu == 0.0:
        # (a')^m |0> is the Fock state |m>.
        coeffs = np.zeros(m + 1, dtype=np.complex128)
        coeffs[m] = 1.0
        return _diagonal_state(coeffs, 0.0)

    log_nu = log(nu)

    def log_weight(j):
        if j < m:
            return -np.inf
        return -nu + (j - m) * log_nu + lgamma(j + 1) - 2 * lgamma(j - m + 1) - log_norm

    nmax = _truncate(log_weight, eps_trunc, sector_cap)
    coeffs = np.zeros(nmax + 1, dtype=np.complex128)
    j = np.arange(m, nmax + 1)
    log_mag = np.array(
        [
            -nu / 2
            + (i - m) * (log_nu / 2)
            + 0.5 * lgamma(i + 1)
            - lgamma(i - m + 1)
            - 0.5 * log_norm
            for i in j
        ]
    )
    coeffs[m:] = np.exp(log_mag) * np.exp(1j * (j - m) * np.angle(alpha))
    deficit = max(0.0, 1.0 - float(np.sum(np.abs(coeffs) ** 2)))
    return _diagonal_state(coeffs, deficit)


def build_state(spec: StateSpec, eps_trunc: float = DEFAULT_EPS_TRUNC) -> QuantumState:
    if spec.kind == "cs":
        return coherent_state(spec.alpha, eps_trunc)
    return pacs_state(spec.alpha, spec.m, eps_trunc)


def mean_photon_initial(spec: StateSpec) -> float:
    """Closed-form <N(0)>: nu for a CS, (m+1) L_{m+1}(-nu)/L_m(-nu) - 1 for a PACS."""
    nu = spec.nu
    if spec.kind == "cs" or spec.m == 0:
        return nu
    m = spec.m
    return (m + 1) * laguerre(m + 1, -nu) / laguerre(m, -nu) - 1.0
