"""Classical limit: two coupled oscillators with a quartic Kerr term.

    H = H1 + H2 + (lambda/omega0^2) H2^2
        + (g/sqrt(omega omega0)) (sqrt(mM) omega omega0 x y + p_x p_y / sqrt(mM))

with H1, H2 the free oscillator energies.  H splits into two exactly
solvable flows: the full quadratic part (a linear symplectic map, applied
as a precomputed matrix exponential) and the quartic term, under which H2
itself is conserved so (y, p_y) just rotates by an H2-dependent angle.
A Yoshida 6th-order symmetric composition of these exact flows gives a
symplectic integrator with no force evaluations to iterate; the conserved
quantities gate every run.

N_cl = H1/omega + H2/omega0 Poisson-commutes with H: the system is
Liouville-Arnold integrable, motion is confined to tori, and all four
Lyapunov exponents vanish.
"""

from dataclasses import dataclass
from math import isfinite, sqrt

import numpy as np
from numba import njit
from scipy.linalg import expm

from .evolve import TimeSeries

# Yoshida (1990) 6th-order composition, solution A
_W1 = -1.17767998417887
_W2 = 0.235573213359357
_W3 = 0.784513610477560
_W0 = 1.0 - 2.0 * (_W1 + _W2 + _W3)
_B_STAGES = np.array([_W3, _W2, _W1, _W0, _W1, _W2, _W3])
_A_STAGES = np.array(
    [
        _W3 / 2,
        (_W3 + _W2) / 2,
        (_W2 + _W1) / 2,
        (_W1 + _W0) / 2,
        (_W0 + _W1) / 2,
        (_W1 + _W2) / 2,
        (_W2 + _W3) / 2,
        _W3 / 2,
    ]
)


class EnergyDriftError(RuntimeError):
    """Measured energy drift breached the gate; dt is too large."""


@dataclass(frozen=True)
class ClassicalParams:
    m: float = 1.0
    M: float = 1.0
    omega: float = 1.0
    omega0: float = 1.0
    lambda_cl: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        for name in ("m", "M", "omega", "omega0", "lambda_cl", "g"):
            if not isfinite(float(getattr(self, name))):
                raise ValueError(f"ClassicalParams.{name} must be finite")
        if self.m <= 0 or self.M <= 0:
            raise ValueError("masses must be > 0")
        if self.omega <= 0 or self.omega0 <= 0:
            raise ValueError("frequencies must be > 0")

    @property
    def kerr(self) -> float:
        return self.lambda_cl / self.omega0**2

    @property
    def c_xy(self) -> float:
        return self.g * sqrt(self.m * self.M) * sqrt(self.omega * self.omega0)

    @property
    def c_pp(self) -> float:
        return self.g / (sqrt(self.omega * self.omega0) * sqrt(self.m * self.M))


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p_x: float
    y: float
    p_y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.p_x, self.y, self.p_y], dtype=np.float64)

    @classmethod
    def from_array(cls, z) -> "PhasePoint":
        return cls(x=float(z[0]), p_x=float(z[1]), y=float(z[2]), p_y=float(z[3]))


@dataclass(frozen=True)
class Trajectory:
    """Phase-space history: points[j] at t = j*dt (includes the start)."""

    dt: float
    points: np.ndarray
    params: ClassicalParams

    def __len__(self) -> int:
        return len(self.points)

    def h_values(self) -> np.ndarray:
        return h_classical(self.points, self.params)

    def n_tot_values(self) -> np.ndarray:
        return n_tot_classical(self.points, self.params)

    def h1_values(self) -> np.ndarray:
        z = self.points
        return z[..., 1] ** 2 / (2 * self.params.m) + 0.5 * self.params.m * self.params.omega**2 * z[..., 0] ** 2

    def h1_series(self) -> TimeSeries:
        """Field-oscillator energy as a signal for the analysis chain."""
        import hashlib

        p = self.params
        text = f"classical|{p.m}|{p.M}|{p.omega}|{p.omega0}|{p.lambda_cl}|{p.g}"
        return TimeSeries(
            dt=self.dt,
            values=self.h1_values(),
            label="H1",
            params_hash=hashlib.sha256(text.encode()).digest(),
        )


def _split_energies(z: np.ndarray, params: ClassicalParams):
    x, px, y, py = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    h1 = px**2 / (2 * params.m) + 0.5 * params.m * params.omega**2 * x**2
    h2 = py**2 / (2 * params.M) + 0.5 * params.M * params.omega0**2 * y**2
    return x, px, y, py, h1, h2


def h_classical(point, params: ClassicalParams):
    """Total energy; accepts a PhasePoint, a 4-vector, or an (..., 4) array."""
    z = point.as_array() if isinstance(point, PhasePoint) else np.asarray(point, dtype=np.float64)
    x, px, y, py, h1, h2 = _split_energies(z, params)
    h = h1 + h2 + params.kerr * h2**2 + params.c_xy * x * y + params.c_pp * px * py
    return float(h) if z.ndim == 1 else h


def n_tot_classical(point, params: ClassicalParams):
    """Conserved total action H1/omega + H2/omega0."""
    z = point.as_array() if isinstance(point, PhasePoint) else np.asarray(point, dtype=np.float64)
    _, _, _, _, h1, h2 = _split_energies(z, params)
    n = h1 / params.omega + h2 / params.omega0
    return float(n) if z.ndim == 1 else n


def _quadratic_generator(params: ClassicalParams) -> np.ndarray:
    m, M = params.m, params.M
    w, w0 = params.omega, params.omega0
    c1, c2 = params.c_xy, params.c_pp
    return np.array(
        [
            [0.0, 1.0 / m, 0.0, c2],
            [-m * w * w, 0.0, -c1, 0.0],
            [0.0, c2, 0.0, 1.0 / M],
            [-c1, 0.0, -M * w0 * w0, 0.0],
        ]
    )


def _stage_tables(params: ClassicalParams, dt: float):
    gen = _quadratic_generator(params)
    amats = np.stack([expm(a * dt * gen) for a in _A_STAGES])
    camp = 2.0 * params.kerr * params.omega0 * _B_STAGES * dt
    return np.ascontiguousarray(amats), np.ascontiguousarray(camp)


@njit(cache=True)
def _energy(z, m, M, w, w0, kerr, c1, c2):
    h1 = z[1] * z[1] / (2.0 * m) + 0.5 * m * w * w * z[0] * z[0]
    h2 = z[3] * z[3] / (2.0 * M) + 0.5 * M * w0 * w0 * z[2] * z[2]
    return h1 + h2 + kerr * h2 * h2 + c1 * z[0] * z[2] + c2 * z[1] * z[3]


@njit(cache=True)
def _step(z, u, amats, camp, M, w0, with_tangent):
    rho = M * w0
    for s in range(8):
        A = amats[s]
        z0, z1, z2, z3 = z[0], z[1], z[2], z[3]
        z[0] = A[0, 0] * z0 + A[0, 1] * z1 + A[0, 2] * z2 + A[0, 3] * z3
        z[1] = A[1, 0] * z0 + A[1, 1] * z1 + A[1, 2] * z2 + A[1, 3] * z3
        z[2] = A[2, 0] * z0 + A[2, 1] * z1 + A[2, 2] * z2 + A[2, 3] * z3
        z[3] = A[3, 0] * z0 + A[3, 1] * z1 + A[3, 2] * z2 + A[3, 3] * z3
        if with_tangent:
            for j in range(4):
                u0, u1, u2, u3 = u[0, j], u[1, j], u[2, j], u[3, j]
                u[0, j] = A[0, 0] * u0 + A[0, 1] * u1 + A[0, 2] * u2 + A[0, 3] * u3
                u[1, j] = A[1, 0] * u0 + A[1, 1] * u1 + A[1, 2] * u2 + A[1, 3] * u3
                u[2, j] = A[2, 0] * u0 + A[2, 1] * u1 + A[2, 2] * u2 + A[2, 3] * u3
                u[3, j] = A[3, 0] * u0 + A[3, 1] * u1 + A[3, 2] * u2 + A[3, 3] * u3
        if s < 7:
            y, py = z[2], z[3]
            h2 = py * py / (2.0 * M) + 0.5 * rho * w0 * y * y
            th = camp[s] * h2
            c = np.cos(th)
            si = np.sin(th)
            ynew = y * c + (py / rho) * si
            pnew = -rho * y * si + py * c
            if with_tangent:
                # theta depends on (y, p_y) through H2: rotation + rank-1 term
                dth_dy = camp[s] * rho * w0 * y
                dth_dp = camp[s] * py / M
                dy_dth = -y * si + (py / rho) * c
                dp_dth = -rho * y * c - py * si
                j00 = c + dy_dth * dth_dy
                j01 = si / rho + dy_dth * dth_dp
                j10 = -rho * si + dp_dth * dth_dy
                j11 = c + dp_dth * dth_dp
                for j in range(4):
                    u2, u3 = u[2, j], u[3, j]
                    u[2, j] = j00 * u2 + j01 * u3
                    u[3, j] = j10 * u2 + j11 * u3
            z[2] = ynew
            z[3] = pnew


@njit(cache=True)
def _integrate_kernel(z0, amats, camp, m, M, w, w0, kerr, c1, c2,
                      steps, check_every, tol, out):
    z = z0.copy()
    u = np.zeros((4, 4))
    out[0] = z
    h0 = _energy(z, m, M, w, w0, kerr, c1, c2)
    scale = max(abs(h0), 1.0)
    for i in range(steps):
        _step(z, u, amats, camp, M, w0, False)
        out[i + 1] = z
        if (i + 1) % check_every == 0:
            h = _energy(z, m, M, w, w0, kerr, c1, c2)
            if abs(h - h0) > tol * scale:
                return i + 1
    h = _energy(z, m, M, w, w0, kerr, c1, c2)
    if abs(h - h0) > tol * scale:
        return steps
    return -1


@njit(cache=True)
def _lyapunov_kernel(z0, amats, camp, m, M, w, w0, kerr, c1, c2,
                     steps, renorm_every, check_every, tol, sums):
    z = z0.copy()
    u = np.eye(4)
    h0 = _energy(z, m, M, w, w0, kerr, c1, c2)
    scale = max(abs(h0), 1.0)
    for i in range(steps):
        _step(z, u, amats, camp, M, w0, True)
        if (i + 1) % renorm_every == 0 or i == steps - 1:
            # modified Gram-Schmidt; accumulate log column norms
            for j in range(4):
                norm = 0.0
                for r in range(4):
                    norm += u[r, j] * u[r, j]
                norm = np.sqrt(norm)
                sums[j] += np.log(norm)
                for r in range(4):
                    u[r, j] /= norm
                for jj in range(j + 1, 4):
                    dot = 0.0
                    for r in range(4):
                        dot += u[r, j] * u[r, jj]
                    for r in range(4):
                        u[r, jj] -= dot * u[r, j]
        if (i + 1) % check_every == 0:
            h = _energy(z, m, M, w, w0, kerr, c1, c2)
            if abs(h - h0) > tol * scale:
                return i + 1
    return -1


def integrate(
    point0: PhasePoint,
    params: ClassicalParams,
    dt: float,
    steps: int,
    drift_tol: float = 1e-8,
    check_every: int = 1000,
) -> Trajectory:
    """Fixed-step 6th-order symplectic trajectory with an energy-drift gate.

    Aborts with EnergyDriftError if |H(t) - H(0)| exceeds drift_tol
    (relative to max(|H(0)|, 1)) at any checkpoint: the step is too large.
    """
    if dt <= 0 or steps < 1:
        raise ValueError("need dt > 0 and steps >= 1")
    amats, camp = _stage_tables(params, dt)
    out = np.empty((steps + 1, 4))
    z0 = point0.as_array()
    breach = _integrate_kernel(
        z0, amats, camp, params.m, params.M, params.omega, params.omega0,
        params.kerr, params.c_xy, params.c_pp, steps, check_every, drift_tol, out,
    )
    if breach >= 0:
        h0 = h_classical(point0, params)
        h = h_classical(out[breach], params)
        raise EnergyDriftError(
            f"energy drift {abs(h - h0):.3e} at step {breach} exceeds "
            f"{drift_tol:.1e} * max(|H0|, 1) = {drift_tol * max(abs(h0), 1.0):.3e}; "
            "reduce dt"
        )
    return Trajectory(dt=dt, points=out, params=params)


def classical_lyapunov(
    point0: PhasePoint,
    params: ClassicalParams,
    dt: float,
    steps: int,
    renorm_every: int = 20,
    drift_tol: float = 1e-8,
    check_every: int = 1000,
) -> np.ndarray:
    """All four Lyapunov exponents by tangent-space propagation.

    Tangent maps are the exact linearizations of the two sub-flows;
    Gram-Schmidt renormalization every renorm_every steps.  Returns the
    exponents sorted in decreasing order (units: inverse time).
    """
    if dt <= 0 or steps < renorm_every:
        raise ValueError("need dt > 0 and steps >= renorm_every")
    amats, camp = _stage_tables(params, dt)
    sums = np.zeros(4)
    breach = _lyapunov_kernel(
        point0.as_array(), amats, camp, params.m, params.M, params.omega,
        params.omega0, params.kerr, params.c_xy, params.c_pp,
        steps, renorm_every, check_every, drift_tol, sums,
    )
    if breach >= 0:
        raise EnergyDriftError(f"energy drift breach at step {breach}; reduce dt")
    return np.sort(sums / (steps * dt))[::-1]
