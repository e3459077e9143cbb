import numpy as np
import pytest

from kerrchaos.classical import (
    ClassicalParams,
    EnergyDriftError,
    PhasePoint,
    classical_lyapunov,
    h_classical,
    integrate,
    n_tot_classical,
)


ORIGIN = PhasePoint(0.0, 0.0, 0.0, 0.0)
GENERIC = ClassicalParams(lambda_cl=1.0, g=1.0)


class TestEnergies:
    def test_origin_is_zero(self):
        assert h_classical(ORIGIN, GENERIC) == 0.0
        assert n_tot_classical(ORIGIN, GENERIC) == 0.0

    def test_uncoupled_sum_of_oscillators(self):
        params = ClassicalParams(lambda_cl=0.0, g=0.0)
        pt = PhasePoint(x=1.0, p_x=2.0, y=3.0, p_y=4.0)
        h1 = 2.0**2 / 2 + 1.0 / 2
        h2 = 4.0**2 / 2 + 9.0 / 2
        assert h_classical(pt, params) == pytest.approx(h1 + h2, rel=1e-15)

    def test_single_oscillator_potential(self):
        assert h_classical(PhasePoint(1.0, 0.0, 0.0, 0.0), GENERIC) == pytest.approx(0.5)

    def test_kerr_term(self):
        params = ClassicalParams(lambda_cl=2.0, g=0.0)
        pt = PhasePoint(0.0, 0.0, 1.0, 0.0)  # H2 = 1/2
        assert h_classical(pt, params) == pytest.approx(0.5 + 2.0 * 0.25, rel=1e-15)


class TestIntegration:
    def test_uncoupled_ellipse_period(self):
        # each oscillator closes its ellipse after 2 pi / omega
        params = ClassicalParams(lambda_cl=0.0, g=0.0)
        dt = 2.0 * np.pi / 1000.0
        traj = integrate(PhasePoint(1.0, 0.0, 0.5, -0.2), params, dt=dt, steps=1000)
        assert np.abs(traj.points[-1] - traj.points[0]).max() < 1e-8

    def test_energy_conserved_generic(self):
        traj = integrate(PhasePoint(1.0, 0.0, 1.0, 0.5), GENERIC, dt=0.01, steps=200_000)
        h = traj.h_values()
        assert np.abs(h - h[0]).max() < 1e-8 * abs(h[0])

    def test_n_tot_conserved(self):
        traj = integrate(PhasePoint(0.7, -0.3, 1.1, 0.4), GENERIC, dt=0.01, steps=100_000)
        n = traj.n_tot_values()
        assert np.abs(n - n[0]).max() < 1e-8 * abs(n[0])

    def test_n_tot_conserved_uncoupled(self):
        params = ClassicalParams(lambda_cl=0.7, g=0.0)
        traj = integrate(PhasePoint(1.0, 0.0, 0.8, 0.1), params, dt=0.01, steps=50_000)
        n = traj.n_tot_values()
        assert np.abs(n - n[0]).max() < 1e-10

    def test_halved_dt_agrees(self):
        # 6th order: halving dt changes the endpoint well below the gate
        pt = PhasePoint(1.0, 0.2, 0.9, -0.4)
        a = integrate(pt, GENERIC, dt=0.02, steps=5_000)
        b = integrate(pt, GENERIC, dt=0.01, steps=10_000)
        assert np.abs(a.points[-1] - b.points[-1]).max() < 1e-9

    def test_bounded_by_invariant_hyperellipsoid(self):
        # N = H1/w + H2/w0 bounds every coordinate: H1 <= w N etc.
        pt = PhasePoint(1.5, 0.0, -1.0, 0.8)
        traj = integrate(pt, GENERIC, dt=0.01, steps=100_000)
        n0 = n_tot_classical(pt, GENERIC)
        x_max = np.sqrt(2.0 * GENERIC.omega * n0 / (GENERIC.m * GENERIC.omega**2))
        y_max = np.sqrt(2.0 * GENERIC.omega0 * n0 / (GENERIC.M * GENERIC.omega0**2))
        assert np.abs(traj.points[:, 0]).max() <= x_max * (1 + 1e-9)
        assert np.abs(traj.points[:, 2]).max() <= y_max * (1 + 1e-9)

    def test_drift_gate_fires_for_huge_dt(self):
        with pytest.raises(EnergyDriftError):
            integrate(PhasePoint(2.0, 0.0, 2.0, 0.0),
                      ClassicalParams(lambda_cl=5.0, g=1.0),
                      dt=1.1, steps=2_000, check_every=10)


class TestLyapunov:
    def test_uncoupled_linear_vanishes(self):
        params = ClassicalParams(lambda_cl=0.0, g=0.0)
        lam = classical_lyapunov(PhasePoint(1.0, 0.0, 0.5, 0.0), params, dt=0.01, steps=100_000)
        assert np.abs(lam).max() < 1e-3

    def test_generic_trajectory_regular(self):
        lam = classical_lyapunov(PhasePoint(1.0, 0.0, 1.0, 0.5), GENERIC, dt=0.01, steps=1_000_000)
        assert np.abs(lam).max() < 5e-3

    def test_symplectic_pairing(self):
        lam = classical_lyapunov(PhasePoint(0.8, 0.1, 1.2, -0.3), GENERIC, dt=0.01, steps=200_000)
        # volume preservation: exponents sum to zero
        assert abs(lam.sum()) < 1e-6
        # and come in +/- pairs within estimation noise
        assert abs(lam[0] + lam[3]) < 2e-3
        assert abs(lam[1] + lam[2]) < 2e-3


class TestH1Series:
    def test_export_roundtrip(self):
        traj = integrate(PhasePoint(1.0, 0.0, 0.3, 0.0), GENERIC, dt=0.05, steps=5_000)
        ts = traj.h1_series()
        assert len(ts) == 5_001
        assert ts.dt == 0.05
        assert ts.values[0] == pytest.approx(0.5)
        assert ts.label == "H1"


class TestValidation:
    def test_bad_masses(self):
        with pytest.raises(ValueError):
            ClassicalParams(m=0.0)
    def test_bad_args(self):
        with pytest.raises(ValueError):
            integrate(ORIGIN, GENERIC, dt=-0.1, steps=10)
