import math

import numpy as np
import pytest
from scipy.special import eval_laguerre

from kerrchaos.states import (
    StateSpec,
    TruncationError,
    build_state,
    coherent_state,
    laguerre,
    mean_photon_initial,
    pacs_state,
)


class TestLaguerre:
    def test_order_zero_is_one(self):
        assert laguerre(0, -3.7) == 1.0
        assert laguerre(0, 12.0) == 1.0

    def test_order_one(self):
        # L_1(x) = 1 - x
        assert laguerre(1, -1.0) == 2.0

    def test_order_two_by_hand(self):
        # One recurrence step: 2 L_2 = (3 - x) L_1 - L_0, so L_2(-1) = 7/2.
        assert laguerre(2, -1.0) == pytest.approx(3.5, abs=1e-15)

    @pytest.mark.parametrize("m", [0, 1, 2, 5, 13, 40])
    @pytest.mark.parametrize("x", [-10.0, -1.0, 0.0, 0.5, 3.0])
    def test_against_scipy(self, m, x):
        assert laguerre(m, x) == pytest.approx(eval_laguerre(m, x), rel=1e-12, abs=1e-12)


class TestCoherentState:
    def test_vacuum(self):
        state = coherent_state(0.0)
        assert state.nmax == 0
        assert state.sectors[0][0] == 1.0
        assert state.norm_deficit == 0.0

    def test_unit_alpha_ground_weight(self):
        # Poisson weight at n = 0 is e^{-1}.
        state = coherent_state(1.0)
        assert abs(state.sectors[0][0]) ** 2 == pytest.approx(math.exp(-1), rel=1e-12)

    def test_poisson_mean(self):
        state = coherent_state(np.sqrt(10.0))
        assert state.mean_photon() == pytest.approx(10.0, abs=1e-9)

    def test_only_diagonal_occupied(self):
        state = coherent_state(1.5 + 0.5j)
        for n, c in enumerate(state.sectors):
            assert np.all(c[:n] == 0.0)

    def test_norm_after_truncation(self):
        for nu in (0.5, 1.0, 10.0):
            state = coherent_state(np.sqrt(nu), eps_trunc=1e-12)
            assert state.norm_squared() >= 1.0 - 1e-12
            assert 0.0 <= state.norm_deficit < 1e-12

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            coherent_state(1.0, eps_trunc=1e-3)

    def test_rejects_huge_nu(self):
        with pytest.raises(TruncationError):
            coherent_state(np.sqrt(1e6))


class TestPacsState:
    def test_m_zero_matches_coherent(self):
        a = pacs_state(1.3, 0)
        b = coherent_state(1.3)
        assert a.nmax == b.nmax
        for ca, cb in zip(a.sectors, b.sectors):
            assert np.allclose(ca, cb, rtol=0, atol=1e-15)

    def test_alpha_zero_is_fock(self):
        state = pacs_state(0.0, 1)
        assert state.nmax == 1
        assert state.sectors[1][1] == 1.0
        assert state.mean_photon() == pytest.approx(1.0, abs=1e-15)

    def test_no_weight_below_addition_order(self):
        state = pacs_state(np.sqrt(2.0), 4)
        for n in range(4):
            assert np.all(state.sectors[n] == 0.0)

    def test_mean_photon_m5(self):
        # (m+1) L_{m+1}(-nu)/L_m(-nu) - 1 evaluated by the recurrence,
        # cross-checked against the direct sum over the built state.
        nu = 1.0
        expected = 6.0 * laguerre(6, -nu) / laguerre(5, -nu) - 1.0
        state = pacs_state(np.sqrt(nu), 5)
        assert state.mean_photon() == pytest.approx(expected, abs=1e-9)

    def test_norm_after_truncation(self):
        state = pacs_state(np.sqrt(10.0), 5)
        assert state.norm_squared() >= 1.0 - 1e-12


class TestStateSpec:
    def test_nu_property(self):
        spec = StateSpec(kind="cs", alpha=2.0)
        assert spec.nu == 4.0

    def test_from_nu(self):
        spec = StateSpec.from_nu("pacs", 10.0, m=2)
        assert spec.nu == pytest.approx(10.0, rel=1e-15)
        assert spec.alpha.imag == 0.0

    def test_cs_requires_m0(self):
        with pytest.raises(ValueError):
            StateSpec(kind="cs", alpha=1.0, m=1)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            StateSpec(kind="squeezed", alpha=1.0)


class TestMeanPhotonInitial:
    def test_cs_is_nu(self):
        assert mean_photon_initial(StateSpec.from_nu("cs", 1.0)) == pytest.approx(1.0)

    def test_pacs_m0_reduces_to_cs(self):
        assert mean_photon_initial(StateSpec.from_nu("pacs", 2.0, m=0)) == pytest.approx(2.0)

    def test_pacs_m1_nu1(self):
        # 2 L_2(-1)/L_1(-1) - 1 = 2 * 3.5 / 2 - 1 = 2.5
        spec = StateSpec.from_nu("pacs", 1.0, m=1)
        assert mean_photon_initial(spec) == pytest.approx(2.5, rel=1e-12)

    @pytest.mark.parametrize("kind,nu,m", [
        ("cs", 1.0, 0),
        ("cs", 10.0, 0),
        ("pacs", 1.0, 1),
        ("pacs", 1.0, 5),
        ("pacs", 10.0, 1),
        ("pacs", 10.0, 5),
    ])
    def test_matches_constructed_state(self, kind, nu, m):
        # closed form vs direct sum over the truncated coefficient table
        spec = StateSpec.from_nu(kind, nu, m=m)
        state = build_state(spec, eps_trunc=1e-12)
        tol = 10 * 1e-12 * (state.nmax + 1)
        assert abs(state.mean_photon() - mean_photon_initial(spec)) < max(tol, 1e-9)
