from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm

from starbattery.dynamics import (
    PropagatorSpec,
    dephase,
    evolve_exact,
    evolve_full,
    exact_propagator,
    flip_flop_full,
    trotter_propagator,
    u_xy_trotter,
)
from starbattery.spin_core import (
    DensityMatrix,
    DimensionError,
    SystemConfig,
    battery_reduced,
    expand,
    full_operator,
    magnetization_labels,
    spin_half,
    thermal_state,
    thermal_state_full,
)
from starbattery.metrics import battery_energy

from conftest import random_density


def literal_hamiltonian(n_sites):
    sx, sy, _ = spin_half()
    return sum(full_operator(sx, 0, n_sites) @ full_operator(sx, i, n_sites)
               + full_operator(sy, 0, n_sites) @ full_operator(sy, i, n_sites)
               for i in range(1, n_sites))


class TestExactPropagator:
    @pytest.mark.parametrize("n_sites", [2, 3, 5])
    def test_matches_expm(self, n_sites):
        h = literal_hamiltonian(n_sites)
        np.testing.assert_allclose(flip_flop_full(n_sites).toarray(), h.real, atol=1e-15)
        for theta in (0.3, 1.7, -2.2):
            np.testing.assert_allclose(exact_propagator(n_sites, theta), expm(-1j * theta * h), atol=1e-12)

    def test_two_spin_swap_at_pi(self):
        # exp(-i pi (SxIx + SyIy)) swaps |01> and |10> up to a phase
        u = exact_propagator(2, np.pi)
        assert abs(u[1, 2]) == pytest.approx(1.0, abs=1e-14)
        assert abs(u[2, 1]) == pytest.approx(1.0, abs=1e-14)

    def test_unitary(self):
        u = exact_propagator(6, 0.77)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(64), atol=1e-12)


class TestSectorEvolution:
    @pytest.mark.parametrize("n", [1, 2, 4, 7])
    def test_sector_vs_full(self, n):
        cfg = SystemConfig(n, epsilon=0.4, gamma=1.5)
        state = thermal_state(cfg)
        for theta in (0.0, 0.41, np.pi / np.sqrt(n), 2.9):
            a = expand(evolve_exact(state, theta)).elements
            b = evolve_full(thermal_state_full(cfg), theta).elements
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_evolve_full_matches_dense(self, rng):
        rho = DensityMatrix((2,) * 4, random_density(16, rng))
        u = exact_propagator(4, 1.23)
        np.testing.assert_allclose(evolve_full(rho, 1.23).elements, u @ rho.elements @ u.conj().T, atol=1e-13)

    def test_zero_theta_identity(self):
        state = thermal_state(SystemConfig(5, epsilon=0.2))
        for a, b in zip(evolve_exact(state, 0.0).blocks, state.blocks):
            np.testing.assert_allclose(a.block, b.block, atol=1e-16)

    @pytest.mark.parametrize("n", [1, 4, 16, 36])
    def test_pure_energy_closed_form(self, n):
        state = thermal_state(SystemConfig(n, epsilon=1.0))
        for theta in np.linspace(0, 2 * np.pi / np.sqrt(n), 13):
            e = battery_energy(battery_reduced(evolve_exact(state, theta)))
            assert e == pytest.approx(np.sin(np.sqrt(n) * theta / 2) ** 2, abs=1e-11)

    def test_trace_preserved_large(self):
        out = evolve_exact(thermal_state(SystemConfig(36, epsilon=1e-5)), 0.5)
        out.check()

    def test_full_cap(self):
        big = DensityMatrix.__new__(DensityMatrix)
        object.__setattr__(big, "dims", (2,) * 16)
        object.__setattr__(big, "elements", np.zeros((1, 1)))
        with pytest.raises(DimensionError):
            evolve_full(big, 0.1)


class TestTrotter:
    @pytest.mark.parametrize("n0", [1, 2, 5, 17])
    def test_two_spin_exact(self, n0):
        for theta in (0.2, np.pi / 2, 2.5):
            u = trotter_propagator(2, PropagatorSpec(theta, n0))
            np.testing.assert_allclose(u, exact_propagator(2, theta), atol=1e-12)

    def test_slice_factorization(self):
        # one slice equals exp(-i t SxIx) exp(-i t SyIy) with t = theta/n0
        sx, sy, _ = spin_half()
        n, theta, n0 = 3, 0.9, 3
        t = theta / n0
        xx = sum(full_operator(sx, 0, n) @ full_operator(sx, i, n) for i in range(1, n))
        yy = sum(full_operator(sy, 0, n) @ full_operator(sy, i, n) for i in range(1, n))
        oracle = expm(-1j * t * xx) @ expm(-1j * t * yy)
        np.testing.assert_allclose(trotter_propagator(n, PropagatorSpec(t, 1)), oracle, atol=1e-12)

    def test_converges_for_three_spins(self):
        theta = 1.1
        exact = exact_propagator(3, theta)
        errs = [np.linalg.norm(trotter_propagator(3, PropagatorSpec(theta, n0)) - exact, 2)
                for n0 in (8, 32, 128)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-2

    def test_exact_mode_and_state_api(self, rng):
        rho = DensityMatrix((2, 2, 2), random_density(8, rng))
        out = u_xy_trotter(rho, PropagatorSpec(0.7, mode="exact"))
        u = exact_propagator(3, 0.7)
        np.testing.assert_allclose(out.elements, u @ rho.elements @ u.conj().T, atol=1e-13)

    @pytest.mark.parametrize("kwargs", [{"n0": 0}, {"n0": 1.5}, {"mode": "magic"}])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ValueError):
            PropagatorSpec(0.1, **kwargs)


class TestDephase:
    def test_full_space_keeps_only_equal_magnetization(self, rng):
        rho = random_density(8, rng)
        out = dephase(DensityMatrix((2, 2, 2), rho)).elements
        m = magnetization_labels(3)
        for a in range(8):
            for b in range(8):
                assert out[a, b] == (rho[a, b] if m[a] == m[b] else 0)

    def test_sector_matches_full(self):
        cfg = SystemConfig(4, epsilon=0.6)
        state = evolve_exact(thermal_state(cfg), 0.8)
        np.testing.assert_allclose(expand(dephase(state)).elements,
                                   dephase(expand(state)).elements, atol=1e-14)

    def test_commutes_with_evolution_and_preserves_energy(self):
        cfg = SystemConfig(6, epsilon=1e-5)
        state = evolve_exact(thermal_state(cfg), 0.9)
        d = dephase(state)
        assert battery_energy(battery_reduced(d)) == pytest.approx(battery_energy(battery_reduced(state)), abs=1e-16)
        a = dephase(evolve_exact(d, 0.3))
        b = evolve_exact(dephase(d), 0.3)
        for x, y in zip(a.blocks, dephase(b).blocks):
            np.testing.assert_allclose(x.block, y.block, atol=1e-16)

    def test_idempotent(self, rng):
        rho = DensityMatrix((2, 2), random_density(4, rng))
        once = dephase(rho)
        np.testing.assert_array_equal(dephase(once).elements, once.elements)


def test_two_spin_closed_form():
    from starbattery.dynamics import two_spin_propagator
    for theta in (0.0, 0.4, np.pi, 5.1):
        np.testing.assert_allclose(two_spin_propagator(theta), exact_propagator(2, theta), atol=1e-14)
        np.testing.assert_allclose(two_spin_propagator(theta), expm(-1j * theta * literal_hamiltonian(2)), atol=1e-14)
    np.testing.assert_array_equal(two_spin_propagator(0.0), np.eye(4))
