from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starbattery.spin_core import (
    ConfigError,
    DensityMatrix,
    SystemConfig,
    battery_reduced,
    collective_operators,
    dicke_multiplicity,
    equilibrium_state,
    expand,
    full_operator,
    parse_config_text,
    pi_pulse_chargers,
    reduced_state,
    sector_spins,
    spin_half,
    thermal_state,
    thermal_state_full,
)

from conftest import bell_state


def brute_force_multiplicities(n):
    """Count spin-j irreps by diagonalizing total J^2 on the 2**n space."""
    sx, sy, sz = spin_half()
    total = [sum(full_operator(op, i, n) for i in range(n)) for op in (sx, sy, sz)]
    j2 = sum(t @ t for t in total)
    eig = np.round(np.linalg.eigvalsh(j2).real, 8)
    counts = {}
    for j in sector_spins(n):
        deg = int(np.sum(np.isclose(eig, j * (j + 1))))
        counts[j] = deg // (int(round(2 * j)) + 1)
    return counts


class TestDickeMultiplicity:
    def test_single_spin(self):
        assert dicke_multiplicity(1, 0.5) == 1

    def test_four_spins_against_brute_force(self):
        oracle = brute_force_multiplicities(4)
        assert oracle == {2.0: 1, 1.0: 3, 0.0: 2}
        for j, d in oracle.items():
            assert dicke_multiplicity(4, j) == d
        assert 1 * 5 + 3 * 3 + 2 * 1 == 16

    @pytest.mark.parametrize("n", [3, 5, 6])
    def test_matches_brute_force(self, n):
        oracle = brute_force_multiplicities(n)
        assert {j: dicke_multiplicity(n, j) for j in sector_spins(n)} == oracle

    def test_completeness_big_integers(self):
        for n in range(1, 41):
            total = sum(dicke_multiplicity(n, j) * (int(round(2 * j)) + 1) for j in sector_spins(n))
            assert total == 2**n

    @pytest.mark.parametrize("n,j", [(4, 0.5), (3, 2), (3, -0.5), (0, 0), (2, 0.25)])
    def test_invalid_pairs(self, n, j):
        with pytest.raises(ValueError):
            dicke_multiplicity(n, j)


class TestCollectiveOperators:
    def test_spin_half_is_pauli_over_two(self):
        jx, jy, jz = collective_operators(1, 0.5)
        np.testing.assert_allclose(jx, [[0, 0.5], [0.5, 0]])
        np.testing.assert_allclose(jy, [[0, -0.5j], [0.5j, 0]])
        np.testing.assert_allclose(jz, [[0.5, 0], [0, -0.5]])

    def test_spin_one_jz(self):
        _, _, jz = collective_operators(2, 1)
        np.testing.assert_array_equal(jz, np.diag([1.0, 0.0, -1.0]))

    @pytest.mark.parametrize("n,j", [(1, 0.5), (2, 1), (5, 2.5), (7, 1.5), (36, 18), (36, 7)])
    def test_algebra_closure(self, n, j):
        jx, jy, jz = collective_operators(n, j)
        np.testing.assert_allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-13)
        np.testing.assert_allclose(jx @ jx + jy @ jy + jz @ jz, j * (j + 1) * np.eye(len(jz)), atol=1e-11)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            SystemConfig(0)
        with pytest.raises(ConfigError):
            SystemConfig(3, epsilon=1.5)
        with pytest.raises(ConfigError):
            SystemConfig(3, gamma=4.0, epsilon=0.5)
        with pytest.raises(ConfigError):
            SystemConfig(3, t1_battery=-1.0)

    def test_negative_gamma_allowed(self):
        cfg = SystemConfig(4, gamma=-0.2, epsilon=-0.5)
        assert cfg.charger_purity == pytest.approx(0.1)

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "sys.cfg"
        path.write_text(
            "# TTSS\nn_chargers = 36\ngamma = 1.0\nepsilon = 1e-5\ncoupling_j_hz =\n"
            "coupling_j_bl_hz = 52.4\nt1_battery_s = 115.4\nt1_charger_s = 3.3\n"
            "[asymptotic]\niterations = 20\n"
        )
        cfg = SystemConfig.from_file(path)
        assert cfg == SystemConfig(36, 1.0, 1e-5, None, 52.4, 115.4, 3.3)
        assert parse_config_text(path.read_text())["asymptotic"]["iterations"] == "20"
        assert SystemConfig.from_mapping(cfg.to_mapping()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            SystemConfig.from_mapping({"n_chargers": "3", "n_spins": "4"})


def literal_product(n, eps, gamma):
    rb = np.diag([(1 + eps) / 2, (1 - eps) / 2])
    rc = np.diag([(1 - gamma * eps) / 2, (1 + gamma * eps) / 2])
    return reduce(np.kron, [rb] + [rc] * n)


class TestThermalState:
    def test_pure_single_charger(self):
        state = expand(thermal_state(SystemConfig(1, epsilon=1.0)))
        expected = np.kron(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
        np.testing.assert_array_equal(state.elements.real, expected)

    def test_zero_polarization_is_maximally_mixed(self):
        state = thermal_state(SystemConfig(3, epsilon=0.0))
        for b in state.blocks:
            np.testing.assert_allclose(b.block, np.eye(len(b.block)) / 16, atol=1e-15)

    def test_matches_literal_tensor_product(self):
        cfg = SystemConfig(6, epsilon=1e-5, gamma=1.0)
        np.testing.assert_allclose(expand(thermal_state(cfg)).elements, literal_product(6, 1e-5, 1.0), atol=1e-14, rtol=0)
        np.testing.assert_allclose(thermal_state_full(cfg).elements, literal_product(6, 1e-5, 1.0), atol=1e-15, rtol=0)

    def test_pi_pulse_maps_equilibrium_to_energized(self):
        cfg = SystemConfig(5, epsilon=0.3, gamma=-1.5)
        a = pi_pulse_chargers(equilibrium_state(cfg))
        for x, y in zip(a.blocks, thermal_state(cfg).blocks):
            np.testing.assert_allclose(x.block, y.block, atol=1e-16)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 9), st.floats(-1, 1), st.floats(-4, 4))
    def test_trace_and_positivity(self, n, eps, gamma):
        if abs(gamma * eps) > 1:
            gamma = np.sign(gamma) / max(abs(eps), 1e-12) if eps else gamma
            if abs(gamma * eps) > 1:
                return
        state = thermal_state(SystemConfig(n, gamma=gamma, epsilon=eps))
        state.check()
        for b in state.blocks:
            assert np.all(np.diag(b.block).real >= -1e-15)

    @pytest.mark.parametrize("eps,gamma", [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (0.5, 2.0)])
    def test_boundary_purities(self, eps, gamma):
        state = thermal_state(SystemConfig(4, gamma=gamma, epsilon=eps))
        state.check()
        expand(state).check()


class TestReducedState:
    def test_product_state(self, rng):
        from conftest import random_density
        ra, rb = random_density(2, rng), random_density(3, rng)
        joint = DensityMatrix((2, 3), np.kron(ra, rb))
        np.testing.assert_allclose(reduced_state(joint, [0]).elements, ra, atol=1e-15)
        np.testing.assert_allclose(reduced_state(joint, [1]).elements, rb, atol=1e-15)

    def test_bell_state(self):
        np.testing.assert_allclose(reduced_state(bell_state(), [1]).elements, np.eye(2) / 2)

    def test_thermal_battery_by_direct_contraction(self):
        eps = 1e-5
        full = thermal_state_full(SystemConfig(3, epsilon=eps)).elements
        oracle = np.zeros((2, 2), dtype=complex)
        for a in range(2):
            for b in range(2):
                for rest in range(8):
                    oracle[a, b] += full[a * 8 + rest, b * 8 + rest]
        red = reduced_state(DensityMatrix((2,) * 4, full), [0]).elements
        np.testing.assert_allclose(red, oracle, atol=1e-16)
        np.testing.assert_allclose(red, np.diag([(1 + eps) / 2, (1 - eps) / 2]), atol=1e-16)

    def test_index_errors(self):
        with pytest.raises(IndexError):
            reduced_state(bell_state(), [2])
        with pytest.raises(ValueError):
            reduced_state(bell_state(), [])

    def test_keeps_order_and_trace(self, rng):
        from conftest import random_density
        rho = DensityMatrix((2, 2, 2), random_density(8, rng))
        red = reduced_state(rho, [2, 0])
        assert red.dims == (2, 2)
        assert red.trace() == pytest.approx(1.0, abs=1e-14)


class TestBatteryReduced:
    @pytest.mark.parametrize("n", [1, 3, 6, 9])
    def test_matches_full_space(self, n):
        cfg = SystemConfig(n, epsilon=1e-5, gamma=1.3)
        sector = battery_reduced(thermal_state(cfg)).elements
        full = reduced_state(thermal_state_full(cfg), [0]).elements
        np.testing.assert_allclose(sector, full, atol=1e-10)

    def test_pure_and_unpolarized(self):
        np.testing.assert_allclose(battery_reduced(thermal_state(SystemConfig(5, epsilon=1.0))).elements,
                                   np.diag([1.0, 0.0]), atol=1e-15)
        np.testing.assert_allclose(battery_reduced(thermal_state(SystemConfig(5, epsilon=0.0))).elements,
                                   np.eye(2) / 2, atol=1e-15)

    def test_large_n_trace(self):
        state = thermal_state(SystemConfig(36, epsilon=1e-5))
        state.check()
        assert battery_reduced(state).trace() == pytest.approx(1.0, abs=1e-12)
