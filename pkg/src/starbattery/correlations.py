"""Entanglement entropy and two-qubit quantum discord along charging runs.

Entropies of nearly maximally mixed states are evaluated as deficits
``log d - S(rho)`` from the deviation ``rho - 1/d`` with ``log1p``.  Under
high-temperature conditions (epsilon ~ 1e-5) the discord is of order
epsilon**2 and would otherwise drown in rounding of ``-p log p`` terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import dephase, evolve_exact
from .metrics import normalized_energy
from .spin_core import (
    DensityMatrix,
    DimensionError,
    SectorState,
    SystemConfig,
    _collective,
    battery_reduced,
    reduced_state,
    spin_half,
    thermal_state,
)

MAX_CORRELATION_CHARGERS = 14
MIXED_EPSILON = 1e-5

_PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _matrix(rho) -> np.ndarray:
    return rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho)


def von_neumann_entropy(rho, base: float = np.e) -> float:
    """``-sum lam log lam`` with ``0 log 0 = 0``; natural log by default."""
    lam = np.linalg.eigvalsh(_matrix(rho))
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)) / np.log(base))


def _excess(y: np.ndarray) -> np.ndarray:
    """``(1 + y) log(1 + y) - y``, accurate for tiny ``|y|``."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    ys = np.where(small, y, 0.0)
    # sum_{k>=2} (-1)^k y^k / (k (k - 1)), truncation error < 1e-18 relative
    series = sum((-1) ** k * ys**k / (k * (k - 1)) for k in range(2, 11))
    yl = np.where(small, 0.5, np.maximum(y, -1.0))
    direct = np.where(yl > -1.0, (1 + yl) * np.log1p(np.where(yl > -1.0, yl, 0.0)), 0.0) - yl
    return np.where(small, series, direct)


def _entropy_deficit(deviation: np.ndarray) -> float:
    """``log d - S(1/d + deviation)`` in nats; the deviation is made traceless."""
    d = deviation.shape[0]
    deviation = deviation - np.trace(deviation) * np.eye(d) / d
    mu = np.linalg.eigvalsh(deviation)
    return float(np.sum(_excess(d * mu)) / d)


def two_spin_reduced(state: DensityMatrix, charger_index: int) -> DensityMatrix:
    """Battery plus charger ``charger_index`` (1-based) from a full register."""
    n = len(state.dims) - 1
    if n > MAX_CORRELATION_CHARGERS:
        raise DimensionError(f"full-space reduction limited to {MAX_CORRELATION_CHARGERS} chargers")
    if not 1 <= charger_index <= n:
        raise IndexError(f"charger_index must be in [1, {n}]")
    return reduced_state(state, [0, charger_index])


def pair_state(state: SectorState) -> DensityMatrix:
    """Battery plus any single charger, from collective moments.

    For a charger-symmetric state ``<sigma_a (x) sigma_b^(i)>`` equals
    ``<sigma_a (x) 2 I_b> / N`` for every charger ``i``, which fixes the
    two-qubit state.
    """
    n = state.n_chargers
    corr = np.zeros((4, 4))
    for b in state.blocks:
        jx, jy, jz = _collective(b.j)
        ladder = (np.eye(b.ladder_dim), 2 * jx / n, 2 * jy / n, 2 * jz / n)
        for a, sa in enumerate(_PAULI):
            for c, lc in enumerate(ladder):
                corr[a, c] += b.multiplicity * np.trace(np.kron(sa, lc) @ b.block).real
    rho = sum(corr[a, c] * np.kron(_PAULI[a], _PAULI[c]) for a in range(4) for c in range(4)) / 4
    return DensityMatrix((2, 2), rho)


def _pair_deviation(rho: np.ndarray) -> np.ndarray:
    return rho - np.eye(4) / 4


def _bloch_direction(angles) -> np.ndarray:
    t, p = angles
    return np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])


def _qubit_deficit(mu: np.ndarray) -> np.ndarray:
    """Deficit of a qubit with eigenvalues ``1/2 +/- mu``."""
    x = 2 * np.minimum(mu, 0.5)
    return (_excess(x) + _excess(-x)) / 2


def _conditional_gain(dev4: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """``sum_k p_k deficit(rho_B|k)`` for projective measurements on the charger.

    ``directions`` has shape ``(..., 3)``; conditional battery states are
    2x2 so their spectra are closed-form.
    """
    t = dev4.reshape(2, 2, 2, 2)
    # Tr_C[(1 (x) sigma_i) deviation] for i = 0..3
    parts = np.array([np.einsum("acbd,dc->ab", t, s) for s in _PAULI])
    directions = np.asarray(directions, dtype=float)
    total = np.zeros(directions.shape[:-1])
    for sign in (1, -1):
        m = (parts[0] + sign * np.tensordot(directions, parts[1:], axes=([-1], [0]))) / 2
        tr = (m[..., 0, 0] + m[..., 1, 1]).real
        p = 0.5 + tr
        a = (m[..., 0, 0] - m[..., 1, 1]).real / 2
        b = np.abs(m[..., 0, 1])
        safe_p = np.where(p > 0, p, 1.0)
        mu = np.sqrt(a**2 + b**2) / safe_p
        total += np.where(p > 0, p * _qubit_deficit(mu), 0.0)
    return total


def fibonacci_sphere(count: int) -> np.ndarray:
    """``count`` quasi-uniform polar/azimuth pairs on the unit sphere."""
    k = np.arange(count) + 0.5
    polar = np.arccos(1 - 2 * k / count)
    azimuth = np.pi * (1 + 5**0.5) * k
    return np.column_stack([polar, np.mod(azimuth, 2 * np.pi)])


@dataclass(frozen=True)
class DiscordResult:
    """Discord in bits with the optimizer's diagnostics."""

    discord: float
    mutual_information: float
    classical_correlation: float
    direction: np.ndarray = field(repr=False)
    converged: bool = True
    gradient_norm: float = 0.0
    raw: float = 0.0


def discord_optimization(rho, grid_size: int = 400, refine: bool = True) -> DiscordResult:
    """Quantum discord with the charger qubit measured.

    ``D = I(B:C) - max_n J(B|n)`` over rank-one projective measurements.
    A Fibonacci grid seeds a bounded local search; ``raw`` holds the value
    before clamping at zero.
    """
    r = _matrix(rho)
    if r.shape != (4, 4):
        raise ValueError("quantum discord needs a two-qubit state")
    dev = _pair_deviation(r)
    dev = dev - np.trace(dev) * np.eye(4) / 4
    t = dev.reshape(2, 2, 2, 2)
    def_bc = _entropy_deficit(dev)
    def_b = _entropy_deficit(np.einsum("acbc->ab", t))
    def_c = _entropy_deficit(np.einsum("acad->cd", t))

    grid = fibonacci_sphere(grid_size)
    gains = _conditional_gain(dev, _bloch_direction(grid.T).T)
    best = int(np.argmax(gains))
    angles, gain = grid[best], gains[best]
    converged, grad_norm = True, 0.0
    scale = max(abs(def_bc), 1e-300)
    if refine and scale > 1e-300:
        objective = lambda a: -_conditional_gain(dev, _bloch_direction(a)) / scale
        res = minimize(objective, angles, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        if -res.fun * scale >= gain:
            angles, gain = res.x, -res.fun * scale
        h = 1e-6
        grad = np.array([(objective(angles + h * e) - objective(angles - h * e)) / (2 * h)
                         for e in np.eye(2)])
        grad_norm = float(np.linalg.norm(grad))
        converged = bool(res.success)
    ln2 = np.log(2)
    raw = (def_bc - def_c - gain) / ln2
    mutual = (def_bc - def_b - def_c) / ln2
    return DiscordResult(
        discord=max(raw, 0.0),
        mutual_information=mutual,
        classical_correlation=(gain - def_b) / ln2,
        direction=_bloch_direction(angles),
        converged=converged,
        gradient_norm=grad_norm,
        raw=raw,
    )


def quantum_discord(rho) -> float:
    """Two-qubit quantum discord in bits (charger side measured)."""
    return discord_optimization(rho).discord


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationTrace:
    """Correlation diagnostics along a theta sweep.

    ``entropy`` is the battery entropy on the pure path in ``units``;
    ``discord`` is the raw battery/charger discord in bits on the mixed path.
    """

    n: int
    theta: np.ndarray
    e_b_pure: np.ndarray
    e_b_mixed: np.ndarray
    entropy: np.ndarray
    discord: np.ndarray
    units: str = "bits"

    @property
    def theta_bar(self) -> float:
        return np.pi / np.sqrt(self.n)

    @property
    def tau_normalized(self) -> np.ndarray:
        return self.theta / self.theta_bar

    @property
    def discord_normalized(self) -> np.ndarray:
        peak = np.max(self.discord) if self.discord.size else 0.0
        return self.discord / peak if peak > 0 else np.zeros_like(self.discord)


def _energized(config: SystemConfig) -> SectorState:
    return thermal_state(config)


def correlation_trace(config: SystemConfig, theta_samples, units: str = "bits") -> CorrelationTrace:
    """Entropy on the pure path (eps = gamma = 1) and discord on ``config``'s path.

    ``config`` supplies N and the mixed-path purity (eps = 1e-5, gamma = 1
    reproduces the usual high-temperature setting).
    """
    if config.n_chargers > MAX_CORRELATION_CHARGERS:
        raise DimensionError(
            f"correlation analysis limited to N <= {MAX_CORRELATION_CHARGERS}, got {config.n_chargers}"
        )
    base = {"bits": 2.0, "nats": np.e}.get(units)
    if base is None:
        raise ValueError(f"units must be 'bits' or 'nats', got {units!r}")
    theta = np.asarray(theta_samples, dtype=float)
    pure0 = _energized(config.replace(epsilon=1.0, gamma=1.0))
    mixed0 = _energized(config)
    e_pure, e_mixed, entropy, discord = [], [], [], []
    for th in theta:
        pure = evolve_exact(pure0, th)
        rho_b = battery_reduced(pure)
        e_pure.append(normalized_energy(battery_reduced(dephase(pure)), 1.0))
        entropy.append(von_neumann_entropy(rho_b, base))
        mixed = evolve_exact(mixed0, th)
        e_mixed.append(normalized_energy(battery_reduced(dephase(mixed)), config.epsilon))
        discord.append(quantum_discord(pair_state(mixed)))
    return CorrelationTrace(
        n=config.n_chargers,
        theta=theta,
        e_b_pure=np.array(e_pure),
        e_b_mixed=np.array(e_mixed),
        entropy=np.array(entropy),
        discord=np.array(discord),
        units=units,
    )
