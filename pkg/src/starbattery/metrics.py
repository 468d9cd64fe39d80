"""Battery observables: energy, polarization, passive state and ergotropy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spin_core import DensityMatrix, SystemConfig


class AnalysisError(RuntimeError):
    """A trace cannot support the requested analysis."""


def _matrix(rho) -> np.ndarray:
    return rho.elements if isinstance(rho, DensityMatrix) else np.asarray(rho)


def battery_hamiltonian() -> np.ndarray:
    """``H_B = 1/2 - S_z`` in units of hbar omega_B: diag(0, 1)."""
    return np.diag([0.0, 1.0])


def battery_energy(rho_b) -> float:
    """Excited-state population ``<1|rho_B|1>``."""
    return float(_matrix(rho_b)[1, 1].real)


def battery_polarization(rho_b) -> float:
    """``<sigma_z>`` of the battery."""
    r = _matrix(rho_b)
    return float((r[0, 0] - r[1, 1]).real)


@dataclass(frozen=True)
class BatteryReading:
    theta: float
    e_b: float
    m_b: float
    ergotropy_ratio: float


def normalized_polarization(rho_b, epsilon: float) -> float:
    """``m_B = <sigma_z> / epsilon``; undefined for an unpolarized ensemble."""
    if epsilon == 0:
        raise AnalysisError("normalized energy is undefined for epsilon = 0")
    return battery_polarization(rho_b) / epsilon


def normalized_energy(rho_b, epsilon: float) -> float:
    """Dimensionless energy ``(1 - m_B)/2``; equals the excited population at epsilon = 1."""
    return (1 - normalized_polarization(rho_b, epsilon)) / 2


def read_battery(rho_b, epsilon: float, theta: float = float("nan")) -> BatteryReading:
    m_b = normalized_polarization(rho_b, epsilon)
    return BatteryReading(theta, (1 - m_b) / 2, m_b, ergotropy_ratio(rho_b, epsilon))


def passive_state(rho, h) -> np.ndarray:
    """Passive counterpart of ``rho`` for Hamiltonian ``h``.

    Populations sorted descending are placed on energy levels sorted
    ascending; ties keep eigensolver order.
    """
    r = _matrix(rho)
    h = _matrix(h)
    if r.shape != h.shape:
        raise ValueError("state and Hamiltonian dimensions differ")
    pops = np.linalg.eigvalsh(r)[::-1]
    energies, vecs = np.linalg.eigh(h)
    order = np.argsort(energies, kind="stable")
    vecs = vecs[:, order]
    return (vecs * pops) @ vecs.conj().T


def ergotropy(rho, h) -> float:
    """Maximum unitarily extractable work ``Tr(rho h) - Tr(rho_p h)``."""
    r = _matrix(rho)
    h = _matrix(h)
    pops = np.linalg.eigvalsh(r)[::-1]
    energies = np.sort(np.linalg.eigvalsh(h))
    value = float(np.trace(r @ h).real - pops @ energies)
    return max(value, 0.0)


def ergotropy_ratio(rho_b, epsilon: float) -> float:
    """``E / (-eps' E_B)`` for a single-qubit battery; 0 while passive.

    ``eps'`` is the signed eigen-polarization of the instantaneous state, so
    the ratio is ``2 / (1 - eps')`` once the populations are inverted.
    """
    r = _matrix(rho_b)
    h = battery_hamiltonian()
    work = ergotropy(r, h)
    if work <= 1e-9 * max(abs(epsilon), 1e-300):
        return 0.0
    lam = np.linalg.eigvalsh(r)
    eps_signed = -(lam[-1] - lam[0])
    return work / (-eps_signed * battery_energy(r))


# ---------------------------------------------------------------------------
# charging-time analysis
# ---------------------------------------------------------------------------


def locate_peak(theta, e_b) -> tuple[float, float]:
    """Argmax of a sampled curve refined by a three-point parabola.

    Returns ``(theta_peak, e_peak)``.  Raises :class:`AnalysisError` if the
    discrete maximum sits on the first or last sample.
    """
    theta = np.asarray(theta, dtype=float)
    e_b = np.asarray(e_b, dtype=float)
    if theta.size < 3:
        raise AnalysisError("need at least three samples to locate a maximum")
    k = int(np.argmax(e_b))
    if k == 0 or k == theta.size - 1:
        raise AnalysisError("trace has no interior maximum")
    x0, x1, x2 = theta[k - 1 : k + 2]
    y0, y1, y2 = e_b[k - 1 : k + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a >= 0:
        return float(x1), float(y1)
    c = y1 - a * x1**2 - b * x1
    xp = -b / (2 * a)
    return float(xp), float(c - b**2 / (4 * a))


@dataclass(frozen=True)
class AdvantageReport:
    n: int
    tau_bar_1: float
    tau_bar_n: float
    gamma_advantage: float
    cluster_size_estimate: int


def advantage_report(config: SystemConfig, trace_n, trace_1) -> AdvantageReport:
    """Quantum advantage ``tau_1 / tau_N`` from two charging traces.

    Charging times are in seconds when ``config.coupling_j`` is set,
    otherwise in units of ``1/(2 pi J)`` (i.e. phases).
    """
    theta_n, _ = locate_peak(trace_n.theta, trace_n.e_b)
    theta_1, _ = locate_peak(trace_1.theta, trace_1.e_b)
    if config.coupling_j is not None:
        tau_n, tau_1 = config.tau_from_theta(theta_n), config.tau_from_theta(theta_1)
    else:
        tau_n, tau_1 = theta_n, theta_1
    gamma = float(tau_1 / tau_n)
    return AdvantageReport(
        n=config.n_chargers,
        tau_bar_1=float(tau_1),
        tau_bar_n=float(tau_n),
        gamma_advantage=gamma,
        cluster_size_estimate=int(round(gamma**2 + 1)),
    )
