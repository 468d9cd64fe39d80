"""Charging protocols: unitary sweeps, asymptotic charging and the QCBL circuit."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .dynamics import dephase, evolve_exact, two_spin_propagator
from .metrics import (
    battery_hamiltonian,
    battery_polarization,
    ergotropy,
    ergotropy_ratio,
    locate_peak,
    normalized_energy,
)
from .spin_core import (
    ConfigError,
    DensityMatrix,
    SystemConfig,
    battery_reduced,
    charger_polarization,
    equilibrium_state,
    pi_pulse_chargers,
    product_state,
    reduced_state,
)


class FitError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# curve fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    model: str
    amplitude: float
    time_constant: float
    offset: float = 0.0
    residual_rms: float = float("nan")
    converged: bool = False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.model == "saturation":
            return self.amplitude * (1 - np.exp(-x / self.time_constant))
        return self.amplitude * np.exp(-x / self.time_constant) + self.offset


def _saturation(x, a, t):
    return a * (1 - np.exp(-x / t))


def _decay(x, a, t):
    return a * np.exp(-x / t)


def _decay_offset(x, a, t, c):
    return a * np.exp(-x / t) + c


def _initial_guess(x, y, model, offset):
    """Deterministic start from a log-linearized fit."""
    span = np.ptp(x) if np.ptp(x) > 0 else 1.0
    if model == "saturation":
        a0 = y[np.argmax(np.abs(y))] * 1.05
        ratio = 1 - y / a0
        mask = ratio > 1e-12
        if mask.sum() >= 2:
            slope = np.polyfit(x[mask], np.log(ratio[mask]), 1)[0]
            if slope < 0:
                return [a0, -1 / slope]
        return [a0, span / 3]
    c0 = 0.0
    if offset:
        c0 = y[-1] - 0.05 * (y[0] - y[-1])
    z = y - c0
    mask = z * np.sign(z[0] if z[0] != 0 else 1) > 0
    if mask.sum() >= 2:
        sign = np.sign(z[0]) if z[0] != 0 else 1.0
        slope, icpt = np.polyfit(x[mask], np.log(sign * z[mask]), 1)
        if slope < 0:
            guess = [sign * np.exp(icpt), -1 / slope]
            return guess + [c0] if offset else guess
    guess = [z[0], span / 3]
    return guess + [c0] if offset else guess


def fit_exponential(x, y, model: str = "saturation", offset: bool = False) -> FitResult:
    """Least-squares fit of ``a (1 - exp(-x/T))`` or ``a exp(-x/T) [+ c]``.

    Constant ``y`` or an optimizer failure gives ``converged=False``;
    fewer than four points or non-finite ``y`` raise ``ValueError``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if model not in ("saturation", "decay"):
        raise ValueError(f"unknown model {model!r}")
    if x.size < 4 or x.size != y.size:
        raise ValueError("need at least four (x, y) points of equal length")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    nan = float("nan")
    if np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y))):
        return FitResult(model, nan, nan, nan if offset else 0.0, nan, False)
    if model == "saturation":
        func = _saturation
    else:
        func = _decay_offset if offset else _decay
    p0 = _initial_guess(x, y, model, offset)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            popt, _, _, _, ier = curve_fit(func, x, y, p0=p0, maxfev=20000, full_output=True,
                                           ftol=1e-15, xtol=1e-15, gtol=1e-15)
    except (RuntimeError, ValueError):
        return FitResult(model, nan, nan, nan if offset else 0.0, nan, False)
    rms = float(np.sqrt(np.mean((func(x, *popt) - y) ** 2)))
    ok = bool(ier in (1, 2, 3, 4) and np.all(np.isfinite(popt)) and popt[1] > 0)
    return FitResult(
        model=model,
        amplitude=float(popt[0]),
        time_constant=float(popt[1]),
        offset=float(popt[2]) if len(popt) > 2 else 0.0,
        residual_rms=rms,
        converged=ok,
    )


# ---------------------------------------------------------------------------
# unitary charging
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChargingTrace:
    """Sampled charging run; ``e_b`` is the normalized energy (1 - m_B)/2."""

    config: SystemConfig
    theta: np.ndarray
    e_b: np.ndarray
    ergotropy: np.ndarray | None = None
    ergotropy_ratio: np.ndarray | None = None

    @property
    def tau_normalized(self) -> np.ndarray:
        return self.theta / self.config.theta_bar

    def peak(self) -> tuple[float, float]:
        return locate_peak(self.theta, self.e_b)


def charging_grid(n: int, points_per_period: int = 200, periods: float = 1.0) -> np.ndarray:
    """``points_per_period`` samples per pure-state period ``2 pi / sqrt(N)``."""
    if points_per_period < 1:
        raise ValueError("grid needs at least one point per period")
    count = int(round(points_per_period * periods))
    return np.linspace(0.0, periods * 2 * np.pi / np.sqrt(n), count + 1)


def charge_sweep(config: SystemConfig, theta_grid) -> ChargingTrace:
    """Equilibrium -> charger pi pulse -> evolve(theta) -> dephase -> read battery."""
    theta = np.asarray(theta_grid, dtype=float)
    if theta.size == 0:
        raise ValueError("theta grid is empty")
    start = pi_pulse_chargers(equilibrium_state(config))
    h = battery_hamiltonian()
    e_b, work, ratio = [], [], []
    for th in theta:
        rho_b = battery_reduced(dephase(evolve_exact(start, th)))
        e_b.append(normalized_energy(rho_b, config.epsilon))
        work.append(ergotropy(rho_b, h))
        ratio.append(ergotropy_ratio(rho_b, config.epsilon))
    return ChargingTrace(config, theta, np.array(e_b), np.array(work), np.array(ratio))


def parallel_baseline(config: SystemConfig, theta_grid) -> ChargingTrace:
    """One charger per battery: the N = 1 dynamics at the same purities."""
    return charge_sweep(config.replace(n_chargers=1), theta_grid)


def charging_power(trace: ChargingTrace, n_batteries: int = 1) -> float:
    """``E_max / tau_bar`` per pack of ``n_batteries`` (energy units hbar omega_B).

    Each of the ``n_batteries`` holds ``e_max / n_batteries`` in the parallel
    scheme, so the pack power is independent of ``n_batteries``.
    """
    theta_bar, e_max = trace.peak()
    tau_bar = trace.config.tau_from_theta(theta_bar) if trace.config.coupling_j else theta_bar
    return float(n_batteries * (e_max / n_batteries) / tau_bar)


def unitary_max(config: SystemConfig) -> float:
    """Single-shot energy at theta_bar = pi/sqrt(N) from equilibrium."""
    return float(charge_sweep(config, [config.theta_bar]).e_b[0])


# ---------------------------------------------------------------------------
# asymptotic charging
# ---------------------------------------------------------------------------


def relax_polarization(m, m_eq, dt, t1):
    """Longitudinal relaxation ``m_eq + (m - m_eq) exp(-dt/T1)``."""
    if not np.all(np.asarray(t1) > 0):
        raise ValueError("t1 must be positive")
    if np.any(np.asarray(dt) < 0):
        raise ValueError("dt must be non-negative")
    return m_eq + (m - m_eq) * np.exp(-np.asarray(dt) / t1)


@dataclass(frozen=True)
class AsymptoticRun:
    delta: float
    iterations: int
    e_b_per_iteration: np.ndarray
    fit: FitResult
    unitary_max: float
    charger_polarization: np.ndarray = field(repr=False, default=None)

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(1, self.iterations + 1)

    @property
    def saturation(self) -> float:
        return float(self.e_b_per_iteration[-1])


def asymptotic_charge(config: SystemConfig, delta: float, iterations: int = 20) -> AsymptoticRun:
    """Iterate delay -> charger pi pulse -> U(theta_bar) -> dephase.

    Between charging steps the battery and the chargers relax independently
    toward equilibrium with their T1; the charger ensemble is rebuilt as a
    product of its mean polarization (coherences are gone after dephasing).
    """
    if config.t1_battery is None or config.t1_charger is None:
        raise ConfigError("asymptotic charging needs t1_battery_s and t1_charger_s")
    if delta < 0 or iterations < 1:
        raise ValueError("delta must be >= 0 and iterations >= 1")
    if config.t1_battery <= config.t1_charger:
        warnings.warn("t1_battery <= t1_charger: charger recovers slower than the battery decays",
                      stacklevel=2)
    n, eps = config.n_chargers, config.epsilon
    b_eq, c_eq = eps, config.charger_purity
    b, c = b_eq, c_eq
    e_b, c_track = [], []
    for _ in range(iterations):
        b = relax_polarization(b, b_eq, delta, config.t1_battery)
        c = relax_polarization(c, c_eq, delta, config.t1_charger)
        state = pi_pulse_chargers(product_state(n, b, c))
        state = dephase(evolve_exact(state, config.theta_bar))
        b = battery_polarization(battery_reduced(state))
        c = charger_polarization(state)
        e_b.append((1 - b / eps) / 2)
        c_track.append(c)
    e_b = np.array(e_b)
    times = delta * np.arange(1, iterations + 1)
    fit = (fit_exponential(times, e_b, "saturation") if iterations >= 4 and delta > 0
           else FitResult("saturation", float("nan"), float("nan")))
    return AsymptoticRun(delta, iterations, e_b, fit, unitary_max(config), np.array(c_track))


def saturation_sweep(config: SystemConfig, deltas, iterations: int = 20) -> list[AsymptoticRun]:
    return [asymptotic_charge(config, float(d), iterations) for d in deltas]


# ---------------------------------------------------------------------------
# charger-battery-load circuit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QCBLTrace:
    jbl_tau: np.ndarray
    tau_prime: np.ndarray
    e_b: np.ndarray
    e_l: np.ndarray
    tau_s: float
    charged_energy: float


def _charged_battery(config: SystemConfig) -> DensityMatrix:
    start = pi_pulse_chargers(equilibrium_state(config))
    return battery_reduced(dephase(evolve_exact(start, config.theta_bar)))


def _stored_battery(config: SystemConfig, tau_s: float) -> np.ndarray:
    rho_b = _charged_battery(config)
    pol = battery_polarization(rho_b)
    if tau_s > 0:
        if config.t1_battery is None:
            raise ConfigError("battery storage needs t1_battery_s")
        pol = relax_polarization(pol, config.epsilon, tau_s, config.t1_battery)
    return np.diag([(1 + pol) / 2, (1 - pol) / 2]).astype(complex)


def qcbl_run(config: SystemConfig, jbl_tau_grid, tau_s: float = 0.0) -> QCBLTrace:
    """Charge, store for ``tau_s``, then discharge into a fully mixed load.

    The load is the same species as the battery, so both energies are
    normalized by ``epsilon``.  The battery-load exchange is the exact
    two-spin flip-flop with phase ``2 pi J_BL tau'``.
    """
    if config.coupling_j_bl is None:
        raise ConfigError("QCBL needs coupling_j_bl_hz")
    x = np.asarray(jbl_tau_grid, dtype=float)
    rho_b = _stored_battery(config, tau_s)
    pair = DensityMatrix((2, 2), np.kron(rho_b, np.eye(2) / 2))
    eps = config.epsilon
    e_b, e_l = [], []
    for val in x:
        u = two_spin_propagator(2 * np.pi * val)
        out = dephase(DensityMatrix((2, 2), u @ pair.elements @ u.conj().T))
        e_b.append(normalized_energy(reduced_state(out, [0]), eps))
        e_l.append(normalized_energy(reduced_state(out, [1]), eps))
    return QCBLTrace(
        jbl_tau=x,
        tau_prime=x / config.coupling_j_bl,
        e_b=np.array(e_b),
        e_l=np.array(e_l),
        tau_s=float(tau_s),
        charged_energy=normalized_energy(_charged_battery(config), eps),
    )


def storage_decay(config: SystemConfig, tau_s_grid, jbl_tau: float = 0.5):
    """Load energy after discharge at ``jbl_tau`` versus storage time, with fit.

    Returns ``(tau_s, e_l, fit)``; the fit is ``a exp(-tau_s/T_s) + c``.
    """
    tau_s = np.asarray(tau_s_grid, dtype=float)
    e_l = np.array([qcbl_run(config, [jbl_tau], t).e_l[0] for t in tau_s])
    return tau_s, e_l, fit_exponential(tau_s, e_l, "decay", offset=True)
