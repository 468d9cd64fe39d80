"""Spin operators, system configuration and state preparation.

The charger ensemble is permutation symmetric, so its 2**N dimensional
space splits into total-spin sectors ``j`` each carrying ``d(N, j)``
identical copies of a ``2j + 1`` dimensional ladder.  A :class:`SectorState`
keeps one ``2 (2j + 1)`` block (battery times ladder) per sector together
with the integer multiplicity; the full-space :class:`DensityMatrix` is used
for validation and for small systems.

Conventions
-----------
* ``|0>`` is the ground state and carries spin projection ``+1/2``,
  ``|1>`` is the excited state with projection ``-1/2``.
* Ladder bases are ordered by descending ``m``.
* The battery is always the first tensor factor.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from math import comb
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10

CONFIG_KEYS = {
    "n_chargers": "n_chargers",
    "gamma": "gamma",
    "epsilon": "epsilon",
    "coupling_j_hz": "coupling_j",
    "coupling_j_bl_hz": "coupling_j_bl",
    "t1_battery_s": "t1_battery",
    "t1_charger_s": "t1_charger",
}


class ConfigError(ValueError):
    """Invalid or incomplete system configuration."""


class DimensionError(ValueError):
    """Requested representation exceeds the supported dimension."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemConfig:
    """Physical parameters of a star-topology battery.

    Frequencies are in Hz and times in seconds.  ``epsilon`` is the battery
    purity factor and ``gamma * epsilon`` the charger purity factor.
    """

    n_chargers: int
    gamma: float = 1.0
    epsilon: float = 1e-5
    coupling_j: float | None = None
    coupling_j_bl: float | None = None
    t1_battery: float | None = None
    t1_charger: float | None = None

    def __post_init__(self):
        n = self.n_chargers
        if isinstance(n, bool) or not float(n).is_integer() or n < 1:
            raise ConfigError(f"n_chargers must be a positive integer, got {n!r}")
        object.__setattr__(self, "n_chargers", int(n))
        if abs(self.epsilon) > 1:
            raise ConfigError(f"|epsilon| must be <= 1, got {self.epsilon}")
        if abs(self.gamma * self.epsilon) > 1:
            raise ConfigError(
                f"charger purity |gamma*epsilon| must be <= 1, got {self.gamma * self.epsilon}"
            )
        for name in ("coupling_j", "coupling_j_bl", "t1_battery", "t1_charger"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be > 0 when set, got {value}")

    @property
    def charger_purity(self) -> float:
        return self.gamma * self.epsilon

    @property
    def theta_bar(self) -> float:
        """Optimal pure-state charging phase pi / sqrt(N)."""
        return np.pi / np.sqrt(self.n_chargers)

    def replace(self, **changes) -> "SystemConfig":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return SystemConfig(**values)

    def tau_from_theta(self, theta):
        """Convert a charging phase to seconds, tau = theta / (2 pi J)."""
        if self.coupling_j is None:
            raise ConfigError("coupling_j_hz is required to convert phases to seconds")
        return np.asarray(theta) / (2 * np.pi * self.coupling_j)

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "SystemConfig":
        """Build from file-style keys (``coupling_j_hz`` ...); blanks mean unset."""
        kwargs = {}
        for key, raw in values.items():
            if key not in CONFIG_KEYS:
                raise ConfigError(f"unknown configuration key {key!r}")
            if raw is None or (isinstance(raw, str) and not raw.strip()):
                continue
            try:
                value = int(str(raw)) if key == "n_chargers" else float(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
            kwargs[CONFIG_KEYS[key]] = value
        if "n_chargers" not in kwargs:
            raise ConfigError("n_chargers is required")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "SystemConfig":
        return cls.from_mapping(read_config_file(path)["system"])

    def to_mapping(self) -> dict[str, str]:
        out = {}
        for key, attr in CONFIG_KEYS.items():
            value = getattr(self, attr)
            out[key] = "" if value is None else repr(value)
        return out


def read_config_file(path: str | Path) -> dict[str, dict[str, str]]:
    """Parse a key-value config file into ``{section: {key: value}}``.

    Keys before any ``[section]`` header belong to ``system``.  Lines starting
    with ``#`` or ``;`` are comments.
    """
    text = Path(path).read_text()
    return parse_config_text(text)


def parse_config_text(text: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string("[system]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    sections = {name: dict(parser[name]) for name in parser.sections()}
    sections.setdefault("system", {})
    return sections


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix over an explicit tensor factorization ``dims``."""

    dims: tuple[int, ...]
    elements: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        elements = np.array(self.elements, dtype=complex)
        size = int(np.prod(dims))
        if elements.shape != (size, size):
            raise ValueError(f"elements shape {elements.shape} does not match dims {dims}")
        elements.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "elements", elements)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    def check(self) -> None:
        """Raise ``ValueError`` unless Hermitian, unit trace and positive."""
        rho = self.elements
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > TRACE_TOL:
            raise ValueError(f"density matrix trace {np.trace(rho).real} != 1")
        if np.linalg.eigvalsh(rho).min() < -POSITIVITY_TOL:
            raise ValueError("density matrix has negative eigenvalues")


@dataclass(frozen=True, eq=False)
class SectorBlock:
    """One total-spin sector: ``block`` acts on battery x (2j+1) ladder."""

    j: float
    multiplicity: int
    block: np.ndarray = field(repr=False)

    @property
    def ladder_dim(self) -> int:
        return ladder_dim(self.j)


@dataclass(frozen=True, eq=False)
class SectorState:
    """Permutation-symmetric state stored as weighted total-spin blocks.

    The full state is ``sum_j block_j (x) 1_{d(N,j)}``; weights are the
    integer multiplicities and are folded in only when an observable is
    extracted.
    """

    n_chargers: int
    blocks: tuple[SectorBlock, ...]

    def __post_init__(self):
        for b in self.blocks:
            b.block.flags.writeable = False

    def trace(self) -> float:
        return float(sum(b.multiplicity * np.trace(b.block).real for b in self.blocks))

    def with_blocks(self, arrays: Iterable[np.ndarray]) -> "SectorState":
        new = tuple(
            SectorBlock(b.j, b.multiplicity, np.asarray(a))
            for b, a in zip(self.blocks, arrays)
        )
        return SectorState(self.n_chargers, new)

    def check(self) -> None:
        js = [b.j for b in self.blocks]
        if js != sector_spins(self.n_chargers):
            raise ValueError("sector list does not match n_chargers")
        if abs(self.trace() - 1) > TRACE_TOL:
            raise ValueError(f"sector state trace {self.trace()} != 1")
        for b in self.blocks:
            if b.multiplicity != dicke_multiplicity(self.n_chargers, b.j):
                raise ValueError(f"wrong multiplicity for j={b.j}")
            if np.max(np.abs(b.block - b.block.conj().T)) > HERMITIAN_TOL:
                raise ValueError(f"block j={b.j} is not Hermitian")


# ---------------------------------------------------------------------------
# angular momentum
# ---------------------------------------------------------------------------


def ladder_dim(j: float) -> int:
    return int(round(2 * j)) + 1


def _as_half_integer(j) -> Fraction:
    f = Fraction(j).limit_denominator(2)
    if f != j or f.denominator not in (1, 2):
        raise ValueError(f"{j!r} is not a half-integer")
    return f


def dicke_multiplicity(n: int, j) -> int:
    """Number of spin-``j`` irreps among ``n`` spin-1/2 particles.

    ``d(n, j) = C(n, n/2 - j) - C(n, n/2 - j - 1)``.  Exact integers, so safe
    for any ``n``.

    Raises
    ------
    ValueError
        If ``j`` is outside ``[0, n/2]`` or ``n/2 - j`` is not an integer.
    """
    if n < 1 or int(n) != n:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    fj = _as_half_integer(j)
    k = Fraction(n, 2) - fj
    if fj < 0 or k < 0 or k.denominator != 1:
        raise ValueError(f"j={j} is not a valid total spin for n={n}")
    k = int(k)
    return comb(n, k) - (comb(n, k - 1) if k >= 1 else 0)


def sector_spins(n: int) -> list[float]:
    """Total spins ``n/2, n/2 - 1, ...`` down to 0 or 1/2."""
    return [n / 2 - k for k in range(n // 2 + 1)]


@lru_cache(maxsize=None)
def _collective(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = ladder_dim(j)
    m = j - np.arange(d)
    jp = np.zeros((d, d))
    # <m+1|J+|m> sits just above the diagonal for descending m
    jp[np.arange(d - 1), np.arange(1, d)] = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jx = (jp + jp.T) / 2
    jy = (jp - jp.T) / 2j
    jz = np.diag(m).astype(float)
    for a in (jx, jy, jz):
        a.flags.writeable = False
    return jx, jy, jz


def collective_operators(n: int, j) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(J_x, J_y, J_z)`` for the spin-``j`` ladder of ``n`` chargers."""
    dicke_multiplicity(n, j)
    return _collective(float(j))


def spin_half() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return _collective(0.5)


def ladder_m(j: float) -> np.ndarray:
    return j - np.arange(ladder_dim(j))


# ---------------------------------------------------------------------------
# state preparation
# ---------------------------------------------------------------------------


def _spin_populations(polarization: float) -> np.ndarray:
    """Populations of (|0>, |1>) for a spin with <sigma_z> = polarization."""
    return np.array([(1 + polarization) / 2, (1 - polarization) / 2])


def _ladder_populations(j: float, n: int, polarization: float) -> np.ndarray:
    # |j,m> has n/2+m spins in |0>; each |0> carries (1+p)/2 and |1> (1-p)/2
    m = ladder_m(j)
    up, down = _spin_populations(polarization)
    return up ** (n / 2 + m) * down ** (n / 2 - m)


def product_state(n: int, battery_polarization: float, charger_polarization: float) -> SectorState:
    """Diagonal product state with the given ``<sigma_z>`` per spin."""
    if abs(battery_polarization) > 1 or abs(charger_polarization) > 1:
        raise ValueError("polarizations must lie in [-1, 1]")
    pb = _spin_populations(battery_polarization)
    blocks = []
    for j in sector_spins(n):
        pc = _ladder_populations(j, n, charger_polarization)
        blocks.append(SectorBlock(j, dicke_multiplicity(n, j), np.diag(np.kron(pb, pc)).astype(complex)))
    return SectorState(n, tuple(blocks))


def equilibrium_state(config: SystemConfig) -> SectorState:
    """Thermal equilibrium: both species ground-state polarized."""
    return product_state(config.n_chargers, config.epsilon, config.charger_purity)


def thermal_state(config: SystemConfig) -> SectorState:
    """Energized initial state: equilibrium battery, population-inverted chargers.

    Battery populations ``(1 +/- eps)/2`` on ``(|0>, |1>)``; each charger
    ``(1 -/+ gamma eps)/2``.  For ``eps = gamma = 1`` this is
    ``|0><0| (x) |1...1><1...1|``.
    """
    return product_state(config.n_chargers, config.epsilon, -config.charger_purity)


def pi_pulse_chargers(state: SectorState) -> SectorState:
    """Invert every charger (ideal pi pulse about x).

    ``exp(-i pi J_x)`` maps ``|j,m>`` to ``|j,-m>`` with a sector-wide phase,
    so conjugation reverses the ladder.
    """
    arrays = []
    for b in state.blocks:
        d = b.ladder_dim
        t = b.block.reshape(2, d, 2, d)[:, ::-1, :, ::-1]
        arrays.append(t.reshape(2 * d, 2 * d))
    return state.with_blocks(arrays)


def battery_reduced(state: SectorState) -> DensityMatrix:
    """Battery state ``sum_j d(N,j) Tr_ladder(block_j)`` (fixed j order)."""
    rho = np.zeros((2, 2), dtype=complex)
    for b in state.blocks:
        d = b.ladder_dim
        rho += b.multiplicity * np.einsum("ajbj->ab", b.block.reshape(2, d, 2, d))
    return DensityMatrix((2,), rho)


def charger_polarization(state: SectorState) -> float:
    """Mean per-charger ``<sigma_z>`` = 2 <J_z> / N."""
    total = 0.0
    for b in state.blocks:
        d = b.ladder_dim
        diag = np.einsum("ajaj->j", b.block.reshape(2, d, 2, d)).real
        total += b.multiplicity * float(diag @ ladder_m(b.j))
    return 2 * total / state.n_chargers


# ---------------------------------------------------------------------------
# full-space representation
# ---------------------------------------------------------------------------


def thermal_state_full(config: SystemConfig) -> DensityMatrix:
    """Literal tensor product of the energized initial state (validation path)."""
    n = config.n_chargers
    factors = [np.diag(_spin_populations(config.epsilon))]
    factors += [np.diag(_spin_populations(-config.charger_purity))] * n
    return DensityMatrix((2,) * (n + 1), reduce(np.kron, factors))


def reduced_state(state: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Partial trace over every subsystem not in ``keep``.

    Kept subsystems stay in ascending order.
    """
    keep = sorted(set(keep))
    n = len(state.dims)
    if not keep:
        raise ValueError("keep must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"subsystem index out of range for {n} subsystems")
    t = state.elements.reshape(state.dims + state.dims)
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    row, col = letters[:n], letters[n:]
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    red = np.einsum("".join(row + col) + "->" + "".join(out), t)
    kept_dims = tuple(state.dims[i] for i in keep)
    size = int(np.prod(kept_dims))
    return DensityMatrix(kept_dims, red.reshape(size, size))


@lru_cache(maxsize=16)
def _symmetric_isometries(n: int) -> dict[float, list[np.ndarray]]:
    """Product-basis isometries onto each copy of each spin-j ladder.

    Highest-weight vectors are the kernel of ``J+`` inside the ``J_z = j``
    eigenspace; lowering fills the ladder.
    """
    if n > 12:
        raise DimensionError("symmetric expansion limited to 12 chargers")
    sx, sy, sz = spin_half()
    eye = np.eye(2)
    sp = (sx + 1j * sy).real

    def collective(op):
        return sum(
            reduce(np.kron, [op if k == i else eye for k in range(n)]) for i in range(n)
        )

    jz = np.diag(collective(sz)).real
    jplus = collective(sp)
    jminus = jplus.T
    out: dict[float, list[np.ndarray]] = {}
    for j in sector_spins(n):
        idx = np.flatnonzero(np.isclose(jz, j))
        sub = jplus[:, idx]
        # kernel of J+ restricted to the M = j subspace
        _, s, vh = np.linalg.svd(sub, full_matrices=True)
        rank = int(np.sum(s > 1e-9))
        kernel = vh[rank:].conj().T
        copies = []
        for c in range(kernel.shape[1]):
            vec = np.zeros(2**n)
            vec[idx] = kernel[:, c].real
            cols = [vec]
            for m in ladder_m(j)[:-1]:
                nxt = jminus @ cols[-1] / np.sqrt(j * (j + 1) - m * (m - 1))
                cols.append(nxt)
            copies.append(np.array(cols).T)
        out[j] = copies
    return out


def expand(state: SectorState) -> DensityMatrix:
    """Full ``2**(N+1)`` density matrix of a sector state (N <= 12)."""
    n = state.n_chargers
    iso = _symmetric_isometries(n)
    eye = np.eye(2)
    left, right = [], []
    for b in state.blocks:
        for w in iso[b.j]:
            big = np.kron(eye, w)
            left.append(big @ b.block)
            right.append(big)
    # sum_c big_c B big_c^T as a single product over all copies
    rho = np.hstack(left) @ np.hstack(right).T
    return DensityMatrix((2,) * (n + 1), rho)


def full_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Embed a single-spin operator at ``site`` in an ``n_sites`` register."""
    eye = np.eye(2)
    return reduce(np.kron, [op if k == site else eye for k in range(n_sites)])


def magnetization_labels(n_sites: int) -> np.ndarray:
    """Total ``S_z`` of each product basis state (bit 0 is spin up)."""
    idx = np.arange(2**n_sites)
    ones = np.zeros_like(idx)
    for k in range(n_sites):
        ones += (idx >> k) & 1
    return n_sites / 2 - ones
