"""Time evolution under the star flip-flop interaction.

All evolution is in the interaction frame with
``U(theta) = exp(-i theta (S_x I_x + S_y I_y))`` and ``theta = 2 pi J tau``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np
import scipy.sparse as sp

from .spin_core import (
    DensityMatrix,
    DimensionError,
    SectorState,
    ladder_m,
    magnetization_labels,
    spin_half,
    _collective,
)

MAX_FULL_DIM = 2**15
MAX_TROTTER_DIM = 2**12


@dataclass(frozen=True)
class PropagatorSpec:
    theta: float
    n0: int = 1
    mode: str = "trotterized"

    def __post_init__(self):
        if self.mode not in ("exact", "trotterized"):
            raise ValueError(f"mode must be 'exact' or 'trotterized', got {self.mode!r}")
        if int(self.n0) != self.n0 or self.n0 < 1:
            raise ValueError(f"n0 must be a positive integer, got {self.n0!r}")


# ---------------------------------------------------------------------------
# sector path
# ---------------------------------------------------------------------------


def flip_flop_block(j: float) -> np.ndarray:
    """``S_x J_x + S_y J_y`` on battery x spin-j ladder (real symmetric)."""
    sx, sy, _ = spin_half()
    jx, jy, _ = _collective(float(j))
    return (np.kron(sx, jx) + np.kron(sy, jy)).real


@lru_cache(maxsize=None)
def _block_eigh(j: float):
    w, v = np.linalg.eigh(flip_flop_block(j))
    w.flags.writeable = False
    v.flags.writeable = False
    return w, v


@lru_cache(maxsize=4096)
def block_propagator(j: float, theta: float) -> np.ndarray:
    w, v = _block_eigh(float(j))
    u = (v * np.exp(-1j * theta * w)) @ v.T
    u.flags.writeable = False
    return u


def evolve_exact(state: SectorState, theta: float) -> SectorState:
    """Evolve every sector block by the exact flip-flop propagator."""
    theta = float(theta)
    arrays = []
    for b in state.blocks:
        u = block_propagator(b.j, theta)
        arrays.append(u @ b.block @ u.conj().T)
    return state.with_blocks(arrays)


def _block_magnetization(j: float) -> np.ndarray:
    return np.concatenate([0.5 + ladder_m(j), -0.5 + ladder_m(j)])


# ---------------------------------------------------------------------------
# full-space path
# ---------------------------------------------------------------------------


def _check_full_dims(state: DensityMatrix, cap: int = MAX_FULL_DIM) -> int:
    if any(d != 2 for d in state.dims):
        raise ValueError("full-space evolution needs a register of spin-1/2 subsystems")
    if state.size > cap:
        raise DimensionError(f"dimension {state.size} exceeds the full-space cap {cap}")
    return len(state.dims)


def flip_flop_full(n_sites: int) -> sp.csr_matrix:
    """``sum_i (S_x I_x^i + S_y I_y^i)`` with the battery at site 0 (sparse)."""
    sx, sy, _ = spin_half()
    eye = sp.identity(2, format="csr")

    def embed(op, site):
        return reduce(
            lambda a, b: sp.kron(a, b, format="csr"),
            [sp.csr_matrix(op) if k == site else eye for k in range(n_sites)],
        )

    h = sp.csr_matrix((2**n_sites, 2**n_sites), dtype=complex)
    s_x, s_y = embed(sx, 0), embed(sy, 0)
    for i in range(1, n_sites):
        h = h + s_x @ embed(sx, i) + s_y @ embed(sy, i)
    return h.real.tocsr()


@lru_cache(maxsize=8)
def _full_eigh(n_sites: int):
    """Eigendecomposition of the full Hamiltonian per magnetization block."""
    h = flip_flop_full(n_sites)
    labels = magnetization_labels(n_sites)
    blocks = []
    for m in np.unique(labels):
        idx = np.flatnonzero(labels == m)
        w, v = np.linalg.eigh(h[idx][:, idx].toarray())
        blocks.append((idx, w, v))
    return blocks


def exact_propagator(n_sites: int, theta: float) -> np.ndarray:
    dim = 2**n_sites
    u = np.zeros((dim, dim), dtype=complex)
    for idx, w, v in _full_eigh(n_sites):
        u[np.ix_(idx, idx)] = (v * np.exp(-1j * theta * w)) @ v.T
    return u


def two_spin_propagator(theta: float) -> np.ndarray:
    """Closed-form ``exp(-i theta (S_x I_x + S_y I_y))`` for two spins.

    Only the ``{|01>, |10>}`` pair mixes, by ``exp(-i theta sigma_x / 2)``.
    """
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    u = np.eye(4, dtype=complex)
    u[1:3, 1:3] = [[c, -1j * s], [-1j * s, c]]
    return u


def evolve_full(state: DensityMatrix, theta: float) -> DensityMatrix:
    """Exact evolution on the uncompressed register (validation path).

    The propagator is block diagonal in total magnetization, so each
    ``(M, M')`` block of the state is rotated separately.
    """
    n_sites = _check_full_dims(state)
    theta = float(theta)
    blocks = _full_eigh(n_sites)
    props = [(idx, (v * np.exp(-1j * theta * w)) @ v.T) for idx, w, v in blocks]
    rho = state.elements
    out = np.zeros_like(rho)
    for ia, ua in props:
        rows = rho[ia]
        for ib, ub in props:
            sub = rows[:, ib]
            if not sub.any():
                continue
            out[np.ix_(ia, ib)] = ua @ sub @ ub.conj().T
    return DensityMatrix(state.dims, out)


def _global_rotation(axis: str, n_sites: int) -> np.ndarray:
    sx, sy, _ = spin_half()
    op = sx if axis == "x" else sy
    # exp(-i op pi/2) for a spin-1/2 with op^2 = 1/4
    single = np.cos(np.pi / 4) * np.eye(2) - 2j * np.sin(np.pi / 4) * op
    return reduce(np.kron, [single] * n_sites)


def trotter_step(n_sites: int, theta: float, n0: int) -> np.ndarray:
    """One ``Y.ZZ.Y^dag.X.ZZ.X^dag`` slice with ``ZZ = exp(-i S_z I_z theta/n0)``."""
    mz = magnetization_labels(n_sites)
    s_z = np.where(np.arange(2**n_sites) >> (n_sites - 1) & 1, -0.5, 0.5)
    i_z = mz - s_z
    zz = np.diag(np.exp(-1j * s_z * i_z * theta / n0))
    x = _global_rotation("x", n_sites)
    y = _global_rotation("y", n_sites)
    return y @ zz @ y.conj().T @ x @ zz @ x.conj().T


def trotter_propagator(n_sites: int, spec: PropagatorSpec) -> np.ndarray:
    if spec.mode == "exact":
        return exact_propagator(n_sites, spec.theta)
    if 2**n_sites > MAX_TROTTER_DIM:
        raise DimensionError(f"Trotter path limited to dimension {MAX_TROTTER_DIM}")
    return np.linalg.matrix_power(trotter_step(n_sites, spec.theta, spec.n0), spec.n0)


def u_xy_trotter(state: DensityMatrix, spec: PropagatorSpec) -> DensityMatrix:
    """Apply ``n0`` iterations of the pulse-sequence propagator."""
    n_sites = _check_full_dims(state, MAX_TROTTER_DIM)
    u = trotter_propagator(n_sites, spec)
    return DensityMatrix(state.dims, u @ state.elements @ u.conj().T)


# ---------------------------------------------------------------------------
# gradient dephasing
# ---------------------------------------------------------------------------


def dephase(state):
    """Remove coherences between different total-magnetization eigenspaces.

    Accepts either a :class:`SectorState` or a full-space
    :class:`DensityMatrix` of spin-1/2 subsystems.
    """
    if isinstance(state, SectorState):
        arrays = []
        for b in state.blocks:
            m = _block_magnetization(b.j)
            arrays.append(np.where(m[:, None] == m[None, :], b.block, 0))
        return state.with_blocks(arrays)
    n_sites = _check_full_dims(state)
    m = magnetization_labels(n_sites)
    return DensityMatrix(state.dims, np.where(m[:, None] == m[None, :], state.elements, 0))
