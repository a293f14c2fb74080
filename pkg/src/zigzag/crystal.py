"""Equilibrium structure of small Coulomb crystals in a harmonic pseudopotential.

Internally the solver works in units of the Coulomb length ``l`` set by the
axial frequency and the energy ``q^2 / (4 pi eps0 l)``. In these units the
potential is

    V = sum_i 1/2 (kx x_i^2 + ky y_i^2 + z_i^2) + sum_{i<j} 1 / |r_i - r_j|

with ``kx = (omega_x / omega_z)^2 = 1 / alpha`` and ``ky = (omega_y / omega_z)^2``.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    CA40,
    ConvergenceError,
    DomainError,
    IonSpecies,
    SingularityError,
    characteristic_length,
)

STABILITY_EPS = 1e-6  # relative to omega_x^2
NEAR_CRITICAL = 1e-4


class Configuration(str, enum.Enum):
    LINEAR = "linear"
    ZIGZAG = "zigzag"
    PLANAR = "planar"


@dataclass(frozen=True)
class TrapPotential:
    """Secular frequencies (rad/s) of the harmonic pseudopotential.

    ``omega_z`` is the weak axis along which chains form and ``omega_x`` the
    radial direction the magnetic gradient points along.
    """

    omega_x: float
    omega_y: float
    omega_z: float
    species: IonSpecies = CA40

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "omega_z"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_alpha(cls, omega_x, alpha, omega_y=None, species=CA40):
        """Trap with ``omega_z = omega_x * sqrt(alpha)``."""
        if not alpha > 0:
            raise DomainError(f"alpha must be positive, got {alpha}")
        if omega_y is None:
            omega_y = 2 * omega_x
        return cls(omega_x, omega_y, omega_x * np.sqrt(alpha), species)

    @property
    def alpha(self) -> float:
        return (self.omega_z / self.omega_x) ** 2

    @property
    def length(self) -> float:
        return characteristic_length(self.species, self.omega_z)

    @property
    def energy_scale(self) -> float:
        return self.species.coulomb_constant / self.length

    @property
    def stiffness(self) -> np.ndarray:
        """Trap curvatures in units of ``m omega_z^2``."""
        return np.array([self.omega_x, self.omega_y, self.omega_z]) ** 2 / self.omega_z**2

    def with_alpha(self, alpha) -> "TrapPotential":
        return replace(self, omega_z=self.omega_x * np.sqrt(alpha))


@dataclass(frozen=True)
class AnisotropyResult:
    alpha: float
    alpha_crit: float
    is_supercritical: bool


@dataclass
class CrystalState:
    positions: np.ndarray  # (n, 3), metres
    energy: float  # J
    configuration: Configuration
    converged: bool
    residual: float  # gradient norm in units of m omega_z^2 l
    trap: TrapPotential = field(repr=False)
    near_critical: bool = False

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def reduced_positions(self) -> np.ndarray:
        return self.positions / self.trap.length


# -- nondimensional potential --------------------------------------------------

def _pair_geometry(u):
    d = u[:, None, :] - u[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    n = len(u)
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.min(r[off]) < 1e-12:
        raise SingularityError("two ions coincide")
    np.fill_diagonal(r, np.inf)
    return d, r


def _energy(u, k):
    _, r = _pair_geometry(u)
    return 0.5 * np.sum(k * u**2) + 0.5 * np.sum(1.0 / r)


def _gradient(u, k):
    d, r = _pair_geometry(u)
    return k * u - np.sum(d / r[:, :, None] ** 3, axis=1)


def _hessian(u, k):
    n = len(u)
    d, r = _pair_geometry(u)
    inv3 = 1.0 / r**3
    inv5 = 1.0 / r**5
    # Coulomb pair block for i != j: -(3 d d^T / r^5 - I / r^3)
    blocks = -(3 * d[:, :, :, None] * d[:, :, None, :] * inv5[:, :, None, None]
               - np.eye(3) * inv3[:, :, None, None])
    diag = -np.sum(blocks, axis=1)
    idx = np.arange(n)
    blocks[idx, idx] = diag + np.diag(k)
    return blocks.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)


def _as_positions(positions):
    u = np.atleast_2d(np.asarray(positions, dtype=float))
    if u.shape[-1] != 3:
        raise ValueError(f"positions must have shape (n, 3), got {u.shape}")
    return u


def potential_energy(positions, trap: TrapPotential) -> float:
    """Harmonic pseudopotential plus pairwise Coulomb energy in joules."""
    u = _as_positions(positions) / trap.length
    return float(_energy(u, trap.stiffness) * trap.energy_scale)


def potential_gradient(positions, trap: TrapPotential) -> np.ndarray:
    """dV/dr_i in newtons, shape (n, 3)."""
    u = _as_positions(positions) / trap.length
    return _gradient(u, trap.stiffness) * trap.energy_scale / trap.length


def potential_hessian(positions, trap: TrapPotential) -> np.ndarray:
    """Second derivatives in J/m^2, ordered (ion0 x, ion0 y, ion0 z, ion1 x, ...)."""
    u = _as_positions(positions) / trap.length
    h = _hessian(u, trap.stiffness) * trap.energy_scale / trap.length**2
    return 0.5 * (h + h.T)


# -- linear chain --------------------------------------------------------------

def _chain_guess(n):
    # empirical fit to the axial chain positions (units of l)
    i = np.arange(n)
    return 3.94 * n**0.387 * np.sin(np.arcsin(1.75 * n**-0.982 * ((i + 1) - (n + 1) / 2)) / 3)


@functools.lru_cache(maxsize=64)
def _linear_chain_cached(n):
    z = _chain_guess(n)
    if n == 1:
        return np.zeros(1)
    for _ in range(200):
        dz = z[:, None] - z[None, :]
        np.fill_diagonal(dz, np.inf)
        g = z - np.sum(np.sign(dz) / dz**2, axis=1)
        if np.max(np.abs(g)) < 1e-14:
            break
        h = np.diag(np.ones(n)) + np.diag(np.sum(2 / np.abs(dz) ** 3, axis=1)) - np.where(
            np.isfinite(dz), 2 / np.abs(dz) ** 3, 0.0)
        z = z - np.linalg.solve(h, g)
    else:
        raise ConvergenceError("linear chain solve did not converge", best=z)
    return np.sort(z)


def linear_chain(n: int) -> np.ndarray:
    """Axial positions of an ``n``-ion linear chain in units of ``l``."""
    if n < 1:
        raise DomainError("need at least one ion")
    return _linear_chain_cached(int(n)).copy()


def _chain_transverse_coulomb(z):
    """Coulomb part of the transverse Hessian of a chain (units m omega_z^2)."""
    dz = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(dz, np.inf)
    c = 1.0 / dz**3
    return c - np.diag(np.sum(c, axis=1))


# -- minimizer -----------------------------------------------------------------

def _newton(u, k, tol, max_iter):
    """Eigenvalue-modified Newton with Armijo backtracking."""
    n = len(u)
    e = _energy(u, k)
    g = _gradient(u, k)
    for it in range(max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm < tol:
            return u, e, gnorm, True
        w, v = np.linalg.eigh(_hessian(u, k))
        w = np.maximum(np.abs(w), 1e-8 * max(1.0, np.max(np.abs(w))))
        step = -(v @ ((v.T @ g.ravel()) / w)).reshape(n, 3)
        longest = np.max(np.linalg.norm(step, axis=1))
        if longest > 0.5:
            step *= 0.5 / longest
        slope = np.sum(g * step)
        t = 1.0
        while True:
            trial = u + t * step
            try:
                e_trial = _energy(trial, k)
            except SingularityError:
                e_trial = np.inf
            if e_trial <= e + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if t < 1e-12:
            # the quadratic model is exhausted; a bare gradient step is the fallback
            trial = u - 1e-3 * g
            e_trial = _energy(trial, k)
        u, e = trial, e_trial
        g = _gradient(u, k)
    return u, e, np.linalg.norm(g), False


def _canonical(u, tol=1e-9):
    """Sort ions along z and fix the mirror images deterministically."""
    def order(u):
        return u[np.lexsort((u[:, 1], u[:, 0], np.round(u[:, 2] / tol) * tol))]

    u = order(u)
    for axis in (0, 1):
        nonzero = np.flatnonzero(np.abs(u[:, axis]) > 1e-7)
        if nonzero.size and u[nonzero[0], axis] < 0:
            u[:, axis] *= -1
            u = order(u)
    return u


def _minimum_eigen(u, k):
    w, v = np.linalg.eigh(_hessian(u, k))
    return w[0], v[:, 0]


def find_equilibrium(trap: TrapPotential, n: int, seed: int = 0, *, tol: float = 1e-10,
                     max_iter: int = 500, n_starts: int = 4) -> CrystalState:
    """Locate a stable equilibrium of ``n`` ions.

    The first start is a linear chain with a small seeded transverse
    perturbation, which breaks the linear saddle above the zigzag
    transition. Further starts are seeded random clouds. The lowest-energy
    stable minimum wins.

    Raises
    ------
    ConvergenceError
        If no start reaches a stable minimum; ``best`` is the best iterate as
        an unconverged ``CrystalState``.
    """
    if n < 1:
        raise DomainError("need at least one ion")
    k = trap.stiffness
    eps = STABILITY_EPS * k[0]
    rng = np.random.default_rng(seed)

    starts = []
    chain = np.zeros((n, 3))
    chain[:, 2] = linear_chain(n)
    chain[:, :2] += 1e-2 * rng.standard_normal((n, 2))
    starts.append(chain)
    scale = max(1.0, 0.6 * n ** (1 / 3))
    for _ in range(n_starts - 1):
        starts.append(scale * rng.standard_normal((n, 3)) / np.sqrt(k))

    best = None
    for u0 in starts:
        u, e, res, ok = _newton(u0, k, tol, max_iter)
        for _ in range(10):
            lam, vec = _minimum_eigen(u, k)
            if not ok or lam >= -eps:
                break
            # converged onto a saddle; roll off along the unstable direction
            u, e, res, ok = _newton(u + 0.05 * vec.reshape(n, 3), k, tol, max_iter)
        stable = ok and _minimum_eigen(u, k)[0] >= -eps
        cand = (not stable, e, u, res, stable)
        if best is None or cand[:2] < best[:2]:
            best = cand
        if n == 1 and stable:
            break

    _, e, u, res, stable = best
    u = _canonical(u)
    state = CrystalState(
        positions=u * trap.length,
        energy=float(e * trap.energy_scale),
        configuration=Configuration.LINEAR,
        converged=bool(stable),
        residual=float(res),
        trap=trap,
    )
    state.configuration = classify_configuration(state)
    if n >= 3 and trap.omega_x < trap.omega_y:
        state.near_critical = abs(trap.alpha - _alpha_crit_eigen(n)) < NEAR_CRITICAL
    if not stable:
        raise ConvergenceError(f"no stable equilibrium for n={n} within {max_iter} iterations",
                               best=state)
    return state


def classify_configuration(state: CrystalState, tol: float | None = None) -> Configuration:
    """Label a state linear, zigzag or planar.

    ``tol`` (metres) defaults to ``1e-6`` of the Coulomb length.
    Zigzag means all transverse displacement lies in one plane and its sign
    alternates ion by ion along the axis.
    """
    if tol is None:
        tol = 1e-6 * state.trap.length
    pos = state.positions[np.argsort(state.positions[:, 2], kind="stable")]
    transverse = np.abs(pos[:, :2]) >= tol
    if not transverse.any():
        return Configuration.LINEAR
    for axis, other in ((0, 1), (1, 0)):
        if transverse[:, other].any():
            continue
        t = pos[:, axis]
        if np.all(np.abs(t) >= tol) and np.all(np.sign(t[1:]) != np.sign(t[:-1])):
            return Configuration.ZIGZAG
    return Configuration.PLANAR


# -- structural transition -----------------------------------------------------

def chain_transverse_frequencies(n: int, alpha: float) -> np.ndarray:
    """Transverse (x) mode frequencies of the linear chain in units of omega_x.

    Valid on either side of the transition (above it the linear chain is a
    saddle and the lowest value is imaginary, returned as negative).
    """
    z = linear_chain(n)
    lam = np.linalg.eigvalsh(np.eye(n) / alpha + _chain_transverse_coulomb(z)) * alpha
    return np.sign(lam) * np.sqrt(np.abs(lam))


@functools.lru_cache(maxsize=64)
def _alpha_crit_eigen(n):
    if n < 3:
        return np.inf
    z = linear_chain(n)
    return 1.0 / np.max(np.linalg.eigvalsh(-_chain_transverse_coulomb(z)))


def critical_anisotropy(trap_template: TrapPotential, n: int, rtol: float = 1e-6) -> AnisotropyResult:
    """Bisect on alpha for the zero crossing of the chain's lowest x mode.

    ``omega_x`` is held fixed and ``omega_z`` scanned. The linear chain's
    axial positions are universal in Coulomb-length units, so each
    bisection step only needs the transverse mode spectrum.
    """
    if n < 3:
        raise DomainError(f"no zigzag transition for n={n}; need n >= 3")
    if not trap_template.omega_x < trap_template.omega_y:
        raise DomainError("the zigzag forms along x only if omega_x < omega_y")

    def soft(alpha):
        return chain_transverse_frequencies(n, alpha)[0]

    lo, hi = 1e-3, 1.0
    if soft(lo) <= 0 or soft(hi) > 0:
        raise ConvergenceError("critical anisotropy not bracketed in (0, 1)")
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if soft(mid) > 0:
            lo = mid
        else:
            hi = mid
    alpha_crit = 0.5 * (lo + hi)
    alpha = trap_template.alpha
    return AnisotropyResult(alpha=alpha, alpha_crit=alpha_crit, is_supercritical=alpha > alpha_crit)
