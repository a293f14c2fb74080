"""Normal modes of a crystal from the mass-weighted Hessian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConvergenceError, DomainError
from .crystal import (
    STABILITY_EPS,
    Configuration,
    CrystalState,
    TrapPotential,
    find_equilibrium,
    potential_hessian,
)

AXES = ("x", "y", "z")
DEGENERACY_RTOL = 1e-9


class InstabilityError(ArithmeticError):
    """The Hessian has a negative eigenvalue: the state is not a minimum."""


@dataclass
class ModeSpectrum:
    """Mode frequencies (rad/s, ascending) and eigenvectors.

    ``eigenvectors[k]`` is mode ``k`` flattened as (ion0 x, ion0 y, ion0 z,
    ion1 x, ...); ``vectors(k)`` gives the same as an (n, 3) array.
    """

    frequencies: np.ndarray
    eigenvectors: np.ndarray
    state: CrystalState

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def n_ions(self) -> int:
        return self.n_modes // 3

    def vectors(self, k) -> np.ndarray:
        return self.eigenvectors[k].reshape(self.n_ions, 3)

    def axis_weights(self) -> np.ndarray:
        """Fraction of each mode's norm along x, y, z, shape (n_modes, 3)."""
        v = self.eigenvectors.reshape(self.n_modes, self.n_ions, 3)
        return np.sum(v**2, axis=1)


@dataclass(frozen=True)
class ModeLabel:
    axis: str  # "x", "y", "z" or "mixed"
    rank: str  # "com", "1", "2", ...
    visible: tuple  # per ROI ion
    frequency: float

    @property
    def name(self) -> str:
        return f"{self.axis}-com" if self.rank == "com" else f"{self.axis}{self.rank}"


def hessian(state: CrystalState, trap: TrapPotential | None = None) -> np.ndarray:
    """Potential Hessian at the state's positions, J/m^2."""
    return potential_hessian(state.positions, trap or state.trap)


def _align_degenerate(vecs, n_ions):
    # rotate a degenerate block so each vector lies along one axis where possible
    w = np.tile([1.0, 2.0, 3.0], n_ions)
    _, rot = np.linalg.eigh(vecs.T @ (w[:, None] * vecs))
    return vecs @ rot


def _fix_sign(v):
    mag = np.abs(v)
    first = np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0]
    return -v if v[first] < 0 else v


def normal_modes(state: CrystalState, trap: TrapPotential | None = None) -> ModeSpectrum:
    """Diagonalize the mass-weighted Hessian.

    Raises ``InstabilityError`` when an eigenvalue lies below
    ``-1e-6 * omega_x**2``; slightly negative values above that (at the
    critical point) are reported as zero frequency.
    """
    trap = trap or state.trap
    mass = trap.species.mass
    h = hessian(state, trap) / mass
    lam, vec = np.linalg.eigh(h)
    eps = STABILITY_EPS * trap.omega_x**2
    if lam[0] < -eps:
        v = vec[:, 0].reshape(-1, 3)
        ion, axis = np.unravel_index(np.argmax(np.abs(v)), v.shape)
        raise InstabilityError(
            f"unstable direction: ion {ion} along {AXES[axis]} "
            f"(omega^2 = {lam[0]:.4g} rad^2/s^2)")

    n_ions = state.n
    vec = vec.T.copy()
    # degenerate clusters
    start = 0
    scale = np.max(np.abs(lam))
    while start < len(lam):
        stop = start + 1
        while stop < len(lam) and abs(lam[stop] - lam[start]) <= DEGENERACY_RTOL * scale:
            stop += 1
        if stop - start > 1:
            block = _align_degenerate(vec[start:stop].T, n_ions).T
            dom = np.argmax(np.sum(block.reshape(len(block), n_ions, 3) ** 2, axis=1), axis=1)
            vec[start:stop] = block[np.argsort(dom, kind="stable")]
        start = stop
    vec = np.array([_fix_sign(v) for v in vec])
    freqs = np.sqrt(np.clip(lam, 0, None))
    return ModeSpectrum(frequencies=freqs, eigenvectors=vec, state=state)


def _is_com(v, n_ions, axis):
    u = np.zeros((n_ions, 3))
    u[:, axis] = 1 / np.sqrt(n_ions)
    return abs(np.dot(v, u.ravel())) ** 2 > 1 - 1e-6


def classify_modes(spectrum: ModeSpectrum, roi_ions, gradient_dir=(1.0, 0.0, 0.0)) -> list:
    """Label each mode by dominant axis and rank, with per-ROI-ion visibility.

    Ranks run from the highest (1) to the lowest frequency within each axis;
    the centre-of-mass mode of an axis is labelled ``com`` instead. An ion
    "sees" a mode when its displacement projected on ``gradient_dir``
    exceeds 1e-6.
    """
    roi = list(roi_ions)
    if not roi:
        raise DomainError("region of interest is empty")
    g = np.asarray(gradient_dir, dtype=float)
    g = g / np.linalg.norm(g)
    n_ions = spectrum.n_ions
    weights = spectrum.axis_weights()
    axes = []
    for k in range(spectrum.n_modes):
        a = int(np.argmax(weights[k]))
        axes.append(AXES[a] if weights[k, a] > 0.5 else "mixed")

    ranks = [""] * spectrum.n_modes
    for label in set(axes):
        members = [k for k in range(spectrum.n_modes) if axes[k] == label]
        if label != "mixed":
            a = AXES.index(label)
            com = [k for k in members if _is_com(spectrum.eigenvectors[k], n_ions, a)]
            for k in com:
                ranks[k] = "com"
            members = [k for k in members if k not in com]
        for r, k in enumerate(sorted(members, key=lambda k: -spectrum.frequencies[k]), start=1):
            ranks[k] = str(r)

    labels = []
    for k in range(spectrum.n_modes):
        proj = spectrum.vectors(k)[roi] @ g
        labels.append(ModeLabel(axes[k], ranks[k], tuple(bool(p) for p in np.abs(proj) > 1e-6),
                                float(spectrum.frequencies[k])))
    return labels


@dataclass(frozen=True)
class SoftModePoint:
    alpha: float
    omega_soft: float  # rad/s, nan when flagged
    configuration: Configuration | None
    flag: str = ""


def soft_mode(spectrum: ModeSpectrum) -> float:
    """Lowest frequency among x-dominated modes."""
    weights = spectrum.axis_weights()
    x_type = np.flatnonzero(weights[:, 0] > 0.5)
    return float(spectrum.frequencies[x_type].min())


def soft_mode_curve(trap_template: TrapPotential, n: int, alpha_grid, seed: int = 0) -> list:
    """Soft x-mode frequency along a grid of anisotropies at fixed ``omega_x``.

    Points where no stable crystal is found come back flagged with a NaN
    frequency rather than raising.
    """
    out = []
    for alpha in np.asarray(alpha_grid, dtype=float):
        if not 0 < alpha < 1:
            out.append(SoftModePoint(float(alpha), float("nan"), None, "alpha outside (0, 1)"))
            continue
        trap = trap_template.with_alpha(alpha)
        try:
            state = find_equilibrium(trap, n, seed=seed)
            spec = normal_modes(state)
            out.append(SoftModePoint(float(alpha), soft_mode(spec), state.configuration))
        except (ConvergenceError, InstabilityError) as exc:
            out.append(SoftModePoint(float(alpha), float("nan"), None, str(exc)))
    return out
