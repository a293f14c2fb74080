"""Carrier and first-order sideband Rabi frequencies and flopping signals."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from ..core import DomainError
from .distributions import PhononDistribution

MAX_PHONONS = 1_000_000
TRANSITIONS = ("carrier", "rsb", "bsb")


@dataclass(frozen=True)
class DriveParams:
    """Rabi frequency and detuning in rad/s, pulse and decay times in s."""

    rabi_frequency: float
    detuning: float = 0.0
    pulse_time: float = 0.0
    decay_time: float = math.inf

    def __post_init__(self):
        if np.any(np.asarray(self.rabi_frequency) < 0):
            raise ValueError("Rabi frequency must be non-negative")
        if self.pulse_time < 0:
            raise ValueError("pulse time must be non-negative")
        if not self.decay_time > 0:
            raise ValueError("decay time must be positive")


def laguerre_table(kmax: int, alpha: int, x):
    """Generalized Laguerre ``L_k^alpha(x)`` for k = 0..kmax by forward recurrence.

    Returns shape ``(kmax + 1,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = 1.0 + alpha - x
    for k in range(1, kmax):
        out[k + 1] = ((2 * k + 1 + alpha - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


@functools.lru_cache(maxsize=64)
def _laguerre_scalar(kmax, alpha, x):
    table = laguerre_table(kmax, alpha, x)
    table.flags.writeable = False
    return table


def _laguerre(kmax, alpha, x):
    # round the cache key up so one table serves nearby kmax values
    size = 1 << max(int(kmax), 1).bit_length()
    return _laguerre_scalar(size, alpha, float(x))


def sideband_rabi(n, eta, omega_rabi, transition="rsb"):
    """Rabi frequency of the carrier or first red/blue sideband from Fock state ``n``.

    Red sideband (n -> n-1): ``Omega exp(-eta^2/2) eta L_{n-1}^1(eta^2) / sqrt(n)``,
    zero for n = 0. Blue sideband (n -> n+1) uses ``L_n^1 / sqrt(n+1)`` and the
    carrier ``exp(-eta^2/2) L_n(eta^2)``. Signs follow the Laguerre polynomials.
    """
    if transition not in TRANSITIONS:
        raise ValueError(f"transition must be one of {TRANSITIONS}")
    n = np.asarray(n)
    if np.any(n < 0):
        raise DomainError("phonon number must be non-negative")
    nmax = int(np.max(n)) if n.size else 0
    if nmax > MAX_PHONONS:
        raise DomainError(f"phonon number {nmax} beyond the recurrence guard {MAX_PHONONS}")
    eta = float(eta)
    x = eta**2
    dw = omega_rabi * math.exp(-x / 2)
    if transition == "carrier":
        return dw * _laguerre(nmax, 0, x)[n]
    table = _laguerre(nmax, 1, x)
    if transition == "bsb":
        return dw * eta * table[n] / np.sqrt(n + 1.0)
    safe = np.maximum(n, 1)
    out = dw * eta * table[safe - 1] / np.sqrt(safe)
    return np.where(n == 0, 0.0, out)


def rabi_probability(omega, detuning, t):
    """Generalized two-level Rabi formula, broadcasting over all arguments."""
    omega2 = np.asarray(omega, dtype=float) ** 2
    gen2 = omega2 + np.asarray(detuning, dtype=float) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(gen2 > 0, omega2 / gen2, 0.0)
    return amp * np.sin(np.sqrt(gen2) * np.asarray(t) / 2) ** 2


def flop_signal(dist: PhononDistribution, eta, drive: DriveParams, transition, t_grid):
    """Spin-up probability vs time, averaged over the phonon distribution.

    A finite ``drive.decay_time`` damps the contrast towards 1/2 as
    ``exp(-t / decay_time)``.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    n, p = dist.support()
    omega_n = sideband_rabi(n, eta, drive.rabi_frequency, transition)
    raw = p @ rabi_probability(omega_n[:, None], drive.detuning, t[None, :])
    if math.isinf(drive.decay_time):
        return raw
    return 0.5 + (raw - 0.5) * np.exp(-t / drive.decay_time)
