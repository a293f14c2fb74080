from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

MASS_TOL = 1e-6


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhononDistribution:
    """Phonon-number distribution of one mode: ``fock``, ``thermal`` or ``coherent``.

    ``mean`` is n for a Fock state and nbar otherwise. The support is
    truncated automatically; ``window_scale`` widens the default window
    (used to check truncation convergence).
    """

    kind: str
    mean: float
    window_scale: float = 1.0
    max_states: int = 2_000_000

    def __post_init__(self):
        if self.kind not in ("fock", "thermal", "coherent"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.mean < 0:
            raise ValueError("mean phonon number must be non-negative")
        if self.kind == "fock" and self.mean != int(self.mean):
            raise ValueError("a Fock state needs an integer phonon number")

    @classmethod
    def fock(cls, n):
        return cls("fock", int(n))

    @classmethod
    def thermal(cls, nbar, **kw):
        return cls("thermal", float(nbar), **kw)

    @classmethod
    def coherent(cls, nbar, **kw):
        return cls("coherent", float(nbar), **kw)

    def window(self):
        nbar, s = self.mean, self.window_scale
        if self.kind == "fock":
            return int(nbar), int(nbar)
        if self.kind == "thermal":
            hi = nbar + s * (30 * np.sqrt(nbar * (nbar + 1)) + 30)
            return 0, int(np.ceil(hi))
        half = s * 12 * np.sqrt(nbar)
        return max(0, int(np.floor(nbar - half))), int(np.ceil(nbar + half)) + 1

    def support(self):
        """Phonon numbers and their renormalized probabilities."""
        lo, hi = self.window()
        if hi - lo + 1 > self.max_states:
            raise TruncationError(f"{self.kind} distribution with mean {self.mean} needs "
                                  f"{hi - lo + 1} states, more than {self.max_states}")
        n = np.arange(lo, hi + 1)
        if self.kind == "fock":
            return n, np.ones(1)
        nbar = self.mean
        if nbar == 0:
            p = (n == 0).astype(float)
        elif self.kind == "thermal":
            p = np.exp(n * np.log(nbar) - (n + 1) * np.log1p(nbar))
        else:
            p = np.exp(n * np.log(nbar) - nbar - gammaln(n + 1))
        mass = p.sum()
        if mass < 1 - MASS_TOL:
            raise TruncationError(f"truncated window keeps only {mass:.8f} of the probability")
        return n, p / mass
