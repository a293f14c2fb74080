"""Idealized experimental sequence: state preparation, square pulses, projective readout.

Each ROI ion is treated with one motional mode (the driven one). The
ensemble starts as a mixture of ``|down, n>`` (weight ``F p_n``) and
``|up, n>`` (weight ``(1 - F) p_n``); every mixture member is propagated
exactly through the pulse list on a truncated Fock ladder, and the
resulting spin-up probability is sampled ``r`` times.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .distributions import PhononDistribution
from .rabi import sideband_rabi

PULSE_KINDS = ("carrier", "red", "blue", "wait", "phase")


@dataclass(frozen=True)
class Pulse:
    """One sequence step.

    ``duration`` in s, ``phase`` and ``detuning`` in rad and rad/s. A
    ``phase`` step is instantaneous and rotates the spin frame by ``phase``.
    """

    kind: str
    duration: float = 0.0
    phase: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ValueError(f"pulse kind must be one of {PULSE_KINDS}, got {self.kind!r}")
        if self.duration < 0:
            raise ValueError("pulse duration must be non-negative")


@dataclass(frozen=True)
class SequenceSpec:
    init_fidelity: float
    pulses: tuple
    roi: tuple
    repetitions: int = 100

    def __post_init__(self):
        if not 0.0 <= self.init_fidelity <= 1.0:
            raise ValueError("init_fidelity must lie in [0, 1]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.roi:
            raise ValueError("readout needs at least one ion")
        object.__setattr__(self, "pulses", tuple(self.pulses))
        object.__setattr__(self, "roi", tuple(int(i) for i in self.roi))


@dataclass(frozen=True)
class SequencePhysics:
    """Carrier Rabi frequency and Lamb-Dicke factor per ion, plus the mode's phonon state."""

    rabi_frequency: float | np.ndarray
    eta: float | np.ndarray
    distribution: PhononDistribution

    def for_ion(self, ion):
        def pick(value):
            arr = np.asarray(value, dtype=float)
            return float(arr if arr.ndim == 0 else arr[ion])
        return pick(self.rabi_frequency), pick(self.eta)


@dataclass
class SequenceResult:
    roi: tuple
    p_exact: np.ndarray
    counts: np.ndarray
    repetitions: int
    estimate: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray


def _rotate(a, b, omega, delta, t, phase):
    """Two-level propagator on amplitude pairs ``(a, b)`` = (down, up)."""
    w = np.sqrt(omega**2 + delta**2)
    c = np.cos(w * t / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        s_over_w = np.where(w > 0, np.sin(w * t / 2) / w, t / 2)
    off = -1j * omega * s_over_w
    a_new = (c + 1j * delta * s_over_w) * a + off * np.exp(1j * phase) * b
    b_new = off * np.exp(-1j * phase) * a + (c - 1j * delta * s_over_w) * b
    return a_new, b_new


def _propagate(spec: SequenceSpec, rabi, eta, dist: PhononDistribution):
    n0, p0 = dist.support()
    pad = sum(p.kind in ("red", "blue") for p in spec.pulses)
    lo, hi = max(int(n0[0]) - pad, 0), int(n0[-1]) + pad
    n = np.arange(lo, hi + 1)
    dim = len(n)
    f = spec.init_fidelity
    members = [(i, 0, f * w) for i, w in zip(n0 - lo, p0) if f > 0]
    members += [(i, 1, (1 - f) * w) for i, w in zip(n0 - lo, p0) if f < 1]
    weights = np.array([m[2] for m in members])
    down = np.zeros((dim, len(members)), dtype=complex)
    up = np.zeros_like(down)
    for k, (i, spin, _) in enumerate(members):
        (up if spin else down)[i, k] = 1.0

    for pulse in spec.pulses:
        t, d, phi = pulse.duration, pulse.detuning, pulse.phase
        if pulse.kind == "phase":
            down *= np.exp(0.5j * phi)
            up *= np.exp(-0.5j * phi)
            continue
        if pulse.kind == "wait":
            down *= np.exp(0.5j * d * t)
            up *= np.exp(-0.5j * d * t)
            continue
        if pulse.kind == "carrier":
            om = sideband_rabi(n, eta, rabi, "carrier")[:, None]
            down, up = _rotate(down, up, om, d, t, phi)
            continue
        # sidebands pair down[i] with up[i -/+ 1]; unpaired states only pick up phase
        if pulse.kind == "red":
            di, ui = slice(1, dim), slice(0, dim - 1)
            om = sideband_rabi(n[1:], eta, rabi, "rsb")[:, None]
            lone_down, lone_up = 0, dim - 1
        else:
            di, ui = slice(0, dim - 1), slice(1, dim)
            om = sideband_rabi(n[:-1], eta, rabi, "bsb")[:, None]
            lone_down, lone_up = dim - 1, 0
        a, b = _rotate(down[di], up[ui], om, d, t, phi)
        down[lone_down] *= np.exp(0.5j * d * t)
        up[lone_up] *= np.exp(-0.5j * d * t)
        down[di], up[ui] = a, b
    return float(np.clip(weights @ np.sum(np.abs(up) ** 2, axis=0), 0.0, 1.0))


def wilson_interval(successes, trials, confidence=0.95):
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return ci.low, ci.high


def simulate_sequence(spec: SequenceSpec, physics: SequencePhysics, seed: int = 0,
                      workers: int = 1) -> SequenceResult:
    """Spin-up probability per ROI ion with binomially sampled readout.

    Readout counts for ion ``i`` come from a Philox stream keyed by
    ``(seed, i)``, so they do not depend on evaluation order or ``workers``.
    """
    def run(ion):
        rabi, eta = physics.for_ion(ion)
        p = _propagate(spec, rabi, eta, physics.distribution)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(ion,))))
        return p, int(rng.binomial(spec.repetitions, p))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(run, spec.roi))
    else:
        rows = [run(ion) for ion in spec.roi]
    p_exact = np.array([r[0] for r in rows])
    counts = np.array([r[1] for r in rows])
    cis = np.array([wilson_interval(c, spec.repetitions) for c in counts])
    return SequenceResult(spec.roi, p_exact, counts, spec.repetitions,
                          counts / spec.repetitions, cis[:, 0], cis[:, 1])
