"""Least-squares fits of Rabi flopping traces.

``FlopFitter`` follows the scikit-learn estimator conventions (constructor
stores hyper-parameters only, ``fit`` sets trailing-underscore attributes,
``predict`` evaluates the fitted model) so it composes with ``clone``,
``GridSearchCV`` and friends.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, column_or_1d

from .distributions import PhononDistribution
from .rabi import DriveParams, flop_signal


class FitError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class FlopFit:
    nbar: float
    rabi_frequency: float
    decay_time: float
    covariance: np.ndarray
    stderr: dict
    names: tuple


def _as_times(t):
    t = np.asarray(t, dtype=float)
    return t.ravel() if t.ndim == 2 and t.shape[1] == 1 else t


class FlopFitter(RegressorMixin, BaseEstimator):
    """Fit phonon number, decay time and optionally Rabi frequency to a flop trace.

    Parameters
    ----------
    family : {"thermal", "coherent", "fock"}
        Phonon distribution the trace is modelled with.
    eta : float
        Lamb-Dicke factor of the driven mode (held fixed).
    rabi_frequency : float
        Carrier Rabi frequency, rad/s. Starting value when ``fit_rabi``.
    transition : {"rsb", "bsb", "carrier"}
    detuning : float
        Drive detuning, rad/s (held fixed).
    fit_rabi : bool
        Also fit the Rabi frequency. For sideband traces with large nbar this
        is nearly degenerate with nbar, so it is off by default.
    fit_decay : bool
        Fit an exponential contrast decay; otherwise the trace is undamped.
    nbar_grid : array-like, optional
        Candidate phonon numbers for the global search that seeds the local
        fit. Defaults to a log-spaced grid centred on the phonon number implied
        by the dominant flopping frequency of the trace.
    """

    def __init__(self, family="thermal", eta=0.01, rabi_frequency=1.0, transition="rsb",
                 detuning=0.0, fit_rabi=False, fit_decay=True, nbar_grid=None):
        self.family = family
        self.eta = eta
        self.rabi_frequency = rabi_frequency
        self.transition = transition
        self.detuning = detuning
        self.fit_rabi = fit_rabi
        self.fit_decay = fit_decay
        self.nbar_grid = nbar_grid

    def _dist(self, nbar):
        if self.family == "fock":
            return PhononDistribution.fock(int(round(nbar)))
        return PhononDistribution(self.family, max(float(nbar), 0.0))

    def _model(self, t, nbar, rabi, decay):
        drive = DriveParams(rabi, self.detuning, decay_time=decay)
        return flop_signal(self._dist(nbar), self.eta, drive, self.transition, t)

    def _unpack(self, theta):
        theta = list(theta)
        nbar = self.nbar_ if self.family == "fock" else theta.pop(0)
        rabi = theta.pop(0) if self.fit_rabi else self.rabi_frequency
        decay = theta.pop(0) if self.fit_decay else math.inf
        return nbar, rabi, decay

    def _default_grid(self, t, y):
        """Candidate nbar values around the trace's dominant flopping frequency."""
        if self.family == "fock":
            return np.arange(0, 60)
        if self.transition == "carrier":
            return np.array([0.0, 0.5, 1, 2, 5, 10, 20, 50])
        order = np.argsort(t)
        even = np.linspace(t.min(), t.max(), len(t))
        yy = np.interp(even, t[order], y[order])
        n_fft = 8 * len(t)
        spec = np.abs(np.fft.rfft((yy - yy.mean()) * np.hanning(len(yy)), n_fft))
        w = 2 * np.pi * np.fft.rfftfreq(n_fft, even[1] - even[0])
        w_peak = w[1 + np.argmax(spec[1:])]
        scale = self.rabi_frequency * self.eta
        n_peak = (w_peak / scale) ** 2 if scale > 0 else 1.0
        centre = np.geomspace(max(n_peak / 8, 0.05), max(n_peak * 8, 1.0), 48)
        return np.unique(np.concatenate([[0.0, 0.5, 1.0, 3.0], centre]))

    def fit(self, X, y):
        t = _as_times(X)
        t, y = check_X_y(t.reshape(-1, 1), y, y_numeric=True)
        t = t.ravel()
        if len(t) < 10:
            raise ValueError("need at least 10 samples to fit a flop trace")
        if self.family not in ("thermal", "coherent", "fock"):
            raise ValueError(f"unsupported family {self.family!r}")

        span = np.ptp(t) or 1.0
        grid = self.nbar_grid
        if grid is None:
            grid = self._default_grid(t, y)

        def sse(nbar, decay):
            try:
                return np.sum((self._model(t, nbar, self.rabi_frequency, decay) - y) ** 2)
            except Exception:
                return np.inf

        decays = [2 * span, 0.5 * span, 10 * span] if self.fit_decay else [math.inf]
        best = min(((sse(nb, d), nb, d) for nb in grid for d in decays), key=lambda r: r[0])
        _, nbar0, decay0 = best
        if self.family == "fock":
            self.nbar_ = int(round(nbar0))

        p0, lo, hi, names = [], [], [], []
        if self.family != "fock":
            p0.append(nbar0), lo.append(0.0), hi.append(np.inf), names.append("nbar")
        if self.fit_rabi:
            p0.append(self.rabi_frequency), lo.append(0.0), hi.append(np.inf)
            names.append("rabi_frequency")
        if self.fit_decay:
            p0.append(decay0), lo.append(1e-3 * span), hi.append(np.inf)
            names.append("decay_time")

        if p0:
            def f(tt, *theta):
                return self._model(tt, *self._unpack(theta))

            try:
                popt, pcov = curve_fit(f, t, y, p0=p0, bounds=(lo, hi), x_scale="jac",
                                       max_nfev=2000)
            except (RuntimeError, ValueError) as exc:
                raise FitError(f"flop fit did not converge: {exc}", best=dict(zip(names, p0)))
        else:
            popt, pcov = np.array([]), np.zeros((0, 0))

        nbar, rabi, decay = self._unpack(popt)
        self.nbar_ = float(nbar)
        self.rabi_frequency_ = float(rabi)
        self.decay_time_ = float(decay)
        self.covariance_ = pcov
        self.param_names_ = tuple(names)
        self.stderr_ = dict(zip(names, np.sqrt(np.clip(np.diag(pcov), 0, None))))
        return self

    def predict(self, X):
        check_is_fitted(self, "nbar_")
        t = column_or_1d(_as_times(X))
        return self._model(t, self.nbar_, self.rabi_frequency_, self.decay_time_)

    def result(self) -> FlopFit:
        check_is_fitted(self, "nbar_")
        return FlopFit(self.nbar_, self.rabi_frequency_, self.decay_time_,
                       self.covariance_, self.stderr_, self.param_names_)


def fit_flop(t, p_up, family, eta, rabi_frequency, **kwargs) -> FlopFit:
    """Convenience wrapper: fit and return a ``FlopFit`` record."""
    return FlopFitter(family=family, eta=eta, rabi_frequency=rabi_frequency,
                      **kwargs).fit(t, p_up).result()
