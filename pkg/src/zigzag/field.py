"""Static magnetic field models and the position-dependent spin transition.

Two model variants share one class: a uniform bias plus a constant gradient
tensor, or a bias plus filamentary straight wires whose fields follow from
the Biot-Savart law in closed form. Gradients of wire fields are analytic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CONSTANTS, DomainError, IonSpecies, SingularityError
from .units import TomlSource, format_quantity, format_vector, parse_quantity, parse_vector

WIRE_SCHEMA = "zigzag-wires/1"
MU0 = CONSTANTS.vacuum_permeability


class FieldZeroNotFound(LookupError):
    pass


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class WireSegment:
    """Straight filament from ``anchor`` along ``direction`` for ``length`` metres.

    ``length=inf`` gives an infinite wire through ``anchor``.
    """

    anchor: tuple
    direction: tuple
    current: float
    length: float = math.inf

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1) > 1e-12:
            raise DomainError(f"wire direction must be a unit vector, got {self.direction}")
        if not np.isfinite(self.current):
            raise DomainError("wire current must be finite")
        if not self.length > 0:
            raise DomainError("wire length must be positive")

    def _geometry(self, points):
        a = np.asarray(self.anchor, dtype=float)
        u = np.asarray(self.direction, dtype=float)
        rel = points - a
        t = rel @ u
        rho = rel - t[..., None] * u
        rho2 = np.einsum("...i,...i->...", rho, rho)
        if np.any(rho2 < 1e-24):
            raise SingularityError("point lies on a wire axis")
        return u, t, rho, rho2

    def _shape(self, t, rho2):
        """Angular factor f and its partials with respect to t and rho^2."""
        if math.isinf(self.length):
            zero = np.zeros_like(t)
            return 2.0 + zero, zero, zero
        s1, s2 = self.length - t, t
        q1 = (s1**2 + rho2) ** 1.5
        q2 = (s2**2 + rho2) ** 1.5
        f = s1 / np.sqrt(s1**2 + rho2) + s2 / np.sqrt(s2**2 + rho2)
        df_dt = rho2 * (1 / q2 - 1 / q1)
        df_drho2 = -0.5 * (s1 / q1 + s2 / q2)
        return f, df_dt, df_drho2

    def field(self, points):
        u, t, rho, rho2 = self._geometry(points)
        f, _, _ = self._shape(t, rho2)
        c = MU0 * self.current / (4 * np.pi)
        return (c * f / rho2)[..., None] * np.cross(u, rho)

    def jacobian(self, points):
        """dB_i/dx_j, shape (..., 3, 3)."""
        u, t, rho, rho2 = self._geometry(points)
        f, df_dt, df_drho2 = self._shape(t, rho2)
        c = MU0 * self.current / (4 * np.pi)
        w = np.cross(u, rho)
        h = f / rho2
        dh = ((df_dt / rho2)[..., None] * u
              + (2 * (df_drho2 / rho2 - f / rho2**2))[..., None] * rho)
        ux = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
        return c * (w[..., :, None] * dh[..., None, :] + h[..., None, None] * ux)


@dataclass
class FieldModel:
    """Bias field plus either a constant gradient tensor or current wires."""

    bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gradient: np.ndarray | None = None  # dB_i/dx_j in T/m
    wires: list = field(default_factory=list)
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=float).reshape(3)
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        if self.gradient is not None:
            g = np.asarray(self.gradient, dtype=float).reshape(3, 3)
            tol = 1e-12 * max(1.0, np.max(np.abs(g)))
            if np.max(np.abs(g - g.T)) > tol or abs(np.trace(g)) > tol:
                raise DomainError("a current-free gradient tensor must be symmetric and traceless")
            self.gradient = g
        if self.gradient is not None and self.wires:
            raise DomainError("a field model has either a gradient tensor or wires, not both")

    @classmethod
    def linear_gradient(cls, gradient, direction=(1.0, 0.0, 0.0), bias=(0.0, 3.5e-4, 0.0)):
        """Analytic model whose ``|B|`` grows by ``gradient`` T/m along ``direction`` at the origin.

        The tensor is the symmetric, traceless one built from the bias and
        gradient directions.
        """
        b = np.asarray(bias, dtype=float)
        if np.linalg.norm(b) == 0:
            raise DomainError("a bias field is needed to define the quantization axis")
        bh = b / np.linalg.norm(b)
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        c = bh @ d
        g = gradient * (np.outer(bh, d) + np.outer(d, bh) - c * np.outer(bh, bh)
                        - 0.5 * c * (np.eye(3) - np.outer(bh, bh)))
        return cls(bias=b, gradient=g)

    def wire_field(self, points):
        points = np.asarray(points, dtype=float)
        out = np.zeros(np.broadcast_shapes(points.shape, (3,)))
        for w in self.wires:
            out = out + w.field(points)
        return out

    def wire_jacobian(self, points):
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape + (3,))
        for w in self.wires:
            out = out + w.jacobian(points)
        return out


def field_at(model: FieldModel, point) -> np.ndarray:
    """Total field in tesla at ``point`` (shape (3,) or (N, 3))."""
    p = np.asarray(point, dtype=float)
    if model.gradient is not None:
        return model.bias + (p - model.origin) @ model.gradient.T
    return model.bias + model.wire_field(p)


def gradient_at(model: FieldModel, point) -> np.ndarray:
    """Jacobian ``dB_i/dx_j`` in T/m, shape (3, 3) or (N, 3, 3)."""
    p = np.asarray(point, dtype=float)
    if model.gradient is not None:
        return np.broadcast_to(model.gradient, p.shape + (3,)).copy()
    return model.wire_jacobian(p)


def magnitude_gradient(model: FieldModel, point, direction=None):
    """Gradient of ``|B|`` (bias included) at ``point``.

    Returns the vector, or its projection on ``direction`` when one is given.
    """
    b = field_at(model, point)
    jac = gradient_at(model, point)
    norm = np.linalg.norm(b, axis=-1)
    if np.any(norm == 0):
        raise SingularityError("|B| is not differentiable where the field vanishes")
    grad = np.einsum("...i,...ij->...j", b, jac) / norm[..., None]
    if direction is None:
        return grad
    d = np.asarray(direction, dtype=float)
    return grad @ (d / np.linalg.norm(d))


def transverse_gradient(model: FieldModel, point) -> float:
    """Largest singular value of the field Jacobian, T/m."""
    return float(np.linalg.svd(gradient_at(model, point), compute_uv=False)[0])


def zeeman_frequency(species: IonSpecies, b_magnitude):
    """Spin transition angular frequency ``delta_mS g mu_B |B| / hbar``."""
    b = np.asarray(b_magnitude, dtype=float)
    if np.any(b < 0):
        raise DomainError("field magnitude must be non-negative")
    w = species.delta_mS * species.lande_g * CONSTANTS.bohr_magneton * b / CONSTANTS.hbar
    return float(w) if w.ndim == 0 else w


def quadrupole_center(model: FieldModel, search_box, tol=1e-9, max_iter=100) -> np.ndarray:
    """Point inside ``search_box = (lower, upper)`` where the wire field vanishes.

    Newton iteration on the wire field with least-squares steps, since the
    Jacobian of parallel infinite wires is singular along the wire axis.
    """
    if not model.wires:
        raise DomainError("quadrupole_center needs a wire model")
    lo, hi = (np.asarray(c, dtype=float) for c in search_box)
    starts = [0.5 * (lo + hi)] + [lo + (hi - lo) * np.array(f) for f in
                                  ((0.25, 0.25, 0.5), (0.75, 0.25, 0.5),
                                   (0.25, 0.75, 0.5), (0.75, 0.75, 0.5))]
    for p in starts:
        step_norm = np.inf
        for _ in range(max_iter):
            try:
                b = model.wire_field(p)
                jac = model.wire_jacobian(p)
            except SingularityError:
                break
            step = np.linalg.lstsq(jac, -b, rcond=1e-10)[0]
            p = p + step
            step_norm = np.linalg.norm(step)
            if step_norm < tol * 1e-3:
                break
        if step_norm < tol and np.all(p >= lo) and np.all(p <= hi):
            return p
    raise FieldZeroNotFound("no zero of the wire field inside the search box")


def axial_gradient_bound(species: IonSpecies, spacings, splittings) -> float:
    """Axial gradient (T/m) from the slope of splitting vs ion separation.

    ``splittings`` are differences of the two ions' spin transition angular
    frequencies; ``spacings`` the matching separations in metres.
    """
    d = np.asarray(spacings, dtype=float)
    w = np.asarray(splittings, dtype=float)
    if d.size < 2 or d.size != w.size:
        raise FitError("need at least two spacing/splitting pairs of equal length")
    if np.ptp(d) <= 1e-12 * np.max(np.abs(d)):
        raise FitError("spacings are degenerate; the slope is undetermined")
    a = np.column_stack([d, np.ones_like(d)])
    slope = np.linalg.lstsq(a, w, rcond=None)[0][0]
    per_tesla = zeeman_frequency(species, 1.0)
    return float(slope / per_tesla)


# -- layouts -------------------------------------------------------------------

def three_wire_layout(pitch=300e-6, distance=285e-6, currents=(5.8, -4.8, 8.3),
                      bias=(0.0, 3.5e-4, 0.0)) -> FieldModel:
    """Three infinite wires along z, ``distance`` below the ion (at the origin).

    ``pitch`` is the lateral wire spacing along x. The bias points along y,
    normal to the chip surface.
    """
    wires = [WireSegment((x, -distance, 0.0), (0.0, 0.0, 1.0), float(i))
             for x, i in zip((-pitch, 0.0, pitch), currents)]
    return FieldModel(bias=np.asarray(bias, dtype=float), wires=wires)


def load_wire_layout(path) -> FieldModel:
    """Read a wire layout file (TOML, schema ``zigzag-wires/1``).

    Every physical value carries a unit suffix::

        schema = "zigzag-wires/1"
        bias = "[0, 0.35, 0] mT"

        [[wire]]
        anchor = "[0, -285, 0] um"
        direction = [0, 0, 1]
        current = "5.8 A"
        length = "inf"          # or e.g. "2 mm"; the segment starts at the anchor

    Errors are ``ConfigError`` with the offending line number.
    """
    src = TomlSource.from_file(path)
    return layout_from_source(src)


def layout_from_source(src: TomlSource) -> FieldModel:
    data = src.data
    if data.get("schema") != WIRE_SCHEMA:
        raise src.error(f'expected schema = "{WIRE_SCHEMA}"', "", "schema")
    src.check_keys(data, {"schema", "bias", "wire"})
    try:
        bias = parse_vector(data.get("bias", "[0, 0, 0] T"), "field")
    except ValueError as exc:
        raise src.error(f"bias: {exc}", "", "bias") from None
    wires = data.get("wire", [])
    if not isinstance(wires, list):
        raise src.error("wires are given as [[wire]] tables", "", "wire")
    out = []
    for i, w in enumerate(wires):
        src.check_keys(w, {"anchor", "direction", "current", "length"}, "wire", i)
        for key in ("anchor", "direction", "current"):
            if key not in w:
                raise src.error(f"wire {i}: missing {key!r}", "wire", None, i)
        key = "anchor"
        try:
            anchor = parse_vector(w["anchor"], "length")
            key = "direction"
            d = np.asarray(w["direction"], dtype=float).reshape(3)
            if not np.linalg.norm(d) > 0:
                raise ValueError("direction must be non-zero")
            key = "current"
            current = parse_quantity(w["current"], "current")
            key = "length"
            length = w.get("length", "inf")
            length = math.inf if length == "inf" else parse_quantity(length, "length")
            out.append(WireSegment(tuple(anchor), tuple(d / np.linalg.norm(d)), current, length))
        except (ValueError, TypeError) as exc:
            raise src.error(f"wire {i}: {key}: {exc}", "wire", key, i) from None
    return FieldModel(bias=np.asarray(bias), wires=out)


def dump_wire_layout(model: FieldModel) -> str:
    lines = [f'schema = "{WIRE_SCHEMA}"', f'bias = "{format_vector(model.bias, "T", "field")}"', ""]
    for w in model.wires:
        length = '"inf"' if math.isinf(w.length) else f'"{format_quantity(w.length, "m", "length")}"'
        lines += ["[[wire]]", f'anchor = "{format_vector(w.anchor, "m", "length")}"',
                  "direction = [" + ", ".join(repr(float(x)) for x in w.direction) + "]",
                  f'current = "{format_quantity(w.current, "A", "current")}"', f"length = {length}", ""]
    return "\n".join(lines)
