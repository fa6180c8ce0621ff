"""
Electromagnetic potentials, gauge functions and gauge transformations.

Fields are built from closed-form descriptors so that every derivative the
gauge identities need is analytic.  A field is a sum of separable terms
``space(x) * time(t)``; derived fields (gradients, time derivatives, sums)
keep the analytic structure.  Only sampled tables fall back to centered
differences.

In one dimension there is no transverse field, so the dipole-approximation
convention is used throughout: the uniform, time-dependent part of the vector
potential plays the role of the transverse potential, and ``e0(t)`` is the
spatially constant longitudinal field.
"""

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import hermite as _hermite
from numpy.polynomial import polynomial as _poly
from scipy.integrate import cumulative_trapezoid

from .core import Grid

FD_STEP = 1e-4


# ---------------------------------------------------------------------------
# one-variable building blocks


class Function1D:
    """Scalar function of one variable with derivatives of any order."""

    kind = None

    def __call__(self, s, order=0):
        raise NotImplementedError

    @property
    def is_constant(self):
        return False

    def to_dict(self):
        raise NotImplementedError

    def __mul__(self, other):
        return Product(self, other)


class Constant(Function1D):
    kind = "constant"

    def __init__(self, value=1.0):
        self.value = float(value)

    def __call__(self, s, order=0):
        s = np.asarray(s, dtype=float)
        return np.full(s.shape, self.value if order == 0 else 0.0)

    @property
    def is_constant(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


class Polynomial(Function1D):
    """sum_k coeffs[k] * s**k"""

    kind = "polynomial"

    def __init__(self, coeffs):
        self.coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))

    def __call__(self, s, order=0):
        c = _poly.polyder(self.coeffs, order) if order else self.coeffs
        return _poly.polyval(np.asarray(s, dtype=float), c)

    @property
    def is_constant(self):
        return bool(np.all(self.coeffs[1:] == 0))

    def to_dict(self):
        return {"kind": self.kind, "coeffs": self.coeffs.tolist()}


class Sinusoid(Function1D):
    """amplitude * sin(omega * s + phase)"""

    kind = "sinusoid"

    def __init__(self, amplitude=1.0, omega=1.0, phase=0.0):
        self.amplitude = float(amplitude)
        self.omega = float(omega)
        self.phase = float(phase)

    def __call__(self, s, order=0):
        s = np.asarray(s, dtype=float)
        return self.amplitude * self.omega**order * np.sin(
            self.omega * s + self.phase + order * np.pi / 2
        )

    @property
    def is_constant(self):
        return self.omega == 0 or self.amplitude == 0

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "omega": self.omega,
                "phase": self.phase}


class Gaussian(Function1D):
    """amplitude * exp(-((s - center) / width)**2)"""

    kind = "gaussian"

    def __init__(self, amplitude=1.0, center=0.0, width=1.0):
        if not width > 0:
            raise ValueError("gaussian width must be positive")
        self.amplitude = float(amplitude)
        self.center = float(center)
        self.width = float(width)

    def __call__(self, s, order=0):
        u = (np.asarray(s, dtype=float) - self.center) / self.width
        h = _hermite.hermval(u, [0] * order + [1])
        return self.amplitude * (-1) ** order * h * np.exp(-u * u) / self.width**order

    def to_dict(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "center": self.center,
                "width": self.width}


class Sin2Envelope(Function1D):
    """sin^2(pi (s - start) / duration) on [start, start + duration], zero elsewhere."""

    kind = "sin2-envelope"

    def __init__(self, duration, start=0.0):
        if not duration > 0:
            raise ValueError("envelope duration must be positive")
        self.duration = float(duration)
        self.start = float(start)

    def __call__(self, s, order=0):
        s = np.asarray(s, dtype=float)
        u = s - self.start
        w = 2 * np.pi / self.duration
        if order == 0:
            val = 0.5 * (1 - np.cos(w * u))
        else:
            val = -0.5 * w**order * np.cos(w * u + order * np.pi / 2)
        return np.where((u >= 0) & (u <= self.duration), val, 0.0)

    def to_dict(self):
        return {"kind": self.kind, "duration": self.duration, "start": self.start}


class Product(Function1D):
    kind = "product"

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def __call__(self, s, order=0):
        return sum(comb(order, k) * self.left(s, k) * self.right(s, order - k)
                   for k in range(order + 1))

    @property
    def is_constant(self):
        return self.left.is_constant and self.right.is_constant

    def to_dict(self):
        return {"kind": self.kind, "factors": [self.left.to_dict(), self.right.to_dict()]}


class Table(Function1D):
    """Linear interpolation of sampled values; derivatives by centered differences."""

    kind = "table"

    def __init__(self, points, values, step=FD_STEP):
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.points.shape != self.values.shape or self.points.ndim != 1:
            raise ValueError("table points and values must be 1D arrays of equal length")
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("table points must be strictly increasing")
        self.step = step

    def __call__(self, s, order=0):
        s = np.asarray(s, dtype=float)
        if order == 0:
            return np.interp(s, self.points, self.values)
        h = self.step
        return (self(s + h, order - 1) - self(s - h, order - 1)) / (2 * h)

    def to_dict(self):
        return {"kind": self.kind, "points": self.points.tolist(), "values": self.values.tolist()}


def sin2_pulse(amplitude, omega, n_cycles, phase=0.0, start=0.0):
    """amplitude * sin^2(pi s / T) * sin(omega s + phase) over T = 2 pi n_cycles / omega."""
    duration = 2 * np.pi * n_cycles / omega
    carrier = Sinusoid(amplitude, omega, phase - omega * start)
    return Product(Sin2Envelope(duration, start), carrier)


def gaussian_pulse(amplitude, omega, center, width, phase=0.0):
    carrier = Sinusoid(amplitude, omega, phase - omega * center)
    return Product(Gaussian(1.0, center, width), carrier)


def function_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    if kind == "constant":
        return Constant(**d)
    if kind == "polynomial":
        return Polynomial(**d)
    if kind == "sinusoid":
        return Sinusoid(**d)
    if kind == "gaussian":
        return Gaussian(**d)
    if kind == "sin2-envelope":
        return Sin2Envelope(**d)
    if kind == "sin2-pulse":
        return sin2_pulse(**d)
    if kind == "gaussian-pulse":
        return gaussian_pulse(**d)
    if kind == "product":
        left, right = (function_from_dict(f) for f in d["factors"])
        return Product(left, right)
    if kind == "table":
        return Table(**d)
    raise ValueError(f"unknown function kind {kind!r}")


FUNCTION_KINDS = {
    "constant": {"value"},
    "polynomial": {"coeffs"},
    "sinusoid": {"amplitude", "omega", "phase"},
    "gaussian": {"amplitude", "center", "width"},
    "sin2-envelope": {"duration", "start"},
    "sin2-pulse": {"amplitude", "omega", "n_cycles", "phase", "start"},
    "gaussian-pulse": {"amplitude", "omega", "center", "width", "phase"},
    "product": {"factors"},
    "table": {"points", "values"},
}


# ---------------------------------------------------------------------------
# space-time fields


class Field:
    """Scalar function of (x, t).

    ``deriv(x, t, nx, nt)`` is the mixed partial derivative
    d^nx/dx^nx d^nt/dt^nt; subclasses without closed forms inherit the
    centered-difference fallback.
    """

    def deriv(self, x, t, nx=0, nt=0):
        if nt > 0:
            h = FD_STEP
            return (self.deriv(x, t + h, nx, nt - 1) - self.deriv(x, t - h, nx, nt - 1)) / (2 * h)
        if nx > 0:
            h = FD_STEP
            x = np.asarray(x, dtype=float)
            return (self.deriv(x + h, t, nx - 1, 0) - self.deriv(x - h, t, nx - 1, 0)) / (2 * h)
        raise NotImplementedError

    def __call__(self, x, t):
        return self.deriv(x, t, 0, 0)

    def grad(self, x, t):
        return self.deriv(x, t, 1, 0)

    def dot(self, x, t):
        return self.deriv(x, t, 0, 1)

    def grad_dot(self, x, t):
        return self.deriv(x, t, 1, 1)

    @property
    def is_uniform(self):
        return False

    @property
    def is_static(self):
        return False

    @property
    def is_zero(self):
        return False

    def __add__(self, other):
        return FieldSum([self, other], [1.0, 1.0])

    def __sub__(self, other):
        return FieldSum([self, other], [1.0, -1.0])

    def __neg__(self):
        return FieldSum([self], [-1.0])

    def __rmul__(self, c):
        return FieldSum([self], [float(c)])


class SeparableField(Field):
    """sum_i space_i(x) * time_i(t)."""

    def __init__(self, terms=()):
        self.terms = [(s, t) for s, t in terms]

    def deriv(self, x, t, nx=0, nt=0):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(x, np.asarray(t, dtype=float)).shape)
        for space, time in self.terms:
            out = out + space(x, nx) * time(t, nt)
        return out

    @property
    def is_uniform(self):
        return all(s.is_constant for s, _ in self.terms)

    @property
    def is_static(self):
        return all(t.is_constant for _, t in self.terms)

    @property
    def is_zero(self):
        return not self.terms

    def split_uniform(self):
        """(uniform time-dependent part, remainder)."""
        uni, rest = [], []
        for s, t in self.terms:
            (uni if s.is_constant and not t.is_constant else rest).append((s, t))
        return SeparableField(uni), SeparableField(rest)

    def to_dict(self):
        return [{"space": s.to_dict(), "time": t.to_dict()} for s, t in self.terms]


ZERO = SeparableField()


def uniform(time_function):
    """Spatially constant field f(t)."""
    return SeparableField([(Constant(1.0), time_function)])


def static(space_function):
    """Time-independent field f(x)."""
    return SeparableField([(space_function, Constant(1.0))])


def separable(space_function, time_function):
    return SeparableField([(space_function, time_function)])


def linear_potential(strength):
    """phi(x) = -strength * x, the scalar potential of a static uniform field."""
    return static(Polynomial([0.0, -float(strength)]))


class FieldSum(Field):
    def __init__(self, fields, coeffs):
        self.fields = list(fields)
        self.coeffs = [float(c) for c in coeffs]

    def deriv(self, x, t, nx=0, nt=0):
        return sum(c * f.deriv(x, t, nx, nt) for f, c in zip(self.fields, self.coeffs))

    @property
    def is_uniform(self):
        return all(f.is_uniform for f in self.fields)

    @property
    def is_static(self):
        return all(f.is_static for f in self.fields)

    @property
    def is_zero(self):
        return all(f.is_zero or c == 0 for f, c in zip(self.fields, self.coeffs))


class Derivative(Field):
    """Partial derivative of another field, kept analytic."""

    def __init__(self, base, nx=0, nt=0):
        self.base = base
        self.nx = nx
        self.nt = nt

    def deriv(self, x, t, nx=0, nt=0):
        return self.base.deriv(x, t, nx + self.nx, nt + self.nt)

    @property
    def is_uniform(self):
        return self.base.is_uniform

    @property
    def is_static(self):
        return self.base.is_static

    @property
    def is_zero(self):
        return self.base.is_zero or (self.nt > 0 and self.base.is_static) or (
            self.nx > 0 and self.base.is_uniform)


def field_from_dict(terms):
    """Build a SeparableField from a list of {space: ..., time: ...} term descriptors."""
    if isinstance(terms, dict):
        terms = [terms]
    out = []
    for term in terms:
        space = function_from_dict(term.get("space", {"kind": "constant", "value": 1.0}))
        time = function_from_dict(term.get("time", {"kind": "constant", "value": 1.0}))
        out.append((space, time))
    return SeparableField(out)


# ---------------------------------------------------------------------------
# field configuration, gauge functions


@dataclass(frozen=True)
class FieldConfig:
    """Scalar potential phi(x, t), vector potential A(x, t), homogeneous field e0(t)."""

    phi: Field = ZERO
    a_pot: Field = ZERO
    e0: Field = ZERO

    def __post_init__(self):
        if not self.e0.is_uniform:
            raise ValueError("e0 must be spatially constant")

    def e0_at(self, t):
        return float(self.e0(0.0, t))


@dataclass(frozen=True)
class GaugeFunction:
    """chi(x, t) with its spatial gradient and time derivative."""

    field: Field
    label: str = ""

    def chi(self, x, t):
        return self.field(x, t)

    def grad_chi(self, x, t):
        return self.field.grad(x, t)

    def dt_chi(self, x, t):
        return self.field.dot(x, t)

    def __neg__(self):
        return GaugeFunction(-self.field, f"-({self.label})")

    def __add__(self, other):
        return GaugeFunction(self.field + other.field, f"{self.label}+{other.label}")


def gauge(field_or_terms, label=""):
    if isinstance(field_or_terms, Field):
        return GaugeFunction(field_or_terms, label)
    return GaugeFunction(field_from_dict(field_or_terms), label)


def apply_gauge_to_fields(fields, chi):
    """A' = A + d(chi)/dx, phi' = phi - d(chi)/dt; e0 is untouched."""
    return FieldConfig(
        phi=fields.phi - Derivative(chi.field, nt=1),
        a_pot=fields.a_pot + Derivative(chi.field, nx=1),
        e0=fields.e0,
    )


def gauge_phase(chi, particles, grid, t):
    """Theta = sum_l e_l chi(x_l, t) over the configuration grid (flattened)."""
    if len(particles) != grid.n_particles:
        raise ValueError(f"{len(particles)} particles given for a {grid.n_particles}-particle grid")
    c = chi.chi(grid.x, t)
    if grid.n_particles == 1:
        return particles[0].charge * c
    e1, e2 = particles[0].charge, particles[1].charge
    return (e1 * c[:, None] + e2 * c[None, :]).ravel()


def apply_gauge_to_state(psi, chi, particles):
    theta = gauge_phase(chi, particles, psi.grid, psi.time)
    return type(psi)(psi.grid, np.exp(1j * theta) * psi.amplitudes, psi.time)


class _CoulombGaugeChi(Field):
    """chi(x, t) = -int_{x_min}^{x} R(x', t) dx' by the trapezoidal rule on the grid nodes."""

    def __init__(self, removed, grid):
        self.removed = removed
        self.grid = grid

    def deriv(self, x, t, nx=0, nt=0):
        if nx > 0:
            return -self.removed.deriv(x, t, nx - 1, nt)
        g = self.grid
        nodes = g.x
        y = self.removed.deriv(nodes, t, 0, nt) * np.ones_like(nodes)
        cum = cumulative_trapezoid(y, nodes, initial=0.0)
        x = np.asarray(x, dtype=float)
        i = np.clip(np.floor((x - g.x_min) / g.dx).astype(int), 0, g.n_points - 2)
        xi = nodes[i]
        partial = 0.5 * (x - xi) * (y[i] + self.removed.deriv(x, t, 0, nt))
        return -(cum[i] + partial)

    @property
    def is_static(self):
        return self.removed.is_static


def to_coulomb_gauge(fields, grid):
    """Gauge away the longitudinal (spatially varying or static) part of A.

    Returns ``(fields', chi)`` with ``chi = -int A_L dx`` so that
    ``A' = A + grad chi`` keeps only the uniform time-dependent part of A.
    """
    a = fields.a_pot
    if isinstance(a, SeparableField):
        keep, removed = a.split_uniform()
    elif a.is_uniform and not a.is_static:
        keep, removed = a, ZERO
    else:
        keep, removed = ZERO, a
    if removed.is_zero:
        chi = GaugeFunction(ZERO, "coulomb")
        return fields, chi
    chi = GaugeFunction(_CoulombGaugeChi(removed, grid), "coulomb")
    new = FieldConfig(phi=fields.phi - Derivative(chi.field, nt=1), a_pot=keep, e0=fields.e0)
    return new, chi


def electric_field(fields, x, t):
    """E = -dA/dt - dphi/dx + e0(t)."""
    return -fields.a_pot.dot(x, t) - fields.phi.grad(x, t) + fields.e0(x, t)


@dataclass(frozen=True)
class ChargeDensityProfile:
    grid: Grid
    rho: np.ndarray

    @property
    def total_charge(self):
        return float(np.sum(self.rho) * self.grid.dx)

    @classmethod
    def from_point_charges(cls, grid, charges):
        """Each (q, position) deposited on its nearest node as q / dx."""
        rho = np.zeros(grid.n_points)
        for q, pos in charges:
            rho[grid.nearest_index(pos)] += q / grid.dx
        return cls(grid, rho)


@dataclass(frozen=True)
class LongitudinalField:
    x: np.ndarray
    homogeneous: float
    induced: np.ndarray

    @property
    def total(self):
        return self.homogeneous + self.induced


def longitudinal_field_1d(rho, e0=0.0):
    """Solve dE/dx = rho with E(x) = e0 + (1/2) int sign(x - x') rho(x') dx'.

    Point charges deposited on a node contribute half their charge at that
    node, matching the midpoint value of the sign kernel.
    """
    g = rho.grid
    r = np.asarray(rho.rho, dtype=float)
    w = r * g.dx
    left = np.cumsum(w) - w  # charge strictly to the left of each node
    right = np.sum(w) - left - w
    induced = 0.5 * (left - right)
    return LongitudinalField(g.x, float(e0), induced)
