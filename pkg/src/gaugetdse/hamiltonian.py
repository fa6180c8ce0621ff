"""
Matter Hamiltonian on the grid in general, Coulomb and length gauge.

The kinetic term (p - eA)^2 / 2m uses the 3-point stencil with link phases:

    H[j, j+1] = -1/(2 m dx^2) * exp(-i e Phi_j),   Phi_j = int_{x_j}^{x_{j+1}} A dx

with Phi_j from Simpson's rule.  This is Hermitian, reduces to the
ordinary second difference when A = 0, and is exactly covariant under
the lattice gauge transformation whenever Simpson integrates A exactly
(polynomial gauge functions up to quartic order).

Sign convention: like charges repel, so the Hamiltonian carries +U_C.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import Grid, WaveFunction
from .fields import FieldConfig

GAUGE_FORMS = ("general", "coulomb", "length")


def soft_coulomb_pair(q1, q2, d, a=1.0):
    """q1 q2 / sqrt(d^2 + a^2)."""
    if not a > 0:
        raise ValueError("softening length must be positive")
    return q1 * q2 / np.sqrt(np.asarray(d) ** 2 + a * a)


@dataclass(frozen=True, eq=False)
class PotentialGrid:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(self.grid.size)
        if not np.all(np.isfinite(v)):
            raise ValueError("potential must be finite on the grid")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return PotentialGrid(self.grid, self.values + other.values)

    def reshaped(self):
        return self.values.reshape(self.grid.shape)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.size))


def _check_particles(particles, grid):
    if len(particles) != grid.n_particles:
        raise ValueError(f"{len(particles)} particles given for a {grid.n_particles}-particle grid")


def _sum_over_particles(grid, per_particle):
    """Broadcast per-particle 1D arrays into a flattened configuration-grid sum."""
    if grid.n_particles == 1:
        return per_particle[0].copy()
    return (per_particle[0][:, None] + per_particle[1][None, :]).ravel()


def build_internal_potential(particles, grid, a=1.0, fixed_nuclei=()):
    """U_C: softened Coulomb energy of all particle-particle and particle-nucleus pairs."""
    _check_particles(particles, grid)
    x = grid.x
    per = [sum((soft_coulomb_pair(p.charge, q, x - pos, a) for q, pos in fixed_nuclei),
               np.zeros_like(x)) for p in particles]
    v = _sum_over_particles(grid, per)
    if grid.n_particles == 2:
        q1, q2 = particles[0].charge, particles[1].charge
        v = v + soft_coulomb_pair(q1, q2, x[:, None] - x[None, :], a).ravel()
    return PotentialGrid(grid, v)


def build_external_potential(external_charges, particles, grid, a=1.0):
    """U_ie: softened interaction of each internal particle with fixed external point charges."""
    _check_particles(particles, grid)
    x = grid.x
    per = [sum((soft_coulomb_pair(p.charge, q, x - pos, a) for q, pos in external_charges),
               np.zeros_like(x)) for p in particles]
    return PotentialGrid(grid, _sum_over_particles(grid, per))


def one_body_potential(grid, particles, func):
    """sum_l func(x_l, particle_l) on the configuration grid."""
    _check_particles(particles, grid)
    return PotentialGrid(grid, _sum_over_particles(grid, [func(grid.x, p) for p in particles]))


def harmonic_potential(grid, particles, omega):
    """sum_l m_l omega^2 x_l^2 / 2."""
    return one_body_potential(grid, particles, lambda x, p: 0.5 * p.mass * omega**2 * x**2)


def dipole_diagonal(grid, particles):
    """Diagonal of the many-body dipole operator sum_l e_l x_l."""
    return _sum_over_particles(grid, [p.charge * grid.x for p in particles])


def link_integrals(a_pot, x, dx, t):
    """Simpson's-rule integral of A over each link [x_j, x_j + dx]."""
    if a_pot.is_uniform:
        return np.full(len(x) - 1, dx * float(a_pot(0.0, t)))
    left = a_pot(x[:-1], t)
    mid = a_pot(x[:-1] + 0.5 * dx, t)
    right = a_pot(x[1:], t)
    return dx / 6.0 * (left + 4.0 * mid + right) * np.ones(len(x) - 1)


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Everything needed to apply H(t).

    ``gauge_form`` selects which field pieces enter:

    general  -- (p - eA(x,t))^2/2m + e phi(x,t) - e0(t) e x + U_C + U_ie
    coulomb  -- A must be spatially uniform (the dipole-limit transverse potential)
    length   -- p^2/2m - E(t) D + U_C + U_ie, with E(t) carried by ``fields.e0``
    """

    grid: Grid
    particles: tuple
    fields: FieldConfig = field(default_factory=FieldConfig)
    internal_potential: PotentialGrid = None
    external_potential: PotentialGrid = None
    gauge_form: str = "general"
    softening: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "particles", tuple(self.particles))
        _check_particles(self.particles, self.grid)
        if self.gauge_form not in GAUGE_FORMS:
            raise ValueError(f"unknown gauge form {self.gauge_form!r}")
        if self.gauge_form == "coulomb" and not self.fields.a_pot.is_uniform:
            raise ValueError("coulomb form needs a spatially uniform vector potential A(t); "
                             "use to_coulomb_gauge to remove the longitudinal part first")
        if self.gauge_form == "length" and not (self.fields.a_pot.is_zero
                                                and self.fields.phi.is_zero):
            raise ValueError("length form takes its drive from e0(t) only; A and phi must be zero")
        for name in ("internal_potential", "external_potential"):
            pot = getattr(self, name)
            if pot is None:
                object.__setattr__(self, name, PotentialGrid.zeros(self.grid))
            elif pot.grid != self.grid:
                raise ValueError(f"{name} lives on a different grid")
        object.__setattr__(self, "_static_diag",
                           self.internal_potential.values + self.external_potential.values)

    @property
    def static_potential(self):
        return self._static_diag

    @property
    def is_time_dependent(self):
        f = self.fields
        return not (f.phi.is_static and f.a_pot.is_static and f.e0.is_static)

    def with_fields(self, fields, gauge_form=None):
        return HamiltonianSpec(self.grid, self.particles, fields, self.internal_potential,
                               self.external_potential, gauge_form or self.gauge_form,
                               self.softening)

    def with_external_potential(self, potential):
        return HamiltonianSpec(self.grid, self.particles, self.fields, self.internal_potential,
                               potential, self.gauge_form, self.softening)

    @property
    def has_scalar_terms(self):
        f = self.fields
        return not (f.e0.is_zero and (self.gauge_form == "length" or f.phi.is_zero))

    @property
    def scalar_terms_static(self):
        f = self.fields
        return f.e0.is_static and (self.gauge_form == "length" or f.phi.is_static)

    def potential_gradient(self, axis):
        """d(U_C + U_ie)/dx_axis by centered differences, cached."""
        cache = self.__dict__.setdefault("_grad_cache", {})
        if axis not in cache:
            g = self.grid
            cache[axis] = np.gradient(self.static_potential.reshape(g.shape), g.dx, axis=axis)
        return cache[axis]

    def scalar_time_integral(self, particle, t0, t1, nodes, weights):
        """int_{t0}^{t1} of scalar_diagonal by the given Gauss rule on [-1, 1]."""
        g = self.grid
        x, e = g.x, particle.charge
        f = self.fields
        mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        times = mid + half * nodes
        out = np.zeros(g.n_points)
        if self.gauge_form != "length" and not f.phi.is_zero:
            vals = f.phi(x[:, None], times[None, :]) * np.ones((g.n_points, len(times)))
            out = out + half * e * (vals @ weights)
        if not f.e0.is_zero:
            area = half * float(np.dot(f.e0(0.0, times) * np.ones(len(times)), weights))
            out = out - area * e * x
        return out

    def scalar_diagonal(self, particle, t):
        """e phi(x, t) - e0(t) e x on one axis: the position-diagonal field coupling."""
        g = self.grid
        x, e = g.x, particle.charge
        f = self.fields
        diag = np.zeros(g.n_points)
        if self.gauge_form != "length" and not f.phi.is_zero:
            diag = diag + e * f.phi(x, t)
        if not f.e0.is_zero:
            diag = diag - f.e0_at(t) * e * x
        return diag

    def one_body_bands(self, particle, t, scalar=True):
        """(diag, upper) of the single-particle operator on one axis; lower = conj(upper).

        ``scalar=False`` leaves out the scalar_diagonal coupling.
        """
        g = self.grid
        x, dx, m, e = g.x, g.dx, particle.mass, particle.charge
        f = self.fields
        diag = np.full(g.n_points, 1.0 / (m * dx * dx))
        hop = -0.5 / (m * dx * dx)
        if self.gauge_form == "length" or f.a_pot.is_zero:
            upper = np.full(g.n_points - 1, hop, dtype=complex)
        else:
            upper = hop * np.exp(-1j * e * link_integrals(f.a_pot, x, dx, t))
        if scalar and self.has_scalar_terms:
            diag = diag + self.scalar_diagonal(particle, t)
        return diag, upper

    def at(self, t, scalar=True):
        """The operator with its fields frozen at time t."""
        return HamiltonianAt(self, t, [self.one_body_bands(p, t, scalar) for p in self.particles])

    def bands(self, t):
        return self.at(t).bands()

    def apply(self, amplitudes, t):
        return self.at(t).apply(amplitudes)

    def matrix(self, t):
        return self.at(t).matrix()


class HamiltonianAt:
    """H(t) for a fixed t: per-axis tridiagonal bands plus the static diagonal."""

    def __init__(self, spec, t, axis_bands):
        self.spec = spec
        self.t = t
        self.axis_bands = axis_bands
        self.grid = spec.grid

    def bands(self):
        """Tridiagonal (diag, upper) of the one-particle Hamiltonian; lower = conj(upper)."""
        if self.grid.n_particles != 1:
            raise ValueError("bands() is only defined for one-particle grids")
        diag, upper = self.axis_bands[0]
        return diag + self.spec.static_potential, upper

    def diagonal(self):
        g = self.grid
        per = [d for d, _ in self.axis_bands]
        if g.n_particles == 1:
            d = per[0]
        else:
            d = (per[0][:, None] + per[1][None, :]).ravel()
        return d + self.spec.static_potential

    def apply(self, amplitudes):
        g = self.grid
        psi = np.asarray(amplitudes)
        if psi.size != g.size:
            raise ValueError(f"state has {psi.size} amplitudes, grid expects {g.size}")
        psi = psi.reshape(g.shape)
        out = self.spec.static_potential.reshape(g.shape) * psi
        for axis, (diag, upper) in enumerate(self.axis_bands):
            out = out + _apply_tridiagonal(diag, upper, psi, axis)
        return out.ravel()

    def apply_kinetic(self, amplitudes):
        """sum_l (p_l - e_l A)^2 / 2m_l acting on the state (no potential terms)."""
        g = self.grid
        psi = np.asarray(amplitudes).reshape(g.shape)
        out = np.zeros_like(psi, dtype=complex)
        for axis, (p, (_, upper)) in enumerate(zip(self.spec.particles, self.axis_bands)):
            diag = np.full(g.n_points, 1.0 / (p.mass * g.dx * g.dx))
            out = out + _apply_tridiagonal(diag, upper, psi, axis)
        return out.ravel()

    def matrix(self):
        """Sparse CSR matrix."""
        g = self.grid
        ops = [sp.diags([np.conj(u), d.astype(complex), u], [-1, 0, 1])
               for d, u in self.axis_bands]
        if g.n_particles == 1:
            h = ops[0]
        else:
            eye = sp.identity(g.n_points, format="csr")
            h = sp.kron(ops[0], eye) + sp.kron(eye, ops[1])
        return (h + sp.diags(self.spec.static_potential)).tocsr()


def _apply_tridiagonal(diag, upper, psi, axis):
    """Apply a Hermitian tridiagonal matrix along one axis of psi."""
    psi = np.moveaxis(psi, axis, 0)
    shape = (-1,) + (1,) * (psi.ndim - 1)
    out = diag.reshape(shape) * psi
    out[:-1] += upper.reshape(shape) * psi[1:]
    out[1:] += np.conj(upper).reshape(shape) * psi[:-1]
    return np.moveaxis(out, 0, axis)


def _amplitudes(psi, spec):
    if isinstance(psi, WaveFunction):
        if psi.grid != spec.grid:
            raise ValueError("state and Hamiltonian live on different grids")
        return psi.amplitudes
    return np.asarray(psi)


def _apply_form(psi, spec, t, form):
    if spec.gauge_form != form:
        raise ValueError(f"expected a {form!r} Hamiltonian, got {spec.gauge_form!r}")
    return spec.apply(_amplitudes(psi, spec), t)


def apply_hamiltonian(psi, spec, t):
    """H psi for the general-gauge matter Hamiltonian."""
    return _apply_form(psi, spec, t, "general")


def apply_hamiltonian_coulomb(psi, spec, t):
    """H psi in Coulomb gauge: uniform A(t), homogeneous field coupled through -e0(t) D."""
    return _apply_form(psi, spec, t, "coulomb")


def apply_hamiltonian_length(psi, spec, t):
    """H psi in length gauge: bare many-body Hamiltonian minus E(t) D."""
    return _apply_form(psi, spec, t, "length")


def apply_h(psi, spec, t):
    """H psi for whatever gauge form the spec carries."""
    return spec.apply(_amplitudes(psi, spec), t)
