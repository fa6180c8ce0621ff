"""
Expectation values and densities extracted from a state.

Currents and mechanical momenta are built from the same link phases as the
kinetic stencil, which makes them exactly gauge invariant on the lattice
and makes the discrete continuity equation and d<x>/dt = <pi>/m hold
for the semi-discrete dynamics.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .dynamics import edge_density
from .fields import ChargeDensityProfile, electric_field
from .hamiltonian import dipole_diagonal, link_integrals


def _marginals(psi):
    """Probability density of each particle's coordinate, one 1D array per particle."""
    g = psi.grid
    d = psi.density
    if g.n_particles == 1:
        return [d]
    return [d.sum(axis=1) * g.dx, d.sum(axis=0) * g.dx]


def charge_density(psi, particles):
    """rho(x) = sum_l e_l * (marginal density of particle l)."""
    rho = sum(p.charge * m for p, m in zip(particles, _marginals(psi)))
    return ChargeDensityProfile(psi.grid, np.asarray(rho, dtype=float))


def _link_overlaps(psi, particle, axis, a_pot, t):
    """Im(psi_j^* U_j psi_{j+1}) on the links of one axis, summed over the partner with dx weight."""
    g = psi.grid
    amps = np.moveaxis(psi.reshaped(), axis, 0)
    if a_pot is None or a_pot.is_zero:
        u = np.ones(g.n_points - 1)
    else:
        u = np.exp(-1j * particle.charge * link_integrals(a_pot, g.x, g.dx, t))
    shape = (-1,) + (1,) * (amps.ndim - 1)
    prod = np.imag(np.conj(amps[:-1]) * u.reshape(shape) * amps[1:])
    if g.n_particles == 2:
        prod = prod.sum(axis=1) * g.dx
    return prod


@dataclass
class CurrentDensity:
    x: np.ndarray
    total: np.ndarray
    paramagnetic: np.ndarray
    diamagnetic: np.ndarray
    links: np.ndarray = field(repr=False, default=None)


def _links_to_nodes(links):
    padded = np.concatenate([[0.0], links, [0.0]])
    return 0.5 * (padded[:-1] + padded[1:])


def current_density(psi, fields, particles, t):
    """J(x) = sum_l (e_l/m_l) [Im(psi^* d psi) - e_l A |psi|^2] on the nodes.

    The total is the lattice current on links averaged onto nodes; the
    paramagnetic part is the same expression with A = 0, and the diamagnetic
    part is the difference (equal to -(e^2/m) A |psi|^2 up to O(dx^2)).
    """
    g = psi.grid
    total_links = np.zeros(g.n_points - 1)
    para_links = np.zeros(g.n_points - 1)
    for axis, p in enumerate(particles):
        c = p.charge / (p.mass * g.dx)
        total_links += c * _link_overlaps(psi, p, axis, fields.a_pot, t)
        para_links += c * _link_overlaps(psi, p, axis, None, t)
    total = _links_to_nodes(total_links)
    para = _links_to_nodes(para_links)
    return CurrentDensity(g.x, total, para, total - para, total_links)


def dipole(psi, particles):
    """<sum_l e_l x_l>."""
    d = np.abs(psi.amplitudes) ** 2
    return float(np.dot(d, dipole_diagonal(psi.grid, particles)) * psi.grid.volume_element)


def position_expectations(psi):
    g = psi.grid
    return [float(np.sum(g.x * m) * g.dx) for m in _marginals(psi)]


@dataclass
class PolarizationProfile:
    x: np.ndarray
    values: np.ndarray
    boundary_value: float
    neutral: bool

    def integral(self):
        return float(trapezoid(self.values, self.x))


def polarization_profile(rho, neutral_tol=1e-8):
    """P(x) = -int_{x_min}^{x} rho dx' (trapezoidal), so that dP/dx = -rho.

    ``neutral`` is False when P does not vanish at the far boundary, i.e. the
    profile carries net charge and P is not a pure polarization.
    """
    g = rho.grid
    p = -cumulative_trapezoid(rho.rho, g.x, initial=0.0)
    return PolarizationProfile(g.x, p, float(p[-1]), bool(abs(p[-1]) <= neutral_tol))


def mechanical_momentum(psi, fields, particles, t):
    """<p_l - e_l A(x_l, t)> for each particle, from the lattice covariant difference."""
    return [float(np.sum(_link_overlaps(psi, p, axis, fields.a_pot, t)))
            for axis, p in enumerate(particles)]


def energy_expectation(psi, spec, t):
    """<psi|H(t)|psi>.  Not gauge invariant: shifts by -<sum_l e_l dchi/dt> under a gauge change."""
    return float(np.vdot(psi.amplitudes, spec.apply(psi.amplitudes, t)).real
                 * psi.grid.volume_element)


def kinetic_energy(psi, spec, t):
    """<sum_l (p_l - e_l A)^2 / 2m_l>; gauge invariant."""
    h = spec.at(t)
    return float(np.vdot(psi.amplitudes, h.apply_kinetic(psi.amplitudes)).real
                 * psi.grid.volume_element)


def gauge_term_expectation(psi, chi, particles, t):
    """<sum_l e_l dchi/dt(x_l, t)>, the predicted energy shift with opposite sign."""
    g = psi.grid
    dchi = chi.dt_chi(g.x, t) * np.ones(g.n_points)
    return float(sum(p.charge * np.sum(m * dchi) * g.dx
                     for p, m in zip(particles, _marginals(psi))))


def force_expectation(psi, spec, t):
    """Ehrenfest force <-dV/dx_l + e_l E(x_l, t)> per particle.

    V is the static potential grid (centered differences); E is the
    electric field of the spec's fields, which in length form is e0(t).
    """
    g = psi.grid
    d = psi.density
    f = spec.fields
    if f.a_pot.is_uniform and f.phi.is_zero:
        e_field = -float(f.a_pot.dot(0.0, t)) + f.e0_at(t)
    else:
        e_field = electric_field(f, g.x, t) * np.ones(g.n_points)
    out = []
    for axis, (p, m) in enumerate(zip(spec.particles, _marginals(psi))):
        grad = spec.potential_gradient(axis)
        out.append(float(-np.sum(grad * d) * g.volume_element
                         + p.charge * np.sum(e_field * m) * g.dx))
    return out


def dipole_acceleration(psi, spec, t):
    """d^2<D>/dt^2 = sum_l (e_l/m_l) <F_l>."""
    return float(sum(p.charge / p.mass * f
                     for p, f in zip(spec.particles, force_expectation(psi, spec, t))))


@dataclass
class ObservableRecord:
    time: float
    norm: float
    dipole: float
    mech_momentum: list
    kinetic_energy: float
    total_energy_gauge_dependent: float
    edge_density: float
    charge_density: np.ndarray = None
    current_density: np.ndarray = None
    polarization: np.ndarray = None

    def scalars(self):
        out = {"t": self.time, "norm": self.norm, "dipole": self.dipole}
        for i, p in enumerate(self.mech_momentum):
            out[f"mech_momentum_{i + 1}"] = p
        out["kinetic_energy"] = self.kinetic_energy
        out["total_energy_gauge_dependent"] = self.total_energy_gauge_dependent
        out["edge_density"] = self.edge_density
        return out


def observe(psi, spec, t=None, arrays=False):
    t = psi.time if t is None else t
    parts = spec.particles
    rec = ObservableRecord(
        time=t,
        norm=float(psi.norm),
        dipole=dipole(psi, parts),
        mech_momentum=mechanical_momentum(psi, spec.fields, parts, t),
        kinetic_energy=kinetic_energy(psi, spec, t),
        total_energy_gauge_dependent=energy_expectation(psi, spec, t),
        edge_density=edge_density(psi),
    )
    if arrays:
        rho = charge_density(psi, parts)
        rec.charge_density = rho.rho
        rec.current_density = current_density(psi, spec.fields, parts, t).total
        rec.polarization = polarization_profile(rho).values
    return rec


def standard_observers(arrays=False):
    """Observer mapping for dynamics.evolve covering the usual scalar observables."""
    obs = {
        "norm": lambda psi, spec, t: float(psi.norm),
        "dipole": lambda psi, spec, t: dipole(psi, spec.particles),
        "position": lambda psi, spec, t: position_expectations(psi),
        "mech_momentum": lambda psi, spec, t: mechanical_momentum(psi, spec.fields,
                                                                  spec.particles, t),
        "kinetic_energy": kinetic_energy,
        "energy": energy_expectation,
        "edge_density": lambda psi, spec, t: edge_density(psi),
    }
    if arrays:
        obs["charge_density"] = lambda psi, spec, t: charge_density(psi, spec.particles).rho
        obs["current_density"] = lambda psi, spec, t: current_density(
            psi, spec.fields, spec.particles, t).total
        obs["current_links"] = lambda psi, spec, t: current_density(
            psi, spec.fields, spec.particles, t).links
    return obs


def five_point_derivative(y, h):
    """Fourth-order centered derivative on interior samples (two points trimmed at each end)."""
    y = np.asarray(y)
    return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)


def ehrenfest_residual(traj, particles):
    """max |d<x_l>/dt - <pi_l>/m_l| over the interior records of a trajectory."""
    h = traj.times[1] - traj.times[0]
    pos = np.asarray(traj["position"])
    mom = np.asarray(traj["mech_momentum"])
    worst = 0.0
    for i, p in enumerate(particles):
        dxdt = five_point_derivative(pos[:, i], h)
        worst = max(worst, float(np.max(np.abs(dxdt - mom[2:-2, i] / p.mass))))
    return worst


def continuity_residual(traj, grid):
    """max |drho/dt + dJ/dx| at interior nodes, and max |drho/dt| for scale.

    drho/dt comes from centered differences of the recorded densities.  With
    ``current_links`` recorded the divergence is the exact lattice one,
    (J_{j+1/2} - J_{j-1/2}) / dx, so the residual is pure time discretization;
    otherwise centered differences of the node currents are used.
    """
    h = traj.times[1] - traj.times[0]
    rho = np.asarray(traj["charge_density"])
    drho = (rho[2:] - rho[:-2]) / (2 * h)
    if "current_links" in traj.records:
        links = np.asarray(traj["current_links"])[1:-1]
        div = (links[:, 1:] - links[:, :-1]) / grid.dx
        res = drho[:, 1:-1] + div
    else:
        j = np.asarray(traj["current_density"])
        div = (j[1:-1, 2:] - j[1:-1, :-2]) / (2 * grid.dx)
        res = drho[:, 1:-1] + div
    return float(np.max(np.abs(res))), float(np.max(np.abs(drho)))
