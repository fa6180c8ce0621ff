"""
Discretization and state types shared by the rest of the package.

Everything is in Hartree atomic units: hbar = m_e = e = 4*pi*eps0 = 1.
Two-particle amplitudes are stored flattened in C order, so the first
particle's coordinate is the slow axis.
"""

from dataclasses import dataclass

import numpy as np


class Units:
    """Hartree atomic unit constants."""

    hbar = 1.0
    electron_mass = 1.0
    elementary_charge = 1.0
    coulomb_constant = 1.0  # 1 / (4 pi eps0)
    speed_of_light = 137.035999
    eps0 = 1.0 / (4.0 * np.pi)


class GaugeTDSEError(Exception):
    """Base class for errors raised by this package."""


class DegenerateStateError(GaugeTDSEError):
    pass


@dataclass(frozen=True)
class Grid:
    n_points: int
    dx: float
    x_min: float
    n_particles: int = 1

    def __post_init__(self):
        if self.n_particles not in (1, 2):
            raise ValueError(f"n_particles must be 1 or 2, got {self.n_particles}")
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise ValueError(f"n_points must be an integer >= 8, got {self.n_points}")

    @property
    def x(self):
        return self.x_min + np.arange(self.n_points) * self.dx

    @property
    def x_max(self):
        return self.x_min + (self.n_points - 1) * self.dx

    @property
    def extent(self):
        return self.n_points * self.dx

    @property
    def size(self):
        return self.n_points**self.n_particles

    @property
    def shape(self):
        return (self.n_points,) * self.n_particles

    @property
    def volume_element(self):
        return self.dx**self.n_particles

    def coordinate(self, index):
        return self.x_min + index * self.dx

    def nearest_index(self, x):
        i = np.rint((np.asarray(x) - self.x_min) / self.dx).astype(int)
        return np.clip(i, 0, self.n_points - 1)

    def coordinates(self):
        """Coordinate arrays broadcast over the configuration grid, one per particle."""
        return np.meshgrid(*([self.x] * self.n_particles), indexing="ij")


def make_grid(n_points, dx, x_min, n_particles=1):
    return Grid(int(n_points), float(dx), float(x_min), int(n_particles))


def grid_from_box(x_min, x_max, dx, n_particles=1):
    """Grid with spacing dx covering [x_min, x_max] inclusive."""
    n = int(round((x_max - x_min) / dx)) + 1
    return make_grid(n, dx, x_min, n_particles)


@dataclass(frozen=True)
class ParticleSpec:
    mass: float = 1.0
    charge: float = -1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"particle mass must be positive, got {self.mass}")


ELECTRON = ParticleSpec(1.0, -1.0)


@dataclass
class WaveFunction:
    grid: Grid
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.size != self.grid.size:
            raise ValueError(
                f"amplitude array has {a.size} entries, grid expects {self.grid.size}"
            )
        self.amplitudes = a.reshape(self.grid.size)

    @property
    def norm(self):
        return np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real * self.grid.volume_element)

    @property
    def density(self):
        """|psi|^2 shaped over the configuration grid."""
        return (np.abs(self.amplitudes) ** 2).reshape(self.grid.shape)

    def reshaped(self):
        return self.amplitudes.reshape(self.grid.shape)

    def copy(self):
        return WaveFunction(self.grid, self.amplitudes.copy(), self.time)

    def inner(self, other):
        """<self|other> with the grid volume element."""
        return np.vdot(self.amplitudes, other.amplitudes) * self.grid.volume_element

    def fidelity(self, other):
        return abs(self.inner(other))


def normalize(psi):
    """Return psi scaled to unit norm. Raises on a zero state."""
    n = psi.norm
    if not np.isfinite(n) or n == 0.0:
        raise DegenerateStateError("cannot normalize a state with zero or non-finite norm")
    out = WaveFunction(psi.grid, psi.amplitudes / n, psi.time)
    # a second pass removes the last-ulp residue so repeated calls are idempotent
    n2 = out.norm
    if n2 != 1.0:
        out.amplitudes /= n2
    return out


def gaussian_packet(grid, x0=0.0, sigma=1.0, k0=0.0, time=0.0):
    """Normalized Gaussian packet; for two particles each entry is a (x0, sigma, k0) product factor."""
    if grid.n_particles == 1:
        x = grid.x
        amps = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * k0 * x)
    else:
        x0s = np.broadcast_to(x0, (2,))
        sigmas = np.broadcast_to(sigma, (2,))
        k0s = np.broadcast_to(k0, (2,))
        x = grid.x
        factors = [
            np.exp(-((x - x0s[i]) ** 2) / (4 * sigmas[i] ** 2) + 1j * k0s[i] * x) for i in range(2)
        ]
        amps = np.outer(factors[0], factors[1])
    return normalize(WaveFunction(grid, amps, time))


def edge_mask(grid, fraction=0.05):
    """Boolean mask over the configuration grid marking the outermost `fraction` of any coordinate."""
    n_edge = max(1, int(np.ceil(fraction * grid.n_points)))
    edge_1d = np.zeros(grid.n_points, dtype=bool)
    edge_1d[:n_edge] = True
    edge_1d[-n_edge:] = True
    if grid.n_particles == 1:
        return edge_1d
    return (edge_1d[:, None] | edge_1d[None, :]).ravel()
