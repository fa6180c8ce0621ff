"""Shared builders and reference solutions that do not go through the solvers under test."""

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.linalg import expm

from gaugetdse import (
    ELECTRON,
    FieldConfig,
    HamiltonianSpec,
    build_internal_potential,
    grid_from_box,
    harmonic_potential,
)
from gaugetdse.scenario import Scenario


def hydrogen_spec(dx=0.05, box=40.0, fields=None, form="general", external=None):
    grid = grid_from_box(-box, box, dx)
    parts = (ELECTRON,)
    pot = build_internal_potential(parts, grid, 1.0, [(1.0, 0.0)])
    return HamiltonianSpec(grid, parts, fields or FieldConfig(), pot, external, form)


def oscillator_spec(omega=1.0, dx=0.05, box=10.0, fields=None, form="general", n_particles=1):
    grid = grid_from_box(-box, box, dx, n_particles)
    parts = (ELECTRON,) * n_particles
    return HamiltonianSpec(grid, parts, fields or FieldConfig(),
                           harmonic_potential(grid, parts, omega), None, form)


def hydrogen_scenario(dx=0.05, box=40.0, dt=0.002, duration=10.0, form="general", a_terms=None,
                      chi=None, record_every=50, **extra):
    """Scenario dict for the driven soft-Coulomb atom, built into a Scenario."""
    if a_terms is None:
        a_terms = [{"space": {"kind": "constant", "value": 1.0},
                    "time": {"kind": "sinusoid", "amplitude": 0.05, "omega": 0.3}}]
    d = {
        "name": "hydrogen",
        "grid": {"n_points": int(round(2 * box / dx)) + 1, "dx": dx, "x_min": -box,
                 "n_particles": 1},
        "particles": [{"mass": 1.0, "charge": -1.0}],
        "nuclei": [{"charge": 1.0, "position": 0.0}],
        "gauge": {"form": form, "A": a_terms},
        "plan": {"dt": dt, "n_steps": int(round(duration / dt)), "record_every": record_every},
    }
    if chi is not None:
        d["gauge"]["chi"] = chi
    d.update(extra)
    return Scenario.from_dict(d)


def term(space, time):
    return {"space": space, "time": time}


CONST = {"kind": "constant", "value": 1.0}


def dense_propagate(matrix, psi, t):
    """exp(-i H t) psi with a dense matrix exponential."""
    return expm(-1j * np.asarray(matrix.todense()) * t) @ psi


def lowest_eigenpairs(spec, k, t=0.0):
    """k lowest eigenpairs of H(t) by shift-invert Lanczos, normalized on the grid."""
    h = spec.matrix(t)
    # below the spectrum: hopping lowers eigenvalues at most 1/(m dx^2) under the diagonal
    kin = sum(1.0 / (p.mass * spec.grid.dx**2) for p in spec.particles)
    sigma = float(np.min(h.diagonal().real)) - kin - 1.0
    w, v = sla.eigsh(sp.csc_matrix(h), k=k, sigma=sigma, which="LM")
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    v = v / np.sqrt(spec.grid.volume_element)
    return w, v


def richardson_soft_coulomb_e0(box=60.0, spacings=(0.05, 0.025, 0.0125)):
    """Ground energy of the a=1 soft-Coulomb atom extrapolated to dx -> 0 (O(dx^2), O(dx^4))."""
    es = [lowest_eigenpairs(hydrogen_spec(dx, box), 1)[0][0] for dx in spacings]
    r1 = (4 * es[1] - es[0]) / 3
    r2 = (4 * es[2] - es[1]) / 3
    return (16 * r2 - r1) / 15


@pytest.fixture(scope="session")
def hydrogen_small():
    return hydrogen_spec(dx=0.1, box=30.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)
