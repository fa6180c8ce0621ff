import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugetdse.core import ELECTRON, ParticleSpec, WaveFunction, gaussian_packet, grid_from_box
from gaugetdse.fields import (
    Constant,
    FieldConfig,
    Gaussian,
    Polynomial,
    Sinusoid,
    apply_gauge_to_fields,
    gauge,
    gauge_phase,
    linear_potential,
    separable,
    static,
    uniform,
)
from gaugetdse.hamiltonian import (
    HamiltonianSpec,
    apply_hamiltonian,
    apply_hamiltonian_coulomb,
    apply_hamiltonian_length,
    build_external_potential,
    build_internal_potential,
    soft_coulomb_pair,
)

from conftest import hydrogen_spec, oscillator_spec

DRIVEN = FieldConfig(
    phi=separable(Gaussian(0.2, 1.0, 2.0), Sinusoid(1.0, 0.4)),
    a_pot=separable(Polynomial([0.05, 0.02, -0.01]), Sinusoid(1.0, 0.3, 0.5)),
    e0=uniform(Sinusoid(0.01, 0.2)),
)


def _random_state(grid, rng):
    a = rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)
    return a / np.linalg.norm(a)


def test_soft_coulomb_sign():
    assert soft_coulomb_pair(-1, -1, 0.0) == pytest.approx(1.0)
    assert soft_coulomb_pair(-1, 1, 3.0, a=1.0) == pytest.approx(-1 / np.sqrt(10))
    with pytest.raises(ValueError):
        soft_coulomb_pair(1, 1, 0.0, a=0.0)


@pytest.mark.parametrize("n_particles", [1, 2])
def test_hamiltonian_is_hermitian(n_particles):
    grid = grid_from_box(-4, 4, 0.25, n_particles)
    parts = (ELECTRON,) * n_particles
    pot = build_internal_potential(parts, grid, 1.0, [(1.0, 0.0)])
    spec = HamiltonianSpec(grid, parts, DRIVEN, pot)
    h = spec.matrix(1.3).toarray()
    assert np.max(np.abs(h - h.conj().T)) < 1e-14


@pytest.mark.parametrize("n_particles", [1, 2])
def test_apply_matches_matrix(n_particles, rng):
    grid = grid_from_box(-4, 4, 0.25, n_particles)
    parts = (ELECTRON,) * n_particles
    spec = HamiltonianSpec(grid, parts, DRIVEN,
                           build_internal_potential(parts, grid, 1.0, [(2.0, 0.5)]))
    v = _random_state(grid, rng)
    assert np.allclose(spec.apply(v, 0.7), spec.matrix(0.7) @ v, atol=1e-13)


def test_field_free_kinetic_is_second_difference():
    spec = oscillator_spec(omega=0.0, dx=0.1, box=5.0)
    h = spec.matrix(0.0).toarray()
    n = spec.grid.n_points
    lap = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    assert np.allclose(h, -0.5 * lap / 0.01)


@pytest.mark.parametrize("a0", [0.0, 0.3, -0.7])
def test_uniform_vector_potential_shifts_momentum(a0):
    """A plane wave e^{ikx} has lattice kinetic energy (1 - cos((k - eA0) dx)) / (m dx^2)."""
    spec = oscillator_spec(omega=0.0, dx=0.1, box=5.0, fields=FieldConfig(a_pot=uniform(Constant(a0))))
    g = spec.grid
    k = 1.1
    psi = np.exp(1j * k * g.x)
    e = ELECTRON.charge
    hpsi = spec.apply(psi, 0.0)
    expected = (1 - np.cos((k - e * a0) * g.dx)) / g.dx**2
    assert np.allclose(hpsi[1:-1] / psi[1:-1], expected, atol=1e-10)


def _covariance_residual(spec, chi, t, psi):
    """|| H' psi - (U H U^dag - e dchi/dt) psi || / || H' psi ||."""
    new = spec.with_fields(apply_gauge_to_fields(spec.fields, chi))
    theta = gauge_phase(chi, spec.particles, spec.grid, t)
    u = np.exp(1j * theta)
    dt_chi = chi.dt_chi(spec.grid.x, t) * np.ones(spec.grid.n_points)
    if spec.grid.n_particles == 1:
        shift = spec.particles[0].charge * dt_chi
    else:
        e1, e2 = (p.charge for p in spec.particles)
        shift = (e1 * dt_chi[:, None] + e2 * dt_chi[None, :]).ravel()
    lhs = new.apply(psi, t)
    rhs = u * spec.apply(np.conj(u) * psi, t) - shift * psi
    return np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs)


@settings(max_examples=25, deadline=None)
@given(c=st.lists(st.floats(-0.3, 0.3), min_size=5, max_size=5),
       omega=st.floats(0.1, 2.0), t=st.floats(0.0, 10.0))
def test_polynomial_gauge_covariance_exact(c, omega, t):
    spec = hydrogen_spec(dx=0.1, box=10.0, fields=DRIVEN)
    psi = gaussian_packet(spec.grid, 0.3, 1.0, 0.5).amplitudes
    chi = gauge(separable(Polynomial(c), Sinusoid(1.0, omega, 0.3)))
    assert _covariance_residual(spec, chi, t, psi) < 1e-12


def test_smooth_gauge_covariance_within_1e8():
    spec = hydrogen_spec(dx=0.05, box=20.0, fields=DRIVEN)
    psi = gaussian_packet(spec.grid, 0.0, 1.5, 0.2).amplitudes
    chi = gauge(separable(Gaussian(0.5, 0.5, 2.0), Sinusoid(1.0, 1.0)) + static(Gaussian(0.3, -1.0, 3.0)))
    assert _covariance_residual(spec, chi, 0.9, psi) < 1e-8


def test_two_particle_gauge_covariance():
    grid = grid_from_box(-5, 5, 0.2, 2)
    parts = (ELECTRON, ParticleSpec(2.0, 1.0))
    spec = HamiltonianSpec(grid, parts, DRIVEN, build_internal_potential(parts, grid))
    psi = gaussian_packet(grid, [0.5, -0.5], [1.0, 1.2], [0.3, 0.0]).amplitudes
    chi = gauge(separable(Polynomial([0.1, 0.2, 0.05, 0.01]), Sinusoid(1.0, 0.7)))
    assert _covariance_residual(spec, chi, 2.0, psi) < 1e-12


def test_exchange_symmetry_for_identical_particles(rng):
    grid = grid_from_box(-4, 4, 0.2, 2)
    parts = (ELECTRON, ELECTRON)
    spec = HamiltonianSpec(grid, parts, DRIVEN,
                           build_internal_potential(parts, grid, 1.0, [(2.0, 0.0)]),
                           build_external_potential([(1.0, 3.0)], parts, grid))
    n = grid.n_points
    psi = _random_state(grid, rng)

    def swap(v):
        return v.reshape(n, n).T.ravel()

    assert np.allclose(spec.apply(swap(psi), 0.4), swap(spec.apply(psi, 0.4)), atol=1e-13)


def test_two_particle_interaction_potential():
    grid = grid_from_box(-2, 2, 0.5, 2)
    parts = (ELECTRON, ELECTRON)
    pot = build_internal_potential(parts, grid, 1.0, [(2.0, 0.0)]).reshaped()
    x = grid.x
    i, j = 1, 6
    expected = (-2 / np.sqrt(x[i] ** 2 + 1) - 2 / np.sqrt(x[j] ** 2 + 1)
                + 1 / np.sqrt((x[i] - x[j]) ** 2 + 1))
    assert pot[i, j] == pytest.approx(expected)


def test_static_field_in_length_form_matches_scalar_potential(rng):
    f = 0.013
    general = hydrogen_spec(dx=0.1, box=10.0, fields=FieldConfig(phi=linear_potential(f)))
    length = hydrogen_spec(dx=0.1, box=10.0, fields=FieldConfig(e0=uniform(Constant(f))),
                           form="length")
    psi = _random_state(general.grid, rng)
    assert np.max(np.abs(apply_hamiltonian(psi, general, 0.0)
                         - apply_hamiltonian_length(psi, length, 0.0))) < 1e-13


def test_coulomb_form_rejects_varying_vector_potential():
    with pytest.raises(ValueError, match="uniform"):
        hydrogen_spec(fields=FieldConfig(a_pot=static(Sinusoid(1.0, 1.0))), form="coulomb")


def test_length_form_rejects_potentials():
    with pytest.raises(ValueError):
        hydrogen_spec(fields=FieldConfig(a_pot=uniform(Sinusoid(1.0, 1.0))), form="length")


def test_form_specific_apply_checks_form():
    spec = hydrogen_spec(dx=0.2, box=5.0, form="coulomb")
    psi = gaussian_packet(spec.grid)
    apply_hamiltonian_coulomb(psi, spec, 0.0)
    with pytest.raises(ValueError):
        apply_hamiltonian(psi, spec, 0.0)


def test_external_charge_potential():
    grid = grid_from_box(-20, 20, 0.5)
    pot = build_external_potential([(1.0, 10.0)], (ELECTRON,), grid, 1.0)
    i = grid.nearest_index(10.0)
    assert pot.values[i] == pytest.approx(-1.0)
    assert pot.values[grid.nearest_index(0.0)] == pytest.approx(-1 / np.sqrt(101))


def test_bands_only_for_one_particle():
    spec = oscillator_spec(n_particles=2, dx=0.5, box=4.0)
    with pytest.raises(ValueError):
        spec.at(0.0).bands()
    with pytest.raises(ValueError):
        WaveFunction(spec.grid, np.ones(spec.grid.size + 1))
