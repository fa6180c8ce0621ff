import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugetdse.core import (
    DegenerateStateError,
    Grid,
    ParticleSpec,
    WaveFunction,
    edge_mask,
    gaussian_packet,
    grid_from_box,
    make_grid,
    normalize,
)


def test_grid_coordinates():
    g = make_grid(11, 0.5, -2.5)
    assert g.x[0] == -2.5
    assert g.x_max == pytest.approx(2.5)
    assert g.size == 11
    assert g.shape == (11,)
    assert g.nearest_index(0.1) == 5


def test_grid_two_particles():
    g = make_grid(20, 0.1, -1.0, 2)
    assert g.size == 400
    assert g.shape == (20, 20)
    assert g.volume_element == pytest.approx(0.01)
    x1, x2 = g.coordinates()
    assert x1.shape == (20, 20)
    assert np.all(x1[:, 0] == g.x)
    assert np.all(x2[0, :] == g.x)


@pytest.mark.parametrize("kwargs", [
    {"n_points": 100, "dx": 0.1, "x_min": 0.0, "n_particles": 3},
    {"n_points": 100, "dx": 0.0, "x_min": 0.0},
    {"n_points": 4, "dx": 0.1, "x_min": 0.0},
])
def test_grid_rejects_bad_input(kwargs):
    with pytest.raises(ValueError):
        Grid(**kwargs)


def test_grid_from_box_inclusive():
    g = grid_from_box(-40, 40, 0.05)
    assert g.n_points == 1601
    assert g.x[-1] == pytest.approx(40.0)


def test_particle_mass_positive():
    with pytest.raises(ValueError):
        ParticleSpec(mass=0.0)


def test_wavefunction_size_checked():
    g = make_grid(16, 0.1, 0.0)
    with pytest.raises(ValueError):
        WaveFunction(g, np.ones(15))


def test_zero_state_cannot_be_normalized():
    g = make_grid(16, 0.1, 0.0)
    with pytest.raises(DegenerateStateError):
        normalize(WaveFunction(g, np.zeros(16)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                min_size=16, max_size=16).filter(lambda v: np.linalg.norm(v) > 1e-6))
def test_normalize_is_idempotent(values):
    g = make_grid(16, 0.3, 0.0)
    once = normalize(WaveFunction(g, values))
    twice = normalize(once)
    assert once.norm == pytest.approx(1.0, abs=1e-14)
    assert np.array_equal(once.amplitudes, twice.amplitudes)


@settings(max_examples=30, deadline=None)
@given(x0=st.floats(-3, 3), sigma=st.floats(0.5, 2.0), k0=st.floats(-2, 2))
def test_gaussian_packet_moments(x0, sigma, k0):
    g = grid_from_box(-20, 20, 0.02)
    psi = gaussian_packet(g, x0, sigma, k0)
    d = psi.density
    assert psi.norm == pytest.approx(1.0, abs=1e-12)
    assert np.sum(g.x * d) * g.dx == pytest.approx(x0, abs=1e-9)
    var = np.sum((g.x - x0) ** 2 * d) * g.dx
    assert var == pytest.approx(sigma**2, rel=1e-6)


def test_two_particle_packet_is_product():
    g = make_grid(40, 0.25, -5.0, 2)
    psi = gaussian_packet(g, x0=[-1.0, 1.0], sigma=[1.0, 0.7])
    a = psi.reshaped()
    # rank one
    s = np.linalg.svd(a, compute_uv=False)
    assert s[1] / s[0] < 1e-12
    assert psi.norm == pytest.approx(1.0)


def test_fidelity_ignores_global_phase():
    g = grid_from_box(-10, 10, 0.1)
    psi = gaussian_packet(g, 0.5, 1.0, 0.3)
    rotated = WaveFunction(g, np.exp(0.7j) * psi.amplitudes)
    assert psi.fidelity(rotated) == pytest.approx(1.0, abs=1e-14)


def test_edge_mask_fraction():
    g = make_grid(100, 0.1, 0.0)
    m = edge_mask(g, 0.05)
    assert m.sum() == 10
    assert m[:5].all() and m[-5:].all() and not m[5:-5].any()
    m2 = edge_mask(make_grid(100, 0.1, 0.0, 2), 0.05)
    assert m2.reshape(100, 100)[50, 50] == False  # noqa: E712
    assert m2.reshape(100, 100)[0, 50]
