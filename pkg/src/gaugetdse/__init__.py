"""
Gauge-covariant grid solver for the 1D time-dependent Schroedinger equation.

One or two charged particles in arbitrary electromagnetic potentials, with
tools that certify gauge invariance of observables and optical response.
"""

__version__ = "0.1.0"

from .core import (
    ELECTRON,
    DegenerateStateError,
    GaugeTDSEError,
    Grid,
    ParticleSpec,
    Units,
    WaveFunction,
    gaussian_packet,
    grid_from_box,
    make_grid,
    normalize,
)
from .dynamics import (
    BoundaryContaminationError,
    NumericalError,
    PropagationPlan,
    SolverError,
    Trajectory,
    evolve,
    ground_state_imaginary_time,
    lowest_states_imaginary_time,
    step_crank_nicolson,
)
from .fields import (
    ZERO,
    FieldConfig,
    GaugeFunction,
    apply_gauge_to_fields,
    apply_gauge_to_state,
    field_from_dict,
    gauge,
    gauge_phase,
    separable,
    static,
    to_coulomb_gauge,
    uniform,
)
from .hamiltonian import (
    HamiltonianSpec,
    PotentialGrid,
    apply_hamiltonian,
    apply_hamiltonian_coulomb,
    apply_hamiltonian_length,
    build_external_potential,
    build_internal_potential,
    harmonic_potential,
)
from .observables import (
    charge_density,
    current_density,
    dipole,
    energy_expectation,
    mechanical_momentum,
    observe,
    polarization_profile,
)
from .analysis import (
    GaugeCheckReport,
    ResponseSpectrum,
    gauge_invariance_check,
    harmonic_spectrum,
    linear_susceptibility,
    velocity_length_check,
)
from .scenario import Scenario, ScenarioError

__all__ = [name for name in dir() if not name.startswith("_")]
