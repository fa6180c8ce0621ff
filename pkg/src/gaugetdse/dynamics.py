"""
Real- and imaginary-time propagation.

A real-time step is a symmetric split: the position-diagonal field
coupling W = e phi - e0 e x is integrated exactly in time over each half
step (Gauss-Legendre), and the kinetic term with link phases plus the static
potential takes a Crank-Nicolson step with its fields sampled at the half
step.  Because the half-step phases pick up exactly e[chi(t_m) - chi(t_n)]
under a gauge change, one step maps gauge-transformed states to
gauge-transformed states with no time-discretization error.  The scheme is
second order, unitary and time-reversible.

One-particle systems are solved as banded systems; two-particle systems use
restarted GMRES on the tensor grid, matrix-free.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as sla
from scipy.linalg import solve_banded

from .core import GaugeTDSEError, WaveFunction, edge_mask, normalize

EDGE_FRACTION = 0.05
EDGE_THRESHOLD = 1e-6


class NumericalError(GaugeTDSEError):
    cause = "numerical_failure"


class SolverError(NumericalError):
    cause = "solver_nonconvergence"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BoundaryContaminationError(NumericalError):
    cause = "boundary_contamination"

    def __init__(self, t, edge_fraction):
        super().__init__(
            f"edge density {edge_fraction:.3e} of the norm at t={t:.6g} exceeds "
            f"{EDGE_THRESHOLD:g}; enlarge the box or shorten the run")
        self.t = t
        self.edge_fraction = edge_fraction


@dataclass(frozen=True)
class PropagationPlan:
    dt: float
    n_steps: int
    record_every: int = 1
    solver_tol: float = 1e-12

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if not self.solver_tol <= 1e-12:
            raise ValueError("solver_tol must be <= 1e-12")

    @property
    def duration(self):
        return self.dt * self.n_steps

    @property
    def n_records(self):
        return self.n_steps // self.record_every + 1


def _banded(diag, upper, scale):
    """Banded storage of I + scale * H for solve_banded((1, 1), ...)."""
    n = len(diag)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = scale * upper
    ab[1] = 1.0 + scale * diag
    ab[2, :-1] = scale * np.conj(upper)
    return ab


def _tridiag_matvec(diag, upper, v):
    out = diag * v
    out[:-1] += upper * v[1:]
    out[1:] += np.conj(upper) * v[:-1]
    return out


def _iterative_solve(matvec, diag, rhs, x0, tol):
    n = rhs.size
    op = sla.LinearOperator((n, n), matvec=matvec, dtype=complex)
    precond = sla.LinearOperator((n, n), matvec=lambda v: v / diag, dtype=complex)
    x, info = sla.gmres(op, rhs, x0=x0, rtol=tol, atol=0.0, restart=60, maxiter=200, M=precond)
    residual = np.linalg.norm(matvec(x) - rhs) / np.linalg.norm(rhs)
    if info != 0 or residual > 10 * tol:
        raise SolverError(f"GMRES did not reach tol={tol:g} (residual {residual:.3e})", residual)
    return x


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


def scalar_phase_integral(spec, t0, t1):
    """int_{t0}^{t1} W(x, t) dt on the configuration grid, or None when W vanishes."""
    if not spec.has_scalar_terms:
        return None
    g = spec.grid
    if spec.scalar_terms_static:
        per = [(t1 - t0) * spec.scalar_diagonal(p, t0) for p in spec.particles]
    else:
        per = [spec.scalar_time_integral(p, t0, t1, _GL_NODES, _GL_WEIGHTS)
               for p in spec.particles]
    if g.n_particles == 1:
        return per[0]
    return (per[0][:, None] + per[1][None, :]).ravel()


def _phase(spec, t0, t1):
    w = scalar_phase_integral(spec, t0, t1)
    return None if w is None else np.exp(-1j * w)


def _cn_solve(h, amps, scale, solver_tol):
    if h.grid.n_particles == 1:
        diag, upper = h.bands()
        rhs = amps - scale * _tridiag_matvec(diag, upper, amps)
        return solve_banded((1, 1), _banded(diag, upper, scale), rhs, check_finite=False)
    rhs = amps - scale * h.apply(amps)
    return _iterative_solve(lambda v: v + scale * h.apply(v), 1.0 + scale * h.diagonal(),
                            rhs, amps, solver_tol)


def step_crank_nicolson(psi, spec, t=None, dt=0.01, solver_tol=1e-12):
    """Advance psi from t to t + dt.

    exp(-i int_{t_m}^{t+dt} W) CN[H_0(t_m)] exp(-i int_t^{t_m} W) with t_m = t + dt/2, where
    CN solves (1 + i dt/2 H_0) psi' = (1 - i dt/2 H_0) psi and H_0 is H without W.
    A negative dt propagates backwards.
    """
    t = psi.time if t is None else t
    tm = t + 0.5 * dt
    amps = psi.amplitudes
    first = _phase(spec, t, tm)
    if first is not None:
        amps = first * amps
    amps = _cn_solve(spec.at(tm, scalar=False), amps, 0.5j * dt, solver_tol)
    second = _phase(spec, tm, t + dt)
    if second is not None:
        amps = second * amps
    return WaveFunction(psi.grid, amps, t + dt)


def edge_density(psi, fraction=EDGE_FRACTION):
    """Fraction of the norm sitting in the outermost `fraction` of the box."""
    d = np.abs(psi.amplitudes) ** 2
    return float(np.sum(d[edge_mask(psi.grid, fraction)]) / np.sum(d))


@dataclass
class Trajectory:
    times: np.ndarray
    records: dict
    final: WaveFunction
    states: list = field(default=None)

    def __getitem__(self, name):
        return self.records[name]


def _observer_items(observers):
    if observers is None:
        return []
    if isinstance(observers, dict):
        return list(observers.items())
    return [(getattr(f, "__name__", f"obs{i}"), f) for i, f in enumerate(observers)]


def evolve(psi0, spec, plan, observers=None, keep_states=False, guard=True):
    """Propagate psi0 for plan.n_steps Crank-Nicolson steps.

    ``observers`` maps names to callables ``f(psi, spec, t)``; each is
    evaluated at t0 and then every ``plan.record_every`` steps.  Raises
    BoundaryContaminationError when the edge density exceeds 1e-6 of the norm.
    """
    items = _observer_items(observers)
    records = {name: [] for name, _ in items}
    times, states = [], []

    def record(psi):
        times.append(psi.time)
        for name, f in items:
            records[name].append(f(psi, spec, psi.time))
        if keep_states:
            states.append(psi.copy())

    psi = psi0.copy()
    t0 = psi0.time
    record(psi)
    fast = spec.grid.n_particles == 1 and not spec.is_time_dependent
    mask = edge_mask(spec.grid, EDGE_FRACTION)
    if fast:
        diag, upper = spec.at(t0, scalar=False).bands()
        scale = 0.5j * plan.dt
        ab = _banded(diag, upper, scale)
        half = _phase(spec, t0, t0 + 0.5 * plan.dt)
    for n in range(1, plan.n_steps + 1):
        t = t0 + (n - 1) * plan.dt
        if fast:
            amps = psi.amplitudes if half is None else half * psi.amplitudes
            rhs = amps - scale * _tridiag_matvec(diag, upper, amps)
            amps = solve_banded((1, 1), ab, rhs, check_finite=False)
            if half is not None:
                amps = half * amps
            psi = WaveFunction(psi.grid, amps, t0 + n * plan.dt)
        else:
            psi = step_crank_nicolson(psi, spec, t, plan.dt, plan.solver_tol)
            psi.time = t0 + n * plan.dt
        if guard:
            d = np.abs(psi.amplitudes) ** 2
            frac = np.sum(d[mask]) / np.sum(d)
            if frac > EDGE_THRESHOLD:
                raise BoundaryContaminationError(psi.time, frac)
        if n % plan.record_every == 0:
            record(psi)
    out = {name: np.array(v) for name, v in records.items()}
    return Trajectory(np.array(times), out, psi, states if keep_states else None)


def _imaginary_shift(h):
    """Lower bound on the spectrum: the kinetic stencil is positive semidefinite."""
    g = h.grid
    kin = sum(1.0 / (p.mass * g.dx * g.dx) for p in h.spec.particles)
    return float(np.min(h.diagonal().real)) - kin - 1e-3


def _imaginary_solver(spec, dtau):
    """Return solve(v) for (1 + dtau (H - shift)) x = v, plus the frozen H."""
    if spec.is_time_dependent:
        raise ValueError("imaginary-time relaxation needs a static Hamiltonian")
    h = spec.at(0.0)
    shift = _imaginary_shift(h)
    if spec.grid.n_particles == 1:
        diag, upper = h.bands()
        ab = _banded(diag - shift, upper, dtau)

        def solve(v):
            return solve_banded((1, 1), ab, v, check_finite=False)
    else:
        n = spec.grid.size
        op = sla.LinearOperator((n, n), dtype=complex,
                                matvec=lambda v: v + dtau * (h.apply(v) - shift * v))
        pdiag = 1.0 + dtau * (h.diagonal() - shift)
        precond = sla.LinearOperator((n, n), matvec=lambda v: v / pdiag, dtype=complex)

        def solve(v):
            x, info = sla.cg(op, v, x0=v / pdiag, rtol=1e-13, atol=0.0, maxiter=5000, M=precond)
            if info != 0:
                raise SolverError("conjugate gradient failed in imaginary-time step")
            return x
    return h, solve


def _initial_guess(spec, guess):
    if guess is not None:
        return normalize(guess).amplitudes.copy()
    g = spec.grid
    # lowest-potential region weighted Gaussian, nodeless
    x = g.x
    w = np.exp(-(x**2) / 8.0)
    amps = w if g.n_particles == 1 else np.outer(w, w).ravel()
    v = spec.static_potential
    amps = amps * np.exp(-0.05 * (v - v.min()))
    return normalize(WaveFunction(g, amps)).amplitudes


def ground_state_imaginary_time(spec, grid=None, tol=1e-12, dtau=2.0, max_iter=20000,
                                guess=None):
    """Relax to the ground state by implicit imaginary-time steps.

    Each step solves (1 + dtau (H - s)) psi' = psi, with s a lower bound of
    the spectrum, and renormalizes; every excited component decays
    relative to the ground state.  Stops when successive Rayleigh quotients
    differ by less than ``tol``.  Returns ``(psi0, E0)``.
    """
    if grid is not None and grid != spec.grid:
        raise ValueError("grid does not match the Hamiltonian")
    g = spec.grid
    h, solve = _imaginary_solver(spec, dtau)
    vol = g.volume_element
    psi = _initial_guess(spec, guess)
    energy = np.vdot(psi, h.apply(psi)).real * vol
    for _ in range(max_iter):
        psi = solve(psi)
        psi /= np.sqrt(np.vdot(psi, psi).real * vol)
        new = np.vdot(psi, h.apply(psi)).real * vol
        if abs(new - energy) < tol:
            return WaveFunction(g, psi), new
        energy = new
    raise NumericalError(f"imaginary-time relaxation did not converge in {max_iter} steps")


def lowest_states_imaginary_time(spec, n_states, tol=1e-12, dtau=2.0, max_iter=20000,
                                 guesses=None):
    """The n_states lowest eigenpairs by block imaginary time with Rayleigh-Ritz.

    Returns ``(states, energies)`` with energies ascending.
    """
    g = spec.grid
    h, solve = _imaginary_solver(spec, dtau)
    vol = g.volume_element
    rng = np.random.default_rng(12345)
    if guesses is None:
        base = _initial_guess(spec, None)
        x = g.x if g.n_particles == 1 else g.coordinates()[0].ravel()
        block = np.stack([base * x**k for k in range(n_states)], axis=1)
        block = block + 1e-3 * rng.standard_normal(block.shape) * np.abs(base)[:, None]
    else:
        block = np.stack([w.amplitudes for w in guesses], axis=1)
    energies = np.full(n_states, np.inf)
    for _ in range(max_iter):
        block = np.stack([solve(block[:, k]) for k in range(n_states)], axis=1)
        q, _ = np.linalg.qr(block)
        hq = np.stack([h.apply(q[:, k]) for k in range(n_states)], axis=1)
        small = q.conj().T @ hq
        w, v = np.linalg.eigh(0.5 * (small + small.conj().T))
        block = (q @ v) / np.sqrt(vol)
        if np.max(np.abs(w - energies)) < tol:
            return [WaveFunction(g, block[:, k]) for k in range(n_states)], w
        energies = w
    raise NumericalError(f"block imaginary-time relaxation did not converge in {max_iter} steps")
