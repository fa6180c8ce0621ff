"""
In-memory scenario: the validated contents of a scenario file.

A scenario is described by a plain nested dict (what YAML produces).
``scenario_from_dict`` checks it against the schema below, fills the
documented defaults and builds grid, particles, fields and plan.  The
normalized dict is kept, so ``to_dict`` round-trips exactly.

Documented defaults: ``softening`` 1.0, ``plan.record_every`` 1,
``plan.solver_tol`` 1e-12, ``nuclei``/``external_charges`` empty,
``initial`` ground state, ``outputs`` scalar observables only.
"""

import copy
import hashlib
import json

import numpy as np

from .core import GaugeTDSEError, ParticleSpec, gaussian_packet, make_grid
from .dynamics import PropagationPlan, ground_state_imaginary_time
from .fields import FUNCTION_KINDS, FieldConfig, GaugeFunction, field_from_dict
from .hamiltonian import (
    GAUGE_FORMS,
    HamiltonianSpec,
    build_external_potential,
    build_internal_potential,
    harmonic_potential,
)

ARRAY_NAMES = ("charge_density", "current_density", "polarization")
SUBCOMMANDS = ("ground-state", "evolve", "gauge-check", "vl-check", "response", "harmonics")


class ScenarioError(GaugeTDSEError):
    """Schema violation or physically inconsistent scenario.  ``path`` is the offending key."""

    cause = "input_error"

    def __init__(self, path, message, line=None):
        self.path = path
        self.message = message
        self.line = line
        super().__init__(self._text())

    def _text(self):
        where = self.path or "<root>"
        if self.line is not None:
            where = f"line {self.line}: {where}"
        return f"{where}: {self.message}"

    def with_line(self, line):
        return ScenarioError(self.path, self.message, line)


# ---------------------------------------------------------------------------
# schema helpers

def _join(path, key):
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else str(key)


def _mapping(value, path, allowed, required=()):
    if not isinstance(value, dict):
        raise ScenarioError(path, f"expected a mapping, got {type(value).__name__}")
    for key in value:
        if key not in allowed:
            raise ScenarioError(_join(path, key),
                                f"unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
    for key in required:
        if key not in value:
            raise ScenarioError(_join(path, key), "required key is missing")
    return value


def _number(value, path, positive=False, integer=False, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if not np.isfinite(value):
        raise ScenarioError(path, "must be finite")
    if positive and not value > 0:
        raise ScenarioError(path, f"must be positive, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(path, f"must be >= {minimum}, got {value!r}")
    return int(value) if integer else float(value)


def _list(value, path):
    if value is None:
        return []
    if not isinstance(value, list):
        raise ScenarioError(path, f"expected a list, got {type(value).__name__}")
    return value


def _function(d, path):
    if not isinstance(d, dict) or "kind" not in d:
        raise ScenarioError(path, "function descriptor needs a 'kind'")
    kind = d["kind"]
    if kind not in FUNCTION_KINDS:
        raise ScenarioError(_join(path, "kind"),
                            f"unknown kind {kind!r} (allowed: {', '.join(FUNCTION_KINDS)})")
    _mapping(d, path, FUNCTION_KINDS[kind] | {"kind"})
    out = {"kind": kind}
    for key, v in d.items():
        if key == "kind":
            continue
        if key == "factors":
            factors = _list(v, _join(path, key))
            if len(factors) != 2:
                raise ScenarioError(_join(path, key), "a product takes exactly two factors")
            out[key] = [_function(f, _join(_join(path, key), i)) for i, f in enumerate(factors)]
        elif key in ("coeffs", "points", "values"):
            items = _list(v, _join(path, key))
            out[key] = [_number(c, _join(_join(path, key), i)) for i, c in enumerate(items)]
        else:
            out[key] = _number(v, _join(path, key))
    return out


def _field_terms(value, path):
    terms = _list(value, path)
    out = []
    for i, term in enumerate(terms):
        p = _join(path, i)
        _mapping(term, p, {"space", "time"})
        out.append({
            "space": _function(term.get("space", {"kind": "constant", "value": 1.0}),
                               _join(p, "space")),
            "time": _function(term.get("time", {"kind": "constant", "value": 1.0}),
                              _join(p, "time")),
        })
    try:
        field_from_dict(out)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(path, str(exc)) from None
    return out


def _charges(value, path):
    out = []
    for i, c in enumerate(_list(value, path)):
        p = _join(path, i)
        _mapping(c, p, {"charge", "position"}, ("charge", "position"))
        out.append({"charge": _number(c["charge"], _join(p, "charge")),
                    "position": _number(c["position"], _join(p, "position"))})
    return out


# ---------------------------------------------------------------------------
# normalization

def normalize_scenario(raw):
    """Validate a raw scenario dict and return it with defaults filled in."""
    top = {"name", "grid", "particles", "nuclei", "external_charges", "softening", "well",
           "gauge", "initial", "plan", "outputs", "response", "harmonics", "tolerances"}
    _mapping(raw, "", top, ("name", "grid", "particles", "gauge", "plan"))
    out = {"name": str(raw["name"])}

    g = _mapping(raw["grid"], "grid", {"n_points", "dx", "x_min", "n_particles"},
                 ("n_points", "dx", "x_min", "n_particles"))
    out["grid"] = {
        "n_points": _number(g["n_points"], "grid.n_points", integer=True, minimum=8),
        "dx": _number(g["dx"], "grid.dx", positive=True),
        "x_min": _number(g["x_min"], "grid.x_min"),
        "n_particles": _number(g["n_particles"], "grid.n_particles", integer=True),
    }
    if out["grid"]["n_particles"] not in (1, 2):
        raise ScenarioError("grid.n_particles", "must be 1 or 2")

    parts = _list(raw["particles"], "particles")
    if len(parts) != out["grid"]["n_particles"]:
        raise ScenarioError("particles", f"{len(parts)} particles listed but grid.n_particles "
                                         f"is {out['grid']['n_particles']}")
    out["particles"] = []
    for i, p in enumerate(parts):
        path = _join("particles", i)
        _mapping(p, path, {"mass", "charge"}, ("mass", "charge"))
        out["particles"].append({"mass": _number(p["mass"], _join(path, "mass"), positive=True),
                                 "charge": _number(p["charge"], _join(path, "charge"))})

    out["nuclei"] = _charges(raw.get("nuclei"), "nuclei")
    out["external_charges"] = _charges(raw.get("external_charges"), "external_charges")
    out["softening"] = _number(raw.get("softening", 1.0), "softening", positive=True)

    well = raw.get("well")
    if well is not None:
        _mapping(well, "well", {"kind", "omega"}, ("kind", "omega"))
        if well["kind"] != "harmonic":
            raise ScenarioError("well.kind", f"unknown well kind {well['kind']!r} "
                                             "(allowed: harmonic)")
        out["well"] = {"kind": "harmonic", "omega": _number(well["omega"], "well.omega",
                                                            positive=True)}
    else:
        out["well"] = None

    gb = _mapping(raw["gauge"], "gauge", {"form", "phi", "A", "e0", "E", "chi"}, ("form",))
    if gb["form"] not in GAUGE_FORMS:
        raise ScenarioError("gauge.form", f"unknown gauge form {gb['form']!r} "
                                          f"(allowed: {', '.join(GAUGE_FORMS)})")
    if "e0" in gb and "E" in gb:
        raise ScenarioError("gauge.E", "give the homogeneous field as either e0 or E, not both")
    out["gauge"] = {
        "form": gb["form"],
        "phi": _field_terms(gb.get("phi"), "gauge.phi"),
        "A": _field_terms(gb.get("A"), "gauge.A"),
        "e0": _field_terms(gb.get("e0", gb.get("E")), "gauge.E" if "E" in gb else "gauge.e0"),
        "chi": _field_terms(gb["chi"], "gauge.chi") if gb.get("chi") is not None else None,
    }

    init = raw.get("initial", {"kind": "ground-state"})
    _mapping(init, "initial", {"kind", "x0", "sigma", "k0"}, ("kind",))
    if init["kind"] == "ground-state":
        if len(init) > 1:
            raise ScenarioError("initial", "ground-state takes no parameters")
        out["initial"] = {"kind": "ground-state"}
    elif init["kind"] == "gaussian":
        out["initial"] = {"kind": "gaussian"}
        for key, default in (("x0", 0.0), ("sigma", None), ("k0", 0.0)):
            if key not in init and default is None:
                raise ScenarioError(_join("initial", key), "required key is missing")
            v = init.get(key, default)
            vals = v if isinstance(v, list) else [v]
            nums = [_number(u, _join("initial", key), positive=(key == "sigma")) for u in vals]
            out["initial"][key] = nums if isinstance(v, list) else nums[0]
    else:
        raise ScenarioError("initial.kind", f"unknown initial state {init['kind']!r} "
                                            "(allowed: ground-state, gaussian)")

    pl = _mapping(raw["plan"], "plan", {"dt", "n_steps", "record_every", "solver_tol"},
                  ("dt", "n_steps"))
    out["plan"] = {
        "dt": _number(pl["dt"], "plan.dt", positive=True),
        "n_steps": _number(pl["n_steps"], "plan.n_steps", integer=True, minimum=1),
        "record_every": _number(pl.get("record_every", 1), "plan.record_every", integer=True,
                                minimum=1),
        "solver_tol": _number(pl.get("solver_tol", 1e-12), "plan.solver_tol", positive=True),
    }
    if out["plan"]["solver_tol"] > 1e-12:
        raise ScenarioError("plan.solver_tol", "must be <= 1e-12")

    ob = _mapping(raw.get("outputs", {}), "outputs",
                  {"observables", "arrays", "array_every", "prefix"})
    arrays = _list(ob.get("arrays"), "outputs.arrays")
    for i, name in enumerate(arrays):
        if name not in ARRAY_NAMES:
            raise ScenarioError(_join("outputs.arrays", i),
                                f"unknown array {name!r} (allowed: {', '.join(ARRAY_NAMES)})")
    out["outputs"] = {
        "observables": bool(ob.get("observables", True)),
        "arrays": list(arrays),
        "array_every": _number(ob.get("array_every", out["plan"]["record_every"]),
                               "outputs.array_every", integer=True, minimum=1),
        "prefix": str(ob.get("prefix", "")),
    }
    if out["outputs"]["array_every"] % out["plan"]["record_every"]:
        raise ScenarioError("outputs.array_every", "must be a multiple of plan.record_every")

    rb = raw.get("response")
    if rb is not None:
        _mapping(rb, "response", {"kick_strength", "duration", "gauge", "band"},
                 ("kick_strength", "duration"))
        band = _list(rb.get("band", [0.0, 1.0]), "response.band")
        if len(band) != 2:
            raise ScenarioError("response.band", "expected [low, high]")
        gauge_name = rb.get("gauge", "length")
        if gauge_name not in ("length", "velocity"):
            raise ScenarioError("response.gauge", "must be length or velocity")
        out["response"] = {
            "kick_strength": _number(rb["kick_strength"], "response.kick_strength"),
            "duration": _number(rb["duration"], "response.duration", positive=True),
            "gauge": gauge_name,
            "band": [_number(b, "response.band") for b in band],
        }
    else:
        out["response"] = None

    hb = raw.get("harmonics")
    if hb is not None:
        _mapping(hb, "harmonics", {"omega", "max_order"}, ("omega",))
        out["harmonics"] = {
            "omega": _number(hb["omega"], "harmonics.omega", positive=True),
            "max_order": _number(hb.get("max_order", 7), "harmonics.max_order", integer=True,
                                 minimum=1),
        }
    else:
        out["harmonics"] = None

    tb = raw.get("tolerances", {}) or {}
    keys = {"infidelity", "observable", "energy_shift", "dipole_l2", "harmonic_peaks",
            "linearity"}
    _mapping(tb, "tolerances", keys)
    out["tolerances"] = {k: _number(v, _join("tolerances", k), positive=True)
                         for k, v in sorted(tb.items())}
    return out


# ---------------------------------------------------------------------------
# scenario object

class Scenario:
    """A validated scenario with lazily built Hamiltonians and initial state."""

    def __init__(self, data):
        self.data = data
        g = data["grid"]
        self.name = data["name"]
        self.grid = make_grid(g["n_points"], g["dx"], g["x_min"], g["n_particles"])
        self.particles = tuple(ParticleSpec(p["mass"], p["charge"]) for p in data["particles"])
        self.softening = data["softening"]
        self.nuclei = [(c["charge"], c["position"]) for c in data["nuclei"]]
        self.external_charges = [(c["charge"], c["position"])
                                 for c in data["external_charges"]]
        gb = data["gauge"]
        self.gauge_form = gb["form"]
        self.fields = FieldConfig(phi=field_from_dict(gb["phi"]), a_pot=field_from_dict(gb["A"]),
                                  e0=_uniform_field(gb["e0"], "gauge.e0"))
        self.chi = (GaugeFunction(field_from_dict(gb["chi"]), _describe(gb["chi"]))
                    if gb["chi"] is not None else None)
        p = data["plan"]
        self.plan = PropagationPlan(p["dt"], p["n_steps"], p["record_every"], p["solver_tol"])
        internal = build_internal_potential(self.particles, self.grid, self.softening,
                                            self.nuclei)
        if data["well"] is not None:
            internal = internal + harmonic_potential(self.grid, self.particles,
                                                     data["well"]["omega"])
        external = build_external_potential(self.external_charges, self.particles, self.grid,
                                            self.softening)
        try:
            self.spec = HamiltonianSpec(self.grid, self.particles, self.fields, internal,
                                        external, self.gauge_form, self.softening)
        except ValueError as exc:
            raise ScenarioError("gauge", str(exc)) from None
        self.static_spec = HamiltonianSpec(self.grid, self.particles, FieldConfig(), internal,
                                           external, "general", self.softening)
        self._initial = None

    @classmethod
    def from_dict(cls, raw):
        return cls(normalize_scenario(copy.deepcopy(raw)))

    def to_dict(self):
        return copy.deepcopy(self.data)

    def digest(self):
        """SHA-256 of the canonical JSON form of the normalized scenario."""
        text = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @property
    def ground_spec(self):
        """The spec whose ground state starts a run: the full one if static, else field-free."""
        return self.static_spec if self.spec.is_time_dependent else self.spec

    def initial_state(self):
        if self._initial is None:
            init = self.data["initial"]
            if init["kind"] == "ground-state":
                self._initial, self.initial_energy = ground_state_imaginary_time(self.ground_spec)
            else:
                self._initial = gaussian_packet(self.grid, init["x0"], init["sigma"], init["k0"])
        return self._initial.copy()

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.data == other.data

    def __repr__(self):
        return f"Scenario({self.name!r}, form={self.gauge_form!r}, grid={self.grid})"


def _uniform_field(terms, path):
    f = field_from_dict(terms)
    if not f.is_uniform:
        raise ScenarioError(path, "the homogeneous field must not depend on x")
    return f


def _describe(terms):
    return json.dumps(terms, sort_keys=True, separators=(",", ":"))


def scenario_from_dict(raw):
    return Scenario.from_dict(raw)
