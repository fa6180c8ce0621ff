"""
Command-line entry point: parse a scenario file, run one subcommand, write results.

    gaugetdse <subcommand> --config scenario.yaml --out results/ [--override plan.dt=0.001]

Exit codes: 0 pass, 1 check failed, 2 input error, 3 numerical failure.
Every run writes ``report.json``; series go to CSV files with a header row
and shortest round-trip float formatting.  Outputs depend only on the
scenario and the package version, so identical invocations give
byte-identical files.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import (
    NonlinearityError,
    Tolerances,
    gauge_invariance_check,
    harmonic_spectrum,
    linear_susceptibility,
    velocity_length_check,
)
from .core import GaugeTDSEError
from .dynamics import NumericalError, evolve, ground_state_imaginary_time
from .observables import (
    charge_density,
    current_density,
    dipole,
    edge_density,
    polarization_profile,
    standard_observers,
)
from .scenario import SUBCOMMANDS, Scenario, ScenarioError, normalize_scenario

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# scenario files

def _split_path(path):
    """'nuclei[0].charge' -> ['nuclei', 0, 'charge']."""
    out = []
    for part in path.replace("[", ".").replace("]", "").split("."):
        if part:
            out.append(int(part) if part.isdigit() else part)
    return out


def _line_of(node, path):
    """1-based line of the deepest node reachable along the key path."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in _split_path(path):
        if isinstance(node, yaml.MappingNode):
            match = [(k, v) for k, v in node.value if k.value == str(key)]
            if not match:
                break
            node = match[0][1]
            line = match[0][0].start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int):
            if key >= len(node.value):
                break
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def apply_override(data, assignment):
    """Set a dotted key (``plan.dt=0.001``, ``nuclei.0.charge=2``) in a raw scenario dict."""
    if "=" not in assignment:
        raise ScenarioError("--override", f"expected key=value, got {assignment!r}")
    key, text = assignment.split("=", 1)
    path = _split_path(key.strip())
    if not path:
        raise ScenarioError("--override", "empty key")
    value = yaml.safe_load(text)
    target = data
    for part in path[:-1]:
        try:
            target = target[part]
        except (KeyError, IndexError, TypeError):
            raise ScenarioError(key, "override path does not exist") from None
    if isinstance(target, list):
        if not isinstance(path[-1], int) or path[-1] >= len(target):
            raise ScenarioError(key, "override index out of range")
    elif not isinstance(target, dict):
        raise ScenarioError(key, "override path does not name a mapping")
    target[path[-1]] = value
    return data


def load_scenario_dict(path, overrides=()):
    """Raw scenario dict and its YAML node tree (for line numbers)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("", f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ScenarioError("", f"{path} is not UTF-8 text") from None
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError("", f"invalid YAML: {getattr(exc, 'problem', exc)}", line) from None
    if data is None:
        data = {}
    for assignment in overrides:
        apply_override(data, assignment)
    return data, node


def parse_scenario(path, overrides=()):
    """Read, validate and build a scenario.  Errors name the key and its line."""
    data, node = load_scenario_dict(path, overrides)
    try:
        return Scenario(normalize_scenario(data))
    except ScenarioError as exc:
        raise exc.with_line(_line_of(node, exc.path)) from None


def serialize_scenario(scenario):
    """YAML text of the normalized scenario; parsing it gives back an equal scenario."""
    return yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# output helpers

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tolerances(scenario):
    t = Tolerances()
    for key, value in scenario.data["tolerances"].items():
        if hasattr(t, key):
            setattr(t, key, value)
    return t


def _base_report(subcommand, scenario):
    return {
        "subcommand": subcommand,
        "scenario": scenario.name,
        "provenance": {
            "scenario_sha256": scenario.digest(),
            "version": __version__,
            "parameters": scenario.to_dict(),
        },
        "pass": False,
        "cause": None,
    }


def _prefixed(out, scenario, name):
    return out / f"{scenario.data['outputs']['prefix']}{name}"


# ---------------------------------------------------------------------------
# subcommands

def _cmd_ground_state(scenario, out, report):
    if scenario.data["initial"]["kind"] == "ground-state":
        psi = scenario.initial_state()
        energy = scenario.initial_energy
    else:
        psi, energy = ground_state_imaginary_time(scenario.ground_spec)
    rho = charge_density(psi, scenario.particles)
    write_csv(_prefixed(out, scenario, "ground_state_charge_density.csv"), ["x", "value"],
              zip(rho.grid.x, rho.rho))
    report.update({"energy": energy, "dipole": dipole(psi, scenario.particles),
                   "edge_density": edge_density(psi), "pass": True})
    return EXIT_PASS


def _cmd_evolve(scenario, out, report):
    outputs = scenario.data["outputs"]
    arrays = outputs["arrays"]
    stride = outputs["array_every"] // scenario.plan.record_every
    obs = standard_observers()
    snapshots = []

    def grab(psi, spec, t):
        if arrays and len(snapshots) % stride == 0:
            rho = charge_density(psi, spec.particles)
            snap = {"charge_density": rho.rho}
            if "current_density" in arrays:
                snap["current_density"] = current_density(psi, spec.fields,
                                                          spec.particles, t).total
            if "polarization" in arrays:
                snap["polarization"] = polarization_profile(rho).values
            snapshots.append(snap)
        else:
            snapshots.append(None)
        return 0.0

    obs["_snapshot"] = grab
    psi0 = scenario.initial_state()
    try:
        traj = evolve(psi0, scenario.spec, scenario.plan, obs)
    finally:
        x = scenario.grid.x
        step = scenario.plan.record_every
        for k, snap in enumerate(snapshots):
            if snap is None:
                continue
            for name in arrays:
                write_csv(_prefixed(out, scenario, f"arrays/{name}_{k * step:06d}.csv"),
                          ["x", "value"], zip(x, snap[name]))
    if outputs["observables"]:
        n_mom = len(scenario.particles)
        header = (["t", "norm", "dipole"] + [f"mech_momentum_{i + 1}" for i in range(n_mom)]
                  + ["kinetic_energy", "total_energy_gauge_dependent", "edge_density"])
        rows = [[t, traj["norm"][i], traj["dipole"][i], *traj["mech_momentum"][i],
                 traj["kinetic_energy"][i], traj["energy"][i], traj["edge_density"][i]]
                for i, t in enumerate(traj.times)]
        write_csv(_prefixed(out, scenario, "observables.csv"), header, rows)
    norm = traj["norm"]
    report.update({"n_records": len(traj.times), "final_time": traj.final.time,
                   "max_norm_drift": float(np.max(np.abs(norm - norm[0]))),
                   "max_edge_density": float(np.max(traj["edge_density"])), "pass": True})
    return EXIT_PASS


def _cmd_gauge_check(scenario, out, report):
    if scenario.chi is None:
        raise ScenarioError("gauge.chi", "gauge-check needs a chi descriptor")
    result = gauge_invariance_check(scenario, scenario.chi, _tolerances(scenario))
    d = result.to_dict()
    details = d.pop("details")
    write_csv(_prefixed(out, scenario, "gauge_check.csv"), ["t", "fidelity"],
              zip(details["times"], details["fidelity"]))
    d["energy_shift_error"] = details["energy_shift_error"]
    d["state_distance"] = details["state_distance"]
    report.update(d)
    report["cause"] = None if result.passed else "check_failed"
    return EXIT_PASS if result.passed else EXIT_FAIL


def _require_uniform_drive(scenario):
    if scenario.gauge_form != "coulomb" or scenario.spec.fields.a_pot.is_zero:
        raise ScenarioError("gauge", "this subcommand takes its drive from a uniform A(t) "
                                     "in a coulomb-form scenario")


def _cmd_vl_check(scenario, out, report):
    _require_uniform_drive(scenario)
    hb = scenario.data["harmonics"]
    result = velocity_length_check(scenario, _tolerances(scenario),
                                   omega=hb["omega"] if hb else None,
                                   max_order=hb["max_order"] if hb else 7)
    s = result.series
    write_csv(_prefixed(out, scenario, "vl_check.csv"),
              ["t", "dipole_velocity", "dipole_length", "acceleration_velocity",
               "acceleration_length"],
              zip(s["t"], s["dipole_velocity"], s["dipole_length"],
                  s["acceleration_velocity"], s["acceleration_length"]))
    report.update(result.to_dict())
    report["cause"] = None if result.passed else "check_failed"
    return EXIT_PASS if result.passed else EXIT_FAIL


def _cmd_response(scenario, out, report):
    rb = scenario.data["response"]
    if rb is None:
        raise ScenarioError("response", "the response subcommand needs a response block")
    tol = scenario.data["tolerances"].get("linearity", 0.01)
    try:
        spec = linear_susceptibility(scenario, rb["kick_strength"], rb["duration"],
                                     gauge=rb["gauge"], band=tuple(rb["band"]),
                                     linearity_tol=tol)
    except NonlinearityError as exc:
        report.update({"cause": "nonlinear_response", "linearity_deviation": exc.deviation,
                       "tolerances": {"linearity": tol}})
        return EXIT_FAIL
    write_csv(_prefixed(out, scenario, "spectrum.csv"), ["omega", "re", "im"],
              zip(spec.frequencies, spec.values.real, spec.values.imag))
    freqs, vals = spec.band(*rb["band"])
    scale = float(np.max(np.abs(vals))) if len(vals) else 0.0
    positive = freqs > 0
    min_im = float(np.min(vals.imag[positive])) if np.any(positive) else 0.0
    passive = bool(min_im >= -1e-3 * scale)
    report.update({
        "alpha_static": float(spec.values[0].real),
        "kick_strength": spec.kick_strength,
        "window": spec.window,
        "metadata": spec.metadata,
        "min_imag_alpha": min_im,
        "passive": passive,
        "tolerances": {"linearity": tol, "passivity": 1e-3},
        "pass": passive,
        "cause": None if passive else "not_passive",
    })
    return EXIT_PASS if passive else EXIT_FAIL


def _cmd_harmonics(scenario, out, report):
    _require_uniform_drive(scenario)
    hb = scenario.data["harmonics"]
    if hb is None:
        raise ScenarioError("harmonics", "the harmonics subcommand needs a harmonics block")
    spec = harmonic_spectrum(scenario, gauge="length", omega=hb["omega"],
                             max_order=hb["max_order"])
    write_csv(_prefixed(out, scenario, "harmonic_spectrum.csv"), ["omega", "power"],
              zip(spec.frequencies, spec.values))
    report.update({"window": spec.window, "omega": hb["omega"],
                   "orders": spec.metadata["orders"], "peaks": spec.metadata["peaks"],
                   "pass": True})
    return EXIT_PASS


COMMANDS = {
    "ground-state": _cmd_ground_state,
    "evolve": _cmd_evolve,
    "gauge-check": _cmd_gauge_check,
    "vl-check": _cmd_vl_check,
    "response": _cmd_response,
    "harmonics": _cmd_harmonics,
}


def run(subcommand, scenario, flags):
    """Run one subcommand and write its outputs under ``flags['out']``; returns the exit code."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    out = Path(flags["out"])
    out.mkdir(parents=True, exist_ok=True)
    report = _base_report(subcommand, scenario)
    try:
        code = COMMANDS[subcommand](scenario, out, report)
    except ScenarioError as exc:
        report.update({"cause": "input_error", "error": str(exc)})
        code = EXIT_INPUT
    except NumericalError as exc:
        report.update({"cause": exc.cause, "error": str(exc)})
        for key in ("t", "edge_fraction", "residual"):
            if hasattr(exc, key):
                report[key] = getattr(exc, key)
        code = EXIT_NUMERICAL
    write_json(out / "report.json", report)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="gaugetdse",
                                description="Gauge-covariant 1D TDSE simulator.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="scenario YAML file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="replace a scenario value, e.g. plan.dt=0.001 (repeatable)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scenario = parse_scenario(args.config, args.override)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        out = Path(args.out)
        write_json(out / "report.json", {"subcommand": args.subcommand, "pass": False,
                                         "cause": "input_error", "error": str(exc),
                                         "line": exc.line, "key": exc.path})
        return EXIT_INPUT
    try:
        code = run(args.subcommand, scenario, {"out": args.out})
    except GaugeTDSEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if code != EXIT_PASS:
        with open(Path(args.out) / "report.json", encoding="utf-8") as fh:
            cause = json.load(fh).get("cause")
        print(f"{args.subcommand}: failed ({cause})", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
