import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from gaugetdse.cli import (
    apply_override,
    main,
    parse_scenario,
    run,
    serialize_scenario,
)
from gaugetdse.scenario import Scenario, ScenarioError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL = """\
name: minimal-hydrogen
grid: {n_points: 201, dx: 0.1, x_min: -10.0, n_particles: 1}
particles:
  - {mass: 1.0, charge: -1.0}
nuclei:
  - {charge: 1.0, position: 0.0}
gauge: {form: general}
plan: {dt: 0.01, n_steps: 20}
"""


def write(tmp_path, text, name="scenario.yaml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_minimal_scenario_defaults(tmp_path):
    sc = parse_scenario(write(tmp_path, MINIMAL))
    assert sc.softening == 1.0
    assert sc.plan.record_every == 1
    assert sc.data["external_charges"] == []
    assert sc.data["initial"] == {"kind": "ground-state"}


def test_unknown_key_is_named_with_its_line(tmp_path):
    text = MINIMAL.replace("plan:", "outputs: {polarisation: true}\nplan:")
    with pytest.raises(ScenarioError) as info:
        parse_scenario(write(tmp_path, text))
    msg = str(info.value)
    assert "polarisation" in msg
    assert info.value.line == 8
    assert "line 8" in msg


def test_unknown_top_level_key(tmp_path):
    with pytest.raises(ScenarioError, match="polarisation"):
        parse_scenario(write(tmp_path, MINIMAL + "polarisation: 1\n"))


def test_coulomb_form_rejects_spatially_varying_vector_potential(tmp_path):
    text = MINIMAL.replace("gauge: {form: general}", """\
gauge:
  form: coulomb
  A:
    - space: {kind: sinusoid, amplitude: 1.0, omega: 1.0}
      time: {kind: constant, value: 0.1}""")
    with pytest.raises(ScenarioError) as info:
        parse_scenario(write(tmp_path, text))
    assert "uniform" in str(info.value)
    assert info.value.path == "gauge"


@pytest.mark.parametrize("bad, key", [
    ("n_points: 201", "grid.n_points"),
    ("dx: 0.1", "grid.dx"),
    ("dt: 0.01", "plan.dt"),
])
def test_invalid_values_name_the_key(tmp_path, bad, key):
    field = bad.split(":")[0]
    text = MINIMAL.replace(bad, f"{field}: -1")
    with pytest.raises(ScenarioError) as info:
        parse_scenario(write(tmp_path, text))
    assert info.value.path == key


def test_particle_count_must_match_grid(tmp_path):
    text = MINIMAL.replace("n_particles: 1", "n_particles: 2")
    with pytest.raises(ScenarioError, match="particles"):
        parse_scenario(write(tmp_path, text))


def test_invalid_yaml_reports_line(tmp_path):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(write(tmp_path, MINIMAL + "plan: [unclosed\n"))
    assert info.value.line is not None


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.yaml")), ids=lambda p: p.stem)
def test_round_trip(path, tmp_path):
    sc = parse_scenario(path)
    again = parse_scenario(write(tmp_path, serialize_scenario(sc)))
    assert again == sc
    assert again.digest() == sc.digest()


def test_overrides(tmp_path):
    sc = parse_scenario(write(tmp_path, MINIMAL), ["plan.dt=0.005", "nuclei[0].charge=2",
                                                   "softening=0.5"])
    assert sc.plan.dt == 0.005
    assert sc.nuclei == [(2.0, 0.0)]
    assert sc.softening == 0.5
    with pytest.raises(ScenarioError):
        apply_override(yaml.safe_load(MINIMAL), "plan.missing.dt=1")
    with pytest.raises(ScenarioError):
        apply_override(yaml.safe_load(MINIMAL), "no_equals_sign")


def test_gauge_check_with_zero_chi_passes(tmp_path):
    text = MINIMAL.replace("gauge: {form: general}", """\
gauge:
  form: general
  A:
    - time: {kind: sinusoid, amplitude: 0.05, omega: 0.3}
  chi:
    - space: {kind: constant, value: 0.0}""")
    out = tmp_path / "out"
    assert main(["gauge-check", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True
    assert report["fidelity"] == pytest.approx(1.0, abs=1e-14)
    assert report["provenance"]["scenario_sha256"]
    assert report["provenance"]["version"]
    rows = read_csv(out / "gauge_check.csv")
    assert rows[0] == ["t", "fidelity"]
    assert len(rows) == 22


def test_boundary_trip_exits_with_cause(tmp_path):
    text = MINIMAL + "initial: {kind: gaussian, x0: 0.0, sigma: 1.0, k0: 3.0}\n"
    text = text.replace("n_steps: 20", "n_steps: 400")
    out = tmp_path / "out"
    code = main(["evolve", "--config", str(write(tmp_path, text)), "--out", str(out)])
    assert code == 3
    report = json.loads((out / "report.json").read_text())
    assert report["cause"] == "boundary_contamination"
    assert report["pass"] is False
    assert report["t"] > 0


def test_input_error_exit_code(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["evolve", "--config", str(write(tmp_path, MINIMAL + "bogus: 1\n")),
                 "--out", str(out)])
    assert code == 2
    report = json.loads((out / "report.json").read_text())
    assert report["cause"] == "input_error"
    assert report["key"] == "bogus"
    assert "bogus" in capsys.readouterr().err
    assert main(["evolve", "--config", str(tmp_path / "missing.yaml"), "--out", str(out)]) == 2


def test_evolve_outputs_are_deterministic(tmp_path):
    path = SCENARIOS / "two_electron_kick.yaml"
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["evolve", "--config", str(path), "--out", str(out)]) == 0
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.csv"))
    assert Path("observables.csv") in files
    assert Path("arrays/polarization_000200.csv") in files
    for rel in files:
        assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes()
    rows = read_csv(outs[0] / "observables.csv")
    assert rows[0] == ["t", "norm", "dipole", "mech_momentum_1", "mech_momentum_2",
                       "kinetic_energy", "total_energy_gauge_dependent", "edge_density"]
    assert len(rows) == 1 + 21
    assert float(rows[1][1]) == pytest.approx(1.0)
    # full double precision
    assert float(rows[5][2]) == float(repr(float(rows[5][2])))
    assert (outs[0] / "observables.csv").read_bytes().endswith(b"\n")


def test_ground_state_subcommand(tmp_path):
    code = run("ground-state", parse_scenario(write(tmp_path, MINIMAL)), {"out": tmp_path / "o"})
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["energy"] < -0.5
    rows = read_csv(tmp_path / "o" / "ground_state_charge_density.csv")
    assert rows[0] == ["x", "value"] and len(rows) == 202


def test_vl_check_needs_uniform_drive(tmp_path):
    code = run("vl-check", parse_scenario(write(tmp_path, MINIMAL)), {"out": tmp_path / "o"})
    assert code == 2
    assert json.loads((tmp_path / "o" / "report.json").read_text())["cause"] == "input_error"


def test_response_subcommand(tmp_path):
    text = """\
name: oscillator-response
grid: {n_points: 301, dx: 0.1, x_min: -15.0, n_particles: 1}
particles:
  - {mass: 1.0, charge: -1.0}
well: {kind: harmonic, omega: 0.5}
gauge: {form: length}
plan: {dt: 0.02, n_steps: 1}
response: {kick_strength: 0.001, duration: 200.0}
"""
    out = tmp_path / "out"
    assert main(["response", "--config", str(write(tmp_path, text)), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passive"] is True
    assert report["alpha_static"] == pytest.approx(4.0, rel=0.02)
    assert report["window"] == "gaussian"
    assert read_csv(out / "spectrum.csv")[0] == ["omega", "re", "im"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gaugetdse", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    assert "gauge-check" in proc.stdout


def test_scenario_dict_round_trip():
    sc = Scenario.from_dict(yaml.safe_load(MINIMAL))
    assert Scenario.from_dict(sc.to_dict()) == sc
