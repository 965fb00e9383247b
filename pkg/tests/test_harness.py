import json
import subprocess
import sys

import pytest

from scaleflow.__main__ import main
from scaleflow.harness import CHECKS, SCHEMA, TOPICS, ConfigError, bundled_scenarios, describe, load_scenario, run

FAST = """
name = "tiny"
summary = "small isometry and Lagrangian run"
seed = 3
checks = ["isometry", "lagrangian"]

[isometry]
count = 20

[lagrangian]
count = 5
"""


def write(tmp_path, text, name="scen.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_bundled_catalog():
    names = bundled_scenarios()
    assert len(names) >= 8
    for name in names:
        scen = load_scenario(name)
        assert scen["name"] == name and set(scen["checks"]) <= set(CHECKS)


def test_every_check_has_a_topic():
    assert set(TOPICS) == set(CHECKS)


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert "ledger-perturbed-quadratic" in out and len(out.splitlines()) >= 8


def test_describe(capsys):
    assert main(["describe", "lagrangian-reflection"]) == 0
    assert "Lagrangian boundary" in capsys.readouterr().out
    assert "runtime budget" in describe("linear-energy-identity")


def test_unknown_scenario_exits_2(capsys):
    assert main(["describe", "no-such-scenario"]) == 2
    assert "no-such-scenario" in capsys.readouterr().err


def test_missing_subcommand_exits_2():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


@pytest.mark.parametrize(
    "text",
    [
        "name = 'x'\nchecks = [",
        "summary = 'no name'\nchecks = ['isometry']",
        "name = 'x'\nchecks = ['nonsense']",
        "name = 'x'\nchecks = []",
        "name = 'x'\nseed = 'one'\nchecks = ['isometry']",
        "name = 'x'\nchecks = ['tails']\n[tails]\nladder = [16, 8]",
        "name = 'x'\nchecks = ['isometry']\n[isometry]\ncount = 'many'",
    ],
    ids=["toml", "no-name", "unknown-check", "empty", "seed-type", "ladder", "entry-type"],
)
def test_malformed_scenarios_exit_2(tmp_path, text):
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path / "out")]) == 2


def test_failing_check_exits_1(tmp_path, capsys):
    text = "name = 'strict'\nchecks = ['isometry']\n[isometry]\ncount = 5\nrel_tol = -1.0\n"
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_run_writes_report(tmp_path):
    code, report = run(write(tmp_path, FAST), out=str(tmp_path / "out"))
    assert code == 0 and report["passed"]
    on_disk = json.loads((tmp_path / "out" / "tiny" / "report.json").read_text())
    assert on_disk["schema"] == SCHEMA and on_disk["seed"] == 3
    meta = json.loads((tmp_path / "out" / "tiny" / "meta.json").read_text())
    assert set(meta["seconds"]) == {"isometry", "lagrangian"}


def test_seed_override(tmp_path):
    _, report = run(write(tmp_path, FAST), out=str(tmp_path), seed=11)
    assert report["seed"] == 11


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SCALEFLOW_OUT", str(tmp_path / "env"))
    assert main(["run", write(tmp_path, FAST)]) == 0
    assert (tmp_path / "env" / "tiny" / "report.json").is_file()


def test_energy_report_values(tmp_path):
    _, report = run("linear-energy-identity", out=str(tmp_path))
    closed = report["checks"]["energy"]["metrics"]["closed_form"]
    assert abs(closed["action_drop"] - 3.6269) < 1e-4


def test_reports_are_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert main(["run", "tail-mechanism", "--out", str(tmp_path / sub)]) == 0
    for name in ("report.json", "tails.csv", "tails.svg"):
        assert (tmp_path / "a" / "tail-mechanism" / name).read_bytes() == (tmp_path / "b" / "tail-mechanism" / name).read_bytes()


def test_jobs_do_not_change_results(tmp_path):
    text = "name = 'par'\nchecks = ['energy']\n[energy]\nfamily = 4\n"
    path = write(tmp_path, text)
    _, one = run(path, out=str(tmp_path / "1"), jobs=1)
    _, many = run(path, out=str(tmp_path / "2"), jobs=3)
    assert one == many


def test_bad_jobs_value(tmp_path):
    assert main(["run", write(tmp_path, FAST), "--jobs", "0", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "scaleflow", "list-scenarios"], capture_output=True, text=True)
    assert proc.returncode == 0 and "tail-mechanism" in proc.stdout


@pytest.mark.parametrize("name", sorted(bundled_scenarios()))
def test_bundled_scenario_passes(tmp_path, name):
    code, report = run(name, out=str(tmp_path), jobs=4)
    assert code == 0, json.dumps(report["checks"], indent=1)[:2000]
    meta = json.loads((tmp_path / name / "meta.json").read_text())
    assert meta["total_seconds"] <= meta["budget_seconds"]


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)
