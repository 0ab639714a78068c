import csv
import json

import numpy as np
import pytest

from skewswitch.cli import main, to_json
from skewswitch.config import SCHEMA_VERSION, load_config, parse_config
from skewswitch.errors import ConfigInvalid


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_defaults_parse():
    cfg = parse_config({})
    assert cfg.base == "cat-map" and cfg.depth == 1 and cfg.seed == 0
    assert cfg.lyapunov["n"] == 10_000


def test_two_stable_preset_uses_stage_lambdas():
    cfg = parse_config({"base": "t3-two-stable", "depth": 2})
    assert [p["lambda"] for p in cfg.profiles] == [0.2, 0.12]


@pytest.mark.parametrize("raw, field", [
    ({"profile": {"lambda": 0.5, "eta": 0.4}}, "profile"),
    ({"profile": {"mu": 0.9}}, "profile"),
    ({"base": "suspension-flow", "profile": {"N": 1}}, "profile.N"),
    ({"bogus": 1}, "bogus"),
    ({"cones": {"aperture": -1}}, "cones.aperture"),
    ({"lyapunov": {"n": 1.5}}, "lyapunov.n"),
    ({"profile": {"a": 0.1}}, "profile"),
    ({"base": "cat-map", "mode": "flow"}, "mode"),
])
def test_invalid_configs(raw, field):
    with pytest.raises(ConfigInvalid) as exc:
        parse_config(raw)
    assert field in [f for f, _ in exc.value.problems]


def test_all_problems_reported_together():
    with pytest.raises(ConfigInvalid) as exc:
        parse_config({"bogus": 1, "seed": -3, "depth": 0})
    assert {"bogus", "seed", "depth"} <= {f for f, _ in exc.value.problems}


def test_order_violation_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, {"profile": {"lambda": 0.6, "eta": 0.4}})
    assert main(["--config", cfg, "--out", str(tmp_path / "o"), "construct"]) == 2
    err = capsys.readouterr().err
    assert "0 < λ < η < 1 < μ" in err


def test_flow_needs_enough_time(tmp_path, capsys):
    cfg = _write(tmp_path, {"base": "suspension-flow", "profile": {"N": 1}})
    assert main(["--config", cfg, "construct"]) == 2
    assert "η^N < λ" in capsys.readouterr().err


def test_bad_json_and_missing_file(tmp_path, capsys):
    assert main(["--config", _write(tmp_path, "{not json")]) == 2
    assert main(["--config", str(tmp_path / "missing.json")]) == 2
    err = capsys.readouterr().err
    assert "invalid JSON" in err and "file not found" in err


def test_bad_seed_and_threads(tmp_path):
    assert main(["--seed", str(2**64), "--out", str(tmp_path)]) == 2
    assert main(["--threads", "0", "--out", str(tmp_path)]) == 2


def test_load_config_seed_override(tmp_path):
    cfg = load_config(_write(tmp_path, {"seed": 4}), seed=9)
    assert cfg.seed == 9


def test_profiles_dump(tmp_path):
    out = tmp_path / "o"
    cfg = _write(tmp_path, {"profiles_dump": {"points": 11}})
    assert main(["--config", cfg, "--out", str(out), "profiles", "dump"]) == 0
    rows = list(csv.reader((out / "profiles.csv").open()))
    assert rows[0] == ["stage", "z", "h", "dh", "tau", "dtau", "rho", "drho"]
    assert len(rows) == 12
    assert float(rows[1][2]) == 0.0 and float(rows[-1][2]) == 1.0


def test_construct_writes_report(tmp_path):
    out = tmp_path / "o"
    assert main(["--out", str(out), "construct"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema_version"] == SCHEMA_VERSION
    assert rep["verdict"] == "pass" and list(rep["suites"]) == ["construct"]
    assert rep["manifest"]["config"]["seed"] == 0
    assert "construct" in json.loads((out / "timings.json").read_text())


def test_suite_selection_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["--suite", "lyapunov", "--suite", "cones", "--seed", "5"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "report"]) == 0
    ra, rb = (a / "report.json").read_bytes(), (b / "report.json").read_bytes()
    assert ra == rb
    assert list(json.loads(ra)["suites"]) == ["cones", "lyapunov"]
    assert (a / "lyapunov_running.csv").read_bytes() == (b / "lyapunov_running.csv").read_bytes()


def test_threads_do_not_change_report(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["--suite", "construct", "--suite", "lyapunov"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--threads", "2"]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_seed_changes_report(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--suite", "lyapunov", "--out", str(a), "--seed", "1"]) == 0
    assert main(["--suite", "lyapunov", "--out", str(b), "--seed", "2"]) == 0
    assert (a / "report.json").read_bytes() != (b / "report.json").read_bytes()


def test_to_json_handles_numpy_and_nonfinite():
    obj = {"a": np.float64(np.inf), "b": np.arange(2), "c": (np.bool_(True), np.nan), 1: np.int32(3)}
    assert to_json(obj) == {"a": "inf", "b": [0, 1], "c": [True, "nan"], "1": 3}
