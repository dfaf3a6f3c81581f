import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fevo.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(command, config, out, *extra):
    return main([command, "--config", str(CONFIGS / config), "--out", str(out), *extra])


def read_kv(path):
    out = {}
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            continue
        k, v = line.split(" = ", 1)
        out[k] = json.loads(v)
    return out


def test_simulate_files_and_header(tmp_path):
    assert run("simulate", "example3.toml", tmp_path) == 0
    rows = (tmp_path / "ensemble.csv").read_text().splitlines()
    assert rows[0].startswith("# fevo ") and "command=simulate" in rows[0]
    assert "seed=2024" in rows[0] and "config_sha256=" in rows[0]
    assert rows[1] == "path,k,t,x1"
    assert rows[-1].split(",")[-1] == "1.5"
    summary = read_kv(tmp_path / "summary.txt")
    assert summary["steps"] == 10


def test_simulate_twice_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("simulate", "jump_diffusion.toml", a, "--paths", "50") == 0
    assert run("simulate", "jump_diffusion.toml", b, "--paths", "50") == 0
    for name in ("ensemble.csv", "summary.txt"):
        if (a / name).exists():
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_flag_changes_output(tmp_path):
    run("simulate", "brownian.toml", tmp_path / "a", "--paths", "5", "--n", "4")
    run("simulate", "brownian.toml", tmp_path / "b", "--paths", "5", "--n", "4", "--seed", "8")
    name = next(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert (tmp_path / "a" / name).read_text() != (tmp_path / "b" / name).read_text()
    assert "seed=8" in (tmp_path / "b" / name).read_text().splitlines()[0]


def test_spacetime_columns(tmp_path):
    assert run("spacetime", "example3.toml", tmp_path) == 0
    rows = (tmp_path / "spacetime.csv").read_text().splitlines()
    assert rows[1] == "path,k,t,s,x1"
    last = rows[-1].split(",")
    assert last[-1] == "1.5"


def test_probe_symbol(tmp_path):
    assert run("probe-symbol", "brownian.toml", tmp_path) == 0
    text = (tmp_path / "report.txt").read_text()
    assert "verdict = pass" in text
    assert (tmp_path / "report.csv").read_text().splitlines()[1].startswith("scenario,check")


def test_generator_outputs(tmp_path):
    assert run("generator", "example3.toml", tmp_path) == 0
    rows = (tmp_path / "generator.csv").read_text().splitlines()
    assert rows[1] == "x,f,Af"
    for side in ("right", "left"):
        head = (tmp_path / f"probe_{side}.csv").read_text().splitlines()[1]
        assert head == "x,f,Af,stderr"


def test_generator_spacetime(tmp_path):
    assert run("generator", "brownian.toml", tmp_path) == 0
    rows = (tmp_path / "spacetime_generator.csv").read_text().splitlines()
    assert rows[1] == "s,x,f,Lf"


def test_chernoff_residual(tmp_path):
    assert run("chernoff", "brownian.toml", tmp_path) == 0
    meta = read_kv(tmp_path / "chernoff_meta.txt")
    assert meta["evolution_property_residual"] <= 1e-8
    rows = (tmp_path / "chernoff.csv").read_text().splitlines()
    assert rows[1] == "x,g,Ug"
    assert "assumed, not checked" in (tmp_path / "report.txt").read_text()


def test_check_example3(tmp_path):
    assert run("check", "example3.toml", tmp_path) == 0
    text = (tmp_path / "report.txt").read_text()
    assert "verdict = pass" in text
    assert "continuous = false" in text or "discontinu" in text
    assert "0.5" in text


@pytest.mark.parametrize("config", ["brownian.toml", "smooth_drift.toml", "planar.toml"])
def test_check_other_configs(tmp_path, config):
    assert run("check", config, tmp_path) == 0


def test_workers_byte_identical(tmp_path):
    a, b = tmp_path / "w1", tmp_path / "w4"
    assert run("simulate", "brownian.toml", a, "--workers", "1", "--paths", "1100") == 0
    assert run("simulate", "brownian.toml", b, "--workers", "4", "--paths", "1100") == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_error_record(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[symbol]\ndimension = 1\ndrift = "1 + * s"\n')
    code = main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["status"] == "error" and rec["kind"] == "ConfigError"
    assert f"{bad}:3:14" in rec["message"]
    assert read_kv(tmp_path / "o" / "error.txt")["kind"] == "ConfigError"


def test_runtime_error_record(tmp_path):
    cfg = tmp_path / "neg.toml"
    cfg.write_text('[symbol]\ndimension = 1\ndrift = "4"\ndiffusion = "1 - x1"\n')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "step" in read_kv(tmp_path / "o" / "error.txt")["message"]


def test_failing_check_exits_one(tmp_path):
    cfg = tmp_path / "wrong.toml"
    text = (CONFIGS / "example3.toml").read_text().replace('expect = "split"', 'expect = "coincide"')
    cfg.write_text(text)
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["bogus", "--config", "x", "--out", "y"])
    assert exc.value.code == 2


def test_console_script(tmp_path):
    exe = shutil.which("fevo")
    cmd = [exe] if exe else [sys.executable, "-m", "fevo.cli"]
    out = subprocess.run(cmd + ["--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("fevo ")
    res = subprocess.run(
        cmd + ["simulate", "--config", str(CONFIGS / "example3.toml"), "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    terminal = np.loadtxt(tmp_path / "ensemble.csv", delimiter=",", skiprows=2)[-1, -1]
    assert terminal == 1.5
