import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from delayjump.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MODEL = json.loads((CONFIGS / "simulate.json").read_text())["model"]


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(tmp_path, command, cfg, out="out", extra=()):
    path = cfg if isinstance(cfg, str) else _write(tmp_path, cfg)
    return main([command, "--config", path, "--out", str(tmp_path / out), *extra])


def _rows(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# seed=")
    return list(csv.DictReader(lines[1:]))


def test_simulate_writes_provenance_and_rows(tmp_path):
    cfg = {"version": 1, "model": MODEL, "grid": {"T": 1.0, "n": 64}, "seed": 3, "simulate": {"n_paths": 4}}
    assert _run(tmp_path, "simulate", cfg) == 0
    text = (tmp_path / "out" / "paths.csv").read_text()
    assert "config_sha256=" in text.splitlines()[0]
    rows = _rows(tmp_path / "out" / "paths.csv")
    assert {int(r["path_id"]) for r in rows} == {0, 1, 2, 3}
    assert all(float(r["value"]) > 0 for r in rows)
    assert sum(r["is_jump"] == "0" for r in rows) == 4 * 65


def test_simulate_riskless_closed_form(tmp_path):
    model = dict(MODEL, g={"name": "constant", "value": 0.0})
    cfg = {"version": 1, "model": model, "grid": {"T": 1.0, "n": 16}, "seed": 1, "simulate": {"n_paths": 2}}
    assert _run(tmp_path, "simulate", cfg) == 0
    for r in _rows(tmp_path / "out" / "paths.csv"):
        assert float(r["value"]) == pytest.approx(math.exp(0.05 * float(r["time"])), rel=1e-13)


@pytest.mark.parametrize("name", ["simulate.json", "converge.json"])
def test_thread_count_is_invisible(tmp_path, name):
    cfg = json.loads((CONFIGS / name).read_text())
    if "converge" in cfg:
        cfg["converge"].update(levels=[3, 4, 5, 6], ref_level=9, n_paths=100)
    path = _write(tmp_path, cfg)
    assert _run(tmp_path, name.split(".")[0], path, "a", ["--threads", "1"]) == 0
    assert _run(tmp_path, name.split(".")[0], path, "b", ["--threads", "8"]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_price_black_scholes(tmp_path):
    assert _run(tmp_path, "price", str(CONFIGS / "price_bs.json")) == 0
    res = json.loads((tmp_path / "out" / "price.json").read_text())
    assert res["price"] == pytest.approx(7.9656, abs=1e-3)
    assert "wall_time_s" in json.loads((tmp_path / "out" / "timing.json").read_text())


def test_price_mc_zero_strike(tmp_path):
    cfg = json.loads((CONFIGS / "price_mc.json").read_text())
    cfg["market"]["K"] = 0.0
    cfg["price"]["n_paths"] = 20_000
    assert _run(tmp_path, "price", cfg) == 0
    res = json.loads((tmp_path / "out" / "price.json").read_text())
    assert abs(res["price"] - 100.0) < 3 * res["stderr"]


def test_price_fourier_and_precondition(tmp_path):
    assert _run(tmp_path, "price", str(CONFIGS / "price_fourier.json")) == 0
    res = json.loads((tmp_path / "out" / "price.json").read_text())
    assert 0 < res["price"] < 200 and res["diagnostics"]["A"] <= 1
    cfg = json.loads((CONFIGS / "price_fourier.json").read_text())
    cfg["market"]["t"] = 0.5
    assert _run(tmp_path, "price", cfg, "bad") == 4


def test_converge_synthetic(tmp_path):
    cfg = {"version": 1, "seed": 0, "converge": {"synthetic": True, "order": 0.5}}
    assert _run(tmp_path, "converge", cfg) == 0
    assert json.loads((tmp_path / "out" / "converge.json").read_text())["slope"] == pytest.approx(0.5)


@pytest.mark.parametrize(
    "cfg,code",
    [
        ({"version": 2}, 2),
        ({"version": 1, "model": MODEL, "converge": {"levels": [5]}, "seed": 1}, 2),
        ({"version": 1, "model": MODEL, "grid": {"T": 1.0, "n": 10}, "seed": 1}, 2),  # dt does not divide b
        ({"version": 1, "model": MODEL, "grid": {"T": 1.0, "n": 8}, "simulate": {}}, 2),  # no seed
        ({"version": 1, "model": dict(MODEL, levy=dict(MODEL["levy"], neg=[[0.5, 3.0]])),
          "grid": {"T": 1.0, "n": 8}, "seed": 1}, 3),  # untruncated negative jumps
        ({"version": 1, "seed": 0, "converge": {"synthetic": True, "levels": [4, 5]}}, 5),
    ],
)
def test_exit_codes(tmp_path, cfg, code):
    assert _run(tmp_path, "simulate" if "grid" in cfg else "converge", cfg) == code


def test_bad_json_reports_position(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"version": 1,\n  "seed": }')
    assert main(["simulate", "--config", str(p)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "delayjump", "price", "--config", str(CONFIGS / "price_bs.json"), "--out", str(tmp_path)],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(out.stdout)["price"] == pytest.approx(7.9655674, abs=1e-6)
