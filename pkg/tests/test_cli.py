import csv
import hashlib
import io
import json

import pytest

from rdlattice import __version__
from rdlattice.cli import ConfigError, apply_overrides, main, run

BINARY = {"pmf": [0.89, 0.11], "distortion": {"kind": "hamming"}}
TERNARY = {"pmf": [0.5, 0.3, 0.2], "distortion": {"kind": "symbol_error", "m": 3}}
GAUSS = {"family": "gaussian", "var": 1.0}


def parse(text):
    lines = text.splitlines()
    assert lines[0].startswith("#")
    return lines[0], list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_csv_comment_records_version_seed_unit():
    cfg = {"source": BINARY, "grid": {"d": [0.05]}, "seed": 11, "unit": "bits"}
    head, rows = parse(run("rd-curve", cfg))
    assert head == f"# rdlattice {__version__} seed=11 unit=bits"
    assert list(rows[0]) == ["d", "rate", "slb", "equality_flag"]


def test_rd_curve_binary_equality_everywhere():
    cfg = {"source": BINARY, "grid": {"d": [0.01, 0.04, 0.07, 0.1]}, "seed": 0}
    _, rows = parse(run("rd-curve", cfg))
    assert all(r["equality_flag"] == "true" for r in rows)


def test_rd_curve_flag_flips_at_critical_distortion():
    cfg = {"source": TERNARY, "grid": {"d": [0.3, 0.39, 0.41, 0.5]}, "seed": 0}
    _, rows = parse(run("rd-curve", cfg))
    assert [r["equality_flag"] for r in rows] == ["true", "true", "false", "false"]


def test_rd_curve_gaussian_rate_equals_slb():
    cfg = {"source": GAUSS, "grid": {"d": [0.1, 0.5]}, "seed": 0}
    _, rows = parse(run("rd-curve", cfg))
    assert all(r["equality_flag"] == "true" for r in rows)


def test_dc_command():
    assert json.loads(run("dc", {"source": TERNARY}))["d_c"] == pytest.approx(0.4)


def test_fbl_gaussian_curves_ordered():
    cfg = {"source": GAUSS, "grid": {"n": [10, 100], "d": [0.1], "eps": [0.1]},
           "bounds": ["converse_c", "achievability_lattice"], "samples": 20000, "seed": 3}
    _, rows = parse(run("fbl", cfg))
    by = {}
    for r in rows:
        by.setdefault(r["n"], {})[r["label"]] = float(r["rate_nats"])
    for n, vals in by.items():
        assert vals["converse_c"] <= vals["achievability_lattice"]


def test_simulate_uniform_eight_cells():
    cfg = {"source": {"family": "uniform", "a": 0, "b": 1}, "lattice": {"family": "zn", "cells": 8},
           "M": 8, "samples": 20000, "seed": 1}
    out = json.loads(run("simulate", cfg))
    assert out["fixed_length"]["eps_hat"] == 0.0
    assert out["variable_length"]["avg_length_bits"] == pytest.approx(3.0)


def test_missing_seed_is_config_error():
    with pytest.raises(ConfigError, match="seed"):
        run("rd-curve", {"source": BINARY, "grid": {"d": [0.1]}})


def test_empty_grid_is_config_error():
    with pytest.raises(ConfigError, match="grid.d"):
        run("slb", {"source": GAUSS, "grid": {"d": []}, "seed": 0})


def test_overrides_are_dotted_and_json_parsed():
    cfg = apply_overrides({"grid": {"d": [0.1]}}, ["grid.d=[0.2,0.3]", "seed=4", "unit=bits"])
    assert cfg == {"grid": {"d": [0.2, 0.3]}, "seed": 4, "unit": "bits"}
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])


def test_exit_codes(tmp_path, capsys):
    good = write_cfg(tmp_path, {"source": GAUSS, "grid": {"d": [0.1]}, "seed": 0})
    assert main(["slb", "--config", good, "--out", str(tmp_path / "o.csv")]) == 0
    assert main(["slb", "--config", good, "--set", "seed=-1"]) == 2
    assert main(["slb", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["rd-curve", "--config", good, "--set", "source.family=cauchy"]) == 2
    # a distortion above the source's maximum leaves every converse vacuous
    vac = write_cfg(tmp_path, {"source": GAUSS, "grid": {"n": [10], "d": [50.0], "eps": [0.1]},
                               "bounds": ["converse_c"], "seed": 0}, "vac.json")
    assert main(["fbl", "--config", vac]) == 4
    # the solver rejects a negative distortion level
    bad = write_cfg(tmp_path, {"source": BINARY, "grid": {"d": [-0.1]}, "seed": 0}, "bad.json")
    assert main(["rd-curve", "--config", bad]) == 3
    err = capsys.readouterr().err
    assert "seed" in err


def test_config_echo_reproduces_output(tmp_path):
    cfg = {"source": GAUSS, "grid": {"n": [20], "d": [0.1], "eps": [0.1]},
           "bounds": ["converse_ca", "achievability_lattice"], "samples": 5000, "seed": 9}
    out1 = tmp_path / "a.csv"
    assert main(["fbl", "--config", write_cfg(tmp_path, cfg), "--out", str(out1)]) == 0
    echo = str(out1) + ".config.json"
    out2 = tmp_path / "b.csv"
    assert main(["fbl", "--config", echo, "--out", str(out2)]) == 0
    digest = [hashlib.sha256(p.read_bytes()).hexdigest() for p in (out1, out2)]
    assert digest[0] == digest[1]
