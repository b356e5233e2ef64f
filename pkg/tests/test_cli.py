import json
import subprocess
import sys

import pytest

from mmlab import cli, gas


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


GAUSS = {
    "model": {"alphabet_size": 1, "n": 6, "beta": 0.0, "W": "0.5*X1^2"},
    "chain": {"burn_in": 50, "thin": 2, "samples": 40, "chains": 8, "seed": 3, "moment_degree": 4},
}


def test_missing_alphabet_size(tmp_path, capsys):
    cfg = write(tmp_path, "m.json", {"model": {"n": 4, "W": "X1^2"}})
    code, out, err = run(["sample-matrix", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_CONFIG
    assert "model.alphabet_size" in err and out == ""


def test_wrong_type_names_field(tmp_path, capsys):
    cfg = write(tmp_path, "m.json", {"model": {"alphabet_size": 1, "n": "four", "W": "X1^2"}})
    code, _, err = run(["sample-matrix", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_CONFIG and "model.n" in err
    cfg = write(tmp_path, "c.json", {**GAUSS, "chain": {"walk": 3}})
    code, _, err = run(["sample-matrix", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_CONFIG and "chain.walk" in err


def test_complex_non_conjugate_rejected(tmp_path, capsys):
    W = {"terms": [{"coeff": 1.0, "word": [1, 1]}, {"coeff": 1.0, "word": [2, 2]},
                   {"coeff": [0.0, 1.0], "word": [1, 2]}]}
    cfg = write(tmp_path, "m.json", {"model": {"alphabet_size": 2, "n": 4, "W": W}})
    code, _, err = run(["sample-matrix", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_CONFIG
    assert "model.W" in err and "self-adjoint" in err


def test_uncertified_model_needs_override(tmp_path, capsys):
    cfg = write(tmp_path, "m.json", {"model": {"alphabet_size": 1, "n": 4, "W": "X1^3"}})
    code, _, err = run(["sample-matrix", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_CONFIG and "--unsafe-allow" in err
    spec = cli.parse_model(json.loads(open(cfg).read()), unsafe_allow=True)
    assert spec.n == 4


def test_missing_file(tmp_path, capsys):
    code, _, err = run(["equilibrium", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_CONFIG and "does not exist" in err


def test_commutator_model_file_extracts_wells():
    # (x^2 - 1)^2 (0.3 x^2 + 0.375 x + 0.325) expanded
    cfg = {"n": 10, "beta": 100.0,
           "potential": {"coefficients": [0.325, 0.375, -0.35, -0.75, -0.275, 0.375, 0.3]}}
    g = cli.parse_gas(cfg, None)
    assert isinstance(g, gas.GasConfig)
    assert [round(w.center, 6) for w in g.wells] == [-1.0, 1.0]
    assert [w.c for w in g.wells] == pytest.approx([1.0, 4.0])
    g2 = cli.parse_gas({"n": 4, "beta": 10.0, "potential": {"wells": [{"center": 0, "c": 1}, {"center": 2, "c": 4}]}},
                       None)
    assert len(g2.wells) == 2
    with pytest.raises(cli.ConfigError, match="potential.wells"):
        cli.parse_gas({"n": 4, "beta": 10.0, "potential": {"wells": [{"center": 0, "c": -1}]}}, None)


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_sample_matrix_reproducible(tmp_path, capsys):
    cfg = write(tmp_path, "m.json", GAUSS)
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        code, out, _ = run(["sample-matrix", cfg, "--out", str(d), "--seed", "11"], capsys)
        assert code == 0
        assert out.count("\n") == 1
        outs.append(_files(d))
    assert set(outs[0]) == {"moments.csv", "histogram.csv", "diagnostics.json", "manifest.json"}
    for name in ("moments.csv", "histogram.csv", "diagnostics.json"):
        assert outs[0][name] == outs[1][name]
    m0, m1 = (json.loads(o["manifest.json"]) for o in outs)
    m0.pop("wall_time"), m1.pop("wall_time")
    assert m0 == m1 and m0["seed"] == 11


def test_manifest_written_last_with_digests(tmp_path, capsys):
    import hashlib

    cfg = write(tmp_path, "e.json", {"interval": [-2.5, 2.5], "cells": 200, "potential": {"coefficients": [0, 0, 0.5]}})
    d = tmp_path / "eq"
    code, out, _ = run(["equilibrium", cfg, "--out", str(d)], capsys)
    assert code == 0 and out.startswith("equilibrium:")
    man = json.loads((d / "manifest.json").read_text())
    assert set(man["outputs"]) == {"density.csv", "result.json"}
    for name, digest in man["outputs"].items():
        assert hashlib.sha256((d / name).read_bytes()).hexdigest() == digest
        assert (d / "manifest.json").stat().st_mtime_ns >= (d / name).stat().st_mtime_ns
    assert man["config"]["cells"] == 200 and man["command"] == "equilibrium"
    res = json.loads((d / "result.json").read_text())
    assert res["converged"] and res["second_moment"] == pytest.approx(1.0, abs=0.02)


def test_equilibrium_mod_log_requires_beta(tmp_path, capsys):
    cfg = write(tmp_path, "e.json", {"interval": [0, 1], "cells": 50, "kernel": "mod_log"})
    code, _, err = run(["equilibrium", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_CONFIG and "beta" in err


def test_maps_series(tmp_path, capsys):
    cfg = write(tmp_path, "m.json", {"alphabet_size": 1, "U": "0.5*X1^2 + 0.25*X1^4", "q": [1, 1], "order": 4})
    d = tmp_path / "maps"
    code, out, _ = run(["maps", cfg, "--out", str(d)], capsys)
    assert code == 0
    s = json.loads((d / "series.json").read_text())["series_in_beta_minus_half"]
    assert s == {"0": "1", "1": "0", "2": "-2", "3": "0", "4": "9"}


def test_gas_and_ds_check(tmp_path, capsys):
    gcfg = write(tmp_path, "g.json", {"n": 8, "beta": 100.0, "sweeps": 400, "burn_in": 100, "thin": 4,
                                      "potential": {"wells": [{"center": -1, "c": 1}, {"center": 1, "c": 4}]}})
    for k in range(2):
        code, out, _ = run(["gas", gcfg, "--out", str(tmp_path / f"g{k}"), "--seed", "5"], capsys)
        assert code == 0 and out.startswith("gas:")
    a, b = _files(tmp_path / "g0"), _files(tmp_path / "g1")
    for name in ("histogram.csv", "fractions.json", "y_norms.csv", "diagnostics.json"):
        assert a[name] == b[name]
    dcfg = write(tmp_path, "d.json", {**GAUSS, "chain": {**GAUSS["chain"], "samples": 100}})
    code, out, _ = run(["ds-check", dcfg, "--out", str(tmp_path / "ds")], capsys)
    res = json.loads((tmp_path / "ds" / "result.json").read_text())
    assert len(res["residuals"]) == 4
    assert code == (0 if res["passed"] else cli.EXIT_FAIL)


def test_threads_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MMLAB_THREADS", "many")
    cfg = write(tmp_path, "m.json", GAUSS)
    code, _, err = run(["sample-matrix", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_CONFIG and "MMLAB_THREADS" in err


def test_verify_exit_codes(tmp_path, capsys):
    code, out, _ = run(["verify", "--only", "13", "16", "--out", str(tmp_path / "v")], capsys)
    assert code == 0 and out.strip() == "verify: 2/2 passed"
    report = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert [c["number"] for c in report["checks"]] == [13, 16]


def test_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "mmlab.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "verify" in r.stdout


def test_flag_overrides(tmp_path, capsys):
    gcfg = write(tmp_path, "g.json", {"n": 8, "beta": 100.0, "sweeps": 400, "burn_in": 100, "thin": 4,
                                      "potential": {"wells": [{"center": -1, "c": 1}, {"center": 1, "c": 4}]}})
    d = tmp_path / "g"
    code, _, _ = run(["gas", "--model", gcfg, "--beta", "1000", "--n", "6", "--sweeps", "200", "--out", str(d)],
                     capsys)
    assert code == 0
    man = json.loads((d / "manifest.json").read_text())
    assert (man["config"]["beta"], man["config"]["n"], man["config"]["sweeps"]) == (1000.0, 6, 200)
    mcfg = write(tmp_path, "m.json", GAUSS)
    d = tmp_path / "s"
    code, out, _ = run(["sample-matrix", "--model", mcfg, "--chains", "4", "--samples", "10", "--out", str(d)],
                       capsys)
    assert code == 0 and out.startswith("sample-matrix: 40 samples")


def test_maps_root_and_stars(tmp_path, capsys):
    stars = write(tmp_path, "stars.json", [{"coeff": 0.25, "n": 2, "word": [1, 1, 1, 1]}])
    d = tmp_path / "maps"
    code, _, _ = run(["maps", "--root", "X1X1", "--stars", stars, "--order", "4", "--out", str(d)], capsys)
    assert code == 0
    s = json.loads((d / "series.json").read_text())["series_in_beta_minus_half"]
    assert s == {"0": "1", "1": "0", "2": "-2", "3": "0", "4": "9"}
    code, _, err = run(["maps", "--root", "X3", "--stars", stars, "--order", "1", "--out", str(d)], capsys)
    assert code == cli.EXIT_CONFIG and "--root" in err
