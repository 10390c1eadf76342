import os

import pytest

from driftmv.cli import DEFAULTS, load_config, main, resolve


def _read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_resolve_defaults():
    cfg = resolve([])
    for key, val in DEFAULTS.items():
        assert getattr(cfg, key) == val


def test_resolve_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[model]\na = 0.9\n\n[run]\nn = 64\nm = 16\n")
    cfg = resolve(["--config", str(ini), "--n", "32"])
    assert cfg.a == 0.9          # config beats default
    assert cfg.n == 32           # flag beats config
    assert cfg.m == 16           # config beats default
    assert cfg.b == DEFAULTS["b"]  # untouched default survives


def test_load_config_rejects_unknown_names(tmp_path):
    bad_key = tmp_path / "k.ini"
    bad_key.write_text("[run]\nbogus = 1\n")
    with pytest.raises(ValueError):
        load_config(str(bad_key))
    bad_section = tmp_path / "s.ini"
    bad_section.write_text("[extra]\nx = 1\n")
    with pytest.raises(ValueError):
        load_config(str(bad_section))
    with pytest.raises(ValueError):
        load_config(str(tmp_path / "missing.ini"))
    # [meta] is written by runs and tolerated on read-back
    meta = tmp_path / "m.ini"
    meta.write_text("[meta]\npackage_version = 0.0.0\n")
    assert load_config(str(meta)) == {}


def test_main_exit_codes_for_bad_input(tmp_path):
    assert main(["--config", str(tmp_path / "nope.ini")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nexperiment = warp\n")
    assert main(["--config", str(bad)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["--experiment", "warp"])
    assert exc.value.code == 2


def test_main_runtime_error_exit(tmp_path):
    # stride 7 does not divide n=64: caught during dispatch, not resolution
    code = main(["--experiment", "simulate", "--n", "64", "--m", "8",
                 "--stride", "7", "--out", str(tmp_path / "o")])
    assert code == 1


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "driftmv" in capsys.readouterr().out


def test_example_reruns_are_byte_identical(tmp_path, capsys):
    args = ["--experiment", "example", "--n", "32", "--m", "8",
            "--stride", "4", "--seed", "3"]
    d1, d2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert main(args + ["--out", d1]) == 0
    assert main(args + ["--out", d2]) == 0
    assert _read_bytes(os.path.join(d1, "errors.csv")) == \
        _read_bytes(os.path.join(d2, "errors.csv"))
    out = capsys.readouterr().out
    assert "experiment=example" in out


def test_run_meta_round_trip(tmp_path, capsys):
    d1, d2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["--experiment", "simulate", "--n", "32", "--m", "8",
                 "--stride", "8", "--seed", "3", "--out", d1]) == 0
    meta = os.path.join(d1, "run_meta.ini")
    assert os.path.exists(meta)
    assert main(["--config", meta, "--out", d2]) == 0
    assert _read_bytes(os.path.join(d1, "trajectories.csv")) == \
        _read_bytes(os.path.join(d2, "trajectories.csv"))
    capsys.readouterr()


def test_validate_experiment_exits_zero(tmp_path, capsys):
    code = main(["--experiment", "validate", "--n", "64", "--m", "32",
                 "--stride", "8", "--replications", "6",
                 "--out", str(tmp_path / "v")])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "ok=True" in out
    assert os.path.exists(tmp_path / "v" / "validation.csv")


def test_summary_lines_are_sorted_key_value(tmp_path, capsys):
    assert main(["--experiment", "example", "--n", "16", "--m", "4",
                 "--stride", "4", "--seed", "2",
                 "--out", str(tmp_path / "s")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "experiment=example"
    keys = [ln.split("=", 1)[0] for ln in lines[1:]]
    assert keys == sorted(keys)
    assert all("=" in ln for ln in lines)
