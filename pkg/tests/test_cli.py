import json
from pathlib import Path

import pytest

from hegemon import cli
from hegemon.errors import InvariantViolation

REPO = Path(__file__).resolve().parents[1]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "interface" in capsys.readouterr().out


def test_thresholds_json(capsys):
    code, out, _ = run(capsys, "thresholds", "--n", "51", "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["meta"]["engine_version"] and "g_u" in json.dumps(doc).lower()


def test_thresholds_reject_small_n(capsys):
    code, _, err = run(capsys, "thresholds", "--n", "7")
    assert code == 1 and err


@pytest.mark.parametrize("world", ["builtin:three_country", str(REPO / "worlds" / "three_country.json")])
def test_spne_on_example_world(capsys, world):
    code, out, _ = run(capsys, "spne", "--world", world, "--trace")
    assert code == 0
    doc = json.loads(out)
    assert doc["ell_a"] == "1/2" and doc["club_a"] == [1, 2, 3] and doc["club_b"] == []
    assert doc["traces"]["formation"]["steps"][0]["moved"] == [1, 2, 3]


def test_trace_and_explain(capsys, tmp_path):
    path = tmp_path / "t.json"
    assert run(capsys, "trace", "--world", "builtin:three_country", "--ell-a", "1/4", "--ell-b", "1/2",
               "--out", str(path))[0] == 0
    code, out, _ = run(capsys, "explain", str(path))
    assert code == 0
    assert "step 1: shift {2, 3}" in out and "step 2: shift {1}" in out
    assert "(strict-shift)" in out


def test_explain_no_steps(capsys, tmp_path):
    path = tmp_path / "t.json"
    run(capsys, "trace", "--world", "builtin:three_country", "--ell-a", "1/2", "--ell-b", "none",
        "--out", str(path))
    code, out, _ = run(capsys, "explain", str(path))
    assert code == 0 and "step 1: join {1, 2, 3}" in out and "no steps" in out


def test_explain_rejects_malformed_trace(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"formation": {"stage": 1}}')
    assert run(capsys, "explain", str(path))[0] == 1
    path.write_text("not json")
    assert run(capsys, "explain", str(path))[0] == 1


def test_trace_rejects_off_grid_site(capsys):
    assert run(capsys, "trace", "--world", "builtin:three_country", "--ell-a", "1/3", "--ell-b", "1")[0] == 1


def test_missing_world_file(capsys, tmp_path):
    assert run(capsys, "spne", "--world", str(tmp_path / "nope.json"))[0] == 1


def test_phases_writes_csv_and_meta(capsys, tmp_path):
    out = tmp_path / "p.csv"
    code, _, _ = run(capsys, "phases", "--n", "13", "--g-min", "0", "--g-max", "0.02",
                     "--g-step", "0.01", "--out", str(out), "--jobs", "1")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("g,order,ell_a") and len(lines) == 4
    meta = json.loads(Path(str(out) + ".meta.json").read_text())
    assert meta["command"] == "phases" and "wall_time_s" in meta


def test_measure_phases_need_g(capsys):
    assert run(capsys, "phases", "--n", "13", "--case", "measure")[0] == 1


def test_small_oracle_run(capsys):
    code, out, _ = run(capsys, "oracle", "--trials", "5", "--schedules", "5", "--n-small", "4",
                       "--jobs", "1")
    assert code == 0
    assert json.loads(out)["ok"] is True


def test_oracle_mismatch_exits_2(capsys, monkeypatch):
    from hegemon import oracle

    real = oracle.shift_clubs

    def broken(w, s1, ell_b, trace=True):
        out = real(w, s1, ell_b, trace)
        return type(out)(**{**out.__dict__, "club_a": frozenset(), "club_b": frozenset()}) \
            if out.club_a or out.club_b else out

    monkeypatch.setattr(oracle, "shift_clubs", broken)
    code, _, _ = run(capsys, "oracle", "--trials", "20", "--schedules", "2", "--jobs", "1")
    assert code == 2


def test_invariant_violation_exits_2(capsys, monkeypatch):
    def boom(*a, **k):
        raise InvariantViolation("forced")

    monkeypatch.setattr(cli, "check_outcome", boom)
    code, _, err = run(capsys, "spne", "--world", "builtin:three_country")
    assert code == 2 and "forced" in err


def test_validate(capsys, tmp_path):
    bad = tmp_path / "c.csv"
    bad.write_text("year,code,di\n2019,X,1\n")
    code, _, err = run(capsys, "validate", "--countries", str(bad))
    assert code == 1 and "missing" in err
    from importlib import resources
    fx = resources.files("hegemon") / "data" / "fixture"
    code, out, _ = run(capsys, "validate", "--countries", str(fx / "countries.csv"),
                       "--globals", str(fx / "globals.csv"))
    assert code == 0 and out.strip() == "ok"


def test_simulate_fixture(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--fixture", "--mode", "asymmetric", "--out", str(tmp_path),
                     "--jobs", "1")
    assert code == 0
    golden = REPO / "tests" / "golden" / "fixture_asymmetric"
    assert (tmp_path / "summary.csv").read_bytes() == (golden / "summary.csv").read_bytes()


def test_simulate_bad_superpowers(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--fixture", "--superpowers", "USA", "--out", str(tmp_path))
    assert code == 1
