import csv
import json

import pytest

from magcontour.cli import RunConfig, UsageError, main


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    notes = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.reader(ln for ln in lines if not ln.startswith("#")))
    return notes, rows[0], rows[1:]


def test_constants_json(tmp_path, consts):
    assert main(["constants", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "constants.json").read_text())
    assert set(doc) >= {"_meta", "theta0", "xi0", "alpha0", "theta0_m2", "xi0_m2", "curv_m2"}
    assert abs(doc["alpha0"] - consts.alpha0) < 1e-11
    assert len(doc["_meta"]["config_sha256"]) == 64


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["geometry", "--surface", "egg", "--out", str(out)]) == 0
    for name in ("geometry.csv", "geometry.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_geometry_csv_header_carries_digest(tmp_path):
    main(["geometry", "--surface", "tilted", "--out", str(tmp_path)])
    notes, cols, rows = read_csv(tmp_path / "geometry.csv")
    digest = RunConfig(surface="tilted", out=str(tmp_path)).digest()
    assert f"# config_sha256 {digest}" in notes
    assert "beta" in cols and len(rows) == 256
    assert not any(v == "-0" for row in rows for v in row)


def test_digest_ignores_output_directory():
    assert RunConfig(out="x").digest() == RunConfig(out="y").digest()
    assert RunConfig(h=[1e-3]).digest() != RunConfig().digest()


def test_band_and_predict_on_egg(tmp_path):
    assert main(["band", "--surface", "egg", "--out", str(tmp_path)]) == 0
    band = json.loads((tmp_path / "band.json").read_text())
    assert band["unique_minimum"] is True
    assert main(["predict", "--surface", "egg", "--h", "1e-3,1e-4", "--nmax", "3",
                 "--out", str(tmp_path)]) == 0
    notes, cols, rows = read_csv(tmp_path / "predict.csv")
    assert cols == ["n", "h", "term_h", "term_h43", "term_h53", "gap"] and len(rows) == 6
    assert any("unknown" in n for n in notes)
    assert [float(r[1]) for r in rows[:3]] == [1e-3] * 3
    for n in (1, 2, 3):
        assert (tmp_path / f"profile_n{n}.csv").exists()


def test_band_on_ellipsoid_warns(tmp_path):
    assert main(["band", "--surface", "ellipsoid", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "band.json").read_text())["unique_minimum"] is False


def test_predict_on_ellipsoid_fails_with_status_1(tmp_path, capsys):
    assert main(["predict", "--surface", "ellipsoid", "--out", str(tmp_path)]) == 1
    assert "unique" in capsys.readouterr().err


def test_quantize(tmp_path):
    assert main(["quantize", "--surface", "egg", "--epsilon", "0.02,0.04", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "quantize.json").read_text())
    assert doc["_meta"]["command"] == "quantize"


@pytest.mark.parametrize("argv", [
    ["predict", "--h", ""],
    ["predict", "--h", "0.5,2"],
    ["quantize", "--epsilon", "0.5"],
    ["band", "--surface", "torus"],
    ["curve", "--resolution", "10"],
])
def test_usage_errors_exit_2(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["predict", "--h", "abc"])
    assert exc.value.code == 2


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"surface": "egg", "h_list": [1e-3], "n_max": 2}))
    assert main(["predict", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    _, _, rows = read_csv(tmp_path / "predict.csv")
    assert len(rows) == 2
    assert main(["predict", "--config", str(cfg), "--nmax", "3", "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "predict.csv")[2]) == 3
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["constants", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_surface_json_spec(tmp_path):
    spec = json.dumps({"kind": "ellipsoid", "a": 1.5, "b": 1.0, "c": 1.0})
    assert main(["geometry", "--surface", spec, "--out", str(tmp_path)]) == 0
    path = tmp_path / "surface.json"
    path.write_text(spec)
    assert main(["geometry", "--surface", str(path), "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "geometry.csv").read_bytes() == (tmp_path / "f" / "geometry.csv").read_bytes()


def test_config_validation_sorts_lists():
    cfg = RunConfig(h=[1e-4, 1e-2], epsilon=[0.01, 0.04])
    cfg.validate()
    assert cfg.h == [1e-2, 1e-4] and cfg.epsilon == [0.04, 0.01]
    with pytest.raises(UsageError):
        RunConfig(n_max=0).validate()


def test_validate_on_ellipsoid_skips_and_passes(tmp_path, capsys):
    assert main(["validate", "--surface", "ellipsoid", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "skip" in out and " 0 failed" in out
    _, cols, rows = read_csv(tmp_path / "validate.csv")
    assert cols[:3] == ["module", "check", "status"]
    assert {r[2] for r in rows} <= {"pass", "skip"}
