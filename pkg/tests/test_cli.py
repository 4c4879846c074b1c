import json

import pytest

from htype.cli import main


@pytest.fixture(scope="module")
def fixtures(tmp_path_factory):
    d = tmp_path_factory.mktemp("groups")
    out = {}
    for name, k in (("h1", 1), ("k2", 2), ("k3", 3)):
        path = d / f"{name}.json"
        assert main(["gen", "--k", str(k), "--out", str(path)]) == 0
        out[name] = path
    return out


def run(args, tmp_path, name="report.json"):
    path = tmp_path / name
    code = main(args + ["--out", str(path)])
    return code, json.loads(path.read_text())


def test_gen_and_verify_round_trip(fixtures, tmp_path):
    data = json.loads(fixtures["k3"].read_text())
    assert data["derived"]["Q"] == 10 and data["derived"]["iwasawa"] is True
    code, rep = run(["verify", str(fixtures["k3"])], tmp_path)
    assert code == 0 and rep["pass"] and rep["schema"] == 1


def test_iwasawa_witness(fixtures, tmp_path):
    code, rep = run(["iwasawa", str(fixtures["k2"])], tmp_path)
    assert code == 0
    assert rep["results"]["iwasawa"] is False
    assert rep["results"]["witness"] is not None


def test_solution_check(fixtures, tmp_path):
    code, rep = run(["solution-check", str(fixtures["h1"]), "--samples", "200", "--seed", "7"], tmp_path)
    assert code == 0
    assert rep["results"]["C_G"]["value"] == pytest.approx(2.0, rel=1e-10)
    assert rep["results"]["spread"] <= 1e-8


def test_leakage_and_sphere(fixtures, tmp_path):
    assert run(["leakage", str(fixtures["k2"])], tmp_path)[0] == 0
    assert run(["leakage", str(fixtures["k3"])], tmp_path)[0] == 0
    code, rep = run(["sphere-check", str(fixtures["k2"])], tmp_path)
    assert code == 1 and "witness" in rep["checks"][0]["error"]


def test_curvature_reports_failures_honestly(fixtures, tmp_path):
    code, rep = run(["curvature", str(fixtures["h1"])], tmp_path)
    assert code == 0 and rep["results"]["C"]["value"] == pytest.approx(8.0, rel=1e-8)
    code, rep = run(["curvature", str(fixtures["k3"])], tmp_path)
    assert code == 1 and rep["results"]["kernel_dim"] == 4


def test_yamabe_writes_csv(fixtures, tmp_path):
    code, rep = run(["yamabe", str(fixtures["h1"]), "--grid", "8"], tmp_path)
    assert code == 0
    assert (tmp_path / "report.csv").read_text().startswith("iter,quotient,step\n")
    assert rep["results"]["C_source"] == "calibrated"


def test_usage_errors_exit_2(fixtures, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"k": 1, "n2": 2}))
    assert main(["verify", str(bad)]) == 2
    assert "generators" in capsys.readouterr().err
    assert main(["curvature", str(fixtures["h1"]), "--field", "wavelet:a=1"]) == 2
    assert main(["invert", str(fixtures["h1"]), "--point", "1,2,3"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_reports_are_byte_identical(fixtures, tmp_path):
    out = tmp_path / "r.json"
    args = ["invert", str(fixtures["k2"]), "--samples", "20", "--seed", "3", "--out", str(out)]
    main(args)
    first = out.read_bytes()
    main(args)
    assert out.read_bytes() == first
