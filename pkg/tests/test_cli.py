import csv
import json

import numpy as np
import pytest

from ncauto.cli import main
from ncauto.domains import DomainSpec
from ncauto.maps import MobiusTuple
from ncauto.matcore import NcPoint
from ncauto.suite import SuiteConfig, builtin_paper_suite, execute, reports_to_csv


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_empty_suite(tmp_path):
    cfg = write(tmp_path, "c.json", {"suite": []})
    out = tmp_path / "r.json"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads(out.read_text()) == []


def test_single_kernel_identity(tmp_path):
    cfg = write(tmp_path, "c.json", {"seed": 7, "suite": [
        {"check": "kernel_identity", "trials": 10, "params": {"shape": [2, 2], "levels": [2]}}]})
    out = tmp_path / "r.json"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    (rec,) = json.loads(out.read_text())
    assert rec["check"] == "kernel_identity" and rec["passed"] and rec["seed"] == 7 and rec["trials"] == 10


def test_failing_check_gives_status_one(tmp_path):
    # the transpose map is not nc; without expect_failure the check fails
    cfg = write(tmp_path, "c.json", {"suite": [{
        "check": "nc_axioms", "trials": 5, "map": {"variant": "TransposeAmplification", "p": 2},
        "domain": DomainSpec.polydisk(1).to_json(), "params": {"levels": [2]}}]})
    assert main(["run", "--config", cfg]) == 1


@pytest.mark.parametrize("bad, field", [
    ({"suite": [{"check": "no_such_check"}]}, "suite[0].check"),
    ({"suite": [{"check": "kernel_identity", "params": {"bogus": 1}}]}, "suite[0].params.bogus"),
    ({"suite": [{"check": "inverse_law"}]}, "suite[0].map"),
    ({"suite": [], "output": {"format": "xml"}}, "output.format"),
    ({"suite": [], "seed": -1}, "seed"),
])
def test_invalid_config(tmp_path, capsys, bad, field):
    cfg = write(tmp_path, "c.json", bad)
    assert main(["run", "--config", cfg]) == 2
    assert field in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["bogus-command"]) == 2


def test_builtin_suite_shape():
    config = builtin_paper_suite()
    names = {e["check"] for e in config.suite}
    assert len(names) >= 12
    again = SuiteConfig.from_json(json.loads(json.dumps(config.to_json())))
    assert again.suite == json.loads(json.dumps(config.suite))


def test_csv_matches_json(tmp_path):
    entries = [{"check": "kernel_identity", "trials": 5, "params": {"levels": [1]}},
               {"check": "von_neumann", "trials": 5}]
    reports = execute(SuiteConfig(entries, seed=3))
    rows = list(csv.DictReader(reports_to_csv(reports).splitlines()))
    assert len(rows) == 2
    for row, rep in zip(rows, reports):
        assert row["check"] == rep.check_name
        assert float(row["max_residual"]) == rep.max_residual
        assert row["passed"] == str(rep.passed)
    cfg = write(tmp_path, "c.json", {"suite": entries, "seed": 3})
    out = tmp_path / "r.csv"
    assert main(["run", "--config", cfg, "--out", str(out), "--format", "csv"]) == 0
    assert out.read_text().splitlines()[0] == "check,seed,trials,max_residual,tolerance,passed,runtime_ms"


def test_parallel_matches_serial():
    entries = builtin_paper_suite().suite[:6]
    serial = execute(SuiteConfig(entries, seed=11))
    parallel = execute(SuiteConfig(entries, seed=11, parallelism=2))
    for a, b in zip(serial, parallel):
        assert a.max_residual == b.max_residual and a.witnesses == b.witnesses


def test_membership_command(capsys):
    dom = json.dumps(DomainSpec.polydisk(1).to_json())
    pt = json.dumps(NcPoint([np.diag([0.5, 0.2])]).to_json())
    assert main(["membership", "--domain", dom, "--point", pt]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["member"] == "yes" and out["margin"] == pytest.approx(0.5)


def test_membership_spectral_certificate(capsys):
    dom = json.dumps(DomainSpec.spectral_disk([1, 3]).to_json())
    pt = json.dumps(NcPoint([np.array([[0.5, 1.5], [0, 0.5]])]).to_json())
    assert main(["membership", "--domain", dom, "--point", pt]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["member"] == "yes" and len(out["certificate"]) == 2


def test_apply_command(tmp_path):
    expr = MobiusTuple([0.0], [0.5])
    mp = write(tmp_path, "m.json", expr.to_json())
    pt = write(tmp_path, "p.json", NcPoint([np.eye(2) * 0.5]).to_json())
    out = tmp_path / "img.json"
    assert main(["apply", "--map", mp, "--point", pt, "--out", str(out)]) == 0
    image = NcPoint.from_json(json.loads(out.read_text()))
    np.testing.assert_allclose(image[0], np.zeros((2, 2)), atol=1e-15)


def test_apply_outside_domain(tmp_path):
    mp = write(tmp_path, "m.json", MobiusTuple([0.0], [0.5]).to_json())
    pt = write(tmp_path, "p.json", NcPoint([np.eye(2) * 2.0]).to_json())
    assert main(["apply", "--map", mp, "--point", pt]) == 1
