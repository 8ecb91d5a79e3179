import csv
import hashlib
import io
import json

import numpy as np
import pytest

from econplex import cli
from econplex.fixtures import synthetic_trade_table
from econplex.pipeline import PipelineConfig, run_pipeline


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_triangular_fixture_eci(tmp_path):
    assert cli.main(["pipeline", "--fixture", "triangular3", "--metric", "eci", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "eci_2000.csv")
    assert rows[0] == ["label", "value"]
    assert [r[0] for r in rows[1:]] == ["C1", "C2", "C3"]
    vals = [float(r[1]) for r in rows[1:]]
    assert np.allclose(vals, [1, 0, -1], atol=1e-9)


def test_nested_fixture_zero_convergence(tmp_path):
    rc = cli.main(["pipeline", "--fixture", "nested2x2", "--metric", "fcm", "--out", str(tmp_path)])
    assert rc == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["years"]["2000"]["verdicts"]["fcm"] == "zero_convergence"
    assert man["exit_code"] == 0


def test_nested_fixture_mfcm_drift_is_not_a_crash(tmp_path):
    rc = cli.main(["pipeline", "--fixture", "nested2x2", "--metric", "mfcm", "--out", str(tmp_path)])
    assert rc == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["years"]["2000"]["verdicts"]["mfcm"] == "boundary_drift"


def test_degenerate_spectrum_exit_two_keeps_outputs(tmp_path):
    trade = tmp_path / "links.csv"
    trade.write_text("year,country,product,value\n" + "".join(
        f"2000,{c},{p},1\n" for c in "AB" for p in "xy"))
    out = tmp_path / "out"
    rc = cli.main(["pipeline", "--trade", str(trade), "--input-kind", "incidence", "--out", str(out)])
    assert rc == 2
    man = json.loads((out / "manifest.json").read_text())
    assert "DegenerateSpectrum" in json.dumps(man["years"]["2000"]["errors"])
    assert (out / "fitness_mfcm_2000.csv").exists()


def test_missing_trade_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    rc = cli.main(["pipeline", "--trade", str(missing), "--out", str(tmp_path / "o")])
    assert rc == 1
    assert str(missing) in capsys.readouterr().err


def test_malformed_row_names_file_and_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("year,country,product,value\n2000,A,p,1\n2000,A,q,oops\n")
    assert cli.main(["pipeline", "--trade", str(bad), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert str(bad) in err and "3" in err


@pytest.fixture(scope="module")
def small_panel(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    table, kinds = synthetic_trade_table(40, 12, range(1988, 2009), seed=5, n_services=5)
    (d / "trade.csv").write_text(table.to_csv())
    (d / "kinds.csv").write_text("product,kind\n" + "".join(f"{p},{k}\n" for p, k in kinds.items()))
    rng = np.random.default_rng(1)
    lines = ["country,year,value"]
    for i in range(40):
        base = rng.lognormal(8, 1)
        for y in (1988, 1998, 2008):
            lines.append(f"K{i:03d},{y},{base * np.exp(rng.normal(0.2, 0.2) * (y - 1988) / 10):.6f}")
    (d / "gdp.csv").write_text("\n".join(lines) + "\n")
    (d / "coi.csv").write_text(
        "country,year,value\n" + "".join(f"K{i:03d},{y},{rng.normal():.6f}\n" for i in range(40) for y in (1988, 1998))
    )
    return d


def run_cli(d, out, *extra):
    return cli.main([
        "pipeline", "--trade", str(d / "trade.csv"), "--kinds", str(d / "kinds.csv"),
        "--out", str(out), *extra,
    ])


def test_full_run_manifest_and_determinism(small_panel, tmp_path):
    extra = ["--gdp", str(small_panel / "gdp.csv"), "--covariate", f"coi={small_panel / 'coi.csv'}",
             "--periods", "1988:1998,1998:2008", "--years", "1988,1998,2008"]
    assert run_cli(small_panel, tmp_path / "a", *extra) == 0
    assert run_cli(small_panel, tmp_path / "b", *extra) == 0
    a = {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()}
    b = {p.name: p.read_bytes() for p in (tmp_path / "b").iterdir()}
    assert a.keys() == b.keys()
    diff = [k for k in a if a[k] != b[k] and k != "manifest.json"]
    assert diff == []
    man = json.loads(a["manifest.json"])
    listed = {e["path"]: e["sha256"] for e in man["files"]}
    assert set(listed) == set(a) - {"manifest.json"}
    for name, digest in listed.items():
        assert hashlib.sha256(a[name]).hexdigest() == digest
    for name in ("eci_1988.csv", "pci_2008.csv", "fitness_mfcm_1998.csv", "spearman_eci_vs_diversity.csv",
                 "rankings_eci.csv", "boxstats_eci.csv", "regression_growth.txt", "regression_pci_service.csv"):
        assert name in a
    table = a["regression_growth.txt"].decode()
    assert "eci" in table and "coi" in table


def test_twelve_digit_formatting(small_panel, tmp_path):
    run_cli(small_panel, tmp_path, "--years", "2000", "--metric", "eci")
    for row in read_csv(tmp_path / "eci_2000.csv")[1:]:
        mant = row[1].lstrip("-").split("e")[0].replace(".", "").lstrip("0")
        assert len(mant) <= 12


def test_concatenated_and_strict_variants(small_panel, tmp_path):
    assert run_cli(small_panel, tmp_path / "c", "--years", "2000", "--rca-variant", "concatenated") == 0
    assert run_cli(small_panel, tmp_path / "s", "--years", "2000", "--strict-threshold") == 0
    cfg = json.loads((tmp_path / "c" / "manifest.json").read_text())["config"]
    assert cfg["rca_variant"] == "concatenated"


def test_config_file_and_flag_override(small_panel, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text(f"trade = {small_panel / 'trade.csv'}\nmetric = eci\nyears = 2000\n")
    out = tmp_path / "o"
    assert cli.main(["pipeline", "--config", str(conf), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert "eci_2000.csv" in names and "fitness_mfcm_2000.csv" not in names
    out2 = tmp_path / "o2"
    assert cli.main(["pipeline", "--config", str(conf), "--metric", "mfcm", "--out", str(out2)]) == 0
    names = {p.name for p in out2.iterdir()}
    assert "fitness_mfcm_2000.csv" in names and "eci_2000.csv" not in names


def test_single_step_subcommands(small_panel, tmp_path, capsys):
    trade = str(small_panel / "trade.csv")
    assert cli.main(["rca", "--trade", trade, "--year", "2000", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "rca_2000.csv").exists() and (tmp_path / "incidence_2000.csv").exists()
    assert cli.main(["eci", "--fixture", "triangular3"]) == 0
    captured = capsys.readouterr()
    assert "# eci_2000.csv" in captured.out and "lambda2 country=0.25" in captured.err
    assert cli.main(["fitness", "--fixture", "nested2x2", "--method", "fcm"]) == 0
    assert "verdict=zero_convergence" in capsys.readouterr().err
    assert cli.main(["fitness", "--fixture", "nested2x2", "--method", "fcm", "--max-iter", "50"]) == 0
    assert "verdict=max_iterations" in capsys.readouterr().err


def test_compare(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("year,label,value\n" + "".join(f"2000,{k},{v}\n" for k, v in zip("abcd", (4, 3, 2, 1))))
    b.write_text("year,label,value\n" + "".join(f"2000,{k},{v}\n" for k, v in zip("abcd", (4, 2, 3, 1))))
    assert cli.main(["compare", str(a), str(b)]) == 0
    assert capsys.readouterr().out == "year,rho,n\n2000,0.8,4\n"
    c = tmp_path / "c.csv"
    c.write_text("year,label,value\n1990,a,1\n")
    assert cli.main(["compare", str(a), str(c)]) == 2


def test_regress_panel_and_service(tmp_path, capsys):
    rng = np.random.default_rng(0)
    buf = io.StringIO()
    buf.write("country,period,growth,x\n")
    for i in range(30):
        for t in (1988, 1998):
            x = rng.normal()
            buf.write(f"K{i},{t},{0.1 + 0.5 * x + rng.normal(0, 0.1)},{x}\n")
    panel = tmp_path / "panel.csv"
    panel.write_text(buf.getvalue())
    assert cli.main(["regress", "--panel", str(panel), "--y", "growth", "--x", "x"]) == 0
    out = capsys.readouterr().out
    assert "x" in out and "***" in out and "Period FE" in out
    assert cli.main(["regress", "--panel", str(panel), "--y", "growth", "--x", "x", "--no-fe", "--no-cluster"]) == 0
    svc = tmp_path / "svc.csv"
    svc.write_text("year,product,pci,is_service\n" + "".join(
        f"{y},{p},{v},{s}\n" for y in (2000, 2001) for p, v, s in (("g1", 0.1, 0), ("g2", -0.3, 0), ("s1", 1.1, 1), ("s2", 0.7, 1))
    ))
    assert cli.main(["regress", "--service-dummy", str(svc)]) == 0
    assert "service" in capsys.readouterr().out
    bad = tmp_path / "bad.csv"
    bad.write_text("country,period,growth,x\nK1,1988,zz,1\n")
    assert cli.main(["regress", "--panel", str(bad), "--y", "growth", "--x", "x"]) == 1


def test_selftest_and_fault(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "13/13 properties passed" in out
    assert cli.main(["selftest", "--inject-fault", "normalization"]) == 1
    out = capsys.readouterr().out
    assert "FAIL normalization_sums" in out


def test_parse_helpers():
    assert cli.parse_years("1995-1997,2001") == (1995, 1996, 1997, 2001)
    assert cli.parse_periods("1988:1998,1998:2008") == ((1988, 1998), (1998, 2008))


def test_config_validation(tmp_path):
    cfg = PipelineConfig(out=tmp_path, fixture="triangular3", boundary_margin=2.0)
    assert run_pipeline(cfg, log=lambda *_: None) == 1
