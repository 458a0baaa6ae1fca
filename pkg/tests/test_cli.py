import pytest

from fbmtransport import cli, io
from fbmtransport.errors import ConfigurationError


def test_config_layering(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nH = 0.6\nn = 12\nreplicas = 3\n")
    cfg = cli.load_config(f, ["n=20"], env={"FBMT_REPLICAS": "5", "OTHER": "x"})
    assert cfg["H"] == 0.6
    assert cfg["n"] == 20
    assert cfg["replicas"] == 5
    assert cfg["beta"] == 0.3


def test_config_rejects_unknown_and_bad_values(tmp_path):
    with pytest.raises(ConfigurationError):
        cli.parse_config_text("bogus = 1")
    with pytest.raises(ConfigurationError):
        cli.parse_config_text("n = many")
    with pytest.raises(ConfigurationError):
        cli.load_config(None, env={"FBMT_NOPE": "1"})
    with pytest.raises(ConfigurationError):
        cli.load_config(None, ["n"], env={})
    assert cli.parse_config_text("ns = 4, 8,16\nsvg = off")["ns"] == [4, 8, 16]


def test_gen_fbm_writes_drivers(tmp_path):
    out = tmp_path / "g"
    code = cli.main(["gen-fbm", "--out", str(out), "--set", "kind=both", "--set", "n=8"])
    assert code == 0
    meta, t, v = io.read_driver_csv(out / "driver_transport_r0000.csv")
    assert meta["kind"] == "transport-approx" and meta["n"] == "8" and meta["seed"] == "0:0:0"
    assert t[0] == 0.0 and v[0] == 0.0 and len(t) == 65
    meta, _, _ = io.read_driver_csv(out / "driver_exact_r0000.csv")
    assert meta["kind"] == "exact-fbm"


def test_solve_writes_all_paths(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["solve", "--out", str(out), "--set", "n=4"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["driver.csv", "solution_euler_y.csv", "solution_reference_y.csv",
                     "solution_x_euler.csv", "solution_x_tilde.csv"]
    assert "# provenance=X-tilde" in (out / "solution_x_tilde.csv").read_text()


def test_solve_skips_x_euler_when_m_differs(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["solve", "--out", str(out), "--set", "n=4", "--set", "m=8"]) == 0
    assert not (out / "solution_x_euler.csv").exists()


def test_converge_with_too_few_ns_exits_2_and_writes_nothing(tmp_path):
    out = tmp_path / "c"
    code = cli.main(["converge", "--out", str(out), "--set", "ns=8,16"])
    assert code == 2
    assert not out.exists() or not any(out.iterdir())


def test_converge_outputs(tmp_path):
    out = tmp_path / "c"
    code = cli.main(["converge", "--out", str(out), "--set", "ns=4,8,16", "--set", "replicas=1",
                     "--set", "covariance_replicas=50", "--set", "beta=0.45"])
    assert code == 0
    assert (out / "rate_plot.svg").read_text().startswith("<svg")
    rows = (out / "reports.csv").read_text().splitlines()
    assert rows[0] == "name,measured,bound,margin,pass"
    assert rows[-1].startswith("covariance vs fBm")
    assert "# slope=" in (out / "rate_table.csv").read_text()


def test_invalid_params_exit_2(tmp_path, capsys):
    code = cli.main(["gen-fbm", "--out", str(tmp_path), "--set", "beta=0.1"])
    assert code == 2
    assert "beta" in capsys.readouterr().err


def test_validate_failed_report_exits_1(tmp_path):
    # an impossible Lipschitz-ratio threshold fails one report
    code = cli.main(["validate", "--out", str(tmp_path), "--set", "validate_nm=4:16",
                     "--set", "paths=1", "--set", "euler_pairs=1:2",
                     "--set", "lipschitz_ns=4,8", "--set", "lipschitz_ratio_max=0.5",
                     "--set", "preset=linear"])
    assert code == 1
    assert (tmp_path / "reports.csv").exists()
