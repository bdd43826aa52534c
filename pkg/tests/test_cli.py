import csv
import json

import numpy as np
import pytest

from semicqr import Dataset, fit_semi_qr
from semicqr.cli import (EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, cv_bandwidth, main, parse_roles,
                         prepare_design, read_table)
from semicqr.exceptions import InputError


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def read_kv(path):
    with open(path) as fh:
        return dict(line.rstrip("\n").split("=", 1) for line in fh if "=" in line)


@pytest.fixture
def toy(tmp_path):
    rng = np.random.default_rng(0)
    n = 60
    u = rng.random(n)
    x = rng.standard_normal(n)
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    grp = rng.choice(["a", "b", "c"], n)
    y = np.sin(2 * u) + x * u + 1.5 * z1 + (grp == "b") + 0.3 * rng.standard_normal(n)
    rows = [[f"{a:.6f}" for a in r[:5]] + [r[5]] for r in zip(u, x, z1, z2, y, grp)]
    return write_csv(tmp_path / "toy.csv", ["t", "x", "z1", "z2", "y", "grp"], rows)


class TestParsing:
    def test_roles_rest(self):
        roles = parse_roles("u=t, x=x, z=rest, y=y", ["t", "x", "z1", "z2", "y", "grp"])
        assert roles["z"] == ["z1", "z2", "grp"]

    def test_unknown_column(self):
        with pytest.raises(InputError):
            parse_roles("u=t, y=nope, z=a", ["t", "a"])

    def test_malformed_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("u,y,z\n0.1,1,2\n0.2,1\n")
        with pytest.raises(InputError) as exc:
            read_table(str(p))
        assert "line 3" in str(exc.value)

    def test_dummies_and_standardize(self, toy):
        header, rows = read_table(toy)
        roles = parse_roles("u=t, x=x, z=z1+grp, y=y", header)
        d = prepare_design(header, rows, roles, ["grp"], {"grp": "c"}, 40, True)
        assert d.z_names[0] == "z1" and sorted(d.z_names[1:]) == ["grp=a", "grp=b"]
        z1 = d.z[d.train, 0]
        assert z1.mean() == pytest.approx(0, abs=1e-12) and z1.std(ddof=1) == pytest.approx(1)

    def test_constant_column(self, tmp_path):
        p = write_csv(tmp_path / "c.csv", ["u", "z", "y"],
                      [[i / 10, 1.0, i] for i in range(10)])
        header, rows = read_table(p)
        with pytest.raises(InputError):
            prepare_design(header, rows, parse_roles("u=u,z=z,y=y", header), standardize=True)


class TestFit:
    def test_fit_outputs(self, toy, tmp_path):
        out = tmp_path / "o"
        code = main(["fit", "--input", toy, "--roles", "u=t, x=x, z=z1+z2, y=y",
                     "--method", "cqr", "--q", "5", "--h", "0.4", "--out", str(out),
                     "--n-grid", "25"])
        assert code == EXIT_OK
        beta = read_csv(out / "beta.csv")
        assert [r["variable"] for r in beta] == ["z1", "z2"]
        curves = read_csv(out / "curves.csv")
        assert list(curves[0]) == ["grid", "alpha0", "alpha_1"] and len(curves) == 25
        meta = read_kv(out / "metadata.txt")
        assert meta["setting.q"] == "5" and meta["h_used"] == "0.4"

    def test_cqr_q1_matches_qr(self, tmp_path):
        rng = np.random.default_rng(1)
        u, z = np.linspace(0, 1, 10), rng.standard_normal(10)
        y = 1 + z + 0.1 * rng.standard_normal(10)
        p = write_csv(tmp_path / "t.csv", ["u", "z", "y"], zip(u, z, y))
        out = tmp_path / "o"
        assert main(["fit", "--input", p, "--roles", "u=u, z=z, y=y", "--method", "cqr",
                     "--q", "1", "--h", "2.0", "--standardize", "false", "--out", str(out)]) == 0
        b_cli = float(read_csv(out / "beta.csv")[0]["beta"])
        ref = fit_semi_qr(Dataset(u, None, z, y), 0.5, h1=2.0, h3=2.0)
        assert b_cli == pytest.approx(float(ref.beta[0]), abs=1e-9)

    def test_train_test_report(self, toy, tmp_path):
        out = tmp_path / "o"
        assert main(["fit", "--input", toy, "--roles", "u=t, x=x, z=z1+grp, y=y",
                     "--categorical", "grp", "--method", "ls", "--h", "0.5",
                     "--train-rows", "45", "--out", str(out)]) == 0
        rep = {r["metric"]: r["value"] for r in read_csv(out / "report.csv")}
        assert rep["n_test"] == "15" and float(rep["mape"]) > 0

    def test_select(self, toy, tmp_path):
        out = tmp_path / "s"
        assert main(["select", "--input", toy, "--roles", "u=t, x=x, z=z1+z2, y=y",
                     "--h", "0.4", "--q", "5", "--out", str(out)]) == 0
        rows = read_csv(out / "beta.csv")
        assert float(rows[0]["beta"]) != 0.0
        assert (out / "path.csv").exists()

    def test_config_precedence(self, toy, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"q": 3, "h": 0.5, "method": "cqr"}))
        out = tmp_path / "o"
        assert main(["fit", "--input", toy, "--roles", "u=t, x=x, z=z1, y=y",
                     "--config", str(cfg), "--q", "7", "--out", str(out)]) == 0
        meta = read_kv(out / "metadata.txt")
        assert meta["setting.q"] == "7" and meta["setting.h"] == "0.5"
        assert meta["setting.folds"] == "5"

    def test_unknown_config_key(self, toy, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"bandwidth": 0.5}))
        assert main(["fit", "--input", toy, "--roles", "u=t, z=z1, y=y", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == EXIT_INPUT


class TestExitCodes:
    def test_missing_column(self, toy, tmp_path):
        assert main(["fit", "--input", toy, "--roles", "u=t, z=zz, y=y", "--h", "0.3",
                     "--out", str(tmp_path / "o")]) == EXIT_INPUT

    def test_missing_file(self, tmp_path):
        assert main(["fit", "--input", str(tmp_path / "nope.csv"), "--roles", "u=a,y=b,z=c",
                     "--out", str(tmp_path / "o")]) == EXIT_INPUT

    def test_bad_flag(self):
        assert main(["fit", "--frobnicate"]) == EXIT_INPUT

    def test_numeric_failure(self, toy, tmp_path):
        assert main(["fit", "--input", toy, "--roles", "u=t, x=x, z=z1, y=y", "--h", "0.005",
                     "--out", str(tmp_path / "o")]) == EXIT_NUMERIC

    def test_nonpositive_h(self, toy, tmp_path):
        assert main(["fit", "--input", toy, "--roles", "u=t, z=z1, y=y", "--h", "0",
                     "--out", str(tmp_path / "o")]) == EXIT_INPUT


class TestCV:
    def test_single_h(self):
        rng = np.random.default_rng(2)
        d = Dataset(rng.random(80), None, rng.standard_normal(80), rng.standard_normal(80))
        h, scores = cv_bandwidth(d, "cqr", [0.3], q=3)
        assert h == 0.3 and list(scores) == [0.3]

    def test_linear_noiseless_prefers_largest(self):
        rng = np.random.default_rng(3)
        u, x, z = rng.random(100), rng.standard_normal(100), rng.standard_normal(100)
        d = Dataset(u, x, z, 1 + 2 * u + x * (1 - u) + z)
        h, scores = cv_bandwidth(d, "ls", [0.2, 0.3, 0.5])
        assert h == 0.5


class TestOtherCommands:
    def test_efficiency(self, tmp_path, capsys):
        assert main(["efficiency", "--dist", "normal", "--q", "1,99", "--h-ls", "0.2",
                     "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "efficiency.csv")
        assert float(rows[0]["are_beta"]) == pytest.approx(2 / np.pi, abs=1e-3)
        assert float(rows[1]["are_beta"]) == pytest.approx(0.955, abs=0.005)
        assert "normal" in capsys.readouterr().out
        assert main(["efficiency", "--dist", "gumbel"]) == EXIT_INPUT

    def test_simulate(self, tmp_path):
        assert main(["simulate", "--example", "1", "--n", "60", "--reps", "1", "--h", "0.3",
                     "--methods", "LS,CQR3", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "tables.txt").read_text().startswith("Example 1")
        assert main(["simulate", "--n", "10", "--out", str(tmp_path)]) == EXIT_INPUT
