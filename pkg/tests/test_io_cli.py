import json

import numpy as np
import pytest

from condcop.cli import RunConfig, main
from condcop.copulas import CopulaSpec, sample_copula
from condcop.curve import PosteriorCurve
from condcop.errors import ConfigError, DataError, InsufficientDataError
from condcop.io import IngestConfig, ingest_csv, read_curve_csv, write_curve_csv


def _write(path, header, rows):
    path.write_text(",".join(header) + "\n" + "\n".join(",".join(str(v) for v in r) for r in rows) + "\n")
    return path


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    rows = []
    for x in np.linspace(0, 1, 8):
        u = sample_copula(CopulaSpec("gaussian", 0.2 + 0.6 * x), 40, rng)
        rows += [(a, b, round(x, 6)) for a, b in u]
    return _write(tmp_path / "data.csv", ["y1", "y2", "x"], rows)


class TestIngest:
    def test_groups_by_level(self, data_csv):
        g = ingest_csv(data_csv)
        assert g.k == 8 and np.all(g.counts == 40)
        assert g.meta == {"rows_used": 320, "rows_dropped": 0, "singleton_rows_dropped": 0}

    def test_missing_and_singletons(self, tmp_path):
        p = _write(tmp_path / "d.csv", ["x", "y1", "y2"], [(0, 1, 2), (0, 2, 1), (0, 3, 3), (1, "NA", 2), (1, 2, "inf"), (2, 1, 1)])
        g = ingest_csv(p)
        assert g.k == 1
        assert g.meta == {"rows_used": 3, "rows_dropped": 2, "singleton_rows_dropped": 1}

    def test_errors(self, tmp_path):
        with pytest.raises(DataError, match="missing columns"):
            ingest_csv(_write(tmp_path / "a.csv", ["y1", "x"], [(1, 2)]))
        with pytest.raises(DataError, match="row 3"):
            ingest_csv(_write(tmp_path / "b.csv", ["y1", "y2", "x"], [(1, 2, 0), (1, "abc", 0)]))
        (tmp_path / "c.csv").write_text("")
        with pytest.raises(DataError, match="empty"):
            ingest_csv(tmp_path / "c.csv")
        with pytest.raises(InsufficientDataError):
            ingest_csv(_write(tmp_path / "d.csv", ["y1", "y2", "x"], [(1, 2, 0), (2, 1, 1)]))

    def test_quantile_bins(self, tmp_path):
        rng = np.random.default_rng(1)
        rows = [(a, b, x) for a, b, x in rng.uniform(size=(90, 3))]
        g = ingest_csv(_write(tmp_path / "d.csv", ["y1", "y2", "x"], rows), IngestConfig(bins=3))
        assert g.k == 3 and g.counts.sum() == 90
        assert np.all(np.diff(g.x[:, 0]) > 0)

    def test_within_level_ranks(self, tmp_path):
        p = _write(tmp_path / "d.csv", ["y1", "y2", "x"], [(10, 1, 0), (20, 2, 0), (1, 5, 1), (2, 6, 1)])
        g = ingest_csv(p, IngestConfig(pseudo="level"))
        for s in g.samples:
            np.testing.assert_allclose(np.sort(s[:, 0]), [1 / 3, 2 / 3])

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            IngestConfig(bins=1)
        with pytest.raises(ConfigError):
            IngestConfig(pseudo="local")


class TestCurveFiles:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        z = rng.standard_normal(5)
        c = PosteriorCurve(rng.uniform(size=(5, 2)), np.tanh(z), np.tanh(z - 0.3), np.tanh(z + 0.3), z)
        write_curve_csv(c, tmp_path / "c.csv", ["a", "b"])
        back = read_curve_csv(tmp_path / "c.csv")
        for name in ("grid", "mean", "lower", "upper", "fisher_mean"):
            np.testing.assert_array_equal(getattr(back, name), getattr(c, name))

    def test_not_a_curve_file(self, tmp_path):
        with pytest.raises(DataError):
            read_curve_csv(_write(tmp_path / "x.csv", ["a", "b", "c", "d", "e"], [(1, 2, 3, 4, 5)]))


class TestRunCommand:
    def _run(self, tmp_path, data_csv, *extra, name="out"):
        out = tmp_path / name
        code = main(["run", "--input", str(data_csv), "--out", str(out), *extra])
        return code, out

    @pytest.mark.parametrize("method", ["el-local", "el-linear", "el-spline", "freq-cond"])
    def test_methods_write_outputs(self, tmp_path, data_csv, method):
        code, out = self._run(tmp_path, data_csv, "--method", method, "--seed", "1")
        assert code == 0
        curve = read_curve_csv(out / "curve.csv")
        assert curve.grid.shape == (8, 1)
        man = json.loads((out / "manifest.json").read_text())
        assert man["seed"] == 1 and man["config"]["method"] == method
        assert man["input"]["levels"] == 8

    def test_config_file_and_determinism(self, tmp_path, data_csv):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("method: gp\nfunctional: tau\ngrid: '5'\ngp:\n  mh: {n_iter: 600, burn_in: 100, n_keep: 100}\n")
        a = self._run(tmp_path, data_csv, "--config", str(cfg), "--seed", "3", name="a")[1]
        b = self._run(tmp_path, data_csv, "--config", str(cfg), "--seed", "3", name="b")[1]
        assert (a / "curve.csv").read_bytes() == (b / "curve.csv").read_bytes()
        ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
        for m in (ma, mb):
            m.pop("timings"), m["config"].pop("out")
        assert ma == mb
        assert ma["config"]["gp"]["alpha"] == 2.0  # defaults are materialised
        assert read_curve_csv(a / "curve.csv").grid.shape == (5, 1)

    def test_environment_seed(self, tmp_path, data_csv, monkeypatch):
        monkeypatch.setenv("CONDCOP_SEED", "17")
        _, out = self._run(tmp_path, data_csv, "--method", "el-linear")
        assert json.loads((out / "manifest.json").read_text())["seed"] == 17
        monkeypatch.setenv("CONDCOP_SEED", "abc")
        assert self._run(tmp_path, data_csv, "--method", "el-linear", name="o2")[0] == 2

    @pytest.mark.parametrize(
        "args,code,error",
        [
            (["--method", "el-local", "--covariates", "z"], 3, "DataError"),
            (["--method", "el-local", "--grid", "abc"], 2, "ConfigError"),
            (["--method", "el-local", "--bins", "1"], 2, "ConfigError"),
        ],
    )
    def test_exit_codes(self, tmp_path, data_csv, capsys, args, code, error):
        assert self._run(tmp_path, data_csv, *args)[0] == code
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == error and err["exit_code"] == code

    def test_missing_input_file(self, tmp_path, capsys):
        assert main(["run", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 3

    def test_unknown_config_key(self, tmp_path, data_csv):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"method": "gp", "colour": "red"}))
        assert self._run(tmp_path, data_csv, "--config", str(cfg))[0] == 2

    def test_single_level_is_rejected(self, tmp_path, capsys):
        p = _write(tmp_path / "d.csv", ["y1", "y2", "x"], [(1, 2, 0), (2, 1, 0), (3, 3, 0)])
        code = main(["run", "--input", str(p), "--out", str(tmp_path / "o"), "--method", "gp"])
        assert code == 2
        assert "basis columns" in json.loads(capsys.readouterr().err)["message"]

    def test_run_config_validation(self):
        with pytest.raises(ConfigError):
            RunConfig(method="mle")
        assert RunConfig(covariates="a, b").covariates == ["a", "b"]


class TestBenchCommand:
    def test_smoke_bench(self, tmp_path):
        out = tmp_path / "bench"
        code = main(["bench", "--scenario", "linear08", "--method", "el-local", "--families", "frank", "--scale", "reps=0.1,k=0.3,n=0.3", "--seed", "2", "--out", str(out)])
        assert code == 0
        assert {p.name for p in out.iterdir()} == {"report.csv", "report.json", "table.csv"}
        rows = json.loads((out / "report.json").read_text())["rows"]
        assert rows[0]["family"] == "frank" and rows[0]["reps_ok"] == 1

    def test_twocov_rejects_rho(self, tmp_path):
        assert main(["bench", "--scenario", "twocov", "--functional", "rho", "--out", str(tmp_path)]) == 2
