import os

import numpy as np
import pytest

from pdc import (
    PERIODIC, ReducedModel, Seasonal2D, SlotIndexer, TimeSeries,
    evaluate_cost, generate, ingest_csv, read_model, write_dataset,
    write_model,
)
from pdc.cli import main, sweep_orders
from pdc.engine import FitConfig
from pdc.io import ParseError, read_config, write_table
from oracles import random_orthogonal


class TestIngestCsv:
    def test_minimal_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,a,b\n1,0.5,1.5\n2,0.25,2.5\n3,0.125,3.5\n")
        ts = ingest_csv(p)
        assert ts.values.shape == (2, 3)
        assert ts.channel_names == ("a", "b")
        np.testing.assert_array_equal(ts.values[0], [0.5, 0.25, 0.125])

    def test_comments_and_blanks_skipped(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("# header comment\n\ntime,a\n1,1.0\n# mid comment\n2,2.0\n")
        ts = ingest_csv(p)
        assert ts.n_snapshots == 2

    def test_exogenous_track(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,a,s:month\n1,0.1,0\n2,0.2,1\n3,0.3,2\n")
        ts = ingest_csv(p)
        assert ts.channel_names == ("a",)
        np.testing.assert_array_equal(ts.exogenous["month"], [0, 1, 2])

    def test_ragged_row_line_number(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,a,b\n1,1.0,2.0\n2,1.0\n")
        with pytest.raises(ParseError) as e:
            ingest_csv(p)
        assert e.value.line == 3

    def test_non_numeric_cell(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,a\n1,1.0\n2,oops\n")
        with pytest.raises(ParseError) as e:
            ingest_csv(p)
        assert e.value.line == 3
        assert "oops" in str(e.value)

    def test_non_increasing_time(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,a\n1,1.0\n1,2.0\n")
        with pytest.raises(ParseError) as e:
            ingest_csv(p)
        assert e.value.line == 3

    def test_missing_time_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("t,a\n1,1.0\n2,2.0\n")
        with pytest.raises(ParseError):
            ingest_csv(p)

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        ts = TimeSeries(rng.standard_normal((3, 20)),
                        times=np.cumsum(rng.random(20)) + 1.0,
                        exogenous={"u": rng.standard_normal(20)},
                        channel_names=("x", "y", "z"))
        p = tmp_path / "d.csv"
        write_dataset(p, ts)
        back = ingest_csv(p)
        np.testing.assert_array_equal(back.values, ts.values)
        np.testing.assert_array_equal(back.times, ts.times)
        np.testing.assert_array_equal(back.exogenous["u"], ts.exogenous["u"])
        assert back.channel_names == ts.channel_names


class TestModelFile:
    def _random_model(self, seed=0, slots=None, r=2):
        rng = np.random.default_rng(seed)
        slots = slots or SlotIndexer(PERIODIC, 3)
        S = slots.n_slots(10)
        return ReducedModel(
            n=4, m=2, r=r, slots=slots,
            Q=np.stack([random_orthogonal(rng, 4) for _ in range(S)]),
            A=rng.standard_normal((S, r, 2, 2)),
            b=rng.standard_normal((S, 2)),
            ybar=rng.standard_normal((S, 2)))

    def test_round_trip_bit_exact(self, tmp_path):
        model = self._random_model()
        p = tmp_path / "m.model"
        write_model(p, model, seed=42)
        back = read_model(p)
        np.testing.assert_array_equal(back.Q, model.Q)
        np.testing.assert_array_equal(back.A, model.A)
        np.testing.assert_array_equal(back.b, model.b)
        np.testing.assert_array_equal(back.ybar, model.ybar)
        assert back.slots == model.slots
        assert (back.n, back.m, back.r) == (4, 2, 2)

    def test_orthogonality_reverified(self, tmp_path):
        model = self._random_model(seed=1)
        p = tmp_path / "m.model"
        write_model(p, model)
        text = p.read_text()
        # corrupt one Qx entry
        lines = text.splitlines()
        for i, line in enumerate(lines):
            if lines[i - 1].startswith("Qx") if i else False:
                parts = line.split()
                parts[0] = "0.9"
                lines[i] = " ".join(parts)
                break
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(Exception):
            read_model(p)

    def test_bad_version_rejected(self, tmp_path):
        p = tmp_path / "m.model"
        p.write_text("version 99\n")
        with pytest.raises(ParseError):
            read_model(p)

    def test_truncated_rejected(self, tmp_path):
        model = self._random_model(seed=2)
        p = tmp_path / "m.model"
        write_model(p, model)
        lines = p.read_text().splitlines()
        p.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(ParseError):
            read_model(p)

    def test_ledger_section_tolerated(self, tmp_path):
        model = self._random_model(seed=3, slots=SlotIndexer(), r=1)
        p = tmp_path / "m.model"
        ledger = {("fourier_cos", 1): {"A": np.ones((1, 2, 2)),
                                       "b": np.zeros(2), "ybar": np.ones(2)}}
        write_model(p, model, ledger=ledger)
        back = read_model(p)
        np.testing.assert_array_equal(back.Q, model.Q)


class TestConfigFile:
    def test_parse(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# options\nm = 2\nsteps=500   # budget\nslots=periodic:12\n")
        cfg = read_config(p)
        assert cfg == {"m": "2", "steps": "500", "slots": "periodic:12"}

    def test_bad_line(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("m: 2\n")
        with pytest.raises(ParseError):
            read_config(p)


class TestWriteTable:
    def test_types_formatted(self, tmp_path):
        p = tmp_path / "t.csv"
        write_table(p, ["a", "b", "c", "d"],
                    [(1, 0.5, True, "ok"), (2, 1.0 / 3.0, False, "no")])
        lines = p.read_text().splitlines()
        assert lines[0] == "a,b,c,d"
        assert lines[1] == "1,0.5,1,ok"
        assert lines[2].startswith("2,0.33333333333333331,0,no")


class TestCliCommands:
    def _generate(self, tmp_path, extra=()):
        data = tmp_path / "data.csv"
        truth = tmp_path / "truth.model"
        rc = main(["generate", "--scenario", "auto2d", "--seed", "3",
                   "--n", "300", "-o", str(data), "--truth", str(truth),
                   *extra])
        assert rc == 0
        return data, truth

    def test_generate(self, tmp_path):
        data, truth = self._generate(tmp_path)
        assert ingest_csv(data).values.shape == (2, 300)
        assert read_model(truth).n == 2

    def test_fit_evaluate_consistent(self, tmp_path, capsys):
        data, truth = self._generate(tmp_path)
        model_p = tmp_path / "fit.model"
        trace_p = tmp_path / "trace.csv"
        rc = main(["fit", str(data), "--m", "1", "--steps", "80", "--seed",
                   "1", "-o", str(model_p), "--trace", str(trace_p),
                   "--no-figures"])
        assert rc == 0
        logged = None
        for line in trace_p.read_text().splitlines():
            if "final_cost=" in line:
                logged = float(line.split("final_cost=")[1])
        assert logged is not None
        series = ingest_csv(data)
        model = read_model(model_p)
        assert evaluate_cost(model, series)[1] == logged

    def test_bit_reproducible(self, tmp_path):
        data, _ = self._generate(tmp_path)
        outs = []
        for name in ("a.model", "b.model"):
            p = tmp_path / name
            rc = main(["fit", str(data), "--m", "1", "--steps", "40",
                       "--seed", "9", "-o", str(p), "--no-figures"])
            assert rc == 0
            body = [ln for ln in p.read_text().splitlines()
                    if not ln.startswith("created")]
            outs.append(body)
        assert outs[0] == outs[1]

    def test_predict_and_figures(self, tmp_path):
        data, truth = self._generate(tmp_path)
        pred = tmp_path / "pred.csv"
        rc = main(["predict", str(truth), str(data), "-o", str(pred)])
        assert rc == 0
        assert pred.exists()
        assert (tmp_path / "pred.png").exists()

    def test_no_figures_flag(self, tmp_path):
        data, truth = self._generate(tmp_path)
        pred = tmp_path / "pred.csv"
        rc = main(["predict", str(truth), str(data), "-o", str(pred),
                   "--no-figures"])
        assert rc == 0
        assert not (tmp_path / "pred.png").exists()

    def test_evaluate_with_truth(self, tmp_path, capsys):
        data, truth = self._generate(tmp_path)
        report = tmp_path / "report.csv"
        rc = main(["evaluate", str(truth), str(data), "--truth", str(truth),
                   "-o", str(report)])
        assert rc == 0
        text = report.read_text()
        assert "e_Q" in text and "normalized_cost" in text

    def test_pca(self, tmp_path):
        data, _ = self._generate(tmp_path)
        out = tmp_path / "pca.csv"
        rc = main(["pca", str(data), "--m", "1", "-o", str(out),
                   "--no-figures"])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "component,singular_value,tail"
        assert len(lines) == 3

    def test_sweep(self, tmp_path):
        data, _ = self._generate(tmp_path)
        out = tmp_path / "sweep.csv"
        rc = main(["sweep", str(data), "--m", "1", "--r", "1..2",
                   "--steps", "30", "--seed", "0", "-o", str(out),
                   "--no-figures"])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "m,r,cost,tail,status"
        assert len(lines) == 3
        assert all(ln.endswith("ok") for ln in lines[1:])

    def test_config_file_and_flag_precedence(self, tmp_path):
        data, _ = self._generate(tmp_path)
        cfg = tmp_path / "opt.cfg"
        cfg.write_text("m=1\nsteps=20\nseed=4\n")
        p1 = tmp_path / "c1.model"
        rc = main(["fit", str(data), "--config", str(cfg), "-o", str(p1),
                   "--no-figures"])
        assert rc == 0
        # flag overrides the config seed; result must differ from config run
        p2 = tmp_path / "c2.model"
        rc = main(["fit", str(data), "--config", str(cfg), "--seed", "5",
                   "-o", str(p2), "--no-figures"])
        assert rc == 0
        assert read_model(p1).n == 2 and read_model(p2).n == 2

    def test_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("time,a\n1,1.0\n2,nope\n")
        rc = main(["fit", str(bad), "--m", "1", "-o", str(tmp_path / "x"),
                   "--no-figures"])
        assert rc == 2

    def test_missing_file_exit_code(self, tmp_path):
        rc = main(["fit", str(tmp_path / "absent.csv"), "--m", "1",
                   "-o", str(tmp_path / "x"), "--no-figures"])
        assert rc == 2

    def test_missing_m_exit_code(self, tmp_path):
        data, _ = self._generate(tmp_path)
        rc = main(["fit", str(data), "-o", str(tmp_path / "x"),
                   "--no-figures"])
        assert rc == 2

    def test_fit_failure_exit_code(self, tmp_path, monkeypatch):
        data, _ = self._generate(tmp_path)
        from pdc import FitFailureError
        import pdc.cli as cli_mod

        def boom(series, config):
            raise FitFailureError("synthetic failure")

        monkeypatch.setattr(cli_mod, "fit", boom)
        rc = main(["fit", str(data), "--m", "1", "-o", str(tmp_path / "x"),
                   "--no-figures"])
        assert rc == 3

    def test_pdc_seed_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PDC_SEED", "3")
        data_env = tmp_path / "env.csv"
        rc = main(["generate", "--scenario", "auto2d", "--n", "50",
                   "-o", str(data_env)])
        assert rc == 0
        monkeypatch.delenv("PDC_SEED")
        data_flag = tmp_path / "flag.csv"
        rc = main(["generate", "--scenario", "auto2d", "--seed", "3",
                   "--n", "50", "-o", str(data_flag)])
        assert rc == 0
        body = lambda p: [ln for ln in p.read_text().splitlines()
                          if not ln.startswith("#")]
        assert body(data_env) == body(data_flag)

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0
        assert main(["fit", "--help"]) == 0


class TestSweepOrders:
    def test_rows_sorted_and_tail_constant_in_r(self):
        series, _, _ = generate(Seasonal2D(N=200, seed=0))
        rows = sweep_orders(series, [1], [2, 1],
                            FitConfig(m=1, k_tot=25, seed=0, restarts=0))
        assert [(m, r) for m, r, *_ in rows] == [(1, 1), (1, 2)]
        assert rows[0][3] == rows[1][3]

    def test_failure_recorded_and_continues(self, monkeypatch):
        series, _, _ = generate(Seasonal2D(N=200, seed=0))
        import pdc.cli as cli_mod
        from pdc import FitFailureError
        real_fit = cli_mod.fit
        calls = []

        def flaky(s, cfg):
            calls.append(cfg.r)
            if cfg.r == 1:
                raise FitFailureError("boom")
            return real_fit(s, cfg)

        monkeypatch.setattr(cli_mod, "fit", flaky)
        rows = sweep_orders(series, [1], [1, 2],
                           FitConfig(m=1, k_tot=10, seed=0, restarts=0))
        assert rows[0][4].startswith("failed")
        assert np.isnan(rows[0][2])
        assert rows[1][4] == "ok"
