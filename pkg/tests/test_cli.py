from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from gradframe.cli import main
from gradframe.data import Boundary, label_by_boundary, load_csv_dataset
from gradframe.shift import SHIFT_REPORT_SCHEMA


def write_cfg(path: Path, body: str) -> Path:
    path.write_text(body)
    return path


def strip_timestamps(payload):
    if isinstance(payload, dict):
        return {
            k: ("<ts>" if k == "timestamp" else strip_timestamps(v)) for k, v in payload.items()
        }
    if isinstance(payload, list):
        return [strip_timestamps(v) for v in payload]
    return payload


TINY_TRAIN = """
dataset.kind = simulate
method = {method}
train.epochs = 25
train.pretrain_epochs = 8
train.batch_size = 64
train.beta = 0.02
ascent.max_steps = 3
ascent.alpha = 0.2
seed = 1
output.dir = {out}
"""


class TestSimulate:
    def test_default_run_and_byte_stability(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.cfg", f"dataset.kind = simulate\noutput.dir = {tmp_path}/a\n")
        assert main(["simulate", "--config", str(cfg)]) == 0
        first_src = (tmp_path / "a" / "source.csv").read_bytes()
        first_tgt = (tmp_path / "a" / "target.csv").read_bytes()
        ds = load_csv_dataset(tmp_path / "a" / "source.csv")
        assert ds.k == 2
        assert sum(len(d) for d in ds.domains) == 400
        tgt = load_csv_dataset(tmp_path / "a" / "target.csv")
        assert len(tgt.pooled()) == 100

        cfg2 = write_cfg(tmp_path / "c2.cfg", f"dataset.kind = simulate\noutput.dir = {tmp_path}/b\n")
        assert main(["simulate", "--config", str(cfg2)]) == 0
        assert (tmp_path / "b" / "source.csv").read_bytes() == first_src
        assert (tmp_path / "b" / "target.csv").read_bytes() == first_tgt

    def test_boundary_override_relabels(self, tmp_path):
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"dataset.kind = simulate\nsimulate.boundary.a = -2\noutput.dir = {tmp_path}/o\n",
        )
        assert main(["simulate", "--config", str(cfg)]) == 0
        ds = load_csv_dataset(tmp_path / "o" / "source.csv")
        boundary = Boundary(-2.0, 0.0)
        for dom in ds.domains:
            for p in dom.points:
                assert p.label == label_by_boundary(p.features, boundary)

    def test_missing_output_dir_created(self, tmp_path):
        nested = tmp_path / "deep" / "nested" / "dir"
        cfg = write_cfg(tmp_path / "c.cfg", f"dataset.kind = simulate\noutput.dir = {nested}\n")
        assert main(["simulate", "--config", str(cfg)]) == 0
        assert (nested / "source.csv").exists()


class TestTrain:
    @pytest.mark.parametrize("method", ["erm", "mixup", "groupdro", "gradframe"])
    def test_methods_produce_reports(self, tmp_path, method):
        out = tmp_path / method
        cfg = write_cfg(tmp_path / f"{method}.cfg", TINY_TRAIN.format(method=method, out=out))
        assert main(["train", "--config", str(cfg)]) == 0
        report = json.loads((out / "train_report.json").read_text())
        assert report["method"] == method
        assert 0.0 <= report["eval_target"]["auroc"] <= 1.0
        assert (out / "model.txt").exists()
        assert (out / "fictitious.csv").exists() == (method == "gradframe")

    def test_rerun_is_identical_modulo_timestamp(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        cfg1 = write_cfg(tmp_path / "c1.cfg", TINY_TRAIN.format(method="gradframe", out=out1))
        cfg2 = write_cfg(tmp_path / "c2.cfg", TINY_TRAIN.format(method="gradframe", out=out2))
        assert main(["train", "--config", str(cfg1)]) == 0
        assert main(["train", "--config", str(cfg2)]) == 0
        a = strip_timestamps(json.loads((out1 / "train_report.json").read_text()))
        b = strip_timestamps(json.loads((out2 / "train_report.json").read_text()))
        assert a == b
        assert (out1 / "model.txt").read_bytes() == (out2 / "model.txt").read_bytes()
        assert (out1 / "fictitious.csv").read_bytes() == (out2 / "fictitious.csv").read_bytes()

    def test_effective_config_round_trip(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        cfg = write_cfg(tmp_path / "c.cfg", TINY_TRAIN.format(method="erm", out=out1))
        assert main(["train", "--config", str(cfg)]) == 0
        echoed = out1 / "effective_config.txt"
        assert main(["train", "--config", str(echoed), "--out", str(out2)]) == 0
        assert (out1 / "model.txt").read_bytes() == (out2 / "model.txt").read_bytes()

    def test_csv_dataset_flow(self, tmp_path):
        sim_out = tmp_path / "sim"
        cfg = write_cfg(tmp_path / "s.cfg", f"dataset.kind = simulate\noutput.dir = {sim_out}\n")
        assert main(["simulate", "--config", str(cfg)]) == 0
        out = tmp_path / "train"
        train_cfg = write_cfg(
            tmp_path / "t.cfg",
            f"""
dataset.kind = csv
data.source_csv = {sim_out}/source.csv
data.target_csv = {sim_out}/target.csv
method = erm
train.epochs = 20
train.batch_size = 64
output.dir = {out}
""",
        )
        assert main(["train", "--config", str(train_cfg)]) == 0
        report = json.loads((out / "train_report.json").read_text())
        assert "eval_target" in report


class TestShiftReport:
    def test_identity_ascent_gives_zero_ratios_and_valid_schema(self, tmp_path):
        out = tmp_path / "shift"
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"""
dataset.kind = simulate
method = gradframe
train.epochs = 25
train.pretrain_epochs = 8
train.batch_size = 64
ascent.max_steps = 0
ascent.min_steps = 0
seed = 2
output.dir = {out}
""",
        )
        assert main(["shift-report", "--config", str(cfg)]) == 0
        payload = json.loads((out / "shift_report.json").read_text())
        import jsonschema

        jsonschema.validate(payload, SHIFT_REPORT_SCHEMA)
        assert all(v == 0.0 for v in payload["covariate_ratios"])
        assert (out / "shift_series.csv").exists()

    def test_sweep_produces_runs(self, tmp_path):
        out = tmp_path / "sweep"
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"""
dataset.kind = simulate
method = gradframe
train.epochs = 20
train.pretrain_epochs = 8
train.batch_size = 64
ascent.max_steps = 2
ascent.min_steps = 0
shift.sweep = gamma1
shift.sweep_values = 0.5,5
seed = 3
output.dir = {out}
""",
        )
        assert main(["shift-report", "--config", str(cfg)]) == 0
        payload = json.loads((out / "shift_report.json").read_text())
        assert len(payload["sweep"]) == 2
        assert payload["sweep"][0]["gamma1"] == 0.5


class TestSelectK:
    def test_table_rows_match_candidates(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = ["x0,x1,label,month"]
        for month in range(1, 7):
            for _ in range(8):
                x = rng.normal(size=2)
                label = int(x[0] + x[1] > 0)
                if month >= 4:
                    label = 1 - label
                rows.append(f"{x[0]},{x[1]},{label},{month}")
        data = tmp_path / "keyed.csv"
        data.write_text("\n".join(rows) + "\n")
        out = tmp_path / "selk"
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"""
dataset.kind = csv
data.source_csv = {data}
csv.feature_columns = x0,x1
csv.domain_column =
select_k.candidates = 2,3
select_k.key_column = month
select_k.m_samples = 8
train.epochs = 10
train.batch_size = 16
output.dir = {out}
""",
        )
        assert main(["select-k", "--config", str(cfg)]) == 0
        table_lines = (out / "k_table.csv").read_text().splitlines()
        assert table_lines[0] == "k,avg_p_value"
        assert len(table_lines) == 3
        selection = json.loads((out / "selection.json").read_text())
        assert selection["best_k"] in (2, 3)


class TestLodoCommand:
    def test_pass_through(self, tmp_path):
        rng = np.random.default_rng(1)
        rows = ["x0,x1,label,domain"]
        for dom in "ABC":
            for _ in range(30):
                x = rng.normal(size=2) + (2.0 if rng.uniform() > 0.5 else -2.0)
                rows.append(f"{x[0]},{x[1]},{int(x[0] + x[1] > 0)},{dom}")
        data = tmp_path / "doms.csv"
        data.write_text("\n".join(rows) + "\n")
        out = tmp_path / "lodo"
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"""
dataset.kind = csv
data.source_csv = {data}
grid.pairs = 0.1:0.1;1:10
train.epochs = 10
train.pretrain_epochs = 5
train.batch_size = 30
ascent.max_steps = 1
ascent.min_steps = 0
output.dir = {out}
""",
        )
        assert main(["lodo", "--config", str(cfg)]) == 0
        lines = (out / "lodo_table.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 3
        choice = json.loads((out / "lodo_choice.json").read_text())
        assert (choice["gamma1"], choice["gamma2"]) in [(0.1, 0.1), (1.0, 10.0)]


class TestCompare:
    def test_matrix_and_p_values(self, tmp_path):
        out = tmp_path / "cmp"
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"""
dataset.kind = simulate
compare.methods = erm,gradframe
seeds = 0,1
train.epochs = 15
train.pretrain_epochs = 5
train.batch_size = 64
ascent.max_steps = 2
ascent.min_steps = 0
output.dir = {out}
""",
        )
        assert main(["compare", "--config", str(cfg)]) == 0
        lines = (out / "compare_matrix.csv").read_text().splitlines()
        assert lines[0] == "method,seed,auroc"
        assert len(lines) == 5
        report = json.loads((out / "compare_report.json").read_text())
        assert "erm_vs_gradframe" in report["welch_tests"]
        for line in lines[1:]:
            score = float(line.split(",")[2])
            assert 0.0 <= score <= 1.0

    def test_single_seed_skips_tests_with_diagnostic(self, tmp_path):
        out = tmp_path / "cmp1"
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"""
dataset.kind = simulate
compare.methods = erm
seeds = 0
train.epochs = 10
train.batch_size = 64
output.dir = {out}
""",
        )
        assert main(["compare", "--config", str(cfg)]) == 0
        report = json.loads((out / "compare_report.json").read_text())
        assert report["welch_tests"] == {}
        assert report["diagnostics"]


class TestEvaluateCommand:
    def test_model_round_trip_evaluation(self, tmp_path):
        out = tmp_path / "run"
        cfg = write_cfg(tmp_path / "c.cfg", TINY_TRAIN.format(method="erm", out=out))
        assert main(["train", "--config", str(cfg)]) == 0
        sim_out = tmp_path / "data"
        sim_cfg = write_cfg(
            tmp_path / "s.cfg", f"dataset.kind = simulate\nseed = 1\noutput.dir = {sim_out}\n"
        )
        assert main(["simulate", "--config", str(sim_cfg)]) == 0
        eval_cfg = write_cfg(
            tmp_path / "e.cfg",
            f"""
dataset.kind = csv
data.target_csv = {sim_out}/target.csv
output.dir = {out}
""",
        )
        assert main(["evaluate", "--config", str(eval_cfg)]) == 0
        payload = json.loads((out / "eval_report.json").read_text())
        assert 0.0 <= payload["report"]["auroc"] <= 1.0


class TestExitCodes:
    def test_unknown_method_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.cfg", "method = boosting\n")
        assert main(["train", "--config", str(cfg)]) == 2

    def test_unknown_key_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.cfg", "methodd = erm\n")
        assert main(["train", "--config", str(cfg)]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "absent.cfg")]) == 2

    def test_missing_dataset_is_data_error(self, tmp_path):
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"dataset.kind = csv\ndata.source_csv = {tmp_path}/nope.csv\noutput.dir = {tmp_path}/o\n",
        )
        assert main(["train", "--config", str(cfg)]) == 3

    def test_single_class_target_is_numeric_failure(self, tmp_path):
        src = tmp_path / "src.csv"
        src.write_text("x0,x1,label,domain\n0,0,0,A\n1,1,1,A\n0,1,0,B\n1,0,1,B\n" * 1)
        tgt = tmp_path / "tgt.csv"
        tgt.write_text("x0,x1,label\n0.5,0.5,1\n0.6,0.4,1\n")
        cfg = write_cfg(
            tmp_path / "c.cfg",
            f"""
dataset.kind = csv
data.source_csv = {src}
data.target_csv = {tgt}
compare.methods = erm
seeds = 0,1
train.epochs = 3
train.batch_size = 4
output.dir = {tmp_path}/o
""",
        )
        assert main(["compare", "--config", str(cfg)]) == 4

    def test_seed_flag_overrides(self, tmp_path):
        out = tmp_path / "s"
        cfg = write_cfg(tmp_path / "c.cfg", f"dataset.kind = simulate\noutput.dir = {out}\n")
        assert main(["simulate", "--config", str(cfg), "--seed", "9"]) == 0
        echoed = (out / "effective_config.txt").read_text()
        assert "seed = 9" in echoed
