import json

import numpy as np
import pytest

from crashgraph.cli import main
from crashgraph.graphs import load_graph
from crashgraph.records import CSV_HEADER


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    summary = json.loads(captured.out) if captured.out.strip() else None
    return code, summary, captured.err


@pytest.fixture
def small_pipeline(tmp_path, capsys):
    """synth -> ingest shared by several tests (small and fast)."""
    records = tmp_path / "records.csv"
    balanced = tmp_path / "balanced.csv"
    code, summary, _ = run(capsys, "synth", "--out", str(records), "--n", "240", "--seed", "5")
    assert code == 0
    code, summary, _ = run(
        capsys, "ingest", "--records", str(records), "--out", str(balanced), "--seed", "5"
    )
    assert code == 0
    return tmp_path, balanced


class TestHappyPath:
    def test_full_pipeline_to_metrics_report(self, small_pipeline, capsys):
        tmp_path, balanced = small_pipeline
        graph = tmp_path / "coarse.json"
        code, summary, _ = run(
            capsys,
            "build-graph", "--mode", "coarse", "--records", str(balanced),
            "--out", str(graph), "--seed", "5",
        )
        assert code == 0
        assert summary["feature_dim"] == 423
        run_dir = tmp_path / "run"
        code, summary, _ = run(
            capsys,
            "train", "--graph", str(graph), "--arch", "dstgcn",
            "--out-dir", str(run_dir), "--epochs", "3", "--seed", "5",
        )
        assert code == 0
        assert (run_dir / "history.csv").exists()
        checkpoint = run_dir / "checkpoint.json"
        assert checkpoint.exists()
        eval_dir = tmp_path / "eval"
        code, summary, _ = run(
            capsys,
            "evaluate", "--graph", str(graph), "--checkpoint", str(checkpoint),
            "--split", "test", "--out-dir", str(eval_dir),
        )
        assert code == 0
        report = json.loads((eval_dir / "report.json").read_text())
        assert set(report) >= {"confusion", "accuracy", "weighted_f1", "auc", "average_precision"}
        assert (eval_dir / "roc_points.csv").read_text().startswith("class,fpr,tpr")
        assert (eval_dir / "pr_points.csv").read_text().startswith("recall,precision")

    def test_fine_graph_reports_dimensions(self, small_pipeline, capsys):
        tmp_path, balanced = small_pipeline
        graph = tmp_path / "fine.json"
        code, summary, _ = run(
            capsys,
            "build-graph", "--mode", "fine", "--records", str(balanced),
            "--out", str(graph), "--seed", "5",
        )
        assert code == 0
        assert summary["feature_dim"] == 389
        n_records = sum(1 for _ in open(balanced)) - 1
        assert summary["num_nodes"] == n_records

    def test_compare_writes_table(self, small_pipeline, capsys):
        tmp_path, balanced = small_pipeline
        fine, coarse = tmp_path / "fine.json", tmp_path / "coarse.json"
        run(capsys, "build-graph", "--mode", "fine", "--records", str(balanced), "--out", str(fine), "--seed", "5")
        run(capsys, "build-graph", "--mode", "coarse", "--records", str(balanced), "--out", str(coarse), "--seed", "5")
        table = tmp_path / "table.csv"
        code, summary, _ = run(
            capsys,
            "compare", "--fine", str(fine), "--coarse", str(coarse),
            "--out", str(table), "--archs", "gcn", "sage", "--epochs", "2", "--seed", "5",
        )
        assert code == 0
        lines = table.read_text().splitlines()
        assert lines[0] == "arch,fine_best_val_f1,coarse_best_val_f1"
        assert len(lines) == 3

    def test_grid_search_artifacts(self, small_pipeline, capsys):
        tmp_path, balanced = small_pipeline
        graph = tmp_path / "coarse.json"
        run(capsys, "build-graph", "--mode", "coarse", "--records", str(balanced), "--out", str(graph), "--seed", "5")
        out_dir = tmp_path / "search"
        code, summary, _ = run(
            capsys,
            "grid-search", "--graph", str(graph), "--arch", "gcn", "--out-dir", str(out_dir),
            "--hidden", "4", "--dropout", "0.2", "--lr", "0.05", "0.01",
            "--weight-decay", "0.005", "--epochs", "2", "--workers", "1", "--seed", "5",
        )
        assert code == 0
        assert summary["runs"] == 2
        results = (out_dir / "results.csv").read_text().splitlines()
        assert len(results) == 3
        assert (out_dir / "best_checkpoint.json").exists()
        assert len(list((out_dir / "runs").glob("run-*-history.csv"))) == 2

    def test_synth_signal_free_flag(self, tmp_path, capsys):
        out = tmp_path / "null.csv"
        code, summary, _ = run(capsys, "synth", "--out", str(out), "--n", "400", "--seed", "1", "--signal-free")
        assert code == 0
        counts = summary["class_counts"]
        assert abs(counts[0] - counts[1]) < 4 * np.sqrt(400 * 0.25)


class TestDeterminism:
    def test_pipeline_idempotent(self, tmp_path, capsys):
        outputs = []
        for tag in ("one", "two"):
            d = tmp_path / tag
            d.mkdir()
            records, balanced, graph = d / "r.csv", d / "b.csv", d / "g.json"
            run(capsys, "synth", "--out", str(records), "--n", "150", "--seed", "9")
            run(capsys, "ingest", "--records", str(records), "--out", str(balanced), "--seed", "9")
            run(capsys, "build-graph", "--mode", "coarse", "--records", str(balanced), "--out", str(graph), "--seed", "9")
            run_dir = d / "run"
            run(capsys, "train", "--graph", str(graph), "--arch", "gcn", "--out-dir", str(run_dir), "--epochs", "2", "--seed", "9")
            outputs.append(
                (
                    records.read_bytes(),
                    balanced.read_bytes(),
                    graph.read_bytes(),
                    (run_dir / "history.csv").read_bytes(),
                    (run_dir / "checkpoint.json").read_bytes(),
                )
            )
        assert outputs[0] == outputs[1]


class TestErrorPaths:
    def test_unknown_config_key_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"learning_rate": 0.1}')
        code, _, err = run(capsys, "synth", "--out", str(tmp_path / "x.csv"), "--config", str(cfg))
        assert code == 2
        error = json.loads(err.strip().splitlines()[-1])["error"]
        assert error["type"] == "ConfigError"
        assert error["exit_code"] == 2

    def test_schema_error_exit_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,lat\n")
        code, _, err = run(capsys, "ingest", "--records", str(bad), "--out", str(tmp_path / "o.csv"))
        assert code == 3
        assert json.loads(err.strip().splitlines()[-1])["error"]["type"] == "SchemaError"

    def test_numeric_failure_exit_4(self, small_pipeline, capsys):
        tmp_path, balanced = small_pipeline
        graph = tmp_path / "coarse.json"
        run(capsys, "build-graph", "--mode", "coarse", "--records", str(balanced), "--out", str(graph), "--seed", "5")
        code, _, err = run(
            capsys,
            "train", "--graph", str(graph), "--arch", "gcn", "--out-dir", str(tmp_path / "r"),
            "--epochs", "2", "--lr", "nan",
        )
        assert code == 4
        assert json.loads(err.strip().splitlines()[-1])["error"]["type"] == "NumericError"

    def test_checkpoint_graph_dim_mismatch_exit_3(self, small_pipeline, capsys):
        tmp_path, balanced = small_pipeline
        fine, coarse = tmp_path / "fine.json", tmp_path / "coarse.json"
        run(capsys, "build-graph", "--mode", "fine", "--records", str(balanced), "--out", str(fine), "--seed", "5")
        run(capsys, "build-graph", "--mode", "coarse", "--records", str(balanced), "--out", str(coarse), "--seed", "5")
        run_dir = tmp_path / "run"
        run(capsys, "train", "--graph", str(coarse), "--arch", "gcn", "--out-dir", str(run_dir), "--epochs", "2", "--seed", "5")
        code, _, err = run(
            capsys,
            "evaluate", "--graph", str(fine), "--checkpoint", str(run_dir / "checkpoint.json"),
            "--split", "test", "--out-dir", str(tmp_path / "eval"),
        )
        assert code == 3
        assert "feature dim" in json.loads(err.strip().splitlines()[-1])["error"]["message"]

    def test_partial_outputs_removed_on_failure(self, tmp_path, capsys):
        header = ",".join(CSV_HEADER)
        src = tmp_path / "records.csv"
        src.write_text(
            header + "\na,30,-97,2024-01-01,08:00,1,Injury,x\nb,30,-97,2024-01-02,08:00,1,Not Injured,y\n"
        )
        out = tmp_path / "balanced.csv"
        # report path inside a missing directory fails after --out is written
        code, _, _ = run(
            capsys,
            "ingest", "--records", str(src), "--out", str(out),
            "--report", str(tmp_path / "missing-dir" / "report.json"),
        )
        assert code == 3
        assert not out.exists()

    def test_logs_are_json_lines(self, tmp_path, capsys):
        records = tmp_path / "r.csv"
        code, _, err = run(capsys, "synth", "--out", str(records), "--n", "50", "--seed", "2")
        assert code == 0
        for line in err.strip().splitlines():
            record = json.loads(line)
            assert {"timestamp", "stage", "message"} <= set(record)


class TestGraphFileIntegrity:
    def test_saved_graph_loads_back(self, small_pipeline, capsys):
        tmp_path, balanced = small_pipeline
        graph = tmp_path / "coarse.json"
        run(capsys, "build-graph", "--mode", "coarse", "--records", str(balanced), "--out", str(graph), "--seed", "5")
        g = load_graph(graph)
        assert g.mode == "coarse"
        assert g.meta["mask_seed"] == 5

    def test_file_embedding_provider_recorded_in_meta(self, small_pipeline, capsys):
        tmp_path, balanced = small_pipeline
        header = "id," + ",".join(f"e{i}" for i in range(384))
        ids = [line.split(",", 1)[0] for line in balanced.read_text().splitlines()[1:]]
        emb = tmp_path / "emb.csv"
        emb.write_text(
            "\n".join([header] + [f"{rid},{','.join(['0.25'] * 384)}" for rid in ids]) + "\n"
        )
        graph = tmp_path / "coarse-file-emb.json"
        code, summary, _ = run(
            capsys,
            "build-graph", "--mode", "coarse", "--records", str(balanced),
            "--out", str(graph), "--embeddings", str(emb), "--seed", "5",
        )
        assert code == 0
        assert load_graph(graph).meta["provider"] == "file-v1"


class TestHelp:
    @pytest.mark.parametrize("argv", [["--help"], ["train", "--help"], ["build-graph", "--help"]])
    def test_help_documents_defaults(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 0
        text = capsys.readouterr().out
        if argv == ["--help"]:
            for key in ("hidden_dim=32", "dropout=0.30", "lr=0.05", "weight_decay=0.005",
                        "epochs=30", "dist_km=30", "window_h=24", "resolution=7"):
                assert key in text
        elif argv == ["train", "--help"]:
            assert "default 32" in text and "default 0.30" in text and "default 30" in text
