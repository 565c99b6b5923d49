import json

import pytest
from click.testing import CliRunner

from anstype import pipeline
from anstype.cli import main
from anstype.errors import ValidationError
from anstype.evaluation import PredictionRun

from conftest import TINY_HIER_ROWS


@pytest.fixture(scope="module")
def hier_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "hier.tsv"
    path.write_text("\n".join(f"{c}\t{p}" for c, p in TINY_HIER_ROWS) + "\n")
    return path


@pytest.fixture(scope="module")
def base_config(synthetic_paths, hier_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    return {
        "mode": "dbpedia",
        "datasets": {"dbpedia_train": str(synthetic_paths["train"])},
        "hierarchy": str(hier_path),
        "output_dir": str(out),
        "stage1": {"epochs": 15, "C": 1.0, "batch_size": 16, "eta0": 2.0},
        "stage2": {"max_leaf": 3, "branching": 2, "epochs": 15, "batch_size": 16},
    }


@pytest.fixture(scope="module")
def trained_bundle(base_config):
    config = pipeline.load_config(None, base_config)
    return config, pipeline.cmd_train(config)


class TestConfig:
    def test_defaults_merged(self):
        config = pipeline.load_config(None, {"mode": "wikidata"})
        assert config["mode"] == "wikidata"
        assert config["stage2"]["method"] == "xmc"
        assert config["top_k"] == 10

    def test_unknown_stage2_rejected(self):
        with pytest.raises(ValidationError, match="stage-2"):
            pipeline.load_config(None, {"stage2": {"method": "catapult"}})

    def test_missing_dataset_file_rejected(self):
        with pytest.raises(ValidationError, match="does not exist"):
            pipeline.load_config(None, {"datasets": {"dbpedia_train": "/no/such.json"}})

    def test_bad_dataset_key_rejected(self, synthetic_paths):
        with pytest.raises(ValidationError, match="dataset key"):
            pipeline.load_config(None, {"datasets": {"freebase": str(synthetic_paths["train"])}})

    def test_hash_stable_under_key_order(self):
        a = pipeline.config_hash({"x": 1, "y": {"a": 2, "b": 3}})
        b = pipeline.config_hash({"y": {"b": 3, "a": 2}, "x": 1})
        assert a == b


class TestTrain:
    def test_bundle_files_exist(self, trained_bundle):
        _, bundle_dir = trained_bundle
        for name in ("manifest.json", "vocab.json", "catclf.npz",
                     "label_index.json", "matchers.npz", "ranker.json"):
            assert (bundle_dir / name).exists(), name

    def test_manifest_carries_seeds_and_hash(self, trained_bundle):
        config, bundle_dir = trained_bundle
        manifest = json.loads((bundle_dir / "manifest.json").read_text())
        assert manifest["config_hash"] == pipeline.config_hash(config)
        assert set(manifest["seeds"]) == {"stage1", "stage2", "folds"}
        assert "timestamp" not in json.dumps(manifest).lower()

    def test_retrain_byte_identical_manifest(self, base_config, tmp_path):
        override = dict(base_config, output_dir=str(tmp_path / "b1"))
        config = pipeline.load_config(None, override)
        d1 = pipeline.cmd_train(config)
        first = (d1 / "manifest.json").read_bytes()
        d2 = pipeline.cmd_train(config)
        assert (d2 / "manifest.json").read_bytes() == first

    def test_stage2_needs_mode_train_set(self, base_config, synthetic_paths, tmp_path):
        override = dict(base_config,
                        mode="wikidata",
                        datasets={"dbpedia_train": str(synthetic_paths["train"])},
                        output_dir=str(tmp_path / "w"))
        config = pipeline.load_config(None, override)
        with pytest.raises(ValidationError, match="wikidata_train"):
            pipeline.cmd_train(config)

    def test_tc_stage2_trains_index(self, base_config, synthetic_abstracts, tmp_path):
        override = dict(base_config, output_dir=str(tmp_path / "tc"),
                        abstracts=str(synthetic_abstracts))
        override["stage2"] = dict(base_config["stage2"], method="tc")
        config = pipeline.load_config(None, override)
        bundle_dir = pipeline.cmd_train(config)
        assert (bundle_dir / "type_index.npz").exists()

    def test_tc_without_abstracts_rejected(self, base_config, tmp_path):
        override = dict(base_config, output_dir=str(tmp_path / "tc2"))
        override["stage2"] = dict(base_config["stage2"], method="tc")
        config = pipeline.load_config(None, override)
        with pytest.raises(ValidationError, match="abstracts"):
            pipeline.cmd_train(config)


class TestPredict:
    def test_prediction_contract(self, trained_bundle, synthetic_paths, tmp_path):
        config, bundle_dir = trained_bundle
        out = tmp_path / "run.json"
        run = pipeline.cmd_predict(config, bundle_dir, synthetic_paths["test"], out)
        assert out.exists()
        gold = json.loads(synthetic_paths["test"].read_text())
        assert len(run.predictions) == len(gold)
        for qid, (category, types) in run.predictions.items():
            if category == "boolean":
                assert types == ["boolean"]
            elif category == "literal":
                assert len(types) == 1 and types[0] in ("number", "date", "string")
            else:
                assert 1 <= len(types) <= config["top_k"]

    def test_boolean_and_date_examples(self, trained_bundle, tmp_path):
        config, bundle_dir = trained_bundle
        questions = [
            {"id": "b1", "question": "is karin a member of the hugo club"},
            {"id": "d1", "question": "when did elena marry boris"},
        ]
        qfile = tmp_path / "two.json"
        qfile.write_text(json.dumps(questions))
        run = pipeline.cmd_predict(config, bundle_dir, qfile)
        assert run.predictions["b1"] == ("boolean", ["boolean"])
        assert run.predictions["d1"] == ("literal", ["date"])

    def test_metadata_embeds_hash_and_seeds(self, trained_bundle, synthetic_paths, tmp_path):
        config, bundle_dir = trained_bundle
        run = pipeline.cmd_predict(config, bundle_dir, synthetic_paths["test"],
                                   tmp_path / "run.json")
        assert run.metadata["config_hash"] == pipeline.config_hash(config)
        assert run.metadata["seeds"]["stage1"] == config["stage1"]["seed"]

    def test_vocab_tamper_detected(self, base_config, synthetic_paths, tmp_path):
        override = dict(base_config, output_dir=str(tmp_path / "tampered"))
        config = pipeline.load_config(None, override)
        bundle_dir = pipeline.cmd_train(config)
        vocab_file = bundle_dir / "vocab.json"
        blob = json.loads(vocab_file.read_text())
        blob["terms"][0][0] = "zzz_tampered"
        vocab_file.write_text(json.dumps(blob))
        with pytest.raises(ValidationError, match="vocabulary"):
            pipeline.cmd_predict(config, bundle_dir, synthetic_paths["test"])


class TestImportedMethods:
    def test_imported_stage1(self, base_config, synthetic_paths, tmp_path):
        gold = json.loads(synthetic_paths["test"].read_text())
        flat = {}
        for rec in gold:
            if rec["category"] == "literal":
                flat[rec["id"]] = f"literal-{rec['type'][0]}"
            else:
                flat[rec["id"]] = rec["category"]
        imported = tmp_path / "cats.json"
        imported.write_text(json.dumps(flat))
        override = dict(base_config, output_dir=str(tmp_path / "imp1"))
        override["stage1"] = dict(base_config["stage1"], method="imported",
                                  imported_path=str(imported))
        config = pipeline.load_config(None, override)
        bundle_dir = pipeline.cmd_train(config)
        run = pipeline.cmd_predict(config, bundle_dir, synthetic_paths["test"])
        for rec in gold:
            assert run.predictions[rec["id"]][0] == rec["category"]

    def test_imported_stage2(self, base_config, synthetic_paths, tmp_path):
        gold = json.loads(synthetic_paths["test"].read_text())
        scores = {rec["id"]: {"City": 0.9, "Country": 0.5}
                  for rec in gold if rec["category"] == "resource"}
        imported = tmp_path / "scores.json"
        imported.write_text(json.dumps(scores))
        override = dict(base_config, output_dir=str(tmp_path / "imp2"))
        override["stage2"] = dict(base_config["stage2"], method="imported",
                                  imported_path=str(imported))
        config = pipeline.load_config(None, override)
        bundle_dir = pipeline.cmd_train(config)
        run = pipeline.cmd_predict(config, bundle_dir, synthetic_paths["test"])
        resource_preds = [p for p in run.predictions.values() if p[0] == "resource"]
        assert resource_preds
        assert all(p[1][0] == "City" for p in resource_preds)


class TestEvaluateAnalyze:
    def test_perfect_run_reports_ones(self, synthetic_paths, hier_path, tmp_path):
        gold = json.loads(synthetic_paths["test"].read_text())
        run_file = tmp_path / "gold_as_run.json"
        run_file.write_text(json.dumps(gold))
        report = pipeline.cmd_evaluate(run_file, synthetic_paths["test"], "dbpedia",
                                       hier_path, tmp_path / "report")
        assert report.accuracy_3way == 1.0
        assert report.ndcg5 == 1.0
        assert (tmp_path / "report.json").exists()
        assert (tmp_path / "report.txt").exists()

    def test_analyze_perfect_run_empty(self, synthetic_paths, tmp_path):
        gold = json.loads(synthetic_paths["test"].read_text())
        run_file = tmp_path / "gold_as_run.json"
        run_file.write_text(json.dumps(gold))
        analysis = pipeline.cmd_analyze(run_file, synthetic_paths["test"], "dbpedia",
                                        out_prefix=tmp_path / "analysis")
        assert analysis.rows == []
        assert (tmp_path / "analysis.tsv").exists()


class TestDeterminism:
    def test_pipeline_twice_bit_identical(self, base_config, synthetic_paths,
                                          hier_path, tmp_path):
        override = dict(base_config, output_dir=str(tmp_path / "bundle"))
        config = pipeline.load_config(None, override)
        reports = []
        for tag in ("one", "two"):
            bundle_dir = pipeline.cmd_train(config)
            run_file = tmp_path / f"run_{tag}.json"
            pipeline.cmd_predict(config, bundle_dir, synthetic_paths["test"], run_file)
            pipeline.cmd_evaluate(run_file, synthetic_paths["test"], "dbpedia",
                                  hier_path, tmp_path / f"report_{tag}")
            reports.append((tmp_path / f"report_{tag}.json").read_bytes())
        assert reports[0] == reports[1]
        assert (tmp_path / "run_one.json").read_bytes() == (tmp_path / "run_two.json").read_bytes()


class TestCli:
    def test_stats_command(self, sample_questions_path):
        runner = CliRunner()
        result = runner.invoke(main, ["stats", str(sample_questions_path)])
        assert result.exit_code == 0
        assert "total\t4" in result.output
        assert "category:boolean\t1" in result.output

    def test_ingest_writes_stats_files(self, synthetic_paths, tmp_path):
        runner = CliRunner()
        config = {"datasets": {"dbpedia_train": str(synthetic_paths["train"])}}
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps(config))
        result = runner.invoke(main, ["ingest", "--config", str(cfg_file),
                                      "--output-dir", str(tmp_path / "out")])
        assert result.exit_code == 0
        assert (tmp_path / "out" / "stats_dbpedia_train.json").exists()
        assert (tmp_path / "out" / "stats_dbpedia_train.tsv").exists()

    def test_unknown_stage2_exits_2(self, synthetic_paths, tmp_path):
        runner = CliRunner()
        config = {
            "datasets": {"dbpedia_train": str(synthetic_paths["train"])},
            "stage2": {"method": "bogus"},
        }
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps(config))
        result = runner.invoke(main, ["train", "--config", str(cfg_file)])
        assert result.exit_code == 2
        assert "stage-2" in result.output

    def test_missing_data_exits_2(self, tmp_path):
        runner = CliRunner()
        config = {"datasets": {"dbpedia_train": "/missing/file.json"}}
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps(config))
        result = runner.invoke(main, ["train", "--config", str(cfg_file)])
        assert result.exit_code == 2

    def test_malformed_dataset_exits_3(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[{broken")
        runner = CliRunner()
        result = runner.invoke(main, ["stats", str(bad)])
        assert result.exit_code == 3

    def test_evaluate_requires_hierarchy_in_dbpedia_mode(self, synthetic_paths, tmp_path):
        gold = json.loads(synthetic_paths["test"].read_text())
        run_file = tmp_path / "run.json"
        run_file.write_text(json.dumps(gold))
        runner = CliRunner()
        result = runner.invoke(main, ["evaluate", str(run_file),
                                      str(synthetic_paths["test"]), "--mode", "dbpedia"])
        assert result.exit_code == 2

    def test_evaluate_and_analyze_commands(self, synthetic_paths, hier_path, tmp_path):
        gold = json.loads(synthetic_paths["test"].read_text())
        run_file = tmp_path / "run.json"
        run_file.write_text(json.dumps(gold))
        runner = CliRunner()
        result = runner.invoke(main, ["evaluate", str(run_file), str(synthetic_paths["test"]),
                                      "--mode", "dbpedia", "--hierarchy", str(hier_path)])
        assert result.exit_code == 0
        assert "accuracy (3-way)" in result.output
        assert "1.0000" in result.output
        result = runner.invoke(main, ["analyze", str(run_file), str(synthetic_paths["test"]),
                                      "--mode", "dbpedia"])
        assert result.exit_code == 0

    def test_predict_command_roundtrip(self, trained_bundle, synthetic_paths, tmp_path):
        _, bundle_dir = trained_bundle
        runner = CliRunner()
        out = tmp_path / "cli_run.json"
        result = runner.invoke(main, ["predict", str(bundle_dir),
                                      str(synthetic_paths["test"]), "--out", str(out)])
        assert result.exit_code == 0
        assert "100 predictions" in result.output
        assert len(PredictionRun.from_file(out).predictions) == 100

    def test_predict_missing_manifest_exits_3(self, synthetic_paths, tmp_path):
        empty = tmp_path / "not_a_bundle"
        empty.mkdir()
        runner = CliRunner()
        result = runner.invoke(main, ["predict", str(empty),
                                      str(synthetic_paths["test"]), "--out",
                                      str(tmp_path / "x.json")])
        assert result.exit_code == 3

    def test_set_override_wins_over_config(self, synthetic_paths, tmp_path):
        runner = CliRunner()
        config = {"datasets": {"dbpedia_train": str(synthetic_paths["train"])},
                  "stage2": {"method": "xmc"}}
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps(config))
        result = runner.invoke(main, ["train", "--config", str(cfg_file),
                                      "--set", "stage2.method=nonsense"])
        assert result.exit_code == 2  # override applied, then rejected as unknown


class TestPredictionRunFileContract:
    def test_written_run_is_valid_submission(self, trained_bundle, synthetic_paths, tmp_path):
        config, bundle_dir = trained_bundle
        out = tmp_path / "run.json"
        pipeline.cmd_predict(config, bundle_dir, synthetic_paths["test"], out)
        back = PredictionRun.from_file(out)  # validates all invariants
        assert len(back.predictions) == 100
