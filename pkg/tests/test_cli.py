import json

import pytest

from dialogsat.cli import main, read_config_file
from dialogsat.corpus import save_corpus
from dialogsat.errors import ConfigError
from dialogsat.synth import GeneratorConfig, generate_corpus


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    corpus, _ = generate_corpus(GeneratorConfig(n_dialogues=80, seed=3, new_skill_fraction=0.05))
    save_corpus(corpus, path)
    return path


FAST_MODEL_CONFIG = """
n_stages = 10
max_depth = 3
min_samples_leaf = 4
min_samples_split = 8
"""


@pytest.fixture(scope="module")
def fast_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "fast.cfg"
    path.write_text(FAST_MODEL_CONFIG)
    return path


class TestConfigFile:
    def test_parses_types(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("a = 1\nb = 0.5\nc = true\nd = hello\ndefect_rates.partial = 0.2\n")
        config = read_config_file(path)
        assert config == {
            "a": 1, "b": 0.5, "c": True, "d": "hello", "defect_rates": {"partial": 0.2},
        }

    def test_rejects_bad_lines(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("just words\n")
        with pytest.raises(ConfigError):
            read_config_file(path)


class TestSynthCommand:
    def test_writes_corpus_and_sidecar(self, tmp_path):
        out = tmp_path / "corpus.jsonl"
        code = main(["synth", "--dialogues", "30", "--seed", "7", "-o", str(out)])
        assert code == 0
        assert out.exists()
        assert (tmp_path / "corpus.latent.jsonl").exists()
        assert len(out.read_text().splitlines()) == 30

    def test_missing_seed_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["synth", "--dialogues", "5", "-o", str(tmp_path / "c.jsonl")])
        assert excinfo.value.code == 2

    def test_rerun_byte_identical(self, tmp_path):
        args = ["synth", "--dialogues", "25", "--seed", "9"]
        out1, out2 = tmp_path / "one.jsonl", tmp_path / "two.jsonl"
        assert main(args + ["-o", str(out1)]) == 0
        assert main(args + ["-o", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_generator_config_file(self, tmp_path):
        cfg = tmp_path / "gen.cfg"
        cfg.write_text("single_turn_fraction = 0.5\nannotator_noise_sd = 0.0\n")
        out = tmp_path / "c.jsonl"
        assert main(["synth", "--dialogues", "20", "--seed", "1",
                     "-o", str(out), "--config", str(cfg)]) == 0
        singles = sum(1 for line in out.read_text().splitlines()
                      if json.loads(line)["segment"] == "single_turn")
        assert singles == 10

    def test_unknown_generator_key_exits_2(self, tmp_path):
        cfg = tmp_path / "gen.cfg"
        cfg.write_text("not_a_field = 1\n")
        code = main(["synth", "--dialogues", "5", "--seed", "1",
                     "-o", str(tmp_path / "c.jsonl"), "--config", str(cfg)])
        assert code == 2


class TestStatsCommand:
    def test_csv_format(self, corpus_file, tmp_path):
        out = tmp_path / "stats.csv"
        assert main(["stats", str(corpus_file), "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "segment,bin,count,percent"
        assert len(lines) == 16  # header + 3 segments x 5 bins
        for segment in ("single_turn", "multi_turn", "new_skill"):
            rows = [l for l in lines[1:] if l.startswith(segment + ",")]
            total = sum(float(r.split(",")[3]) for r in rows)
            assert total == 0.0 or abs(total - 100.0) < 1e-6

    def test_empty_corpus_header_only(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        out = tmp_path / "stats.csv"
        with pytest.warns(UserWarning):
            code = main(["stats", str(empty), "-o", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "segment,bin,count,percent"
        assert all(line.split(",")[2] == "0" for line in lines[1:])

    def test_bad_corpus_exits_1(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{broken\n")
        assert main(["stats", str(bad), "-o", str(tmp_path / "s.csv")]) == 1


class TestTrainEvalCommands:
    def test_train_writes_artifact_and_log(self, corpus_file, fast_config, tmp_path):
        out = tmp_path / "model.pkl"
        code = main(["train", str(corpus_file), "--model", "gbrt", "--seed", "5",
                     "-o", str(out), "--config", str(fast_config)])
        assert code == 0
        assert out.exists()
        log = json.loads(out.with_suffix(".pkl.log.json").read_text())
        assert log["hyperparameters"]["max_depth"] == 3
        assert log["hyperparameters"]["n_stages"] == 10
        assert log["model"] == "gbrt"

    def test_train_default_hyperparams_echoed(self, corpus_file, tmp_path):
        out = tmp_path / "model.pkl"
        code = main(["train", str(corpus_file), "--model", "tree", "--seed", "5", "-o", str(out)])
        assert code == 0
        log = json.loads(out.with_suffix(".pkl.log.json").read_text())
        assert log["hyperparameters"]["max_depth"] == 33
        assert log["hyperparameters"]["min_samples_leaf"] == 31
        assert log["hyperparameters"]["min_samples_split"] == 23

    def test_unknown_model_exits_2(self, corpus_file, tmp_path):
        code = main(["train", str(corpus_file), "--model", "perceptron9000",
                     "--seed", "1", "-o", str(tmp_path / "m.pkl")])
        assert code == 2

    def test_train_rerun_byte_identical(self, corpus_file, fast_config, tmp_path):
        outs = []
        for name in ("a.pkl", "b.pkl"):
            out = tmp_path / name
            assert main(["train", str(corpus_file), "--model", "forest", "--seed", "2",
                         "-o", str(out), "--config", str(fast_config)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_eval_outputs(self, corpus_file, fast_config, tmp_path):
        model = tmp_path / "model.pkl"
        main(["train", str(corpus_file), "--model", "gbrt", "--seed", "5",
              "-o", str(model), "--config", str(fast_config)])
        out_dir = tmp_path / "reports"
        code = main(["eval", str(model), str(corpus_file), "--seed", "0",
                     "--n-boot", "50", "--out-dir", str(out_dir)])
        assert code == 0
        report = json.loads((out_dir / "eval_gbrt.json").read_text())
        assert set(report["segments"]) == {"single_turn", "multi_turn", "new_skill"}
        table = (out_dir / "eval_gbrt.txt").read_text()
        assert "Cor_s" in table and "F-dis_n.s" in table

    def test_eval_rerun_byte_identical(self, corpus_file, fast_config, tmp_path):
        model = tmp_path / "model.pkl"
        main(["train", str(corpus_file), "--model", "gbrt", "--seed", "5",
              "-o", str(model), "--config", str(fast_config)])
        blobs = []
        for name in ("r1", "r2"):
            out_dir = tmp_path / name
            assert main(["eval", str(model), str(corpus_file), "--seed", "3",
                         "--n-boot", "60", "--out-dir", str(out_dir)]) == 0
            blobs.append((out_dir / "eval_gbrt.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_eval_marks_missing_segment(self, fast_config, tmp_path):
        corpus, _ = generate_corpus(
            GeneratorConfig(n_dialogues=60, seed=2, new_skill_fraction=0.0)
        )
        path = tmp_path / "no_new_skill.jsonl"
        save_corpus(corpus, path)
        model = tmp_path / "model.pkl"
        main(["train", str(path), "--model", "gbrt", "--seed", "5",
              "-o", str(model), "--config", str(fast_config)])
        out_dir = tmp_path / "reports"
        assert main(["eval", str(model), str(path), "--n-boot", "20",
                     "--out-dir", str(out_dir)]) == 0
        table = (out_dir / "eval_gbrt.txt").read_text()
        assert "n/a" in table

    def test_train_all_models(self, fast_config, tmp_path):
        corpus, _ = generate_corpus(GeneratorConfig(n_dialogues=50, seed=4))
        path = tmp_path / "small.jsonl"
        save_corpus(corpus, path)
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(
            "n_stages = 5\nn_trees = 3\nmax_depth = 3\nmin_samples_leaf = 2\n"
            "min_samples_split = 4\nepochs = 2\nhidden_size = 8\nmax_iter = 200\n"
        )
        out_dir = tmp_path / "models"
        code = main(["train", str(path), "--model", "all", "--seed", "1",
                     "--config", str(cfg), "--out-dir", str(out_dir)])
        assert code == 0
        for kind in ("lasso", "tree", "forest", "gbrt", "svr", "mlp"):
            assert (out_dir / f"model_{kind}.pkl").exists()


class TestAblateCommand:
    def test_single_set(self, corpus_file, fast_config, tmp_path):
        out_dir = tmp_path / "ablate"
        code = main(["ablate", str(corpus_file), "--model", "gbrt", "--seed", "3",
                     "--sets", "popularity", "--n-boot", "40",
                     "--config", str(fast_config), "--out-dir", str(out_dir)])
        assert code == 0
        results = json.loads((out_dir / "ablation_gbrt.json").read_text())
        assert len(results) == 1
        assert results[0]["feature_set_tag"] == "popularity"
        assert (out_dir / "ablation_gbrt.md").exists()

    def test_default_tests_all_five_sets(self, corpus_file, fast_config, tmp_path):
        out_dir = tmp_path / "ablate_all"
        code = main(["ablate", str(corpus_file), "--model", "gbrt", "--seed", "3",
                     "--n-boot", "20", "--config", str(fast_config),
                     "--out-dir", str(out_dir)])
        assert code == 0
        results = json.loads((out_dir / "ablation_gbrt.json").read_text())
        assert {r["feature_set_tag"] for r in results} == {
            "paraphrase", "cohesion", "popularity", "unactionable", "diversity",
        }

    def test_bad_set_fails_after_completing_others(self, corpus_file, fast_config, tmp_path):
        out_dir = tmp_path / "ablate_mixed"
        code = main(["ablate", str(corpus_file), "--model", "gbrt", "--seed", "3",
                     "--sets", "cohesion,nonsense", "--n-boot", "20",
                     "--config", str(fast_config), "--out-dir", str(out_dir)])
        assert code != 0
        results = json.loads((out_dir / "ablation_gbrt.json").read_text())
        assert [r["feature_set_tag"] for r in results] == ["cohesion"]

    def test_rerun_byte_identical(self, corpus_file, fast_config, tmp_path):
        blobs = []
        for name in ("x", "y"):
            out_dir = tmp_path / name
            assert main(["ablate", str(corpus_file), "--model", "tree", "--seed", "3",
                         "--sets", "cohesion", "--n-boot", "30",
                         "--config", str(fast_config), "--out-dir", str(out_dir)]) == 0
            blobs.append((out_dir / "ablation_tree.json").read_bytes())
        assert blobs[0] == blobs[1]

    def test_missing_seed_exits_2(self, corpus_file):
        with pytest.raises(SystemExit) as excinfo:
            main(["ablate", str(corpus_file), "--model", "gbrt"])
        assert excinfo.value.code == 2


class TestIaaCommand:
    def test_report_contents(self, corpus_file, tmp_path):
        out = tmp_path / "iaa.json"
        code = main(["iaa", str(corpus_file), "-o", str(out), "--n-boot", "50"])
        assert code == 0
        report = json.loads(out.read_text())
        assert 0.8 <= report["mean_rho"] <= 1.0
        assert len(report["per_pair"]) == 3
        assert report["user_rating_correlation"] is not None

    def test_without_user_ratings(self, tmp_path):
        corpus, _ = generate_corpus(
            GeneratorConfig(n_dialogues=30, seed=5, with_user_ratings=False)
        )
        path = tmp_path / "no_ratings.jsonl"
        save_corpus(corpus, path)
        out = tmp_path / "iaa.json"
        assert main(["iaa", str(path), "-o", str(out)]) == 0
        assert json.loads(out.read_text())["user_rating_correlation"] is None

    def test_rerun_byte_identical(self, corpus_file, tmp_path):
        blobs = []
        for name in ("i1.json", "i2.json"):
            out = tmp_path / name
            assert main(["iaa", str(corpus_file), "-o", str(out), "--n-boot", "40"]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]


class TestFeaturizeCommand:
    def test_writes_matrix(self, corpus_file, tmp_path):
        out = tmp_path / "features.csv"
        assert main(["featurize", str(corpus_file), "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        header = lines[0].split(",")
        assert header[-4:] == ["label", "segment", "dialogue_id", "turn_index"]
        assert len(lines) > 80

    def test_rerun_byte_identical(self, corpus_file, tmp_path):
        blobs = []
        for name in ("f1.csv", "f2.csv"):
            out = tmp_path / name
            assert main(["featurize", str(corpus_file), "-o", str(out)]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_latent_sidecar_never_consumed(self, tmp_path, fast_config):
        # pipeline subcommands take only the corpus path; removing the sidecar
        # changes nothing anywhere downstream
        out = tmp_path / "corpus.jsonl"
        main(["synth", "--dialogues", "40", "--seed", "2", "-o", str(out)])
        sidecar = tmp_path / "corpus.latent.jsonl"
        model = tmp_path / "model.pkl"
        args = ["train", str(out), "--model", "tree", "--seed", "1", "-o", str(model),
                "--config", str(fast_config)]
        assert main(args) == 0
        first = model.read_bytes()
        sidecar.unlink()
        assert main(args) == 0
        assert model.read_bytes() == first
