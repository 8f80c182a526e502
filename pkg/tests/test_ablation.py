import numpy as np
import pytest

from dialogsat.ablation import (
    ablate,
    paired_difference_ci,
    relative_improvement,
    render_markdown_table,
    results_to_json,
)
from dialogsat.corpus import split_corpus
from dialogsat.errors import ConfigError, DataError
from dialogsat.evaluation import pearson_r
from dialogsat.features import default_schema
from dialogsat.models import ModelSpec
from dialogsat.synth import GeneratorConfig, generate_corpus


FAST_GBRT = {"n_stages": 20, "max_depth": 3, "min_samples_leaf": 5, "min_samples_split": 10}


class TestRelativeImprovement:
    def test_single_turn_popularity_endpoints(self):
        # 0.741 -> 0.796 is the ~7% relative gain
        assert relative_improvement(0.796, 0.741) == pytest.approx(0.0742, abs=5e-5)

    def test_new_skill_unactionable_endpoints(self):
        # 0.496 -> 0.67 is the ~35% relative gain
        assert relative_improvement(0.67, 0.496) == pytest.approx(0.3508, abs=5e-5)

    def test_zero_baseline(self):
        assert np.isnan(relative_improvement(0.5, 0.0))


class TestPairedDifferenceCi:
    def test_identical_predictions_give_zero(self):
        rng = np.random.default_rng(0)
        gold = rng.normal(size=50)
        pred = gold + rng.normal(scale=0.3, size=50)
        diff, lo, hi = paired_difference_ci(pearson_r, pred, pred, gold, n_boot=200, seed=1)
        assert diff == 0.0
        assert lo <= 0.0 <= hi

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        gold = rng.normal(size=40)
        a = gold + rng.normal(scale=0.2, size=40)
        b = gold + rng.normal(scale=0.6, size=40)
        first = paired_difference_ci(pearson_r, a, b, gold, n_boot=300, seed=7)
        second = paired_difference_ci(pearson_r, a, b, gold, n_boot=300, seed=7)
        assert first == second

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="aligned"):
            paired_difference_ci(pearson_r, [1.0, 2.0], [1.0], [1.0, 2.0])

    def test_detects_real_difference(self):
        rng = np.random.default_rng(2)
        gold = rng.normal(size=300)
        good = gold + rng.normal(scale=0.1, size=300)
        bad = rng.normal(size=300)
        diff, lo, hi = paired_difference_ci(pearson_r, good, bad, gold, n_boot=300, seed=3)
        assert lo > 0.0


@pytest.fixture(scope="module")
def planted_split():
    corpus, _ = generate_corpus(GeneratorConfig(n_dialogues=300, seed=19, new_skill_fraction=0.03))
    return split_corpus(corpus, 0.25, seed=4)


class TestAblate:
    def test_invalid_tag_rejected(self, planted_split):
        with pytest.raises(ConfigError, match="new feature sets"):
            ablate(planted_split, ModelSpec("gbrt", FAST_GBRT), tags=["timing"])

    def test_column_accounting(self, planted_split):
        schema = default_schema()
        results = ablate(
            planted_split, ModelSpec("gbrt", FAST_GBRT, seed=0),
            tags=["popularity", "cohesion"], n_boot=30, seed=0,
        )
        by_tag = {r.feature_set_tag: r for r in results}
        assert by_tag["popularity"].n_columns_removed == len(schema.columns_for_tag("popularity"))
        assert by_tag["cohesion"].n_columns_removed == 1

    def test_reported_segments(self, planted_split):
        results = ablate(planted_split, ModelSpec("gbrt", FAST_GBRT, seed=0),
                         tags=["unactionable"], n_boot=30, seed=0)
        segments = set(results[0].comparisons)
        assert "test" in segments and "single_turn" in segments

    def test_reproducible(self, planted_split):
        kwargs = dict(tags=["diversity"], n_boot=40, seed=6)
        first = ablate(planted_split, ModelSpec("gbrt", FAST_GBRT, seed=1), **kwargs)
        second = ablate(planted_split, ModelSpec("gbrt", FAST_GBRT, seed=1), **kwargs)
        assert results_to_json(first) == results_to_json(second)

    def test_inert_feature_set_changes_nothing(self):
        # no unactionable defects planted -> the unactionable column is all zero
        config = GeneratorConfig(
            n_dialogues=200, seed=23,
            defect_rates={"unactionable": 0.0, "misunderstanding": 0.15, "partial": 0.15},
        )
        corpus, _ = generate_corpus(config)
        split = split_corpus(corpus, 0.25, seed=2)
        results = ablate(split, ModelSpec("gbrt", FAST_GBRT, seed=0),
                         tags=["unactionable"], n_boot=30, seed=0)
        cmp = results[0].comparisons["test"]["pearson_r"]
        assert cmp.delta == pytest.approx(0.0, abs=1e-12)
        assert not cmp.significant

    def test_markdown_rendering(self, planted_split):
        results = ablate(planted_split, ModelSpec("gbrt", FAST_GBRT, seed=0),
                         tags=["cohesion"], n_boot=30, seed=0)
        table = render_markdown_table(results)
        assert table.startswith("| feature_set ")
        assert "cohesion" in table
