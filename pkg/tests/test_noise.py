"""Noise interventions: exact token counts, positional guarantees,
determinism, and sweep table shape."""

from collections import Counter

import numpy as np
import pytest

from fagcn.corpus import ContentCorpus
from fagcn.datasets import two_cluster_fixture
from fagcn.errors import ConfigError
from fagcn.noise import (NoiseSpec, corrupt, inject_noise, noise_sweep,
                         replace_noise, sweep_rows_to_csv)
from fagcn.training import ExperimentConfig
from fagcn.util import derive_rng


def make_corpus(lengths: list[int], vocab_size: int = 50) -> ContentCorpus:
    rng = np.random.default_rng(0)
    contents = [[int(t) for t in rng.integers(0, vocab_size, size=k)] for k in lengths]
    return ContentCorpus(node_ids=list(range(len(lengths))), contents=contents,
                         labels=[0] * len(lengths), label_names=["x"],
                         vocab_size=vocab_size)


class TestInjectNoise:
    def test_ratio_zero_is_identity(self):
        corpus = make_corpus([5, 9, 3])
        noisy = inject_noise(corpus, 0.0, np.random.default_rng(1))
        assert noisy.contents == corpus.contents

    def test_ten_words_ratio_point_one_adds_exactly_one(self):
        corpus = make_corpus([10])
        noisy = inject_noise(corpus, 0.1, np.random.default_rng(2))
        assert len(noisy.contents[0]) == 11

    def test_ratio_one_doubles_length_with_originals_kept(self):
        corpus = make_corpus([7])
        noisy = inject_noise(corpus, 1.0, np.random.default_rng(3))
        assert len(noisy.contents[0]) == 14
        extra = Counter(noisy.contents[0]) - Counter(corpus.contents[0])
        assert sum(extra.values()) == 7

    def test_original_multiset_is_preserved(self):
        corpus = make_corpus([6, 11, 4])
        noisy = inject_noise(corpus, 0.5, np.random.default_rng(4))
        for before, after in zip(corpus.contents, noisy.contents):
            assert not Counter(before) - Counter(after)

    def test_negative_ratio_rejected(self):
        with pytest.raises(ConfigError):
            inject_noise(make_corpus([3]), -0.1, np.random.default_rng(0))


class TestReplaceNoise:
    def test_ratio_zero_is_identity(self):
        corpus = make_corpus([5, 9])
        noisy = replace_noise(corpus, 0.0, np.random.default_rng(1))
        assert noisy.contents == corpus.contents

    def test_ten_words_ratio_point_one_changes_one_position(self):
        # the replacement draw can coincide with the original token, so
        # count chosen positions via a vocabulary the originals avoid
        corpus = make_corpus([10], vocab_size=1000)
        noisy = replace_noise(corpus, 0.1, np.random.default_rng(2))
        assert len(noisy.contents[0]) == 10
        differing = sum(a != b for a, b in zip(corpus.contents[0], noisy.contents[0]))
        assert differing <= 1

    def test_half_ratio_resamples_exactly_half_positions(self):
        # track positions through sentinel contents: original tokens are
        # all token 0, replacements land anywhere in [0, vocab)
        corpus = ContentCorpus(node_ids=[0], contents=[[0] * 8], labels=[0],
                               label_names=["x"], vocab_size=10_000)
        rng = np.random.default_rng(3)
        noisy = replace_noise(corpus, 0.5, rng)
        assert len(noisy.contents[0]) == 8
        changed = sum(t != 0 for t in noisy.contents[0])
        # 4 positions were redrawn; each redraw hits 0 with prob 1e-4
        assert changed == 4

    def test_rounding_half_up(self):
        corpus = make_corpus([5])
        noisy = replace_noise(corpus, 0.5, np.random.default_rng(9))
        # k = round_half_up(2.5) = 3: at most 3 positions may differ
        differing = sum(a != b for a, b in zip(corpus.contents[0], noisy.contents[0]))
        assert differing <= 3

    def test_small_node_low_ratio_untouched(self):
        corpus = make_corpus([4])
        noisy = replace_noise(corpus, 0.1, np.random.default_rng(5))
        assert noisy.contents == corpus.contents  # round(0.4) = 0

    def test_out_of_range_ratio(self):
        with pytest.raises(ConfigError):
            replace_noise(make_corpus([3]), 1.5, np.random.default_rng(0))


class TestDeterminismAndSpec:
    def test_same_seed_same_corruption(self):
        corpus = make_corpus([6, 7, 8])
        for protocol in ("inject", "replace"):
            a = corrupt(corpus, protocol, 0.4, derive_rng(11, "noise"))
            b = corrupt(corpus, protocol, 0.4, derive_rng(11, "noise"))
            assert a.contents == b.contents

    def test_vocabulary_never_grows(self):
        corpus = make_corpus([5, 5], vocab_size=20)
        noisy = inject_noise(corpus, 1.0, np.random.default_rng(1))
        assert noisy.vocab_size == 20
        assert all(t < 20 for tokens in noisy.contents for t in tokens)

    def test_noise_spec_bounds(self):
        NoiseSpec("inject", 1.0, 1).validate()
        NoiseSpec("replace", 0.5, 1).validate()
        with pytest.raises(ConfigError):
            NoiseSpec("replace", 0.6, 1).validate()
        with pytest.raises(ConfigError):
            NoiseSpec("inject", 1.1, 1).validate()
        with pytest.raises(ConfigError):
            NoiseSpec("scramble", 0.1, 1).validate()
        NoiseSpec("replace", 0.8, 1).validate(max_replace=1.0)  # configurable bound


class TestNoiseSweep:
    def sweep_config(self) -> ExperimentConfig:
        return ExperimentConfig(embed_dim=5, feature_dim=5, hidden_dim=3,
                                train_fraction=0.5, dropout_lstm=0.0,
                                dropout_gcn=0.0, lr=2e-3, epochs=3, seed=1,
                                variant="self")

    def test_zero_ratio_matches_clean_run(self):
        graph, corpus, _ = two_cluster_fixture()
        config = self.sweep_config()
        rows = noise_sweep(config, graph, corpus, "replace", [0.0],
                           ["self"], [1, 2])
        from fagcn.corpus import split
        from fagcn.training import train
        accuracies = []
        for seed in (1, 2):
            from dataclasses import replace as dc_replace
            cfg = dc_replace(config, seed=seed)
            s = split(8, 0.5, derive_rng(seed, "split"))
            _, hist = train(cfg, graph, corpus, s)
            accuracies.append(hist.test_accuracy)
        assert rows[0].mean_accuracy == pytest.approx(np.mean(accuracies), abs=1e-12)

    def test_table_shape_and_order(self):
        graph, corpus, _ = two_cluster_fixture()
        ratios = [0.1, 0.2, 0.3]
        rows = noise_sweep(self.sweep_config(), graph, corpus, "inject",
                           ratios, ["none", "self"], [1])
        assert len(rows) == 6
        assert [r.ratio for r in rows] == [0.1, 0.1, 0.2, 0.2, 0.3, 0.3]
        assert [r.variant for r in rows] == ["none", "self"] * 3

    def test_threaded_matches_sequential(self):
        graph, corpus, _ = two_cluster_fixture()
        sequential = noise_sweep(self.sweep_config(), graph, corpus, "replace",
                                 [0.2], ["none", "baseline_gcn"], [1, 2])
        threaded = noise_sweep(self.sweep_config(), graph, corpus, "replace",
                               [0.2], ["none", "baseline_gcn"], [1, 2],
                               max_workers=4)
        assert sequential == threaded

    def test_csv_rendering(self):
        from fagcn.noise import SweepRow
        rows = [SweepRow("replace", 0.3, "context", 0.75, 0.024999, (1, 2, 3))]
        text = sweep_rows_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "protocol,ratio,variant,mean_accuracy,std_accuracy,seeds"
        assert lines[1] == "replace,0.3,context,0.7500,0.0250,1;2;3"
