import pytest

from offlang.corpus import Label, ScoredExample, corpus_stats
from offlang.errors import InsufficientClassSamples
from offlang.weaklabel import WeakLabelConfig, build_weak_corpus, weak_label


def scored(conf, i=0):
    return ScoredExample(f"s{i}", f"tweet {i}", conf)


class TestWeakLabel:
    def test_above_hi_is_off(self):
        assert weak_label(scored(0.85), WeakLabelConfig()) is Label.OFF

    def test_mid_band_is_absent(self):
        assert weak_label(scored(0.5), WeakLabelConfig()) is None

    def test_boundaries_excluded(self):
        config = WeakLabelConfig()
        assert weak_label(scored(0.8), config) is None
        assert weak_label(scored(0.2), config) is None

    def test_below_lo_is_not(self):
        assert weak_label(scored(0.1), WeakLabelConfig()) is Label.NOT

    def test_custom_thresholds(self):
        config = WeakLabelConfig(hi_threshold=0.6, lo_threshold=0.4, per_class_count=1)
        assert weak_label(scored(0.7), config) is Label.OFF
        assert weak_label(scored(0.5), config) is None

    def test_invalid_thresholds(self):
        with pytest.raises(ValueError):
            WeakLabelConfig(hi_threshold=0.2, lo_threshold=0.8)
        with pytest.raises(ValueError):
            WeakLabelConfig(hi_threshold=1.2)
        with pytest.raises(ValueError):
            WeakLabelConfig(per_class_count=0)


def make_scored(confs):
    return [ScoredExample(f"s{i}", f"text {i}", c) for i, c in enumerate(confs)]


class TestBuildWeakCorpus:
    def test_balanced_output(self):
        confs = [0.9, 0.95, 0.85, 0.99, 0.1, 0.05, 0.15, 0.5, 0.8, 0.2]
        corpus = build_weak_corpus(make_scored(confs), WeakLabelConfig(per_class_count=3))
        stats = corpus_stats(corpus)
        assert (stats.off_count, stats.not_count) == (3, 3)

    def test_deterministic(self):
        confs = [i / 100 for i in range(100)]
        config = WeakLabelConfig(per_class_count=10, seed=42)
        a = build_weak_corpus(make_scored(confs), config)
        b = build_weak_corpus(make_scored(confs), config)
        assert a.examples == b.examples

    def test_insufficient_samples(self):
        confs = [0.9, 0.95, 0.85, 0.99, 0.9, 0.1, 0.05, 0.15]
        with pytest.raises(InsufficientClassSamples) as exc:
            build_weak_corpus(make_scored(confs), WeakLabelConfig(per_class_count=5))
        assert exc.value.label is Label.NOT
        assert exc.value.available == 3
        assert exc.value.requested == 5

    def test_members_respect_thresholds(self):
        confs = [i / 1000 for i in range(1000)]
        scored_list = make_scored(confs)
        by_id = {s.id: s for s in scored_list}
        corpus = build_weak_corpus(scored_list, WeakLabelConfig(per_class_count=50, seed=1))
        for ex in corpus:
            conf = by_id[ex.id].confidence
            if ex.label is Label.OFF:
                assert conf > 0.8
            else:
                assert conf < 0.2

    def test_without_replacement(self):
        confs = [0.9] * 40 + [0.1] * 40
        corpus = build_weak_corpus(make_scored(confs), WeakLabelConfig(per_class_count=30, seed=3))
        ids = [ex.id for ex in corpus]
        assert len(ids) == len(set(ids)) == 60

    def test_different_seeds_differ(self):
        confs = [i / 100 for i in range(100)]
        a = build_weak_corpus(make_scored(confs), WeakLabelConfig(per_class_count=10, seed=1))
        b = build_weak_corpus(make_scored(confs), WeakLabelConfig(per_class_count=10, seed=2))
        assert a.examples != b.examples
