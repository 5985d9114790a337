"""
Test cases for ingestion, core filtering, splitting and synthesis.
"""
import logging
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config.run_config import SynthConfig
from tests.conftest import toy_split
from core.exceptions import ConfigError, EmptyDatasetError, FormatError, InsufficientCandidatesError, IoError
from data import (
    InteractionRecord,
    UserSequence,
    Vocab,
    build_sequences,
    empirical_transition_rate,
    filter_core,
    ingest,
    leave_one_out_split,
    load_split,
    read_interactions,
    sample_negatives,
    save_split,
    synth_generate,
    write_interactions,
)

HEADER = "user_id,item_id,domain_id,timestamp\n"


def _write(path, rows):
    path.write_text(HEADER + "".join(rows))
    return str(path)


def _records(pairs, domain=0):
    """(user, item) pairs with increasing timestamps."""
    return [InteractionRecord(u, i, domain, t) for t, (u, i) in enumerate(pairs)]


class TestIngest:
    """CSV/TSV parsing and the malformed-row tally."""

    def test_four_rows(self, tmp_path):
        """A well-formed 4-row file gives 4 records."""
        path = _write(tmp_path / "log.csv", [f"u1,i{k},0,{k}\n" for k in range(4)])
        records = ingest(path)
        assert len(records) == 4
        assert records[2] == InteractionRecord("u1", "i2", 0, 2)

    def test_empty_file(self, tmp_path, caplog):
        """An empty file gives no records and a warning."""
        path = tmp_path / "empty.csv"
        path.write_text("")
        with caplog.at_level(logging.WARNING):
            assert ingest(str(path)) == []
        assert "empty" in caplog.text

    def test_malformed_row_counted(self, tmp_path):
        """A non-integer timestamp is skipped and tallied."""
        rows = [f"u{k % 7},i{k},0,{k}\n" for k in range(100)] + ["u1,i1,0,yesterday\n"]
        result = read_interactions(_write(tmp_path / "log.csv", rows))
        assert len(result.records) == 100
        assert result.malformed_rows == 1
        assert result.total_rows == 101

    def test_too_many_malformed(self, tmp_path):
        """More than 1% malformed rows rejects the file."""
        rows = [f"u1,i{k},0,{k}\n" for k in range(10)] + ["u1,i1,zero,3\n"]
        with pytest.raises(FormatError):
            ingest(_write(tmp_path / "log.csv", rows))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            ingest(str(tmp_path / "missing.csv"))

    def test_tsv(self, tmp_path):
        path = tmp_path / "log.tsv"
        path.write_text(HEADER.replace(",", "\t") + "u1\ti1\t2\t5\n")
        assert ingest(str(path)) == [InteractionRecord("u1", "i1", 2, 5)]

    def test_write_read(self, tmp_path):
        records = _records([("u1", "a"), ("u2", "b")])
        path = str(tmp_path / "out.csv")
        write_interactions(records, path)
        assert ingest(path) == records


class TestFilterCore:
    """Iterated user/item core filtering."""

    def test_user_below_threshold_removed(self):
        """A user with 9 interactions is dropped at the default thresholds."""
        items = [f"i{k}" for k in range(10)]
        pairs = [(f"u{u:02d}", i) for u in range(16) for i in items]
        pairs += [("short", i) for i in items[:9]]
        kept, _ = filter_core(_records(pairs))
        assert "short" not in {r.user_id for r in kept}
        assert len(kept) == 160

    def test_item_at_threshold_kept(self):
        """An item with exactly 15 interactions survives."""
        pairs = [(f"u{u:02d}", f"i{k}") for u in range(15) for k in range(10)]
        kept, vocab = filter_core(_records(pairs))
        assert len(kept) == 150
        assert vocab.num_items == 10

    def test_cascade_to_fixed_point(self):
        """Dropping a sparse item pushes its user under the user threshold."""
        pairs = [
            ("u1", "x"), ("u1", "y"), ("u1", "z"),
            ("u2", "x"), ("u2", "y"), ("u2", "w"),
            ("u3", "x"), ("u3", "y"), ("u3", "z"),
        ]
        kept, vocab = filter_core(_records(pairs), user_core=3, item_core=2)
        assert {r.user_id for r in kept} == {"u1", "u3"}
        assert vocab.domain_items == [["x", "y", "z"]]

    def test_idempotent(self):
        """Filtering the output again changes nothing."""
        records = synth_generate(SynthConfig(num_users=60, items_per_domain=20, min_len=8, max_len=14, seed=2))
        kept, vocab = filter_core(records, user_core=10, item_core=3)
        again, vocab2 = filter_core(kept, user_core=10, item_core=3)
        assert again == kept
        assert vocab2.domain_items == vocab.domain_items

    def test_nothing_survives(self):
        with pytest.raises(EmptyDatasetError):
            filter_core(_records([("u1", "a")]))

    def test_empty_input(self):
        with pytest.raises(EmptyDatasetError):
            filter_core([])

    def test_item_in_two_domains(self):
        records = [InteractionRecord("u1", "a", 0, 0), InteractionRecord("u1", "a", 1, 1)]
        with pytest.raises(FormatError):
            filter_core(records, user_core=1, item_core=1)

    def test_vocab_disjoint(self):
        records = synth_generate(SynthConfig(num_users=40, items_per_domain=10, seed=1))
        _, vocab = filter_core(records, user_core=1, item_core=1)
        for idx in range(vocab.num_items):
            d = int(vocab.domain_of[idx])
            start, stop = vocab.domain_range(d)
            assert start <= idx < stop


class TestBuildSequences:
    """Chronological truncated sequences."""

    def _vocab(self, n):
        return Vocab([[f"i{k:03d}" for k in range(n)]])

    def test_short_user(self):
        vocab = self._vocab(7)
        records = [InteractionRecord("u", f"i{k:03d}", 0, k) for k in range(7)]
        seqs = build_sequences(records, vocab, max_len=50)
        assert seqs[0].length == 7

    def test_truncates_to_latest(self):
        """60 interactions with max_len 50 keep the latest 50."""
        vocab = self._vocab(60)
        records = [InteractionRecord("u", f"i{k:03d}", 0, k) for k in range(60)]
        seqs = build_sequences(records, vocab, max_len=50)
        assert seqs[0].items == list(range(10, 60))

    def test_shuffled_rows(self):
        """Row order does not matter once timestamps differ."""
        vocab = self._vocab(20)
        records = [InteractionRecord("u", f"i{k:03d}", 0, k) for k in range(20)]
        shuffled = [records[i] for i in np.random.default_rng(0).permutation(20)]
        assert build_sequences(shuffled, vocab)[0].items == build_sequences(records, vocab)[0].items

    def test_timestamp_ties_keep_input_order(self):
        vocab = self._vocab(3)
        records = [InteractionRecord("u", f"i{k:03d}", 0, 5) for k in (2, 0, 1)]
        assert build_sequences(records, vocab)[0].items == [2, 0, 1]

    def test_max_len_too_small(self):
        with pytest.raises(ConfigError):
            build_sequences([], self._vocab(1), max_len=2)


class TestLeaveOneOutSplit:
    """Leave-one-out split with per-domain negatives."""

    def test_four_item_sequence(self):
        """[a,b,c,d]: test d, validation c, train predicts b from [a]."""
        vocab = Vocab([["a", "b", "c", "d", "e", "f"]])
        seq = UserSequence("u1", items=[0, 1, 2, 3], domains=[0, 0, 0, 0])
        split = leave_one_out_split([seq], vocab, seed=0, num_negatives=2)
        assert split.test[0].target_item == 3 and split.test[0].prefix_items == [0, 1, 2]
        assert split.valid[0].target_item == 2 and split.valid[0].prefix_items == [0, 1]
        assert [(i.prefix_items, i.target_item) for i in split.train] == [([0], 1)]

    def test_short_sequence_excluded(self, caplog):
        vocab = Vocab([["a", "b", "c"]])
        with caplog.at_level(logging.WARNING):
            split = leave_one_out_split([UserSequence("u", [0, 1], [0, 0])], vocab, num_negatives=1)
        assert split.counts()["test"] == 0
        assert "shorter than 3" in caplog.text

    def test_negatives_valid(self, split):
        """Negatives share the positive's domain, exclude it and are distinct."""
        for inst in split.valid + split.test:
            negs = inst.negatives
            assert len(negs) == split.num_negatives
            assert len(set(negs.tolist())) == len(negs)
            assert inst.target_item not in negs
            assert np.all(split.vocab.domain_of[negs] == inst.target_domain)

    def test_same_seed_same_negatives(self):
        a, b = toy_split(), toy_split()
        for x, y in zip(a.test, b.test):
            assert np.array_equal(x.negatives, y.negatives)

    def test_test_positive_not_a_training_target(self, split):
        """No training window predicts the held-out positions."""
        test_len = {inst.user_id: inst.prefix_length for inst in split.test}
        for inst in split.train:
            assert inst.prefix_length < test_len[inst.user_id] - 1

    def test_insufficient_candidates(self):
        vocab = Vocab([[f"i{k}" for k in range(400)]])
        with pytest.raises(InsufficientCandidatesError):
            sample_negatives(vocab, 0, 0, 999, np.random.default_rng(0))

    def test_store_roundtrip_counts(self, split, tmp_path):
        save_split(split, str(tmp_path / "split"), extra={"config_hash": "x"})
        loaded = load_split(str(tmp_path / "split"))
        assert loaded.counts() == split.counts()
        assert loaded.test[3].prefix_items == split.test[3].prefix_items
        assert np.array_equal(loaded.test[3].negatives, split.test[3].negatives)


class TestSynth:
    """Synthetic multi-domain generator."""

    def test_identity_transition_single_domain(self):
        cfg = SynthConfig(num_users=50, transition=[[1, 0, 0], [0, 1, 0], [0, 0, 1]])
        records = synth_generate(cfg)
        assert empirical_transition_rate(records) == 0.0

    def test_uniform_transition_rate(self):
        """A uniform 3-domain chain changes domain about 2/3 of the time."""
        third = 1.0 / 3.0
        cfg = SynthConfig(num_users=500, min_len=20, max_len=20, transition=[[third] * 3] * 3)
        rate = empirical_transition_rate(synth_generate(cfg))
        assert abs(rate - 2.0 / 3.0) < 0.05

    def test_interaction_count(self):
        cfg = SynthConfig(num_users=100, min_len=5, max_len=5, seed=7)
        assert len(synth_generate(cfg)) == 500

    def test_byte_identical(self, tmp_path):
        cfg = SynthConfig(num_users=40, seed=7)
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        write_interactions(synth_generate(cfg), a)
        write_interactions(synth_generate(cfg), b)
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_bad_row_sum_names_row(self):
        cfg = SynthConfig(transition=[[0.5, 0.5, 0.0], [0.2, 0.2, 0.2], [0.0, 0.0, 1.0]])
        with pytest.raises(ConfigError, match="row 1"):
            synth_generate(cfg)
