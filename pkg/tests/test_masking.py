import logging
import math

import numpy as np
import pytest

from helpers import toy_vocabulary
from cmow.errors import StructuralError
from cmow.training.masking import MASK_PROB, RANDOM_PROB, line_rng, mask_batch, mask_sequence

VOCAB = toy_vocabulary(50)
CLS, SEP, MASK = VOCAB.cls_id, VOCAB.sep_id, VOCAB.mask_id


def seq(*content):
    return [CLS, *content, SEP]


class TestMaskSequence:
    def test_single_target_when_fraction_small(self):
        ids = seq(10, 11, 12)  # n = 5, ceil(0.05 * 5) = 1
        out = mask_sequence(ids, 0.05, VOCAB, line_rng(0, 0))
        masked, positions, originals = out
        assert len(positions) == 1
        assert originals == [ids[positions[0]]]

    def test_specials_never_selected(self):
        ids = seq(*range(10, 20))
        for line in range(50):
            _, positions, _ = mask_sequence(ids, 0.5, VOCAB, line_rng(1, line))
            for p in positions:
                assert ids[p] not in VOCAB.special_ids

    def test_deterministic_per_seed(self):
        ids = seq(*range(10, 30))
        a = mask_sequence(list(ids), 0.15, VOCAB, line_rng(42, 7))
        b = mask_sequence(list(ids), 0.15, VOCAB, line_rng(42, 7))
        assert a == b
        c = mask_sequence(list(ids), 0.15, VOCAB, line_rng(43, 7))
        assert a != c  # overwhelmingly likely

    def test_specials_only_returns_none(self):
        assert mask_sequence([CLS, SEP], 0.15, VOCAB, line_rng(0, 0)) is None

    def test_corruption_ratio_statistics(self):
        # over many draws the [MASK]/random/keep split approaches 80/10/10
        ids = seq(*range(5, 45))
        n_mask = n_keep = n_rand = 0
        total = 0
        for line in range(1500):
            masked, positions, originals = mask_sequence(list(ids), 0.2, VOCAB, line_rng(3, line))
            for p, orig in zip(positions, originals):
                total += 1
                if masked[p] == MASK:
                    n_mask += 1
                elif masked[p] == orig:
                    n_keep += 1
                else:
                    n_rand += 1
        assert total > 10_000
        for count, p in ((n_mask, MASK_PROB), (n_rand, RANDOM_PROB), (n_keep, 1 - MASK_PROB - RANDOM_PROB)):
            sigma = math.sqrt(total * p * (1 - p))
            # random-replacement can draw the original token or [MASK]
            # itself, so allow a small excess margin beyond 3 sigma
            slack = total * 0.1 * (2 / VOCAB.n_vocab)
            assert abs(count - total * p) < 3 * sigma + slack + 1, (count, total * p)

    def test_target_count_formula(self):
        ids = seq(*range(10, 20))  # length 12
        for fraction in (0.1, 0.15, 0.3, 0.6):
            _, positions, _ = mask_sequence(list(ids), fraction, VOCAB, line_rng(0, 1))
            assert len(positions) == min(math.ceil(fraction * len(ids)), 10)


class TestMaskBatch:
    def test_batch_keys_and_determinism(self):
        seqs = [seq(10, 11, 12, 13), seq(20, 21), seq(30, 31, 32)]
        line_ids = [5, 9, 12]
        a = mask_batch(seqs, 0.3, VOCAB, seed=11, line_ids=line_ids)
        b = mask_batch(seqs, 0.3, VOCAB, seed=11, line_ids=line_ids)
        assert a.sequences == b.sequences
        assert a.positions == b.positions
        assert a.line_ids == line_ids

    def test_masking_independent_of_batch_composition(self):
        s = seq(10, 11, 12, 13, 14)
        alone = mask_batch([s], 0.3, VOCAB, seed=2, line_ids=[7])
        grouped = mask_batch([seq(20, 21), s, seq(30, 31)], 0.3, VOCAB, seed=2, line_ids=[1, 7, 3])
        assert alone.sequences[0] == grouped.sequences[1]
        assert alone.positions[0] == grouped.positions[1]

    def test_specials_only_skipped_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING, logger="cmow"):
            batch = mask_batch([seq(10), [CLS, SEP]], 0.15, VOCAB, seed=0, line_ids=[0, 1])
        assert batch.line_ids == [0]
        assert any("no maskable" in r.message for r in caplog.records)

    def test_fraction_validation(self):
        with pytest.raises(StructuralError):
            mask_batch([seq(10)], 0.0, VOCAB, seed=0)
        with pytest.raises(StructuralError):
            mask_batch([seq(10)], 1.0, VOCAB, seed=0)
