"""Application-layer tests: dictionary, coded text, predicted cuckoo, runs."""

import math

import numpy as np
import pytest

from chainedfilter.apps import (
    DICT_OVERHEAD_BOUND,
    CuckooTable,
    LsmLevel,
    PredictedCuckoo,
    RandomAccessText,
    build_table,
    code_stats,
    cuckoo_insert,
    cuckoo_lookup,
    dict_build,
    huffman_build,
    lsm_add_run,
    lsm_point_query,
    ra_decode_at,
    ra_encode,
)
from chainedfilter.bounds import cuckoo_negative_ratio, entropy
from chainedfilter.errors import (
    CodeTooDeep,
    DuplicateKey,
    EmptyAlphabet,
    RebuildLoop,
    TableFull,
)
from chainedfilter.serialize import FormatError

from helpers import draw_keys, split_universe


def geometric_corpus(rng, omega, size, depth=40):
    """Symbols drawn with frequency proportional to omega**-j."""
    p = (1.0 / omega) ** np.arange(1, depth + 1)
    p /= p.sum()
    return rng.choice(depth, size=size, p=p).astype(np.int64)


class TestDictionary:
    def test_zero_errors_and_overhead(self):
        rng = np.random.default_rng(11)
        pos, neg = split_universe(rng, 17 * 3000, 3000)
        universe = np.concatenate([pos, neg])
        report = dict_build(universe, pos, seed=4)
        assert np.all(report.filter.contains_batch(pos))
        assert not np.any(report.filter.contains_batch(neg))
        assert report.bits_per_universe_item == report.filter.size_bits / universe.size
        h = entropy(1.0 / (report.filter.lam + 1.0))
        assert report.overhead_ratio == pytest.approx(report.bits_per_universe_item / h)

    def test_bound_constant(self):
        assert DICT_OVERHEAD_BOUND == pytest.approx(1.2522, abs=5e-4)

    def test_large_ratio_within_bound(self):
        # small-n fuzz sits above the bound, so allow the finite-size slack
        rng = np.random.default_rng(12)
        pos, neg = split_universe(rng, 17 * 20_000, 20_000)
        report = dict_build(np.concatenate([pos, neg]), pos, seed=5)
        assert report.overhead_ratio < DICT_OVERHEAD_BOUND * 1.07

    def test_degenerate_ratio_falls_back(self):
        rng = np.random.default_rng(13)
        pos, neg = split_universe(rng, 4000, 2000)
        report = dict_build(np.concatenate([pos, neg]), pos, seed=6)
        assert report.filter.stage1 is None
        assert np.all(report.filter.contains_batch(pos))
        assert not np.any(report.filter.contains_batch(neg))

    def test_empty_universe_rejected(self):
        with pytest.raises(ValueError):
            dict_build([], [])


class TestHuffmanCodebook:
    def test_worked_example_codes(self):
        cb = huffman_build({ord("a"): 1, ord("b"): 1, 0: 2})
        assert cb.codes[ord("a")] == (2, 0b00)
        assert cb.codes[ord("b")] == (2, 0b01)
        assert cb.codes[0] == (1, 0b1)

    def test_kraft_and_prefix_free(self):
        rng = np.random.default_rng(21)
        counts = {s: int(c) for s, c in enumerate(rng.integers(1, 1000, size=64))}
        cb = huffman_build(counts)
        assert cb.kraft_sum() <= 1.0 + 1e-12
        codes = sorted(cb.codes.values())
        for ln, code in codes:
            for ln2, code2 in codes:
                if ln < ln2:
                    assert (code2 >> (ln2 - ln)) != code

    def test_average_length_near_entropy(self):
        rng = np.random.default_rng(22)
        counts = {s: int(c) for s, c in enumerate(rng.integers(1, 5000, size=100))}
        stats = code_stats(counts)
        assert stats["entropy"] <= stats["avg_code_length"] < stats["entropy"] + 1.0

    def test_single_symbol_gets_one_bit(self):
        cb = huffman_build({7: 42})
        assert cb.codes == {7: (1, 0)}

    def test_empty_alphabet(self):
        with pytest.raises(EmptyAlphabet):
            huffman_build({})

    def test_bad_counts(self):
        with pytest.raises(ValueError):
            huffman_build({3: 0})
        with pytest.raises(ValueError):
            huffman_build({-1: 2})


class TestRandomAccessText:
    def test_worked_example_key_sets(self):
        cb = huffman_build({ord("a"): 1, ord("b"): 1, 0: 2})
        text = ra_encode(b"ab\x00", cb, seed=7)
        assert not text.flipped
        pairs = {(1, 1): 0, (1, 2): 0, (2, 1): 0, (2, 2): 1, (3, 1): 1}
        for (i, j), bit in pairs.items():
            assert text.bit_at(i, j) == bool(bit)
        assert [text.decode_at(i) for i in (1, 2, 3)] == [ord("a"), ord("b"), 0]

    def test_roundtrip_bytes_text(self):
        rng = np.random.default_rng(31)
        data = bytes(rng.integers(97, 110, size=4000, dtype=np.uint8).tolist())
        text = ra_encode(data, seed=8)
        assert bytes(text.decode_all().astype(np.uint8).tolist()) == data
        for i in (1, 17, 4000):
            assert ra_decode_at(text, i) == data[i - 1]

    def test_decode_cost_is_code_length(self):
        data = b"ab\x00" * 50
        text = ra_encode(data, seed=9)
        text.filter.reset_counters()
        sym = text.decode_at(1)
        ln = text.codebook.codes[sym][0]
        assert text.filter.queries == ln

    def test_geometric_corpus_space_and_decode(self):
        rng = np.random.default_rng(32)
        syms = geometric_corpus(rng, 8, 60_000)
        text = ra_encode(syms, seed=10)
        assert np.array_equal(text.decode_all(), syms)
        stats = code_stats({int(s): int(c) for s, c in
                            zip(*np.unique(syms, return_counts=True))})
        # minority-bit filtering beats storing the stream outright
        assert text.bits_per_symbol < 1.13 * stats["avg_code_length"]

    def test_flip_polarity_recorded(self):
        rng = np.random.default_rng(33)
        syms = geometric_corpus(rng, 6, 8000)
        text = ra_encode(syms, seed=11)
        assert text.flipped  # unary-heavy codes carry majority ones
        assert np.array_equal(text.decode_all(), syms)

    def test_single_symbol_text(self):
        text = ra_encode(b"zzzz", seed=12)
        assert text.length == 4
        assert bytes(text.decode_all().astype(np.uint8).tolist()) == b"zzzz"

    def test_position_bounds(self):
        text = ra_encode(b"ab\x00", seed=13)
        with pytest.raises(IndexError):
            text.decode_at(0)
        with pytest.raises(IndexError):
            text.decode_at(4)

    def test_code_too_deep(self):
        # doubling weights give a fully skewed 259-deep tree
        counts = {s: 2 ** s for s in range(260)}
        cb = huffman_build(counts)
        assert cb.max_length == 259
        with pytest.raises(CodeTooDeep):
            ra_encode([0, 1, 2], cb, seed=14)

    def test_container_roundtrip(self):
        rng = np.random.default_rng(34)
        syms = geometric_corpus(rng, 5, 3000)
        text = ra_encode(syms, seed=15)
        blob = text.to_bytes()
        loaded = RandomAccessText.from_bytes(blob)
        assert loaded.to_bytes() == blob
        assert loaded.length == text.length
        assert loaded.flipped == text.flipped
        assert loaded.codebook.codes == text.codebook.codes
        assert np.array_equal(loaded.decode_all(), syms)

    def test_container_rejects_other_magic(self):
        text = ra_encode(b"ab\x00", seed=16)
        with pytest.raises(FormatError):
            RandomAccessText.from_bytes(b"XXXX" + text.to_bytes()[4:])


class TestCuckooTable:
    def test_insert_lookup_update(self):
        t = CuckooTable(64, seed=1)
        cuckoo_insert(t, 123, 900)
        cuckoo_insert(t, 456, 901)
        table_idx, payload = cuckoo_lookup(t, 123)
        assert table_idx in (1, 2) and payload == 900
        cuckoo_insert(t, 123, 999)
        assert cuckoo_lookup(t, 123)[1] == 999
        assert t.count == 2
        assert cuckoo_lookup(t, 789) is None

    def test_fill_at_load(self):
        t = build_table(20_000, 0.4, seed=2)
        assert t.count == 16_000
        assert t.load == pytest.approx(0.4)
        keys, labels = t.stored()
        assert keys.size == 16_000
        assert labels.sum() == t.table_counts()[1]
        for k in keys[:200]:
            assert t.lookup(int(k)) is not None

    def test_lambda_matches_law(self):
        for r in (0.2, 0.4):
            t = build_table(50_000, r, seed=3)
            assert t.lambda_measured == pytest.approx(
                cuckoo_negative_ratio(r), rel=0.05)

    def test_rebuild_on_stuck_chain(self):
        # tiny table at punishing load forces displacement cycles
        rng = np.random.default_rng(4)
        t = CuckooTable(8, seed=4)
        inserted = 0
        try:
            for k in draw_keys(rng, 15):
                t.insert(int(k), 0)
                inserted += 1
        except RebuildLoop:
            pass
        assert t.rebuilds >= 1 or inserted == 15

    def test_table_full(self):
        t = CuckooTable(1, seed=5)
        with pytest.raises((TableFull, RebuildLoop)):
            for k in range(1, 50):
                t.insert(k, 0)

    def test_probe_is_single_table(self):
        t = build_table(1000, 0.3, seed=6)
        k = int(t.keys_in(1)[0])
        assert t.probe(1, k) is not None
        assert t.probe(2, k) is None


class TestPredictedCuckoo:
    def test_training_converges_othello(self):
        t = build_table(30_000, 0.4, seed=7)
        pc = PredictedCuckoo(t, use_othello=True, seed=8)
        rounds = pc.train_to_zero(max_rounds=5)
        assert rounds <= 5
        rates = pc.error_history
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        assert rates[-1] == 0.0

    def test_training_converges_bloom_only(self):
        t = build_table(30_000, 0.4, seed=9)
        pc = PredictedCuckoo(t, use_othello=False, seed=10)
        assert pc.train_to_zero(max_rounds=10) <= 10

    def test_space_budget(self):
        t = build_table(30_000, 0.4, seed=11)
        pc = PredictedCuckoo(t, use_othello=True, seed=12)
        lam = cuckoo_negative_ratio(0.4)
        n = math.ceil(t.count / (lam + 1.0))
        budget = math.log2(math.e) * n * math.log2(16 * lam)
        assert pc.space_bits <= budget + 64

    def test_converged_lookups_single_probe(self):
        t = build_table(20_000, 0.4, seed=13)
        pc = PredictedCuckoo(t, use_othello=True, seed=14)
        pc.train_to_zero()
        keys, _ = t.stored()
        assert pc.mean_probes(keys[:4000]) == 1.0
        payload, probes = pc.predicted_lookup(int(keys[0]))
        assert probes == 1
        assert payload == t.lookup(int(keys[0]))[1]

    def test_untrained_lookups_at_most_two(self):
        t = build_table(20_000, 0.4, seed=15)
        pc = PredictedCuckoo(t, use_othello=True, seed=16)
        keys, _ = t.stored()
        assert pc.mean_probes(keys[:2000]) <= 2.0

    def test_absent_key_lookup(self):
        t = build_table(1000, 0.3, seed=17)
        pc = PredictedCuckoo(t, use_othello=True, seed=18)
        payload, probes = pc.predicted_lookup(2 ** 62 + 5)
        assert payload is None and probes == 2

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError):
            PredictedCuckoo(CuckooTable(16, seed=19))


class TestLsm:
    def _build_level(self, rng, n_runs, run_size, overlap=0):
        total = n_runs * run_size
        keys = draw_keys(rng, total + 1000)[:total]
        runs = [keys[i * run_size:(i + 1) * run_size].copy()
                for i in range(n_runs)]
        if overlap and n_runs >= 4:
            runs[3][:overlap] = runs[1][:overlap]
            runs[3] = np.unique(runs[3])
        level = LsmLevel(seed=int(rng.integers(1 << 62)))
        for rk in runs:
            lsm_add_run(level, rk)
        return level, runs

    def test_no_false_negatives_and_no_extra_reads(self):
        rng = np.random.default_rng(41)
        level, runs = self._build_level(rng, 6, 3000)
        for rk in runs:
            for k in rk[:150]:
                res = lsm_point_query(level, int(k), check_oracle=True)
                assert res.found_in is not None
                assert res.runs_read == 1

    def test_found_in_is_first_containing_run(self):
        rng = np.random.default_rng(42)
        level, runs = self._build_level(rng, 6, 2000, overlap=40)
        for k in runs[1][:40]:  # these keys live in runs 2 and 4
            res = lsm_point_query(level, int(k), check_oracle=True)
            assert res.found_in == 2

    def test_absent_keys_read_at_most_one_run(self):
        rng = np.random.default_rng(43)
        level, runs = self._build_level(rng, 8, 2000)
        stored = np.concatenate([r.keys for r in level.runs])
        probes = draw_keys(np.random.default_rng(44), 5000)
        probes = probes[~np.isin(probes, stored)]
        for k in probes:
            res = lsm_point_query(level, int(k), check_oracle=True)
            assert res.found_in is None
            assert res.runs_read <= 1

    def test_exclusions_counted_and_runs_immutable(self):
        rng = np.random.default_rng(45)
        level, runs = self._build_level(rng, 5, 2000)
        assert level.exclusions > 0
        for run, rk in zip(level.runs, runs):
            assert np.array_equal(run.keys, np.sort(rk))

    def test_duplicate_keys_within_run_rejected(self):
        level = LsmLevel(seed=1)
        with pytest.raises(DuplicateKey):
            lsm_add_run(level, [3, 3, 5])

    def test_empty_run_rejected(self):
        with pytest.raises(ValueError):
            lsm_add_run(LsmLevel(seed=2), [])
