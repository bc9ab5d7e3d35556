"""Command-line behavior: outputs, exit codes, determinism, CSV schema."""

import math
import subprocess
import sys

import numpy as np
import pytest

import chainedfilter.cli as cli
from chainedfilter.chained import ChainedAndFilter, ChainedAndNotFilter
from chainedfilter.cli import main, read_bench_csv
from chainedfilter.errors import PeelingFailed

from helpers import draw_keys


@pytest.fixture
def key_files(tmp_path):
    rng = np.random.default_rng(90)
    universe = draw_keys(rng, 17 * 1500)
    positives = universe[rng.choice(universe.size, size=1500, replace=False)]
    u_path, p_path = tmp_path / "u.bin", tmp_path / "p.bin"
    universe.tofile(u_path)
    positives.tofile(p_path)
    return str(u_path), str(p_path), universe, positives


class TestBounds:
    def test_reference_point(self, capsys):
        assert main(["bounds", "0", "16"]) == 0
        out = capsys.readouterr().out
        assert "lower_bound        5.486868" in out
        assert "exact_chain        6.000000" in out
        assert "chain_ratio        1.093520" in out
        assert "strategy=A" in out

    def test_all_pass_rate_zeroes_the_row(self, capsys):
        assert main(["bounds", "1", "5"]) == 0
        out = capsys.readouterr().out
        assert "lower_bound        0.000000" in out
        assert "alpha=0.000000 beta=0.000000 space=0.000000" in out

    def test_degenerate_lambda_notice(self, capsys):
        assert main(["bounds", "0", "1.0"]) == 0
        out = capsys.readouterr().out
        assert "degenerate lambda" in out
        assert "needs a negative ratio above one" in out

    def test_bad_epsilon_is_usage_error(self, capsys):
        assert main(["bounds", "2.0", "16"]) == 2


class TestBuild:
    def test_build_and_query_roundtrip(self, key_files, tmp_path, capsys):
        u_path, p_path, universe, positives = key_files
        out = str(tmp_path / "f.cf")
        assert main(["build", u_path, "--positives", p_path,
                     "--out", out, "--seed", "0x11"]) == 0
        text = capsys.readouterr().out
        assert "seed               0x11" in text
        assert "lambda             16.0" in text
        f = ChainedAndFilter.from_bytes(open(out, "rb").read())
        assert np.all(f.contains_batch(positives))

    def test_same_seed_byte_identical(self, key_files, tmp_path):
        u_path, p_path, *_ = key_files
        out1, out2 = str(tmp_path / "a.cf"), str(tmp_path / "b.cf")
        for out in (out1, out2):
            assert main(["build", u_path, "--positives", p_path,
                         "--out", out, "--seed", "7"]) == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()
        out3 = str(tmp_path / "c.cf")
        assert main(["build", u_path, "--positives", p_path,
                     "--out", out3, "--seed", "8"]) == 0
        assert open(out1, "rb").read() != open(out3, "rb").read()

    def test_lambda_flag_synthesizes_positives(self, key_files, tmp_path, capsys):
        u_path, *_ = key_files
        out = str(tmp_path / "f.cf")
        assert main(["build", u_path, "--lambda", "16", "--out", out,
                     "--seed", "3"]) == 0
        assert "positives          1500 keys" in capsys.readouterr().out

    def test_andnot_container(self, key_files, tmp_path):
        u_path, p_path, universe, positives = key_files
        out = str(tmp_path / "f.cf")
        assert main(["build", u_path, "--positives", p_path,
                     "--combinator", "andnot", "--out", out, "--seed", "5"]) == 0
        f = ChainedAndNotFilter.from_bytes(open(out, "rb").read())
        assert np.all(f.contains_batch(positives))

    def test_foreign_positives_usage_error(self, key_files, tmp_path, capsys):
        u_path, _, universe, _ = key_files
        bad = str(tmp_path / "bad.bin")
        draw_keys(np.random.default_rng(1), 100).tofile(bad)
        assert main(["build", u_path, "--positives", bad,
                     "--out", str(tmp_path / "f.cf")]) == 2

    def test_positives_and_lambda_conflict(self, key_files, tmp_path):
        u_path, p_path, *_ = key_files
        assert main(["build", u_path, "--positives", p_path, "--lambda", "4",
                     "--out", str(tmp_path / "f.cf")]) == 2
        assert main(["build", u_path,
                     "--out", str(tmp_path / "f.cf")]) == 2

    def test_hex_key_files(self, tmp_path, capsys):
        universe = list(range(1, 35))
        (tmp_path / "u.hex").write_text("\n".join(f"{k:x}" for k in universe))
        (tmp_path / "p.hex").write_text("\n".join(f"{k:x}" for k in universe[:2]))
        out = str(tmp_path / "f.cf")
        assert main(["build", str(tmp_path / "u.hex"), "--positives",
                     str(tmp_path / "p.hex"), "--hex", "--out", out,
                     "--seed", "2"]) == 0
        assert main(["query", out, "0x1", "0x2", "--expect-positive"]) == 0

    def test_construction_failure_exit_code(self, key_files, tmp_path,
                                            monkeypatch, capsys):
        u_path, p_path, *_ = key_files

        def boom(*args, **kwargs):
            raise PeelingFailed("forced failure after 3 attempts")

        monkeypatch.setattr(cli, "build_general_and", boom)
        assert main(["build", u_path, "--positives", p_path,
                     "--out", str(tmp_path / "f.cf")]) == 3
        assert "construction failed" in capsys.readouterr().err


class TestQuery:
    def test_expectations_drive_exit_code(self, key_files, tmp_path, capsys):
        u_path, p_path, universe, positives = key_files
        out = str(tmp_path / "f.cf")
        main(["build", u_path, "--positives", p_path, "--out", out,
              "--seed", "4"])
        capsys.readouterr()
        assert main(["query", out, "--keys-file", p_path,
                     "--expect-positive"]) == 0
        capsys.readouterr()
        assert main(["query", out, "--keys-file", p_path,
                     "--expect-negative"]) == 4
        assert "verification failed" in capsys.readouterr().err

    def test_key_literals_print_bits(self, key_files, tmp_path, capsys):
        u_path, p_path, universe, positives = key_files
        out = str(tmp_path / "f.cf")
        main(["build", u_path, "--positives", p_path, "--out", out,
              "--seed", "4"])
        capsys.readouterr()
        k = int(positives[0])
        assert main(["query", out, str(k)]) == 0
        assert capsys.readouterr().out.strip().endswith(" 1")

    def test_not_a_container(self, tmp_path):
        bad = tmp_path / "bad.cf"
        bad.write_bytes(b"XXXXjunk")
        assert main(["query", str(bad), "1"]) == 2

    def test_missing_file_is_usage_error(self):
        assert main(["query", "/nonexistent/f.cf", "1"]) == 2


class TestBench:
    def test_dict_suite_schema_and_shape(self, tmp_path, capsys):
        out = str(tmp_path / "bench.csv")
        assert main(["bench", "dict", "--out", out, "--n", "3000",
                     "--seed", "6"]) == 0
        lines = open(out).read().splitlines()
        assert lines[0] == "# chainedfilter-bench-v1"
        assert lines[1].startswith("scenario,n,lambda,")
        rows = read_bench_csv(out)
        assert len(rows) == 15
        assert all(r["errors"] == 0 for r in rows)
        # space is non-decreasing stepwise in floor(log2 lambda)
        by_step = {}
        for r in rows:
            by_step.setdefault(math.floor(math.log2(r["lambda"])), []).append(
                r["bits_per_item"])
        means = [np.mean(by_step[k]) for k in sorted(by_step)]
        assert all(a < b for a, b in zip(means, means[1:]))
        for r in rows:
            for field in ("bits_per_item", "construct_mops", "query_mops"):
                assert math.isfinite(r[field]) and r[field] >= 0

    def test_append_and_header_guard(self, tmp_path, capsys):
        out = str(tmp_path / "bench.csv")
        for _ in range(2):
            assert main(["bench", "lsm", "--out", out, "--runs", "3",
                         "--run-size", "1000", "--queries", "1500",
                         "--seed", "9"]) == 0
        rows = read_bench_csv(out)
        assert len(rows) == 2
        assert all(r["errors"] == 0 for r in rows)
        bad = tmp_path / "other.csv"
        bad.write_text("scenario,n\nx,1\n")
        assert main(["bench", "lsm", "--out", str(bad), "--runs", "2",
                     "--run-size", "500", "--queries", "500"]) == 2

    def test_seed_list_one_row_per_seed(self, tmp_path, capsys):
        out = str(tmp_path / "bench.csv")
        assert main(["bench", "lsm", "--out", out, "--runs", "2",
                     "--run-size", "800", "--queries", "1000",
                     "--seeds", "1,2,3"]) == 0
        rows = read_bench_csv(out)
        assert [int(r["seed"]) for r in rows] == [1, 2, 3]

    def test_huffman_suite_decodes_clean(self, tmp_path, capsys):
        out = str(tmp_path / "bench.csv")
        assert main(["bench", "huffman", "--out", out, "--n", "5000",
                     "--seed", "10"]) == 0
        rows = read_bench_csv(out)
        assert len(rows) == 8
        assert all(r["errors"] == 0 for r in rows)

    def test_cuckoo_suite_lambda_curve(self, tmp_path, capsys):
        out = str(tmp_path / "bench.csv")
        assert main(["bench", "cuckoo", "--out", out, "--num-slots", "20000",
                     "--seed", "11"]) == 0
        rows = read_bench_csv(out)
        assert len(rows) == 4
        lams = [r["lambda"] for r in rows]
        assert all(a > b for a, b in zip(lams, lams[1:]))
        assert all(r["fpr_measured"] == 0.0 for r in rows)


class TestHuffmanCommands:
    def test_encode_decode_stat(self, tmp_path, capsys):
        rng = np.random.default_rng(12)
        data = bytes(rng.integers(60, 70, size=2500, dtype=np.uint8).tolist())
        src = tmp_path / "text.bin"
        src.write_bytes(data)
        container = str(tmp_path / "text.cfh")
        assert main(["huffman", "encode", str(src), "--out", container,
                     "--seed", "13"]) == 0
        capsys.readouterr()
        assert main(["huffman", "decode", container, "--at", "42"]) == 0
        assert int(capsys.readouterr().out.strip()) == data[41]
        round_path = str(tmp_path / "round.bin")
        assert main(["huffman", "decode", container, "--out", round_path]) == 0
        assert open(round_path, "rb").read() == data
        capsys.readouterr()
        assert main(["huffman", "stat", str(src)]) == 0
        out = capsys.readouterr().out
        assert "entropy" in out and "avg_code_length" in out
        assert main(["huffman", "stat", container]) == 0
        out = capsys.readouterr().out
        assert "symbols            2500" in out
        assert "filter_bits/symbol" in out


class TestSims:
    def test_cuckoo_sim_reports_law(self, capsys):
        assert main(["cuckoo-sim", "--num-slots", "8000", "--load", "0.3",
                     "--train", "othello", "--seed", "14"]) == 0
        out = capsys.readouterr().out
        assert "lambda_law         3.031943" in out
        assert "rounds_to_zero" in out
        assert "mean_probes        1.000000" in out

    def test_lsm_sim_extra_reads(self, capsys):
        assert main(["lsm-sim", "--runs", "4", "--run-size", "1500",
                     "--queries", "3000", "--seed", "15"]) == 0
        out = capsys.readouterr().out
        assert "max_extra_reads    1" in out or "max_extra_reads    0" in out
        assert "false negatives 0" in out


class TestSeedResolution:
    def test_env_override_and_flag_priority(self, key_files, tmp_path,
                                            monkeypatch, capsys):
        u_path, p_path, *_ = key_files
        out = str(tmp_path / "f.cf")
        monkeypatch.setenv("CF_SEED", "0x123")
        assert main(["build", u_path, "--positives", p_path,
                     "--out", out]) == 0
        assert "seed               0x123" in capsys.readouterr().out
        assert main(["build", u_path, "--positives", p_path, "--out", out,
                     "--seed", "0x456"]) == 0
        assert "seed               0x456" in capsys.readouterr().out

    def test_default_seed_echoed(self, key_files, tmp_path, monkeypatch,
                                 capsys):
        u_path, p_path, *_ = key_files
        monkeypatch.delenv("CF_SEED", raising=False)
        out = str(tmp_path / "f.cf")
        assert main(["build", u_path, "--positives", p_path,
                     "--out", out]) == 0
        assert "seed               0xc0ffee" in capsys.readouterr().out


class TestUsage:
    def test_unknown_suite_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "nope", "--out", "x.csv"])
        assert exc.value.code == 2

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "chainedfilter.cli", "bounds", "0", "16"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "chain_ratio        1.093520" in proc.stdout
