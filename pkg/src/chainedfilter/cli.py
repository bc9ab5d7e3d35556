"""Command-line front end.

Builds and queries filter containers from key files, prints the closed-form
space bounds, and runs the benchmark suites that reproduce the space, error
and probe-count tables as CSV.  Throughput columns are wall-clock noise by
nature and are emitted for reference only.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time

import numpy as np

from .apps.cuckoo import PredictedCuckoo, build_table
from .apps.dictionary import dict_build
from .apps.huffman import RandomAccessText, code_stats, huffman_build, ra_encode
from .apps.lsm import LsmLevel, lsm_add_run, lsm_point_query
from .bounds import (
    andnot_space,
    cuckoo_negative_ratio,
    exact_chain_space,
    optimal_two_stage_params,
    space_lower_bound,
)
from .chained import (
    ChainedAndFilter,
    ChainedAndNotFilter,
    build_exact_andnot,
    build_general_and,
)
from .errors import ChainedFilterError, DegenerateLambda
from .serialize import MAGIC_TEXT, FormatError

DEFAULT_SEED = 0xC0FFEE
BENCH_SCHEMA = "chainedfilter-bench-v1"
BENCH_FIELDS = ("scenario", "n", "lambda", "epsilon", "bits_per_item",
                "construct_mops", "query_mops", "fpr_measured", "errors",
                "seed")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONSTRUCTION = 3
EXIT_VERIFICATION = 4


def resolve_seed(args) -> int:
    """--seed beats the CF_SEED environment variable beats the default."""
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("CF_SEED")
    if env:
        return int(env, 0)
    return DEFAULT_SEED


def read_keys(path: str, hex_mode: bool = False) -> np.ndarray:
    """Key file: raw little-endian 64-bit array, or hex lines with --hex."""
    if hex_mode:
        with open(path) as fh:
            vals = [int(line, 16) for line in fh if line.strip()]
        return np.array(vals, dtype=np.uint64)
    return np.fromfile(path, dtype="<u8")


def _parse_key(text: str) -> int:
    return int(text, 0)


# ---------------------------------------------------------------- bounds

def cmd_bounds(args) -> int:
    eps, lam = args.epsilon, args.lam
    lower = space_lower_bound(eps, lam)
    print(f"epsilon            {eps:g}")
    print(f"lambda             {lam:g}")
    print(f"lower_bound        {lower:.6f} bits/item")
    try:
        chain = exact_chain_space(lam)
        print(f"exact_chain        {chain:.6f} bits/item")
        if lower > 0.0:
            print(f"chain_ratio        {chain / lower:.6f}")
    except DegenerateLambda:
        print("exact_chain        degenerate lambda: a single exact table "
              "over the whole universe is already optimal")
    ts = optimal_two_stage_params(eps, lam)
    print(f"two_stage          strategy={ts.strategy.value} "
          f"alpha={ts.alpha:.6f} beta={ts.beta:.6f} "
          f"space={ts.space_per_item:.6f}")
    if lam > 1.0:
        print(f"andnot_space       {andnot_space(lam, args.delta):.6f} "
              f"bits/item at delta={args.delta:g}")
    else:
        print("andnot_space       needs a negative ratio above one")
    return EXIT_OK


# ----------------------------------------------------------------- build

def _summarize_and(f: ChainedAndFilter, n_pos: int) -> None:
    print("combinator         and")
    print(f"alpha              {f.alpha}")
    print(f"beta               {f.beta:.6f}")
    print(f"space_bits         {f.size_bits}")
    print(f"bits_per_item      {f.size_bits / n_pos:.6f}")


def _summarize_andnot(f: ChainedAndNotFilter, n_pos: int) -> None:
    print("combinator         andnot")
    print(f"layers             {len(f.layers)}")
    print(f"terminal           {'yes' if f.terminal is not None else 'no'}")
    print(f"space_bits         {f.size_bits}")
    print(f"bits_per_item      {f.size_bits / n_pos:.6f}")


def cmd_build(args) -> int:
    seed = resolve_seed(args)
    print(f"seed               {seed:#x}")
    universe = read_keys(args.universe, args.hex)
    if universe.size == 0:
        raise ValueError("universe file holds no keys")
    if (args.positives is None) == (args.lam is None):
        raise ValueError("give exactly one of --positives and --lambda")
    if args.positives is not None:
        positives = read_keys(args.positives, args.hex)
    else:
        n_pos = max(1, round(universe.size / (args.lam + 1.0)))
        positives = universe[:n_pos]
    print(f"universe           {universe.size} keys")
    print(f"positives          {positives.size} keys")

    if args.combinator == "and":
        f = build_general_and(universe, positives, args.epsilon, seed=seed,
                              keep_inputs=False)
        print(f"lambda             {f.lam:.6f}")
        _summarize_and(f, positives.size)
    else:
        f = build_exact_andnot(universe, positives, args.delta, seed=seed)
        print(f"lambda             {f.lam:.6f}")
        _summarize_andnot(f, positives.size)
    blob = f.to_bytes()
    with open(args.out, "wb") as fh:
        fh.write(blob)
    print(f"wrote              {args.out} ({len(blob)} bytes)")
    return EXIT_OK


# ----------------------------------------------------------------- query

def _load_filter(path: str):
    with open(path, "rb") as fh:
        blob = fh.read()
    for cls in (ChainedAndFilter, ChainedAndNotFilter):
        try:
            return cls.from_bytes(blob)
        except FormatError:
            continue
    raise FormatError(f"{path} is not a filter container")


def cmd_query(args) -> int:
    f = _load_filter(args.filter)
    if args.keys_file:
        keys = [int(k) for k in read_keys(args.keys_file, args.hex)]
    else:
        keys = [_parse_key(k) for k in args.keys]
    if not keys:
        raise ValueError("no keys to query")
    mismatches = 0
    for k in keys:
        hit = f.contains(k)
        print(f"{k:#018x} {int(hit)}")
        if args.expect_positive and not hit:
            mismatches += 1
        if args.expect_negative and hit:
            mismatches += 1
    if mismatches:
        print(f"verification failed: {mismatches} of {len(keys)} keys "
              f"missed the expectation", file=sys.stderr)
        return EXIT_VERIFICATION
    return EXIT_OK


# ----------------------------------------------------------------- bench

def _write_bench_rows(path: str, rows: list[dict]) -> None:
    """Append records, creating the versioned header on first write."""
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    if not fresh:
        with open(path) as fh:
            first = fh.readline().strip()
        if first != f"# {BENCH_SCHEMA}":
            raise ValueError(f"{path} does not carry the {BENCH_SCHEMA} header")
    with open(path, "a", newline="") as fh:
        if fresh:
            fh.write(f"# {BENCH_SCHEMA}\n")
            fh.write(",".join(BENCH_FIELDS) + "\n")
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        for row in rows:
            for field, value in row.items():
                if isinstance(value, float) and not math.isfinite(value):
                    raise ValueError(f"non-finite bench field {field}")
            writer.writerow(row)


def read_bench_csv(path: str) -> list[dict]:
    """Parse a bench CSV back into typed records."""
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# {BENCH_SCHEMA}":
            raise ValueError(f"{path} does not carry the {BENCH_SCHEMA} header")
        rows = []
        for row in csv.DictReader(fh):
            parsed = dict(row)
            for field in BENCH_FIELDS[1:]:
                parsed[field] = float(row[field])
            rows.append(parsed)
        return rows


def _bench_dict(args, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    n = args.n
    for lam in range(2, 17):
        universe = np.unique(rng.integers(0, 1 << 63, size=(lam + 1) * n + 256,
                                          dtype=np.uint64))[:(lam + 1) * n]
        positives = universe[rng.choice(universe.size, size=n, replace=False)]
        t0 = time.perf_counter()
        report = dict_build(universe, positives, seed=seed)
        dt = time.perf_counter() - t0
        f = report.filter
        t0 = time.perf_counter()
        hits = f.contains_batch(universe)
        qt = time.perf_counter() - t0
        truth = np.isin(universe, positives)
        errors = int(np.count_nonzero(hits != truth))
        rows.append({
            "scenario": f"dict/lam={lam}", "n": n, "lambda": f.lam,
            "epsilon": 0.0, "bits_per_item": f.size_bits / n,
            "construct_mops": universe.size / dt / 1e6,
            "query_mops": universe.size / qt / 1e6,
            "fpr_measured": 0.0, "errors": errors, "seed": seed,
        })
    return rows


def _bench_huffman(args, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    for omega in range(3, 11):
        p = (1.0 / omega) ** np.arange(1, 41)
        p /= p.sum()
        syms = rng.choice(40, size=args.n, p=p).astype(np.int64)
        t0 = time.perf_counter()
        text = ra_encode(syms, seed=seed)
        dt = time.perf_counter() - t0
        t0 = time.perf_counter()
        decoded = text.decode_all()
        qt = time.perf_counter() - t0
        errors = int(np.count_nonzero(decoded != syms))
        rows.append({
            "scenario": f"huffman/omega={omega}", "n": args.n,
            "lambda": text.filter.lam, "epsilon": 0.0,
            "bits_per_item": text.bits_per_symbol,
            "construct_mops": args.n / dt / 1e6,
            "query_mops": args.n / qt / 1e6,
            "fpr_measured": 0.0, "errors": errors, "seed": seed,
        })
    return rows


def _bench_cuckoo(args, seed: int) -> list[dict]:
    rows = []
    for r in (0.1, 0.2, 0.3, 0.4):
        t0 = time.perf_counter()
        table = build_table(args.num_slots, r, seed=seed)
        dt = time.perf_counter() - t0
        pc = PredictedCuckoo(table, use_othello=True, seed=seed + 1)
        pc.train_to_zero(max_rounds=16)
        keys, _ = table.stored()
        sample = keys[:min(keys.size, 20_000)]
        t0 = time.perf_counter()
        probes = pc.mean_probes(sample)
        qt = time.perf_counter() - t0
        rows.append({
            "scenario": f"cuckoo/r={r:g}", "n": table.count,
            "lambda": table.lambda_measured, "epsilon": 0.0,
            "bits_per_item": pc.space_bits / table.count,
            "construct_mops": table.count / dt / 1e6,
            "query_mops": sample.size / qt / 1e6,
            "fpr_measured": probes - 1.0, "errors": table.rebuilds,
            "seed": seed,
        })
    return rows


def _bench_lsm(args, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    level = LsmLevel(seed=seed)
    total = args.runs * args.run_size
    keys = np.unique(rng.integers(0, 1 << 62, size=total + 1024,
                                  dtype=np.uint64))[:total]
    t0 = time.perf_counter()
    for i in range(args.runs):
        lsm_add_run(level, keys[i * args.run_size:(i + 1) * args.run_size])
    dt = time.perf_counter() - t0
    absent = np.unique(rng.integers(0, 1 << 62, size=args.queries,
                                    dtype=np.uint64))
    absent = absent[~np.isin(absent, keys)]
    present = rng.choice(keys, size=min(args.queries, total), replace=False)
    violations = 0
    fp_reads = 0
    n_probes = present.size + absent.size
    t0 = time.perf_counter()
    for k in present:
        res = lsm_point_query(level, int(k), check_oracle=True)
        extra = res.runs_read - (1 if res.found_in is not None else 0)
        fp_reads += extra
        violations += int(extra > 1) + int(res.found_in is None)
    for k in absent:
        res = lsm_point_query(level, int(k), check_oracle=True)
        fp_reads += res.runs_read
        violations += int(res.runs_read > 1) + int(res.found_in is not None)
    qt = time.perf_counter() - t0
    return [{
        "scenario": f"lsm/runs={args.runs}", "n": total, "lambda": 0.0,
        "epsilon": 0.0, "bits_per_item": level.size_bits / total,
        "construct_mops": total / dt / 1e6,
        "query_mops": n_probes / qt / 1e6,
        "fpr_measured": fp_reads / n_probes, "errors": violations,
        "seed": seed,
    }]


_BENCH_SUITES = {
    "dict": _bench_dict,
    "huffman": _bench_huffman,
    "cuckoo": _bench_cuckoo,
    "lsm": _bench_lsm,
}


def cmd_bench(args) -> int:
    base = resolve_seed(args)
    seeds = ([int(s, 0) for s in args.seeds.split(",")] if args.seeds
             else [base])
    rows = []
    for seed in seeds:
        print(f"seed               {seed:#x}")
        rows.extend(_BENCH_SUITES[args.suite](args, seed))
    _write_bench_rows(args.out, rows)
    print(f"wrote              {len(rows)} records to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------- huffman

def cmd_huffman_encode(args) -> int:
    seed = resolve_seed(args)
    print(f"seed               {seed:#x}")
    with open(args.input, "rb") as fh:
        data = fh.read()
    text = ra_encode(data, seed=seed)
    blob = text.to_bytes()
    with open(args.out, "wb") as fh:
        fh.write(blob)
    stats = code_stats(data, text.codebook)
    print(f"symbols            {text.length}")
    print(f"entropy            {stats['entropy']:.6f} bits/symbol")
    print(f"avg_code_length    {stats['avg_code_length']:.6f} bits/symbol")
    print(f"filter_bits/symbol {text.bits_per_symbol:.6f}")
    print(f"wrote              {args.out} ({len(blob)} bytes)")
    return EXIT_OK


def cmd_huffman_decode(args) -> int:
    with open(args.input, "rb") as fh:
        text = RandomAccessText.from_bytes(fh.read())
    if args.at is not None:
        print(text.decode_at(args.at))
        return EXIT_OK
    decoded = text.decode_all()
    data = bytes(int(s) & 0xFF for s in decoded)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
        print(f"wrote              {args.out} ({len(data)} bytes)")
    else:
        sys.stdout.buffer.write(data)
    return EXIT_OK


def cmd_huffman_stat(args) -> int:
    with open(args.input, "rb") as fh:
        data = fh.read()
    if not data:
        raise ValueError("input file is empty")
    if data[:4] == MAGIC_TEXT:
        # encoded container: counts are not stored, so report what the
        # container itself knows
        text = RandomAccessText.from_bytes(data)
        print(f"symbols            {text.length}")
        print(f"distinct_symbols   {len(text.codebook.codes)}")
        print(f"avg_code_length    "
              f"{text.total_code_bits / text.length:.6f} bits/symbol")
        print(f"filter_bits/symbol {text.bits_per_symbol:.6f}")
        print(f"max_code_length    {text.codebook.max_length}")
        return EXIT_OK
    cb = huffman_build(data)
    stats = code_stats(data, cb)
    print(f"symbols            {int(stats['symbols'])}")
    print(f"entropy            {stats['entropy']:.6f} bits/symbol")
    print(f"avg_code_length    {stats['avg_code_length']:.6f} bits/symbol")
    print(f"max_code_length    {cb.max_length}")
    return EXIT_OK


# ------------------------------------------------------------------ sims

def cmd_cuckoo_sim(args) -> int:
    seed = resolve_seed(args)
    print(f"seed               {seed:#x}")
    table = build_table(args.num_slots, args.load, seed=seed)
    law = cuckoo_negative_ratio(args.load)
    measured = table.lambda_measured
    print(f"slots_per_table    {args.num_slots}")
    print(f"stored_keys        {table.count}")
    print(f"rebuilds           {table.rebuilds}")
    print(f"lambda_measured    {measured:.6f}")
    print(f"lambda_law         {law:.6f}")
    print(f"deviation          {abs(measured / law - 1) * 100:.3f}%")
    if args.train != "none":
        pc = PredictedCuckoo(table, use_othello=args.train == "othello",
                             seed=seed + 1)
        print(f"predictor_bits     {pc.space_bits}")
        rounds = pc.train_to_zero(max_rounds=32)
        for i, rate in enumerate(pc.error_history, start=1):
            print(f"round {i:<2d}           error_rate {rate:.6f}")
        keys, _ = table.stored()
        sample = keys[:min(keys.size, 20_000)]
        print(f"rounds_to_zero     {rounds}")
        print(f"mean_probes        {pc.mean_probes(sample):.6f}")
    return EXIT_OK


def cmd_lsm_sim(args) -> int:
    seed = resolve_seed(args)
    print(f"seed               {seed:#x}")
    rng = np.random.default_rng(seed)
    level = LsmLevel(seed=seed)
    total = args.runs * args.run_size
    keys = np.unique(rng.integers(0, 1 << 62, size=total + 1024,
                                  dtype=np.uint64))[:total]
    for i in range(args.runs):
        lsm_add_run(level, keys[i * args.run_size:(i + 1) * args.run_size])
    print(f"runs               {args.runs} x {args.run_size} keys")
    print(f"exclusions         {level.exclusions}")
    print(f"bits_per_key       {level.size_bits / total:.3f}")
    absent = np.unique(rng.integers(0, 1 << 62, size=args.queries,
                                    dtype=np.uint64))
    absent = absent[~np.isin(absent, keys)]
    present = rng.choice(keys, size=min(args.queries, total), replace=False)
    max_extra = 0
    false_negatives = 0
    try:
        for k in present:
            res = lsm_point_query(level, int(k), check_oracle=True)
            if res.found_in is None:
                false_negatives += 1
            max_extra = max(max_extra, res.runs_read -
                            (1 if res.found_in is not None else 0))
        fp_reads = 0
        for k in absent:
            res = lsm_point_query(level, int(k), check_oracle=True)
            fp_reads += res.runs_read
            max_extra = max(max_extra, res.runs_read)
    except AssertionError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    print(f"present_queries    {present.size} (false negatives "
          f"{false_negatives})")
    print(f"absent_queries     {absent.size} (non-containing reads "
          f"{fp_reads})")
    print(f"max_extra_reads    {max_extra}")
    if false_negatives:
        return EXIT_VERIFICATION
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainedfilter",
        description="Chained membership filters: bounds, builds, benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="print the closed-form space bounds")
    p.add_argument("epsilon", type=float)
    p.add_argument("lam", type=float, metavar="lambda")
    p.add_argument("--delta", type=float, default=0.5)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("build", help="build a filter container from key files")
    p.add_argument("universe", help="key file for the whole universe")
    p.add_argument("--positives", help="key file for the positive set")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="synthesize positives as the first 1/(lambda+1) "
                        "fraction of the universe file")
    p.add_argument("--combinator", choices=("and", "andnot"), default="and")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--hex", action="store_true",
                   help="key files are newline-delimited hex")
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="probe keys against a filter container")
    p.add_argument("filter")
    p.add_argument("keys", nargs="*", help="key literals (decimal or 0x hex)")
    p.add_argument("--keys-file")
    p.add_argument("--hex", action="store_true")
    p.add_argument("--expect-positive", action="store_true")
    p.add_argument("--expect-negative", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="run a benchmark suite, appending CSV")
    p.add_argument("suite", choices=sorted(_BENCH_SUITES))
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=20_000,
                   help="positives (dict) or symbols (huffman) per scenario")
    p.add_argument("--num-slots", type=int, default=50_000,
                   help="slots per cuckoo table")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--run-size", type=int, default=10_000)
    p.add_argument("--queries", type=int, default=20_000)
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("huffman", help="random-access coded text")
    hs = p.add_subparsers(dest="subcommand", required=True)
    pe = hs.add_parser("encode")
    pe.add_argument("input")
    pe.add_argument("--out", required=True)
    pe.add_argument("--seed", type=lambda s: int(s, 0))
    pe.set_defaults(func=cmd_huffman_encode)
    pd = hs.add_parser("decode")
    pd.add_argument("input")
    pd.add_argument("--at", type=int, help="decode one 1-based position")
    pd.add_argument("--out")
    pd.set_defaults(func=cmd_huffman_decode)
    ps = hs.add_parser("stat")
    ps.add_argument("input")
    ps.set_defaults(func=cmd_huffman_stat)

    p = sub.add_parser("cuckoo-sim", help="two-table occupancy simulation")
    p.add_argument("--num-slots", type=int, default=50_000)
    p.add_argument("--load", type=float, default=0.4)
    p.add_argument("--train", choices=("none", "othello", "bloom"),
                   default="none")
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.set_defaults(func=cmd_cuckoo_sim)

    p = sub.add_parser("lsm-sim", help="immutable-run point-query simulation")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--run-size", type=int, default=10_000)
    p.add_argument("--queries", type=int, default=20_000)
    p.add_argument("--seed", type=lambda s: int(s, 0))
    p.set_defaults(func=cmd_lsm_sim)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:  # includes FormatError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChainedFilterError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION


if __name__ == "__main__":
    raise SystemExit(main())
