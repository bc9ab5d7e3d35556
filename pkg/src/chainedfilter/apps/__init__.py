"""Applications built on the chained filters: a static dictionary, random
access into Huffman-coded text, a self-adaptive two-table cuckoo hash, and a
point-query layer for immutable sorted runs."""

from .cuckoo import (
    CuckooTable,
    PredictedCuckoo,
    build_table,
    cuckoo_insert,
    cuckoo_lookup,
)
from .dictionary import DICT_OVERHEAD_BOUND, DictReport, dict_build
from .huffman import (
    HuffmanCodebook,
    RandomAccessText,
    code_stats,
    huffman_build,
    ra_decode_at,
    ra_encode,
)
from .lsm import LsmLevel, LsmQueryResult, LsmRun, lsm_add_run, lsm_point_query

__all__ = [
    "CuckooTable",
    "PredictedCuckoo",
    "build_table",
    "cuckoo_insert",
    "cuckoo_lookup",
    "DICT_OVERHEAD_BOUND",
    "DictReport",
    "dict_build",
    "HuffmanCodebook",
    "RandomAccessText",
    "code_stats",
    "huffman_build",
    "ra_decode_at",
    "ra_encode",
    "LsmLevel",
    "LsmQueryResult",
    "LsmRun",
    "lsm_add_run",
    "lsm_point_query",
]
