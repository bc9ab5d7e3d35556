"""Chained membership filters.

Exact and epsilon-bounded membership over a known universe from chained
stages: XOR retrieval tables, Bloom/cuckoo/Othello elementary filters, the
two-stage "and" cascade and the alternating "and-not" layer stack, plus
applications (static dictionary, random-access coded text, self-adaptive
cuckoo hashing, point queries over immutable runs).
"""

from . import apps
from .bounds import (
    AndSplit,
    ProblemParams,
    Strategy,
    TwoStageParams,
    andnot_practical_bound,
    andnot_space,
    chain_rule_residual,
    cuckoo_negative_ratio,
    entropy,
    exact_chain_space,
    optimal_and_split,
    optimal_two_stage_params,
    space_lower_bound,
)
from .chained import (
    ChainedAndFilter,
    ChainedAndNotFilter,
    build_dynamic_and,
    build_exact_and,
    build_exact_andnot,
    build_general_and,
    build_trainable_andnot,
    exclude_negative,
    insert_positive,
    make_dynamic,
    query_and,
    query_andnot,
    train_andnot,
)
from .dynfilters import BloomFilter, CuckooFilter, OthelloFilter
from .errors import (
    CapacityExceeded,
    ChainedFilterError,
    CodeTooDeep,
    ConflictingLabel,
    DegenerateLambda,
    DuplicateKey,
    EmptyAlphabet,
    InsufficientSurvivors,
    NonConvergence,
    NotFound,
    PeelingFailed,
    RebuildLoop,
    TableFull,
)
from .retrieval import (
    ApproxBloomier,
    BuildConfig,
    ExactBloomier,
    RetrievalTable,
    build_approx_bloomier,
    build_exact_bloomier,
    build_retrieval,
)
from .serialize import FormatError

__version__ = "0.1.0"

__all__ = [
    "apps",
    "AndSplit",
    "ProblemParams",
    "Strategy",
    "TwoStageParams",
    "andnot_practical_bound",
    "andnot_space",
    "chain_rule_residual",
    "cuckoo_negative_ratio",
    "entropy",
    "exact_chain_space",
    "optimal_and_split",
    "optimal_two_stage_params",
    "space_lower_bound",
    "ChainedAndFilter",
    "ChainedAndNotFilter",
    "build_dynamic_and",
    "build_exact_and",
    "build_exact_andnot",
    "build_general_and",
    "build_trainable_andnot",
    "exclude_negative",
    "insert_positive",
    "make_dynamic",
    "query_and",
    "query_andnot",
    "train_andnot",
    "BloomFilter",
    "BuildConfig",
    "CuckooFilter",
    "OthelloFilter",
    "CapacityExceeded",
    "ChainedFilterError",
    "CodeTooDeep",
    "ConflictingLabel",
    "DegenerateLambda",
    "DuplicateKey",
    "EmptyAlphabet",
    "InsufficientSurvivors",
    "NonConvergence",
    "NotFound",
    "PeelingFailed",
    "RebuildLoop",
    "TableFull",
    "ApproxBloomier",
    "ExactBloomier",
    "RetrievalTable",
    "build_approx_bloomier",
    "build_exact_bloomier",
    "build_retrieval",
    "FormatError",
    "__version__",
]
