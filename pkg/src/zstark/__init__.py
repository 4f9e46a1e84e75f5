"""Grid-discretized zone membership with STARK-backed table lookups.

Pipeline: polygons -> per-zone lookup tables on an r x r grid
(`discretize`), tables committed in Merkle trees (`commit`), membership
claims proven consistent with the committed table by a fixed-layout
STARK (`air`, `stark`), experiments orchestrated by `harness`/`cli`.
"""

from .air import AirConfig, PublicStatement, TraceTable, build_trace, constraint_set
from .commit import MerklePath, MerkleTree, Transcript, merkle_build, merkle_open, merkle_verify
from .corpus import load_zones, save_zones, synth_corpus
from .discretize import (
    CENTER,
    SDF,
    GridSpec,
    StrategyKind,
    TableBundle,
    accuracy_eval,
    build_bundle,
    classify,
    load_table,
    locate,
    save_table,
    voting,
)
from .field import P, EvaluationDomain, FixedPoint
from .geometry import BoundingBox, ZonePolygon, ZoneSet, build_zone, signed_distance
from .harness import (
    QuerySample,
    ReportRow,
    emit_report,
    ingest,
    run_accuracy_sweep,
    run_proof_bench,
    sample_queries,
)
from .stark import (
    ACCEPT,
    REJECT_REASONS,
    StarkProof,
    VerificationResult,
    prove,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "ACCEPT",
    "AirConfig",
    "BoundingBox",
    "CENTER",
    "EvaluationDomain",
    "FixedPoint",
    "GridSpec",
    "MerklePath",
    "MerkleTree",
    "P",
    "PublicStatement",
    "QuerySample",
    "REJECT_REASONS",
    "ReportRow",
    "SDF",
    "StarkProof",
    "StrategyKind",
    "TableBundle",
    "TraceTable",
    "Transcript",
    "VerificationResult",
    "ZonePolygon",
    "ZoneSet",
    "accuracy_eval",
    "build_bundle",
    "build_trace",
    "build_zone",
    "classify",
    "constraint_set",
    "emit_report",
    "ingest",
    "load_table",
    "load_zones",
    "locate",
    "merkle_build",
    "merkle_open",
    "merkle_verify",
    "prove",
    "run_accuracy_sweep",
    "run_proof_bench",
    "sample_queries",
    "save_table",
    "save_zones",
    "signed_distance",
    "synth_corpus",
    "verify",
    "voting",
]
