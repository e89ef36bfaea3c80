"""Filtering for Clean-Clean entity resolution: blocking workflows, set
similarity joins and nearest-neighbor search, plus a recall-constrained tuner."""

from .core import (
    CandidatePair,
    CandidateSet,
    ConfigError,
    DataError,
    EntityCollection,
    EntityProfile,
    ERFilterError,
    GroundTruth,
    PairArray,
    dedupe,
    pair_completeness,
    pairs_quality,
)
from .ingest import CleaningConfig, SchemaSetting, load_collection, load_groundtruth, load_vectors
from .methods import Dataset, FilterConfig, Method, RunReport, evaluate, run_filter
from .tuner import ConfigSpace, TargetRecall, TuneResult, full_scan, grid_search, space_for

__version__ = "0.1.0"
