from composekit.retrieval.features import HistogramFeatureExtractor, ResNet50FeatureExtractor
from composekit.retrieval.pool import (
    CandidatePool,
    PoolBuildError,
    QueryResult,
    UICandidates,
    build_pool,
    extract_global,
    extract_local,
    load_pool,
    top_candidates_for_ui,
)
from composekit.retrieval.records import SegmentRecord

__all__ = [
    "HistogramFeatureExtractor",
    "ResNet50FeatureExtractor",
    "CandidatePool",
    "PoolBuildError",
    "QueryResult",
    "UICandidates",
    "build_pool",
    "extract_global",
    "extract_local",
    "load_pool",
    "top_candidates_for_ui",
    "SegmentRecord",
]
