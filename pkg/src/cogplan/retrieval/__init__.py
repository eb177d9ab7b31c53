"""Retrieval actions: search backends, content cleaning, truncation and caching."""

from cogplan.retrieval.backends import (
    LocalCorpus,
    RawHit,
    RemoteSearchBackend,
    SearchBackend,
    SimulatorBackend,
    simulator_rank,
)
from cogplan.retrieval.cache import CachedBackend, cache_key, cached
from cogplan.retrieval.preprocess import preprocess_content
from cogplan.retrieval.retrieve import (
    BELOW_MINIMUM,
    RetrievalResult,
    image_retrieve,
    text_retrieve,
    truncate_tokens,
)

__all__ = [
    "BELOW_MINIMUM",
    "CachedBackend",
    "LocalCorpus",
    "RawHit",
    "RemoteSearchBackend",
    "RetrievalResult",
    "SearchBackend",
    "SimulatorBackend",
    "cache_key",
    "cached",
    "image_retrieve",
    "preprocess_content",
    "simulator_rank",
    "text_retrieve",
    "truncate_tokens",
]
