"""Datasets, baseline pipelines, configuration and the command line."""

from cogplan.harness.dataset import (
    HOP_BUCKETS,
    AnswerType,
    BenchSample,
    DatasetStats,
    dataset_stats,
    hop_bucket,
    load_dataset,
)
from cogplan.harness.pipelines import PipelineMode, run_pipeline, run_sample

__all__ = [
    "HOP_BUCKETS",
    "AnswerType",
    "BenchSample",
    "DatasetStats",
    "PipelineMode",
    "dataset_stats",
    "hop_bucket",
    "load_dataset",
    "run_pipeline",
    "run_sample",
]
