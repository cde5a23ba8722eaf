"""Mortality prediction from ICU lab events: aggregation, attribute ranking,
classifiers, evaluation protocols and event-stream monitoring."""

from .classifiers import Model, ModelSpec, load_model, save_model, train
from .dataset import FeatureTable, stratified_folds
from .evaluation import cross_validate, split_eval, sweep, weighted_metrics
from .featsel import head_fraction, rank_all
from .ingest import AggregationMode, build_feature_table, parse_labevents
from .monitor import Monitor

__all__ = [
    "AggregationMode", "FeatureTable", "Model", "ModelSpec", "Monitor", "build_feature_table",
    "cross_validate", "head_fraction", "load_model", "parse_labevents", "rank_all", "save_model",
    "split_eval", "stratified_folds", "sweep", "train", "weighted_metrics",
]
