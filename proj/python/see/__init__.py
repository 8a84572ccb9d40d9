"""Sparse event-based eye tracking: sparse CNN backbone, GRU head, latency model and search."""

from ._core import (
    ArgumentError,
    ConfigError,
    ContractError,
    GeometryError,
    IoError,
    LoadError,
    Model,
    NumericError,
    OrderingError,
    ParseError,
    RangeError,
    SeeError,
    dyadic_approx,
    encode_events,
    load_events,
    load_model,
    mean_distance,
    model_from_bytes,
    pareto_front,
    pk_accuracy,
    random_model,
    requantize,
    search,
    simulate,
    voxelize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
