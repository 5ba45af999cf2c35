"""Approximate distance oracles over doubling metrics built on a hierarchy of nets."""

from .composite import MODES, Answer, CompositeOracle, OracleConfig
from .counters import OpCounter
from .errors import (DatasetFormatError, DuplicatePointError, EndpointError, EpochError,
                     InvariantError, LevelError, OracleError, ParameterError, UnknownPointError)
from .hierarchy import HierarchyConfig, NetHierarchy, safe_c
from .metric import MetricSpace, dump_dataset, load_dataset

__version__ = "0.1.0"

__all__ = [
    "MODES", "Answer", "CompositeOracle", "OracleConfig", "OpCounter", "HierarchyConfig",
    "NetHierarchy", "safe_c", "MetricSpace", "dump_dataset", "load_dataset",
    "DatasetFormatError", "DuplicatePointError", "EndpointError", "EpochError", "InvariantError",
    "LevelError", "OracleError", "ParameterError", "UnknownPointError",
]
