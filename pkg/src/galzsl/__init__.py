"""Grouped adversarial learning for zero-shot classification under correlation shift.

Top-level names re-export the most used pieces; the submodules hold the rest.
"""

from ._kernels import backend
from .data import Dataset, SplitDef, cs_split_greedy, load_dataset, split_audit, write_dataset
from .errors import DimensionError, FormatError, GalError, InputError, NumericalError, StateError
from .grouping import Grouping, group_by_shift, load_grouping, spectral_cocluster
from .harness import TrainReport, per_class_top1, prepare_grouping, sweep, train
from .model import GalConfig, GalNetwork, build, load_checkpoint, predict_class, save_checkpoint
from .shift import corr_seen, corr_unseen, delta_corr_matrix, group_delta

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DimensionError",
    "FormatError",
    "GalConfig",
    "GalError",
    "GalNetwork",
    "Grouping",
    "InputError",
    "NumericalError",
    "SplitDef",
    "StateError",
    "TrainReport",
    "backend",
    "build",
    "corr_seen",
    "corr_unseen",
    "cs_split_greedy",
    "delta_corr_matrix",
    "group_by_shift",
    "group_delta",
    "load_checkpoint",
    "load_dataset",
    "load_grouping",
    "per_class_top1",
    "predict_class",
    "prepare_grouping",
    "save_checkpoint",
    "spectral_cocluster",
    "split_audit",
    "sweep",
    "train",
    "write_dataset",
]
