"""Quaternion tensor left ring decomposition and low-rank colour image completion."""

from .quatcore import Quaternion
from .quattensor import QuaternionMatrix, QuaternionTensor, load_qtns, save_qtns
from .quatmat import QSVDConsistencyError, qsvd, rank, truncated_qsvd
from .qtlr import QTLRCores, qtlr_qsvd, reconstruct, relative_error
from .completion import CompletionProblem, solve
from .augmentation import AugmentPlan, PlanningError, plan

__all__ = [
    "AugmentPlan",
    "CompletionProblem",
    "PlanningError",
    "QSVDConsistencyError",
    "QTLRCores",
    "Quaternion",
    "QuaternionMatrix",
    "QuaternionTensor",
    "load_qtns",
    "plan",
    "qsvd",
    "qtlr_qsvd",
    "rank",
    "reconstruct",
    "relative_error",
    "save_qtns",
    "solve",
    "truncated_qsvd",
]
