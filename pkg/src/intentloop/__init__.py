"""Closed-loop EMG intent inferral with reciprocal-learning sessions."""

from .config import AppConfig
from .core import (
    ArmCondition,
    CueSchedule,
    EmgSample,
    FREE_CONDITION,
    Intent,
    ITERATION1_CONDITIONS,
    Recording,
    Role,
    SubjectMeta,
    default_cue_schedule,
    label_samples,
)
from .engine import Engine, FeedbackFrame, HandState, Orthosis
from .lda import LabeledDataset, LdaModel, fit, predict_proba, weight_matrix, weight_variance
from .session import IterationReport, Session, Stage, plan_collection
from .sigproc import MedianSmoother, ProbVector, decide, preprocess
from .simsubject import (
    SimulatedSubject,
    SubjectProfile,
    default_adaptive_profile,
    default_static_profile,
)

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "ArmCondition",
    "CueSchedule",
    "EmgSample",
    "Engine",
    "FeedbackFrame",
    "FREE_CONDITION",
    "HandState",
    "Intent",
    "ITERATION1_CONDITIONS",
    "IterationReport",
    "LabeledDataset",
    "LdaModel",
    "MedianSmoother",
    "Orthosis",
    "ProbVector",
    "Recording",
    "Role",
    "Session",
    "SimulatedSubject",
    "Stage",
    "SubjectMeta",
    "SubjectProfile",
    "decide",
    "default_adaptive_profile",
    "default_cue_schedule",
    "default_static_profile",
    "fit",
    "label_samples",
    "plan_collection",
    "predict_proba",
    "preprocess",
    "weight_matrix",
    "weight_variance",
    "__version__",
]
