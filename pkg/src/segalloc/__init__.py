"""Segmentation quality prediction and human-annotation budget allocation.

Predicts the quality of algorithm-drawn foreground masks with a regression
forest over shape features, deploys the best automatic candidate per image,
and spends a fixed human budget on the images predicted to need it most,
with a Chan-Vese refiner, a simulated annotator, a budget-sweep harness,
and a live HTTP annotation service.
"""
__version__ = "0.1.0"

from .allocate import (AllocationPlan, BudgetSpec, PlanEntry, plan_coarse,
                       plan_fine, plan_cost, select_best_candidate)
from .candidates import CandidateSet, generate_candidates
from .chanvese import ChanVeseParams, refine
from .corpus import DatasetManifest, ingest, synth_corpus
from .features import FEATURE_NAMES, SCHEMA_VERSION, extract_features
from .forest import (LinearQualityModel, QualityRegressionForest, load_model,
                     save_model)
from .masks import jaccard
from .training import EvalReport, TrainingExample, build_training_set, evaluate

__all__ = [
    "__version__",
    "AllocationPlan", "BudgetSpec", "PlanEntry", "plan_coarse", "plan_fine",
    "plan_cost", "select_best_candidate",
    "CandidateSet", "generate_candidates",
    "ChanVeseParams", "refine",
    "DatasetManifest", "ingest", "synth_corpus",
    "FEATURE_NAMES", "SCHEMA_VERSION", "extract_features",
    "LinearQualityModel", "QualityRegressionForest", "load_model", "save_model",
    "jaccard",
    "EvalReport", "TrainingExample", "build_training_set", "evaluate",
]
