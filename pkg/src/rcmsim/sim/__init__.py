"""Synthetic-operator reproduction of the manual vs robotic targeting experiment."""
from .board import Target, TargetBoard, generate_board, insertion_angle
from .operator import OperatorModel, default_operator_models
from .trial import ConditionConfig, ContactModel, TrialRecord, run_trial
from .experiment import Dataset, ExperimentConfig, ergonomic_cost, run_experiment

__all__ = [
    "Target", "TargetBoard", "generate_board", "insertion_angle",
    "OperatorModel", "default_operator_models",
    "ConditionConfig", "ContactModel", "TrialRecord", "run_trial",
    "Dataset", "ExperimentConfig", "ergonomic_cost", "run_experiment",
]
