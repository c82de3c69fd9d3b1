"""Inference and evaluation of assertion-based test oracles."""

__version__ = "0.1.0"

from .datasets import (
    LabeledSet,
    RerunMatrix,
    Verdict,
    adaptive_random_generate,
    flakiness_rate,
    majority_filter,
)
from .errors import OracleKitError
from .gp import GpConfig, ScoredCondition, count_spectrum, evolve
from .grammar import (
    InputSchema,
    SignalSpec,
    VariableSpec,
    condition_depth,
    condition_length,
    evaluate,
    parse_condition,
    print_condition,
    validate_condition,
)
from .infer import InferSettings, infer_oracle
from .logic import QuantifiedFormula, format_formula, from_logic, to_logic
from .metrics import EvalReport, aad, evaluate_oracle, unique_correct, vargha_delaney_a12
from .mlrules import FeatureSpec, RuleModel, fit_decision_rules, fit_decision_tree
from .oracle import Assertion, Oracle, build_oracle, confidence, predict, prune
from .satcheck import SatBudget, SatResult, check_conjunction
from .signals import Signal, encode_signals
from .sutsim import SyntheticSut, execute, rerun_matrix, scenario_catalog

__all__ = [
    "Assertion",
    "EvalReport",
    "FeatureSpec",
    "GpConfig",
    "InferSettings",
    "InputSchema",
    "LabeledSet",
    "Oracle",
    "OracleKitError",
    "QuantifiedFormula",
    "RerunMatrix",
    "RuleModel",
    "SatBudget",
    "SatResult",
    "ScoredCondition",
    "Signal",
    "SignalSpec",
    "SyntheticSut",
    "VariableSpec",
    "Verdict",
    "aad",
    "adaptive_random_generate",
    "build_oracle",
    "check_conjunction",
    "condition_depth",
    "condition_length",
    "confidence",
    "count_spectrum",
    "encode_signals",
    "evaluate",
    "evaluate_oracle",
    "evolve",
    "execute",
    "fit_decision_rules",
    "fit_decision_tree",
    "flakiness_rate",
    "format_formula",
    "from_logic",
    "infer_oracle",
    "majority_filter",
    "parse_condition",
    "predict",
    "print_condition",
    "prune",
    "rerun_matrix",
    "scenario_catalog",
    "to_logic",
    "unique_correct",
    "validate_condition",
    "vargha_delaney_a12",
]
