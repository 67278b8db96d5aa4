"""Norm enforcement and coalition checking for resource-bounded concurrent game models.

Modules:

* :mod:`isskit.model` - models, validation, transitions and costs
* :mod:`isskit.behavior` - traces, lassos, budgets, lasso enumeration
* :mod:`isskit.norms` - safety monitors and lasso classification
* :mod:`isskit.coordination` - regimentation, sanctions and reparation
* :mod:`isskit.verify` - bounded coalition queries and the complexity probe
* :mod:`isskit.dsl` - the ``.iss`` language
* :mod:`isskit.cli` - the ``iss`` command
"""
from .behavior import Lasso, Step, Trace, enumerate_lassos, format_lasso, parse_lasso
from .coordination import ReparationPolicy, SanctionPolicy, regiment, repair, repair_extend, sanction
from .dsl import load, lower, parse, serialize
from .errors import IssError
from .model import Model, RawModel, validate_model
from .norms import NormMonitor, Status, classify_lasso, exists_violation
from .verify import CoalitionQuery, Op, check, complexity_probe, parse_query

__all__ = [
    "CoalitionQuery", "IssError", "Lasso", "Model", "NormMonitor", "Op", "RawModel",
    "ReparationPolicy", "SanctionPolicy", "Status", "Step", "Trace", "check",
    "classify_lasso", "complexity_probe", "enumerate_lassos", "exists_violation",
    "format_lasso", "lower", "load", "parse", "parse_lasso", "parse_query", "regiment",
    "repair", "repair_extend", "sanction", "serialize", "validate_model",
]
__version__ = "0.1.0"
