"""Release-side safety audits for conformal triage under prevalence shift.

Submodules are imported on first attribute access so that light entry
points (the ``sizing`` command) do not pay for numpy/scikit-learn imports.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "conformal": ["Branch", "CalibrationMode", "ConformalTriage", "FailSafe", "TriageRule",
                  "calibrate", "conformal_index", "nonconformity", "prediction_set"],
    "correction": ["DegeneratePilotError", "LogitShift", "LogitShiftCorrector",
                   "apply_correction", "fit_logit_shift"],
    "domain": ["Cohort", "PredictionSet", "ScoredSubject", "SplitAllocation", "TriageAction",
               "action_of"],
    "engine": ["AuditConfig", "AuditError", "AuditReport", "Method", "generate_split",
               "run_audit", "run_branch"],
    "metrics": ["AggregateMetrics", "SplitMetrics", "aggregate", "evaluate_split"],
    "sizing": ["Binomial", "Hypergeometric", "SizingResult", "coverage_floor", "expected_events",
               "fsrl_threshold", "min_ncal", "p_fsrl_binomial", "p_fsrl_hypergeometric"],
    "synth": ["SynthSpec", "generate", "generate_arrays", "scenario"],
}
_LOOKUP = {name: mod for mod, names in _EXPORTS.items() for name in names}

__all__ = sorted(_LOOKUP)


def __getattr__(name):
    if name in _LOOKUP:
        return getattr(importlib.import_module(f".{_LOOKUP[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + __all__)
