"""Interpretable 28-day post-ICU mortality risk models."""

from ._mortrisk import (
    FAMILIES,
    Cohort,
    Model,
    auc,
    compute_egfr,
    evaluate,
    smote_nc,
)

__all__ = ["FAMILIES", "Cohort", "Model", "auc", "compute_egfr", "evaluate", "smote_nc"]
