from .losses import (
    LossTerms,
    domain_cross_entropy,
    grouped_total,
    prior_loss,
    rec_loss,
    total_loss,
)
from .optimizer import Adam, OptimizerState

# The trainer depends on core.model, which itself imports training.losses;
# import it as `training.trainer` rather than from the package root.

__all__ = [
    "LossTerms",
    "domain_cross_entropy",
    "grouped_total",
    "prior_loss",
    "rec_loss",
    "total_loss",
    "Adam",
    "OptimizerState",
]
