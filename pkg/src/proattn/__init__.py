"""Robust attention by Newton-IRLS reweighting of token estimates."""

from .attention import (
    AttentionConfig,
    MacCounter,
    attention_matrix,
    multi_head_pro_attention,
    pairwise_distances,
    pro_attention,
    softmax_rows,
    vanilla_attention,
)
from .estimator import (
    IrlsTrace,
    WeightedPoints,
    geometric_median_oracle,
    gd_step,
    newton_irls,
    newton_irls_step,
    robust_loss,
    upper_bound_loss,
    wls_estimate,
)
from .penalty import Penalty, irls_weight, rho, rho_prime

__version__ = "0.1.0"
