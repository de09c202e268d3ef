"""Synthetic-control weight fitting and outcome combination.

Donor weights w minimize ||u_study - G w||^2 + lam * ||w||^2 with donor
pretreatment embeddings as the columns of G. Weights are unconstrained; they
may be negative and need not sum to one, so the diagnostics record the weight
sum and minimum for anyone checking how far the fit is from a convex blend.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import EmbeddingVector


@dataclass(frozen=True)
class DonorWeights:
    weights: np.ndarray
    lam: float
    residual_norm: float
    donor_ids: tuple[str, ...]
    weight_sum: float
    weight_min: float

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.donor_ids):
            raise ValueError("one weight per donor id required")
        if len(self.weights) < 1:
            raise ValueError("at least one donor required")


def fit_weights(
    u_study: EmbeddingVector,
    donors: Sequence[EmbeddingVector],
    lam: float,
    donor_ids: Sequence[str] | None = None,
) -> DonorWeights:
    """Solve the regularized normal equations (G^T G + lam I) w = G^T u_study.

    The Gram system is tiny (few donors), so it is assembled explicitly and
    solved by a pivoted dense solve. lam must be positive when the donor
    vectors are rank-deficient.
    """
    if len(donors) < 1:
        raise ValueError("at least one donor is required")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    dims = {d.dim for d in donors} | {u_study.dim}
    if len(dims) != 1:
        raise ValueError(f"mixed embedding dims: {sorted(dims)}")
    if donor_ids is None:
        donor_ids = tuple(str(j) for j in range(len(donors)))
    elif len(donor_ids) != len(donors):
        raise ValueError("donor_ids length must match donors")

    g = np.column_stack([d.values for d in donors])
    gram = g.T @ g + lam * np.eye(len(donors))
    rhs = g.T @ u_study.values

    if lam == 0.0 and np.linalg.matrix_rank(gram) < len(donors):
        raise ValueError("donor Gram matrix is singular at lam=0; use lam > 0")
    try:
        w = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("donor Gram matrix is singular at lam=0; use lam > 0") from exc

    residual = u_study.values - g @ w
    return DonorWeights(
        weights=w,
        lam=lam,
        residual_norm=float(np.linalg.norm(residual)),
        donor_ids=tuple(donor_ids),
        weight_sum=float(np.sum(w)),
        weight_min=float(np.min(w)),
    )


def combine_outcomes(weights: DonorWeights, outcomes: Sequence[EmbeddingVector]) -> EmbeddingVector:
    """Weighted elementwise sum of donor outcome embeddings, in donor order."""
    if len(outcomes) != len(weights.weights):
        raise ValueError(
            f"{len(outcomes)} outcomes for {len(weights.weights)} weights"
        )
    dims = {o.dim for o in outcomes}
    if len(dims) != 1:
        raise ValueError(f"mixed embedding dims: {sorted(dims)}")
    combined = np.zeros(outcomes[0].dim)
    for w_j, o_j in zip(weights.weights, outcomes):
        combined += w_j * o_j.values
    return EmbeddingVector(combined, outcomes[0].model_id)
