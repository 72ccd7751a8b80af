"""Cascade selection probabilities and user response sampling.

For a slate with per-slot relevances sigma_k, the chance the user picks
slot k after skipping everything before it is

    beta_k = sigma_k * prod_{m<k} (1 - sigma_m)

and the chance they pick nothing is the full survival product
prod_k (1 - sigma_k). The betas plus the abandon mass always sum to 1.
Probabilities are computed with a running survival product (never through
exp/log round-trips) so exact 0 and 1 relevances stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SelectionProfile",
    "UserResponse",
    "selection_probabilities",
    "sample_user_choice",
    "bernoulli_click",
]

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SelectionProfile:
    """Per-slot selection probabilities for one slate."""

    betas: np.ndarray
    abandon: float

    def __post_init__(self) -> None:
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1:
            raise ValueError("betas must be a 1-d vector")
        if np.any((betas < 0) | (betas > 1)):
            raise ValueError("every beta must be in [0, 1]")
        if not 0.0 <= self.abandon <= 1.0:
            raise ValueError(f"abandon probability {self.abandon} outside [0, 1]")
        total = math.fsum(betas.tolist()) + self.abandon
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"betas + abandon must sum to 1, got {total}")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)

    @property
    def slate_prob(self) -> float:
        """Probability the user selects anything at all."""
        return math.fsum(self.betas.tolist())

    def __len__(self) -> int:
        return int(self.betas.shape[0])


@dataclass(frozen=True)
class UserResponse:
    """Outcome of showing one slate: a click on some slot, or nothing."""

    slot: int | None  # None means no choice
    slate_size: int

    def __post_init__(self) -> None:
        if self.slate_size < 0:
            raise ValueError("slate_size must be >= 0")
        if self.slot is not None and not 0 <= self.slot < self.slate_size:
            raise ValueError(f"slot {self.slot} outside slate of size {self.slate_size}")

    @property
    def clicked(self) -> bool:
        return self.slot is not None

    @property
    def click_vector(self) -> np.ndarray:
        vec = np.zeros(self.slate_size, dtype=np.int64)
        if self.slot is not None:
            vec[self.slot] = 1
        return vec


def selection_probabilities(sigmas: np.ndarray) -> SelectionProfile:
    """Cascade betas and abandon mass for a vector of per-slot relevances."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if sigmas.ndim != 1:
        raise ValueError("sigmas must be a 1-d vector")
    if np.any((sigmas < 0) | (sigmas > 1)) or not np.all(np.isfinite(sigmas)):
        raise ValueError("every sigma must be in [0, 1]")
    if sigmas.size == 0:
        return SelectionProfile(betas=np.empty(0), abandon=1.0)
    survival = np.cumprod(1.0 - sigmas)
    reach = np.concatenate(([1.0], survival[:-1]))  # prob. the user reaches slot k
    betas = sigmas * reach
    return SelectionProfile(betas=betas, abandon=float(survival[-1]))


def sample_user_choice(
    profile: SelectionProfile | np.ndarray,
    rng: np.random.Generator,
    no_choice_weight: float | None = None,
) -> UserResponse:
    """Sample one observation: a clicked slot or the no-choice outcome.

    ``profile`` is either a SelectionProfile (outcome weights are the cascade
    betas, and the no-choice weight defaults to the abandon mass) or a vector
    of log-relevances (weights are their softmax; ``no_choice_weight`` is
    then interpreted in log space and must be given).
    """
    if isinstance(profile, SelectionProfile):
        weights = np.asarray(profile.betas, dtype=np.float64)
        nc = profile.abandon if no_choice_weight is None else float(no_choice_weight)
        if nc < 0 or np.any(weights < 0):
            raise ValueError("outcome weights must be nonnegative")
        full = np.concatenate((weights, [nc]))
    else:
        logits = np.asarray(profile, dtype=np.float64)
        if logits.ndim != 1:
            raise ValueError("log-relevances must be a 1-d vector")
        if no_choice_weight is None:
            raise ValueError("no_choice_weight (a log weight) is required with explicit log-relevances")
        stacked = np.concatenate((logits, [float(no_choice_weight)]))
        stacked = stacked - stacked.max()
        full = np.exp(stacked)
    total = full.sum()
    if not (total > 0 and np.isfinite(total)):
        raise ValueError("outcome weights are all zero; choice distribution is degenerate")
    k = int(rng.choice(full.shape[0], p=full / total))
    slate_size = full.shape[0] - 1
    return UserResponse(slot=None if k == slate_size else k, slate_size=slate_size)


def bernoulli_click(beta: float, rng: np.random.Generator) -> int:
    """One click draw: 1 with probability beta."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"click probability {beta} outside [0, 1]")
    return int(rng.random() < beta)
