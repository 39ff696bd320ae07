"""Gaussian likelihood of observed edge costs and Bayesian belief updates.

All likelihood arithmetic is done in log space. After a few dozen stages the
raw densities underflow, so posteriors are normalized with the usual
subtract-the-max trick and histories are replayed by summing log densities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .costs import Belief, CostModel
from .errors import BeliefError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Observation:
    """Realized costs on the edges that carried traffic in one stage.

    `loads` is the full equilibrium edge-load vector; `costs` holds one entry
    per used edge, aligned with `used`.
    """

    used: tuple[str, ...]
    loads: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        used = tuple(str(e) for e in self.used)
        if not used:
            raise BeliefError("observation needs at least one used edge")
        if len(set(used)) != len(used):
            raise BeliefError("duplicate edges in observation")
        loads = np.array(self.loads, dtype=float)
        costs = np.array(self.costs, dtype=float)
        if loads.ndim != 1:
            raise BeliefError("loads must be a vector")
        if costs.shape != (len(used),):
            raise BeliefError(
                f"costs have shape {costs.shape}, expected ({len(used)},)"
            )
        if not np.isfinite(costs).all():
            raise BeliefError("observed costs must be finite")
        loads.setflags(write=False)
        costs.setflags(write=False)
        object.__setattr__(self, "used", used)
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "costs", costs)


def log_likelihoods(model: CostModel, obs: Observation) -> np.ndarray:
    """Log density of the observation under every state, shape (n_states,).

    The mean under state s is the state-s cost of each used edge at its
    observed load; the covariance is the noise submatrix on the used edges,
    factored once per distinct used set and cached on the model.
    """
    idx = tuple(model.edge_index(e) for e in obs.used)
    chol, logdet = model.sigma_cholesky(idx)
    means = model.cost_matrix(obs.loads, idx)  # (S, m)
    resid = obs.costs[None, :] - means
    z = solve_triangular(chol, resid.T, lower=True, check_finite=False)
    quad = np.einsum("ms,ms->s", z, z)
    out = -0.5 * quad - 0.5 * len(idx) * _LOG_2PI - 0.5 * logdet
    if not np.isfinite(out).all():
        raise BeliefError("non-finite log likelihood; check the cost table")
    return out


def log_gaussian_density(model: CostModel, state: str, obs: Observation) -> float:
    """Log density of the observation under one state."""
    return float(log_likelihoods(model, obs)[model.state_index(state)])


def bayes_update(theta: Belief, model: CostModel, obs: Observation) -> Belief:
    """Posterior belief after one observation.

    States with zero prior mass stay at exactly zero; no probability floor is
    applied, so masses may reach numeric zero.
    """
    if len(theta) != model.n_states:
        raise BeliefError(
            f"belief has {len(theta)} entries, model has {model.n_states} states"
        )
    prior = theta.probs
    support = prior > 0.0
    log_post = np.log(prior[support]) + log_likelihoods(model, obs)[support]
    weights = np.exp(log_post - log_post.max())
    total = float(weights.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise BeliefError("posterior mass vanished")
    out = np.zeros_like(prior)
    out[support] = weights / total
    return Belief(out)


def replay_posterior(
    theta0: Belief, model: CostModel, history: Sequence[Observation]
) -> Belief:
    """Posterior from the initial belief and a whole observation history.

    Costs in different stages are independent given their edge loads, so the
    joint log density is the per-stage sum and the result coincides with
    folding bayes_update over the history.
    """
    if len(theta0) != model.n_states:
        raise BeliefError(
            f"belief has {len(theta0)} entries, model has {model.n_states} states"
        )
    prior = theta0.probs
    if not history:
        return Belief(prior.copy())
    support = prior > 0.0
    acc = np.log(prior[support])
    for obs in history:
        acc = acc + log_likelihoods(model, obs)[support]
    weights = np.exp(acc - acc.max())
    total = float(weights.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise BeliefError("posterior mass vanished")
    out = np.zeros_like(prior)
    out[support] = weights / total
    return Belief(out)
