"""The repeated-play stage loop: equilibrate, observe noisy costs, update.

Each stage plays the Wardrop equilibrium of the current public belief,
realizes Gaussian-noised costs on the used edges, and applies the Bayes
update. Noise is drawn for every edge each stage even though only used-edge
components enter the observation; that keeps the random stream's consumption
independent of which edges were used, so trajectories replay exactly.
"""

from __future__ import annotations

import csv
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .belief import Observation, bayes_update
from .costs import Belief, CostModel, polyval_ascending
from .equilibrium import EquilibriumResult, solve_wardrop
from .graph import used_edges
from .scenario import Scenario

CONVERGED = "converged"
MAX_STAGES = "max_stages"


class NoiseSampler:
    """Seeded multivariate Gaussian noise stream with covariance sigma."""

    def __init__(self, sigma, seed: int | np.random.Generator):
        sigma = np.asarray(sigma, dtype=float)
        self._chol = np.linalg.cholesky(sigma)
        self._rng = (
            seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        )

    def sample(self, count: int | None = None) -> np.ndarray:
        n = self._chol.shape[0]
        if count is None:
            return self._chol @ self._rng.standard_normal(n)
        return self._rng.standard_normal((count, n)) @ self._chol.T


def realize_costs(
    model: CostModel,
    true_state: str,
    loads,
    used: Iterable[str],
    noise,
) -> Observation:
    """Observation of true-state costs plus noise, restricted to used edges.

    Unused edges' realized costs are discarded; their noise components are
    consumed by the caller but never observed.
    """
    w = np.asarray(loads, dtype=float)
    eps = np.asarray(noise, dtype=float)
    order = sorted(used, key=model.edge_index)
    idx = [model.edge_index(e) for e in order]
    coeffs = model.state_coefficients(true_state)[idx]
    costs = polyval_ascending(coeffs, w[idx]) + eps[idx]
    return Observation(used=tuple(order), loads=w, costs=costs)


@dataclass(frozen=True)
class StageRecord:
    """Everything produced by one stage of play."""

    stage: int
    belief_prior: Belief
    equilibrium: EquilibriumResult
    observation: Observation
    belief_post: Belief


@dataclass(frozen=True)
class Trajectory:
    scenario: Scenario
    seed: int
    records: tuple[StageRecord, ...]
    status: str

    @property
    def n_stages(self) -> int:
        return len(self.records)

    @property
    def final_belief(self) -> Belief:
        return self.records[-1].belief_post

    @property
    def final_loads(self) -> np.ndarray:
        return self.records[-1].equilibrium.edge_loads

    @property
    def final_used(self) -> tuple[str, ...]:
        return self.records[-1].observation.used

    def observations(self) -> tuple[Observation, ...]:
        return tuple(r.observation for r in self.records)


def step(scenario: Scenario, belief: Belief, sampler: NoiseSampler, stage: int) -> StageRecord:
    """Play one stage: equilibrium at the belief, noisy costs, Bayes update."""
    eq = solve_wardrop(
        scenario.network,
        scenario.model,
        belief,
        scenario.demand,
        tol=scenario.tolerances.equilibrium,
    )
    noise = sampler.sample()
    used = used_edges(scenario.network, eq.edge_loads, scenario.used_edge_tol)
    obs = realize_costs(scenario.model, scenario.true_state, eq.edge_loads, used, noise)
    post = bayes_update(belief, scenario.model, obs)
    return StageRecord(stage, belief, eq, obs, post)


def run(
    scenario: Scenario,
    seed: int,
    *,
    max_stages: int | None = None,
    window: int | None = None,
    delta: float | None = None,
) -> Trajectory:
    """Run the learning dynamics until the stopping window triggers.

    The process itself never stops, so a trajectory is declared converged
    once both the belief and the load have moved less than delta (delta *
    demand for loads) between consecutive stages for `window` stages in a
    row. Stage-to-stage differences start at stage 2, so the earliest
    possible convergence is stage window + 1.
    """
    conv = scenario.convergence
    w_len = conv.window if window is None else int(window)
    d_tol = conv.delta if delta is None else float(delta)
    cap = conv.max_stages if max_stages is None else int(max_stages)
    if w_len < 1:
        raise ValueError("window must be at least 1")
    if d_tol <= 0:
        raise ValueError("delta must be positive")
    if cap < w_len:
        raise ValueError("max_stages must be at least the window length")

    sampler = NoiseSampler(scenario.model.sigma, seed)
    theta = scenario.initial_belief
    records: list[StageRecord] = []
    diffs: deque[tuple[float, float]] = deque(maxlen=w_len)
    load_bound = d_tol * scenario.demand
    status = MAX_STAGES
    prev_post: np.ndarray | None = None
    prev_loads: np.ndarray | None = None

    for k in range(1, cap + 1):
        rec = step(scenario, theta, sampler, k)
        if prev_post is not None:
            diffs.append(
                (
                    float(np.max(np.abs(rec.belief_post.probs - prev_post))),
                    float(np.max(np.abs(rec.equilibrium.edge_loads - prev_loads))),
                )
            )
        prev_post = rec.belief_post.probs
        prev_loads = rec.equilibrium.edge_loads
        records.append(rec)
        theta = rec.belief_post
        if len(diffs) == w_len and all(
            td < d_tol and ld < load_bound for td, ld in diffs
        ):
            status = CONVERGED
            break

    return Trajectory(scenario, int(seed), tuple(records), status)


@dataclass(frozen=True)
class TrajectorySummary:
    seed: int
    status: str
    n_stages: int
    terminal_used: tuple[str, ...]
    terminal_loads: np.ndarray
    terminal_belief: np.ndarray


def summarize(trajectory: Trajectory) -> TrajectorySummary:
    return TrajectorySummary(
        seed=trajectory.seed,
        status=trajectory.status,
        n_stages=trajectory.n_stages,
        terminal_used=trajectory.final_used,
        terminal_loads=np.array(trajectory.final_loads),
        terminal_belief=np.array(trajectory.final_belief.probs),
    )


@dataclass(frozen=True)
class TerminalCluster:
    """Trajectories grouped by which edges their terminal equilibrium uses."""

    used: tuple[str, ...]
    count: int
    share: float
    mean_stages: float
    mean_loads: np.ndarray
    mean_belief: np.ndarray
    seeds: tuple[int, ...]


@dataclass(frozen=True)
class BatchSummary:
    scenario_name: str
    seeds: tuple[int, ...]
    summaries: tuple[TrajectorySummary, ...]
    clusters: tuple[TerminalCluster, ...]
    n_converged: int

    @property
    def convergence_rate(self) -> float:
        return self.n_converged / len(self.seeds) if self.seeds else float("nan")

    @property
    def mean_stages_to_convergence(self) -> float:
        stages = [s.n_stages for s in self.summaries if s.status == CONVERGED]
        return float(np.mean(stages)) if stages else float("nan")


def _run_case(args) -> TrajectorySummary:
    scenario, seed, max_stages, window, delta, traj_dir = args
    traj = run(scenario, seed, max_stages=max_stages, window=window, delta=delta)
    if traj_dir is not None:
        write_trajectory_csv(
            traj, Path(traj_dir) / f"{scenario.name}_seed{seed}_trajectory.csv"
        )
    return summarize(traj)


def monte_carlo(
    scenario: Scenario,
    seeds: Sequence[int],
    *,
    workers: int = 1,
    max_stages: int | None = None,
    window: int | None = None,
    delta: float | None = None,
    trajectory_dir: str | Path | None = None,
) -> BatchSummary:
    """Independent trajectories for each seed, merged after completion.

    Results are keyed by seed and identical regardless of worker count; each
    trajectory draws from its own generator seeded by its own seed.
    """
    seed_list = [int(s) for s in seeds]
    if len(set(seed_list)) != len(seed_list):
        raise ValueError("seeds must be distinct")
    if not seed_list:
        raise ValueError("need at least one seed")
    args = [
        (scenario, s, max_stages, window, delta, trajectory_dir) for s in seed_list
    ]
    if workers <= 1:
        summaries = [_run_case(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_case, args))

    groups: dict[tuple[str, ...], list[TrajectorySummary]] = {}
    for s in summaries:
        groups.setdefault(s.terminal_used, []).append(s)
    clusters = []
    for used, members in groups.items():
        clusters.append(
            TerminalCluster(
                used=used,
                count=len(members),
                share=len(members) / len(summaries),
                mean_stages=float(np.mean([m.n_stages for m in members])),
                mean_loads=np.mean([m.terminal_loads for m in members], axis=0),
                mean_belief=np.mean([m.terminal_belief for m in members], axis=0),
                seeds=tuple(m.seed for m in members),
            )
        )
    clusters.sort(key=lambda c: (-c.count, c.used))
    return BatchSummary(
        scenario_name=scenario.name,
        seeds=tuple(seed_list),
        summaries=tuple(summaries),
        clusters=tuple(clusters),
        n_converged=sum(1 for s in summaries if s.status == CONVERGED),
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(trajectory: Trajectory, path: str | Path) -> Path:
    """One row per stage: posterior belief, loads, used flags, realized costs.

    Floats carry 17 significant digits so the file fully determines replays;
    cost cells are empty for edges that were not used in that stage.
    """
    scenario = trajectory.scenario
    edge_ids = scenario.network.edge_ids
    state_labels = scenario.states.labels
    header = (
        ["stage"]
        + [f"theta_{s}" for s in state_labels]
        + [f"w_{e}" for e in edge_ids]
        + [f"used_{e}" for e in edge_ids]
        + [f"c_{e}" for e in edge_ids]
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in trajectory.records:
            used_set = set(rec.observation.used)
            cost_of = dict(zip(rec.observation.used, rec.observation.costs))
            row = [str(rec.stage)]
            row += [_fmt(p) for p in rec.belief_post.probs]
            row += [_fmt(w) for w in rec.equilibrium.edge_loads]
            row += ["1" if e in used_set else "0" for e in edge_ids]
            row += [_fmt(cost_of[e]) if e in used_set else "" for e in edge_ids]
            writer.writerow(row)
    return path
