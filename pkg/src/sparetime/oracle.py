"""Brute-force references for tiny instances.

``exact_schedule`` enumerates effective days for every request with
branch-and-bound. ``allocation_oracle`` scans total avatar time on a grid and
scores each point with the original per-alter objective and constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .allocator import TimeAllocation
from .core import ConflictGraph, EgoNetwork, ModelParams, ValidationError
from .requests import Mode
from .scheduler import CAP_TOL, social_cost

MAX_REQUESTS = 8
MAX_DAYS = 8
MAX_ALTERS = 10


class InstanceTooLarge(ValidationError):
    pass


@dataclass(frozen=True)
class OracleResult:
    optimal_cost: Optional[int]
    optimal_assignment: tuple
    nodes_explored: int

    @property
    def feasible(self) -> bool:
        return self.optimal_cost is not None


def exact_schedule(requests: list, conflicts: ConflictGraph, params: ModelParams, allocation=None) -> OracleResult:
    """Minimum total social cost over all full assignments to effective days ``1..2k``.

    Mirror day ``k+i`` shares its capacity and physical presence with day
    ``i``, so each index carries one combined ledger. ``optimal_assignment`` holds ``(request_id, day)``
    pairs sorted by request id. Infeasible instances return ``optimal_cost=None``.
    """
    k = params.horizon_k
    if len(requests) > MAX_REQUESTS:
        raise InstanceTooLarge("requests", f"{len(requests)} > {MAX_REQUESTS}")
    if k > MAX_DAYS:
        raise InstanceTooLarge("horizon_k", f"{k} > {MAX_DAYS}")

    slot, z_max = params.slot_hours, params.z_max
    adj = conflicts.neighbours()
    reqs = list(requests)
    days = range(1, 2 * k + 1)
    options = [sorted(days, key=lambda e, r=r: (social_cost(r.window, e, k), e)) for r in reqs]

    user = [0.0] * (k + 1)
    avatar = [0.0] * (k + 1)
    present = [[] for _ in range(k + 1)]
    chosen = [0] * len(reqs)
    best = [None, None]
    nodes = 0
    debrief = [0.0]

    def dfs(idx: int, partial: int) -> None:
        nonlocal nodes
        nodes += 1
        if best[0] is not None and partial >= best[0]:
            return
        if idx == len(reqs):
            best[0] = partial
            best[1] = tuple(chosen)
            return
        r = reqs[idx]
        for e in options[idx]:
            c = social_cost(r.window, e, k)
            if best[0] is not None and partial + c >= best[0]:
                # options are cost-sorted
                break
            i = e if e <= k else e - k
            if r.mode is Mode.PHYSICAL:
                if user[i] + r.duration > slot + CAP_TOL:
                    continue
                if any(a in adj[r.alter_id] for a in present[i]):
                    continue
                user[i] += r.duration
                present[i].append(r.alter_id)
                chosen[idx] = e
                dfs(idx + 1, partial + c)
                present[i].pop()
                user[i] -= r.duration
            else:
                if avatar[i] + r.duration > slot + CAP_TOL or user[i] + r.debrief > slot + CAP_TOL:
                    continue
                if debrief[0] + r.debrief > z_max + CAP_TOL:
                    continue
                avatar[i] += r.duration
                user[i] += r.debrief
                debrief[0] += r.debrief
                chosen[idx] = e
                dfs(idx + 1, partial + c)
                debrief[0] -= r.debrief
                user[i] -= r.debrief
                avatar[i] -= r.duration
            if best[0] == 0:
                return

    dfs(0, 0)
    if best[0] is None:
        return OracleResult(None, (), nodes)
    assignment = tuple(sorted((r.request_id, e) for r, e in zip(reqs, best[1])))
    return OracleResult(best[0], assignment, nodes)


@dataclass(frozen=True)
class AllocationOracleResult:
    ysum: float
    allocation: TimeAllocation
    objective: float
    flat: bool
    lower: float
    upper: float
    grid_step: float


def allocation_oracle(network: EgoNetwork, params: ModelParams, resolution: int = 10_000) -> AllocationOracleResult:
    """Grid search over total avatar time between its feasibility bounds (inclusive)."""
    if network.n > MAX_ALTERS:
        raise InstanceTooLarge("network", f"{network.n} alters > {MAX_ALTERS}")
    if resolution < 100:
        raise ValidationError("resolution", "must be >= 100")
    beta, gamma = params.beta, params.gamma
    demand = np.asarray(network.demands, dtype=float)
    baseline = float(demand.sum())
    capacity = baseline if params.x_prime is None else params.x_prime

    # feasible totals: (gamma - 1/beta) S <= X~' - X~, 0 <= S <= min(Y, Zmax/gamma, sum beta x~)
    slope = gamma - 1.0 / beta
    room = capacity - baseline
    lo, hi = 0.0, min(params.avatar_budget_Y, params.z_max / gamma, float((beta * demand).sum()))
    if slope > 0:
        hi = min(hi, room / slope)
    elif slope < 0:
        lo = max(lo, room / slope)
    elif room < 0:
        hi = -1.0
    if lo > hi + 1e-12:
        raise ValidationError("allocation", f"infeasible: total avatar time needs >= {lo}, cap {hi}")
    hi = max(hi, lo)

    grid = lo + (hi - lo) * np.arange(resolution + 1) / resolution
    weights = beta * demand / float((beta * demand).sum())
    y = grid[:, None] * weights[None, :]
    x = demand[None, :] - y / beta
    objective = x.sum(axis=1) + gamma * y.sum(axis=1)
    feasible = (
        (x >= -1e-9).all(axis=1)
        & (y <= beta * demand[None, :] + 1e-9).all(axis=1)
        & (objective <= capacity + 1e-9)
    )
    objective = np.where(feasible, objective, np.inf)
    j = int(np.argmin(objective))
    finite = objective[np.isfinite(objective)]
    # a single feasible point is not a plateau
    flat = bool(hi > lo and finite.max() - finite.min() <= 1e-9 * max(1.0, baseline))
    alloc = TimeAllocation(tuple(float(v) for v in x[j]), tuple(float(v) for v in y[j]), gamma)
    return AllocationOracleResult(float(grid[j]), alloc, float(objective[j]), flat, lo, hi, (hi - lo) / resolution)
