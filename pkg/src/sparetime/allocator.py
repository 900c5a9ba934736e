"""Exact solution of the yearly time-allocation LP and spare-time accounting.

With ``x_v = x~_v - y_v / beta`` substituted, the objective becomes
``X~ + (gamma - 1/beta) * sum(y)``. It is linear in the total avatar time and
the constraints are per-alter boxes plus a cap on that total. The optimum is
therefore either ``sum(y) = 0`` or ``sum(y)`` at its cap.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .core import EgoNetwork, ModelParams, ValidationError, Violation

ABS_TOL = 1e-9


class InfeasibleAllocation(Exception):
    """No allocation satisfies the capacity lower bound and the avatar-time cap."""

    def __init__(self, lower_bound: float, cap: float, reason: str):
        super().__init__(f"{reason} (required sum(y) >= {lower_bound}, cap {cap})")
        self.lower_bound = lower_bound
        self.cap = cap


@dataclass(frozen=True)
class TimeAllocation:
    x: tuple
    y: tuple
    gamma: float

    @property
    def X(self) -> float:
        return math.fsum(self.x)

    @property
    def Ysum(self) -> float:
        return math.fsum(self.y)

    @property
    def Z(self) -> float:
        return self.gamma * self.Ysum

    def objective(self) -> float:
        return self.X + self.Z

    def __len__(self) -> int:
        return len(self.x)


def avatar_cap(network: EgoNetwork, params: ModelParams) -> float:
    """Upper bound on total avatar time: budget, debrief limit, per-alter boxes."""
    box = math.fsum(params.beta * d for d in network.demands)
    return min(params.avatar_budget_Y, params.z_max / params.gamma, box)


def avatar_lower_bound(network: EgoNetwork, params: ModelParams) -> float:
    """Least total avatar time that keeps user time within the actual capacity."""
    deficit = network.baseline_capacity - params.capacity(network)
    if deficit <= 0:
        return 0.0
    coeff = 1.0 / params.beta - params.gamma
    if coeff <= 0:
        return math.inf
    return deficit / coeff


def _split(total: float, network: EgoNetwork, params: ModelParams, strategy: str) -> list:
    weights = [params.beta * d for d in network.demands]
    if total <= 0:
        return [0.0] * len(weights)
    if strategy == "proportional":
        wsum = math.fsum(weights)
        return [min(total * w / wsum, w) for w in weights]
    if strategy == "greedy":
        # fill the heaviest alters first, ties by id
        y = [0.0] * len(weights)
        left = total
        for i in sorted(range(len(weights)), key=lambda i: (-weights[i], i)):
            take = min(weights[i], left)
            y[i] = take
            left -= take
            if left <= 0:
                break
        return y
    raise ValueError(f"unknown split strategy {strategy!r}")


def allocation_from_y(y, network: EgoNetwork, params: ModelParams) -> TimeAllocation:
    x = [max(d - yv / params.beta, 0.0) for d, yv in zip(network.demands, y)]
    return TimeAllocation(tuple(x), tuple(float(v) for v in y), params.gamma)


def solve_allocation(
    network: EgoNetwork, params: ModelParams, strategy: str = "proportional"
) -> TimeAllocation:
    if params.beta_per_alter is not None:
        raise ValidationError("beta_per_alter", "per-alter beta is not supported by the analytic solver")
    coeff = params.gamma - 1.0 / params.beta
    cap = avatar_cap(network, params)
    lb = avatar_lower_bound(network, params)
    if lb > 0:
        if coeff > 0:
            raise InfeasibleAllocation(lb, cap, "capacity below baseline while gamma > 1/beta")
        if lb > cap * (1 + 1e-12):
            raise InfeasibleAllocation(lb, cap, "capacity deficit exceeds the avatar-time cap")
    total = 0.0 if coeff > 0 else cap
    return allocation_from_y(_split(total, network, params, strategy), network, params)


def spare_time(allocation: TimeAllocation, network: EgoNetwork, params: ModelParams) -> float:
    """User hours freed relative to the baseline: X~ - X - Z."""
    return network.baseline_capacity - allocation.X - allocation.Z


def check_feasibility(allocation: TimeAllocation, network: EgoNetwork, params: ModelParams) -> list:
    """Evaluate every allocation constraint and return the violated ones."""
    report = []
    beta, gamma = params.beta, params.gamma
    if len(allocation) != network.n:
        return [Violation("size", float(abs(len(allocation) - network.n)), "allocation/network size mismatch")]
    for v, (d, xv, yv) in enumerate(zip(network.demands, allocation.x, allocation.y)):
        # x_v + y_v / beta >= x~_v (held with equality at optimum)
        gap = d - (xv + yv / beta)
        if abs(gap) > ABS_TOL:
            report.append(Violation("presence", abs(gap), f"alter {v}: x+y/beta differs from demand by {gap}"))
        if xv < -ABS_TOL:
            report.append(Violation("nonneg_x", -xv, f"alter {v}: x={xv}"))
        if yv < -ABS_TOL:
            report.append(Violation("nonneg_y", -yv, f"alter {v}: y={yv}"))
        if yv > beta * d + ABS_TOL:
            report.append(Violation("y_box", yv - beta * d, f"alter {v}: y={yv} > beta*demand={beta * d}"))
    ysum = allocation.Ysum
    if ysum > params.avatar_budget_Y + ABS_TOL:
        report.append(Violation("avatar_budget", ysum - params.avatar_budget_Y, f"sum(y)={ysum} > Y"))
    if gamma * ysum > params.z_max + ABS_TOL:
        report.append(Violation("y_cap_debrief", ysum - params.z_max / gamma, f"sum(y)={ysum} > z_max/gamma"))
    used = allocation.X + gamma * ysum
    cap = params.capacity(network)
    if used > cap + ABS_TOL:
        report.append(Violation("user_capacity", used - cap, f"X+Z={used} > X~'={cap}"))
    return report


def allocation_csv(allocation: TimeAllocation) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alter_id", "x_hours", "y_hours"])
    for v, (xv, yv) in enumerate(zip(allocation.x, allocation.y)):
        w.writerow([v, repr(xv), repr(yv)])
    return buf.getvalue()


def read_allocation_csv(text: str, gamma: float) -> TimeAllocation:
    rows = list(csv.DictReader(io.StringIO(text)))
    rows.sort(key=lambda r: int(r["alter_id"]))
    return TimeAllocation(
        tuple(float(r["x_hours"]) for r in rows), tuple(float(r["y_hours"]) for r in rows), gamma
    )


def write_allocation(path: Union[str, Path], allocation: TimeAllocation) -> None:
    Path(path).write_text(allocation_csv(allocation), encoding="utf-8", newline="\n")
