"""Social-request skeletons and their mode-tagged materialization."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .allocator import TimeAllocation
from .core import EgoNetwork, ModelParams, ValidationError

SUM_TOL = 1e-9


class Mode(str, enum.Enum):
    PHYSICAL = "physical"
    AVATAR = "avatar"


@dataclass(frozen=True)
class RequestSkeleton:
    alter_id: int
    presence_hours: float
    window_start: int
    window_end: int


@dataclass(frozen=True)
class MaterializedRequest:
    request_id: int
    alter_id: int
    mode: Mode
    duration: float
    debrief: float
    window_start: int
    window_end: int
    presence_hours: float

    @property
    def window(self) -> tuple:
        return (self.window_start, self.window_end)

    @property
    def user_hours(self) -> float:
        """User time consumed on the day of service."""
        return self.duration if self.mode is Mode.PHYSICAL else self.debrief

    @property
    def avatar_hours(self) -> float:
        return self.duration if self.mode is Mode.AVATAR else 0.0


def max_request_size(params: ModelParams) -> float:
    """Largest presence size that fits one day in either mode."""
    s = params.slot_hours
    return min(s, s / params.beta, s / (params.gamma * params.beta))


def generate_skeletons(
    seed: int, network: EgoNetwork, deadline_frac: float, params: ModelParams
) -> list:
    """Split each alter's yearly demand into requests with random windows.

    Sizes are uniform on (0, max_request_size]; the last request of an alter
    takes the remainder so the sizes sum to the demand. Window lengths are
    uniform on 1..floor(deadline_frac * k), clamped at day k.
    """
    if not (0.0 < deadline_frac <= 1.0):
        raise ValidationError("deadline_frac", f"must lie in (0, 1], got {deadline_frac!r}")
    k = params.horizon_k
    cap = max_request_size(params)
    max_len = max(1, int(math.floor(deadline_frac * k)))
    rng = np.random.default_rng(seed)
    out = []
    for alter in network.alters:
        own = []
        remaining = alter.annual_demand
        while remaining > cap * 1e-12:
            # 1 - U lies in (0, 1]
            size = min(cap * (1.0 - rng.random()), remaining)
            start = int(rng.integers(1, k + 1))
            # one uniform per window keeps windows nested across deadline fractions
            length = 1 + int(math.floor(rng.random() * max_len))
            own.append([size, start, min(start + length, k)])
            remaining -= size
        # absorb float residue into the last request so the sizes sum to the demand
        own[-1][0] += alter.annual_demand - math.fsum(o[0] for o in own)
        out.extend(RequestSkeleton(alter.id, float(sz), a, b) for sz, a, b in own)
    return out


def materialize(skeletons: list, allocation: TimeAllocation, params: ModelParams) -> list:
    """Tag requests physical until each alter's physical hours are used, the rest avatar.

    The request straddling the boundary is split into a physical and an
    avatar piece sharing its window. Avatar durations are inflated by beta
    and carry a debrief of gamma times the duration.
    """
    n = len(allocation)
    by_alter = [[] for _ in range(n)]
    for sk in skeletons:
        if not 0 <= sk.alter_id < n:
            raise ValidationError("allocation", f"skeleton alter {sk.alter_id} not in allocation of size {n}")
        by_alter[sk.alter_id].append(sk)
    present = {sk.alter_id for sk in skeletons}
    if present != set(range(n)):
        missing = sorted(set(range(n)) - present)
        raise ValidationError("allocation", f"alters without requests: {missing[:10]}")

    beta, gamma = params.beta, params.gamma
    out = []

    def emit(sk, mode, presence):
        if presence <= 0:
            return
        if mode is Mode.PHYSICAL:
            duration, debrief = presence, 0.0
        else:
            duration = beta * presence
            debrief = gamma * duration
        out.append(
            MaterializedRequest(len(out), sk.alter_id, mode, duration, debrief, sk.window_start, sk.window_end, presence)
        )

    for v in range(n):
        phys_left = allocation.x[v]
        demand = math.fsum(sk.presence_hours for sk in by_alter[v])
        # tolerate rounding between x_v and the request mass
        if phys_left >= demand - SUM_TOL:
            phys_left = demand
        start = len(out)
        for sk in by_alter[v]:
            p = sk.presence_hours
            if phys_left >= p - SUM_TOL:
                emit(sk, Mode.PHYSICAL, p)
                phys_left = max(phys_left - p, 0.0)
            elif phys_left > SUM_TOL:
                emit(sk, Mode.PHYSICAL, phys_left)
                emit(sk, Mode.AVATAR, p - phys_left)
                phys_left = 0.0
            else:
                emit(sk, Mode.AVATAR, p)
                phys_left = 0.0
        _rebalance(out, start, allocation.x[v], allocation.y[v], beta, gamma)
    return out


def _rebalance(out: list, start: int, x_target: float, y_target: float, beta: float, gamma: float) -> None:
    """Push float residue of one alter's piece sums into its last piece of each mode."""
    pieces = out[start:]
    for mode, target in ((Mode.PHYSICAL, x_target), (Mode.AVATAR, y_target)):
        idx = [i for i, r in enumerate(pieces) if r.mode is mode]
        if not idx:
            continue
        drift = target - math.fsum(pieces[i].duration for i in idx)
        if drift == 0.0 or abs(drift) > 1e-6:
            continue
        i = idx[-1]
        r = pieces[i]
        dur = r.duration + drift
        deb = gamma * dur if mode is Mode.AVATAR else 0.0
        pres = dur / beta if mode is Mode.AVATAR else dur
        out[start + i] = MaterializedRequest(
            r.request_id, r.alter_id, r.mode, dur, deb, r.window_start, r.window_end, pres
        )


def requests_csv(requests: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alter_id", "mode", "duration_h", "debrief_h", "d_start", "d_end"])
    for r in requests:
        w.writerow([r.alter_id, r.mode.value, repr(r.duration), repr(r.debrief), r.window_start, r.window_end])
    return buf.getvalue()


def read_requests_csv(text: str, params: ModelParams) -> list:
    out = []
    for i, row in enumerate(csv.DictReader(io.StringIO(text))):
        mode = Mode(row["mode"])
        dur = float(row["duration_h"])
        pres = dur if mode is Mode.PHYSICAL else dur / params.beta
        out.append(
            MaterializedRequest(
                i, int(row["alter_id"]), mode, dur, float(row["debrief_h"]), int(row["d_start"]), int(row["d_end"]), pres
            )
        )
    return out


def skeletons_csv(skeletons: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alter_id", "presence_h", "d_start", "d_end"])
    for s in skeletons:
        w.writerow([s.alter_id, repr(s.presence_hours), s.window_start, s.window_end])
    return buf.getvalue()


def read_skeletons_csv(text: str) -> list:
    return [
        RequestSkeleton(int(r["alter_id"]), float(r["presence_h"]), int(r["d_start"]), int(r["d_end"]))
        for r in csv.DictReader(io.StringIO(text))
    ]


def write_text(path: Union[str, Path], text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")
