"""Day-slot scheduling of materialized requests and social-cost evaluation.

Effective days run over ``1..2k``: ``1..k`` is the scheduling year and
``k+1..2k`` mirrors it. A mirror day ``k+i`` starts with all of day ``i``'s final
reservations and only receives requests that could not be placed in year one.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from .allocator import TimeAllocation, spare_time
from .core import ConflictGraph, EgoNetwork, ModelParams, ValidationError, Violation
from .requests import MaterializedRequest, Mode

YEAR_OFFSET = 365
CAP_TOL = 1e-9


def social_cost(window: tuple, day: int, k: int) -> int:
    """Lateness penalty in days for serving a request with ``window`` on effective ``day``."""
    start, end = window
    if not (1 <= start <= end <= k):
        raise ValidationError("window", f"need 1 <= d' <= d'' <= k={k}, got {window}")
    if not (1 <= day <= 2 * k):
        raise ValidationError("day", f"effective day {day} outside 1..{2 * k}")
    if day > k:
        return day - k + YEAR_OFFSET - end
    if day < start:
        return day + YEAR_OFFSET - end
    if day <= end:
        return 0
    return day - end


@dataclass(frozen=True)
class Assignment:
    request_id: int
    day: int
    # avatar requests are debriefed on this day; None for physical service
    debrief_day: Optional[int] = None


@dataclass(frozen=True)
class DayLedger:
    """Per effective day usage; index 0 is unused. Mirror days include their preload."""

    user_hours: tuple
    avatar_hours: tuple
    physical_alters: tuple

    def day(self, e: int) -> tuple:
        return self.user_hours[e], self.avatar_hours[e], self.physical_alters[e]


@dataclass(frozen=True)
class Schedule:
    assignments: tuple
    ledger: DayLedger
    unscheduled: tuple
    horizon_k: int

    def day_of(self) -> dict:
        return {a.request_id: a.day for a in self.assignments}

    @property
    def n_year1(self) -> int:
        return sum(1 for a in self.assignments if a.day <= self.horizon_k)

    @property
    def n_year2(self) -> int:
        return sum(1 for a in self.assignments if a.day > self.horizon_k)


@dataclass(frozen=True)
class CostReport:
    total_cost: int
    per_alter_cost: tuple
    per_request_cost: tuple
    spare_time: float
    n_year1: int
    n_year2: int
    n_unscheduled: int

    @property
    def mean_cost_per_alter(self) -> float:
        return self.total_cost / len(self.per_alter_cost) if self.per_alter_cost else 0.0


class _State:
    def __init__(self, k: int, params: ModelParams, conflicts: ConflictGraph):
        self.k = k
        self.slot = params.slot_hours
        self.z_max = params.z_max
        self.user = [0.0] * (2 * k + 1)
        self.avatar = [0.0] * (2 * k + 1)
        self.present = [set() for _ in range(2 * k + 1)]
        self.debrief_total = 0.0
        self.adj = conflicts.neighbours()
        self.assignments = {}

    def fits(self, r: MaterializedRequest, e: int) -> bool:
        if r.mode is Mode.PHYSICAL:
            if self.user[e] + r.duration > self.slot + CAP_TOL:
                return False
            return not (self.adj[r.alter_id] & self.present[e]) if r.alter_id < len(self.adj) else True
        return (
            self.avatar[e] + r.duration <= self.slot + CAP_TOL
            and self.user[e] + r.debrief <= self.slot + CAP_TOL
            and self.debrief_total + r.debrief <= self.z_max + CAP_TOL
        )

    def place(self, r: MaterializedRequest, e: int) -> None:
        if r.mode is Mode.PHYSICAL:
            self.user[e] += r.duration
            self.present[e].add(r.alter_id)
            self.assignments[r.request_id] = Assignment(r.request_id, e)
        else:
            self.avatar[e] += r.duration
            self.user[e] += r.debrief
            self.debrief_total += r.debrief
            self.assignments[r.request_id] = Assignment(r.request_id, e, e)

    def mirror_year(self) -> None:
        k = self.k
        for i in range(1, k + 1):
            self.user[k + i] = self.user[i]
            self.avatar[k + i] = self.avatar[i]
            self.present[k + i] = set(self.present[i])


def _sweep_year1(state: _State, reqs: list) -> list:
    """Place requests day by day; a request becomes eligible on its window start."""
    k = state.k
    pending = sorted(reqs, key=lambda r: (r.window_start, r.request_id))
    active, p = [], 0
    for i in range(1, k + 1):
        while p < len(pending) and pending[p].window_start <= i:
            active.append(pending[p])
            p += 1
        if not active:
            continue
        # in-window requests cost 0, overdue ones i - d''
        active.sort(key=lambda r: (max(0, i - r.window_end), r.alter_id, r.request_id))
        left = []
        for r in active:
            if state.fits(r, i):
                state.place(r, i)
            else:
                left.append(r)
        active = left
    return active


def _sweep_year2(state: _State, reqs: list) -> list:
    k = state.k
    active = list(reqs)
    for i in range(1, k + 1):
        if not active:
            break
        e = k + i
        active.sort(key=lambda r: (i + YEAR_OFFSET - r.window_end, r.alter_id, r.request_id))
        left = []
        for r in active:
            if state.fits(r, e):
                state.place(r, e)
            else:
                left.append(r)
        active = left
    return active


def schedule(
    requests: list, conflicts: ConflictGraph, params: ModelParams, allocation: Optional[TimeAllocation] = None
) -> Schedule:
    """Greedy day sweep: physical requests before avatar requests, year two only for leftovers.

    Within a day, eligible requests are tried in ascending order of their cost
    on that day, ties broken by alter id then request id. A physical request
    needs the user's remaining hours and no conflicting alter physically
    present that day. An avatar request needs avatar hours plus user hours for its
    same-day debrief, within the yearly debrief limit.
    ``allocation`` is accepted for interface symmetry; mode totals are already
    fixed by materialization.
    """
    k = params.horizon_k
    state = _State(k, params, conflicts)
    physical = [r for r in requests if r.mode is Mode.PHYSICAL]
    avatar = [r for r in requests if r.mode is Mode.AVATAR]

    phys_left = _sweep_year1(state, physical)
    av_left = _sweep_year1(state, avatar)
    state.mirror_year()
    phys_left = _sweep_year2(state, phys_left)
    av_left = _sweep_year2(state, av_left)

    assignments = tuple(state.assignments[rid] for rid in sorted(state.assignments))
    unscheduled = tuple(sorted(r.request_id for r in phys_left + av_left))
    ledger = DayLedger(
        tuple(state.user), tuple(state.avatar), tuple(frozenset(s) for s in state.present)
    )
    return Schedule(assignments, ledger, unscheduled, k)


def recompute_ledger(schedule: Schedule, requests: list, k: int) -> DayLedger:
    by_id = {r.request_id: r for r in requests}
    user = [0.0] * (2 * k + 1)
    avatar = [0.0] * (2 * k + 1)
    present = [set() for _ in range(2 * k + 1)]
    year2 = []
    for a in schedule.assignments:
        r = by_id.get(a.request_id)
        if r is None or not 1 <= a.day <= 2 * k:
            continue
        if a.day > k:
            year2.append((a, r))
            continue
        _book(user, avatar, present, a, r)
    for i in range(1, k + 1):
        user[k + i], avatar[k + i], present[k + i] = user[i], avatar[i], set(present[i])
    for a, r in year2:
        _book(user, avatar, present, a, r)
    return DayLedger(tuple(user), tuple(avatar), tuple(frozenset(s) for s in present))


def _book(user, avatar, present, a: Assignment, r: MaterializedRequest) -> None:
    if r.mode is Mode.PHYSICAL:
        user[a.day] += r.duration
        present[a.day].add(r.alter_id)
    else:
        avatar[a.day] += r.duration
        debrief_day = a.debrief_day if a.debrief_day is not None else a.day
        if 1 <= debrief_day < len(user):
            user[debrief_day] += r.debrief


def validate_schedule(
    schedule: Schedule,
    requests: list,
    conflicts: ConflictGraph,
    allocation: TimeAllocation,
    params: ModelParams,
) -> list:
    """Check a schedule against every model constraint; returns the list of violations."""
    k = params.horizon_k
    slot = params.slot_hours
    report = []
    by_id = {r.request_id: r for r in requests}

    seen = defaultdict(int)
    for a in schedule.assignments:
        seen[a.request_id] += 1
        if a.request_id not in by_id:
            report.append(Violation("unknown_request", 1.0, f"request {a.request_id} not in request list"))
        if not 1 <= a.day <= 2 * k:
            report.append(Violation("day_range", 1.0, f"request {a.request_id} on day {a.day}"))
    for rid, count in sorted(seen.items()):
        if count > 1:
            report.append(Violation("single_assignment", float(count - 1), f"request {rid} assigned {count} times"))

    ledger = recompute_ledger(schedule, requests, k)
    # a mirror day repeats its year-one usage; only report it when year-two placements add to it
    grown = [
        e <= k
        or ledger.user_hours[e] != ledger.user_hours[e - k]
        or ledger.avatar_hours[e] != ledger.avatar_hours[e - k]
        or ledger.physical_alters[e] != ledger.physical_alters[e - k]
        for e in range(2 * k + 1)
    ]
    for e in range(1, 2 * k + 1):
        if not grown[e]:
            continue
        if ledger.user_hours[e] > slot + CAP_TOL:
            report.append(Violation("user_slot", ledger.user_hours[e] - slot, f"day {e}: user {ledger.user_hours[e]} h"))
        if ledger.avatar_hours[e] > slot + CAP_TOL:
            report.append(
                Violation("avatar_slot", ledger.avatar_hours[e] - slot, f"day {e}: avatar {ledger.avatar_hours[e]} h")
            )

    # physical co-presence of conflicting alters; mirror days include year-one presence
    for e in range(1, 2 * k + 1):
        present = sorted(ledger.physical_alters[e])
        inherited = ledger.physical_alters[e - k] if e > k else frozenset()
        for x in range(len(present)):
            for y in range(x + 1, len(present)):
                if present[x] in inherited and present[y] in inherited:
                    continue
                if conflicts.conflicts(present[x], present[y]):
                    report.append(
                        Violation("conflict", 1.0, f"alters ({present[x]}, {present[y]}) both physical on day {e}")
                    )

    debrief_total = 0.0
    for a in schedule.assignments:
        r = by_id.get(a.request_id)
        if r is None or r.mode is not Mode.AVATAR:
            continue
        debrief_total += r.debrief
        if a.debrief_day != a.day:
            report.append(
                Violation("same_day_debrief", 1.0, f"request {a.request_id} served day {a.day}, debriefed {a.debrief_day}")
            )
    if debrief_total > params.z_max + CAP_TOL:
        report.append(Violation("z_max", debrief_total - params.z_max, f"total debrief {debrief_total} h"))

    # per-alter mode totals, over all requests and over scheduled ones
    n = len(allocation)
    need = {Mode.PHYSICAL: allocation.x, Mode.AVATAR: allocation.y}
    offered = {m: [[] for _ in range(n)] for m in Mode}
    served = {m: [[] for _ in range(n)] for m in Mode}
    scheduled_ids = set(seen)
    for r in requests:
        if 0 <= r.alter_id < n:
            offered[r.mode][r.alter_id].append(r.duration)
            if r.request_id in scheduled_ids:
                served[r.mode][r.alter_id].append(r.duration)
    for mode in Mode:
        for v in range(n):
            total = math.fsum(offered[mode][v])
            if abs(total - need[mode][v]) > 1e-6:
                report.append(
                    Violation(f"{mode.value}_total", abs(total - need[mode][v]), f"alter {v}: requests {total} vs {need[mode][v]}")
                )
            shortfall = total - math.fsum(served[mode][v])
            if shortfall > 1e-9:
                report.append(Violation(f"{mode.value}_shortfall", shortfall, f"alter {v}: {shortfall} h unscheduled"))
    return report


def evaluate(
    schedule: Schedule,
    requests: list,
    allocation: TimeAllocation,
    network: EgoNetwork,
    params: ModelParams,
) -> CostReport:
    k = params.horizon_k
    by_id = {r.request_id: r for r in requests}
    per_alter = [0] * network.n
    per_request = []
    for a in schedule.assignments:
        r = by_id[a.request_id]
        c = social_cost(r.window, a.day, k)
        per_request.append(c)
        per_alter[r.alter_id] += c
    return CostReport(
        total_cost=sum(per_request),
        per_alter_cost=tuple(per_alter),
        per_request_cost=tuple(per_request),
        spare_time=spare_time(allocation, network, params),
        n_year1=schedule.n_year1,
        n_year2=schedule.n_year2,
        n_unscheduled=len(schedule.unscheduled),
    )


def schedule_csv(schedule: Schedule, requests: list, k: int) -> str:
    by_id = {r.request_id: r for r in requests}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["request_id", "alter_id", "mode", "day_effective", "cost_days"])
    for a in schedule.assignments:
        r = by_id[a.request_id]
        w.writerow([a.request_id, r.alter_id, r.mode.value, a.day, social_cost(r.window, a.day, k)])
    return buf.getvalue()


SUMMARY_FIELDS = [
    "total_cost_days",
    "mean_cost_per_alter",
    "spare_time_hours",
    "n_year1",
    "n_year2",
    "n_unscheduled",
]


def summary_csv(report: CostReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    w.writerow(
        [
            report.total_cost,
            repr(report.mean_cost_per_alter),
            repr(report.spare_time),
            report.n_year1,
            report.n_year2,
            report.n_unscheduled,
        ]
    )
    return buf.getvalue()
