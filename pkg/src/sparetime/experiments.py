"""Paired avatar / non-avatar experiment campaign over the parameter grid."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from statistics import mean
from typing import Iterable, Optional

import numpy as np

from .allocator import InfeasibleAllocation, check_feasibility, solve_allocation, spare_time
from .core import DEFAULT_BETA, EgoNetwork, ModelParams
from .egogen import generate_conflict_graph, generate_ego_network, sample_network_size
from .requests import generate_skeletons, materialize
from .scheduler import evaluate, schedule, validate_schedule

log = logging.getLogger(__name__)

STREAM_NETWORK, STREAM_CONFLICTS, STREAM_REQUESTS = 0, 1, 2


def stable_hash(*parts) -> int:
    """Process-independent 63-bit hash of a tuple of simple values."""
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def instance_seed(base_seed: int, n_alters: int, repetition: int) -> int:
    """Seed of one generated instance.

    Only the network size shapes the hash; the other axes reuse the same
    instance, so added axes never move existing seeds.
    """
    return (base_seed + stable_hash("n_alters", n_alters) + repetition) % 2**63


def sub_seed(seed: int, stream: int) -> int:
    state = np.random.SeedSequence(entropy=seed, spawn_key=(stream,)).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass(frozen=True)
class SweepConfig:
    base_seed: int = 0
    repetitions: int = 10
    network_sizes: tuple = (68, 126, 170)
    conflict_densities: tuple = (0.0, 0.2, 0.4, 0.6, 0.8)
    deadline_fracs: tuple = (0.1, 0.2, 0.3, 0.4)
    y_fracs: tuple = (0.25, 0.5, 0.75, 1.0)
    gammas: tuple = (0.2, 0.4, 0.6, 0.8)
    beta: float = 1.29
    z_max: float = 304.0
    slot_hours: float = 8.0
    horizon_k: int = 364
    timing: bool = False

    def __post_init__(self):
        for name in ("network_sizes", "conflict_densities", "deadline_fracs", "y_fracs", "gammas"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def base_params(self) -> ModelParams:
        return ModelParams(
            beta=self.beta,
            z_max=self.z_max,
            slot_hours=self.slot_hours,
            horizon_k=self.horizon_k,
        )

    def cells(self) -> Iterable[dict]:
        for n, dens, dfrac, yf, g in itertools.product(
            self.network_sizes, self.conflict_densities, self.deadline_fracs, self.y_fracs, self.gammas
        ):
            yield dict(n_alters=n, conflict_density=dens, deadline_frac=dfrac, y_frac=yf, gamma=g)

    def n_rows(self) -> int:
        return 2 * self.repetitions * math.prod(
            len(getattr(self, a))
            for a in ("network_sizes", "conflict_densities", "deadline_fracs", "y_fracs", "gammas")
        )


@dataclass
class ExperimentRow:
    run_id: str
    seed: int
    n_alters: int
    conflict_density: float
    deadline_frac: float
    y_frac: float
    gamma: float
    arm: str
    total_cost_days: Optional[int]
    mean_cost_per_alter: Optional[float]
    spare_time_hours: Optional[float]
    n_requests: int
    n_year1: int
    n_year2: int
    n_unscheduled: int
    feasible: bool
    runtime_ms: Optional[float]

    def key(self) -> tuple:
        return (self.n_alters, self.conflict_density, self.deadline_frac, self.y_frac, self.gamma, self.seed, self.arm)

    def instance(self) -> tuple:
        return (self.seed, self.n_alters, self.conflict_density, self.deadline_frac, self.y_frac, self.gamma)


ROW_FIELDS = [f.name for f in fields(ExperimentRow)]


@dataclass
class CellResult:
    a: ExperimentRow
    non_a: ExperimentRow
    per_alter_a: tuple = ()
    per_alter_non_a: tuple = ()

    @property
    def rows(self) -> tuple:
        return (self.a, self.non_a)


@dataclass(frozen=True)
class Instance:
    seed: int
    network: EgoNetwork
    conflicts: object
    skeletons: list = field(repr=False)


def build_instance(cell: dict, seed: int, base: ModelParams) -> Instance:
    n = cell["n_alters"]
    network = generate_ego_network(sub_seed(seed, STREAM_NETWORK), size_override=n)
    conflicts = generate_conflict_graph(sub_seed(seed, STREAM_CONFLICTS), network.n, cell["conflict_density"])
    skeletons = generate_skeletons(sub_seed(seed, STREAM_REQUESTS), network, cell["deadline_frac"], base)
    return Instance(seed, network, conflicts, skeletons)


def run_id_for(cell: dict, repetition: int) -> str:
    return (
        f"n{cell['n_alters']}-c{cell['conflict_density']}-d{cell['deadline_frac']}"
        f"-y{cell['y_frac']}-g{cell['gamma']}-r{repetition}"
    )


def _run_arm(inst: Instance, params: ModelParams, cell: dict, arm: str, run_id: str, timing: bool):
    t0 = time.perf_counter()
    net = inst.network
    common = dict(
        run_id=run_id,
        seed=inst.seed,
        n_alters=net.n,
        conflict_density=cell["conflict_density"],
        deadline_frac=cell["deadline_frac"],
        y_frac=cell["y_frac"],
        gamma=cell["gamma"],
        arm=arm,
    )
    try:
        alloc = solve_allocation(net, params)
    except InfeasibleAllocation as exc:
        log.warning("%s %s: %s", run_id, arm, exc)
        row = ExperimentRow(**common, total_cost_days=None, mean_cost_per_alter=None, spare_time_hours=None,
                            n_requests=0, n_year1=0, n_year2=0, n_unscheduled=0, feasible=False, runtime_ms=None)
        return row, ()
    reqs = materialize(inst.skeletons, alloc, params)
    sched = schedule(reqs, inst.conflicts, params, alloc)
    report = evaluate(sched, reqs, alloc, net, params)
    violations = validate_schedule(sched, reqs, inst.conflicts, alloc, params) + check_feasibility(alloc, net, params)
    elapsed = (time.perf_counter() - t0) * 1000.0 if timing else None
    row = ExperimentRow(
        **common,
        total_cost_days=report.total_cost,
        mean_cost_per_alter=report.mean_cost_per_alter,
        spare_time_hours=report.spare_time,
        n_requests=len(reqs),
        n_year1=report.n_year1,
        n_year2=report.n_year2,
        n_unscheduled=report.n_unscheduled,
        feasible=not violations,
        runtime_ms=elapsed,
    )
    return row, report.per_alter_cost


def arm_params(base: ModelParams, network: EgoNetwork, cell: dict, arm: str) -> ModelParams:
    p = base.with_gamma(cell["gamma"])
    budget = cell["y_frac"] * network.baseline_capacity if arm == "A" else 0.0
    return p.replace(avatar_budget_Y=budget)


def run_cell(cell: dict, seed: int, repetition: int = 0, base: Optional[ModelParams] = None,
             timing: bool = False, instance: Optional[Instance] = None, non_a_cache: Optional[dict] = None) -> CellResult:
    """Run both arms of one grid cell on a shared instance built from ``seed``."""
    base = base or ModelParams()
    inst = instance or build_instance(cell, seed, base)
    run_id = run_id_for(cell, repetition)
    a_row, a_costs = _run_arm(inst, arm_params(base, inst.network, cell, "A"), cell, "A", run_id, timing)
    if non_a_cache is not None and "row" in non_a_cache:
        # the non-avatar arm ignores gamma and y_frac
        cached = non_a_cache["row"]
        na_row = ExperimentRow(**{**asdict(cached), "run_id": run_id, "y_frac": cell["y_frac"], "gamma": cell["gamma"]})
        na_costs = non_a_cache["costs"]
    else:
        na_row, na_costs = _run_arm(inst, arm_params(base, inst.network, cell, "nonA"), cell, "nonA", run_id, timing)
        if non_a_cache is not None:
            non_a_cache.update(row=na_row, costs=na_costs)
    return CellResult(a_row, na_row, tuple(a_costs), tuple(na_costs))


def _run_group(args) -> list:
    config, n, dens, dfrac, rep = args
    base = config.base_params()
    seed = instance_seed(config.base_seed, n, rep)
    group_cell = dict(n_alters=n, conflict_density=dens, deadline_frac=dfrac)
    inst = build_instance(group_cell, seed, base)
    cache = {}
    out = []
    for yf, g in itertools.product(config.y_fracs, config.gammas):
        cell = dict(group_cell, y_frac=yf, gamma=g)
        out.append(run_cell(cell, seed, rep, base, config.timing, inst, cache))
    return out


def sweep(config: SweepConfig, jobs: int = 1, progress=None) -> tuple:
    """Run the full grid; returns (rows, per_alter_records) in deterministic order."""
    groups = [
        (config, n, dens, dfrac, rep)
        for n, dens, dfrac in itertools.product(config.network_sizes, config.conflict_densities, config.deadline_fracs)
        for rep in range(config.repetitions)
    ]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, res in enumerate(pool.map(_run_group, groups)):
                results.extend(res)
                if progress:
                    progress(i + 1, len(groups))
    else:
        for i, g in enumerate(groups):
            results.extend(_run_group(g))
            if progress:
                progress(i + 1, len(groups))
    rows, per_alter = [], []
    for res in results:
        rows.extend(res.rows)
        for row, costs in ((res.a, res.per_alter_a), (res.non_a, res.per_alter_non_a)):
            per_alter.extend((row.run_id, row.arm, row.n_alters, v, c) for v, c in enumerate(costs))
    rows.sort(key=lambda r: (r.n_alters, r.conflict_density, r.deadline_frac, r.y_frac, r.gamma, r.run_id, r.arm))
    per_alter.sort(key=lambda t: (t[2], t[0], t[1], t[3]))
    return rows, per_alter


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_csv(rows: list, header: Optional[list] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows and isinstance(rows[0], ExperimentRow):
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in ROW_FIELDS])
    else:
        header = header or (list(rows[0].keys()) if rows else [])
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(h)) for h in header])
    return buf.getvalue()


def write_csv(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def improvement(non_a_cost, a_cost) -> Optional[float]:
    """Percentage cost reduction of the avatar arm; None when the baseline cost is zero."""
    if non_a_cost is None or a_cost is None or non_a_cost == 0:
        return None
    return 100.0 * (non_a_cost - a_cost) / non_a_cost


def pair_rows(rows: list) -> list:
    """Match every A row with its nonA partner; raises on unmatched rows."""
    by = defaultdict(dict)
    for r in rows:
        by[r.instance()][r.arm] = r
    missing = [k for k, arms in by.items() if set(arms) != {"A", "nonA"}]
    if missing:
        shown = ", ".join(f"{k}: has {sorted(by[k])}" for k in missing[:5])
        raise ValueError(f"{len(missing)} unpaired instances, e.g. {shown}")
    return [(by[k]["A"], by[k]["nonA"]) for k in sorted(by)]


FINDING_FIELDS = ["run_id", "seed", "cost_A", "cost_nonA", "n_unscheduled_A"]


def dominance_findings(pairs: list, beta: float = DEFAULT_BETA) -> list:
    """Paired instances where the avatar arm costs more than the baseline although avatars are cheaper."""
    out = []
    for a, na in pairs:
        if a.total_cost_days is None or na.total_cost_days is None:
            continue
        if a.gamma < 1.0 / beta and a.total_cost_days > na.total_cost_days:
            log.warning("finding: %s avatar cost %d > baseline %d", a.run_id, a.total_cost_days, na.total_cost_days)
            out.append({
                "run_id": a.run_id,
                "seed": a.seed,
                "cost_A": a.total_cost_days,
                "cost_nonA": na.total_cost_days,
                "n_unscheduled_A": a.n_unscheduled,
            })
    return out


def _mean(values) -> Optional[float]:
    values = [v for v in values if v is not None]
    return mean(values) if values else None


def _by_axis(pairs: list, axis: str, with_size: bool = True) -> list:
    groups = defaultdict(list)
    for a, na in pairs:
        key = (a.n_alters, getattr(a, axis)) if with_size else (getattr(a, axis),)
        groups[key].append((a, na))
    table = []
    for key in sorted(groups):
        grp = groups[key]
        rec = {"n_alters": key[0], axis: key[1]} if with_size else {axis: key[0]}
        rec.update(
            cost_A=_mean(a.total_cost_days for a, _ in grp),
            cost_nonA=_mean(na.total_cost_days for _, na in grp),
            improvement_pct=_mean(improvement(na.total_cost_days, a.total_cost_days) for a, na in grp),
            spare_time_A=_mean(a.spare_time_hours for a, _ in grp),
            n_pairs=len(grp),
        )
        table.append(rec)
    return table


HIST_EDGES = (0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000)


def cost_histogram(per_alter: list) -> list:
    """Per-alter cost histogram by network size and arm; bins are [lo, hi)."""
    counts = defaultdict(int)
    for _run_id, arm, n, _v, cost in per_alter:
        edges = HIST_EDGES
        idx = next((i for i in range(len(edges) - 1) if edges[i] <= cost < edges[i + 1]), len(edges) - 1)
        counts[(n, arm, idx)] += 1
    table = []
    for n, arm in sorted({(k[0], k[1]) for k in counts}):
        for i, lo in enumerate(HIST_EDGES):
            hi = HIST_EDGES[i + 1] if i + 1 < len(HIST_EDGES) else None
            table.append({"n_alters": n, "arm": arm, "bin_lo": lo, "bin_hi": hi, "count": counts[(n, arm, i)]})
    return table


def network_sizes(base_seed: int, count: int) -> list:
    return [sample_network_size(np.random.default_rng(sub_seed(base_seed + i, STREAM_NETWORK))) for i in range(count)]


def size_histogram(sizes: list, width: int = 10) -> list:
    counts = defaultdict(int)
    for s in sizes:
        counts[(s // width) * width] += 1
    table = [{"bin_lo": lo, "bin_hi": lo + width, "count": counts[lo]} for lo in sorted(counts)]
    p10, p50, p90 = np.percentile(sizes, [10, 50, 90])
    table.append({"bin_lo": "p10/p50/p90", "bin_hi": f"{p10:g}/{p50:g}/{p90:g}", "count": len(sizes)})
    return table


def summarize(rows: list, per_alter: Optional[list] = None, sizes: Optional[list] = None,
              beta: float = DEFAULT_BETA) -> dict:
    """Figure-ready aggregate tables keyed by output name."""
    if not rows:
        raise ValueError("no rows to summarize")
    pairs = pair_rows(rows)
    tables = {
        "fig8_conflicts": _by_axis(pairs, "conflict_density"),
        "fig10a_deadline": _by_axis(pairs, "deadline_frac"),
        "fig10b_avatar_time": _by_axis(pairs, "y_frac"),
        "fig10c_gamma": _by_axis(pairs, "gamma"),
        "findings": dominance_findings(pairs, beta),
    }
    if per_alter:
        tables["fig9_per_alter_cost"] = cost_histogram(per_alter)
    if sizes:
        tables["fig7_sizes"] = size_histogram(sizes)
    return tables


def write_outputs(out_dir, rows: list, per_alter: list, tables: dict) -> list:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc}") from exc
    written = []
    write_csv(out_dir / "rows.csv", rows_csv(rows))
    written.append(out_dir / "rows.csv")
    if per_alter:
        text = rows_csv(
            [dict(zip(("run_id", "arm", "n_alters", "alter_id", "cost_days"), t)) for t in per_alter]
        )
        write_csv(out_dir / "per_alter_costs.csv", text)
        written.append(out_dir / "per_alter_costs.csv")
    for name, table in tables.items():
        header = FINDING_FIELDS if name == "findings" else None
        write_csv(out_dir / f"{name}.csv", rows_csv(table, header))
        written.append(out_dir / f"{name}.csv")
    return written


def fig3_network(n_alters: int = 117, baseline: float = 1288.0, seed: int = 0) -> EgoNetwork:
    """Generated network rescaled to a given baseline capacity."""
    net = generate_ego_network(seed, size_override=n_alters, jitter=False)
    scale = baseline / net.baseline_capacity
    return EgoNetwork.from_demands([d * scale for d in net.demands])


def fig3_curve(
    network: EgoNetwork,
    y_fracs=(0.5, 1.0, 1.5),
    gammas=None,
    beta: float = 1.29,
    z_max: float = 300.0,
) -> list:
    """Spare time against gamma, one curve per avatar budget fraction."""
    if gammas is None:
        gammas = [round(0.01 * i, 2) for i in range(1, 78)] + [1.0 / beta]
    table = []
    for yf in y_fracs:
        for g in gammas:
            p = ModelParams(beta=beta, z_max=z_max).with_gamma(g)
            p = p.replace(avatar_budget_Y=yf * network.baseline_capacity)
            alloc = solve_allocation(network, p)
            table.append(
                {"y_frac": yf, "gamma": g, "ysum": alloc.Ysum, "spare_time_hours": spare_time(alloc, network, p)}
            )
    return table
