"""Command-line entry point: ``sparetime {gen,run,sweep}``.

Configuration is a flat ``key=value`` file. Precedence, lowest first:
built-in defaults, ``--config`` file, ``SPARETIME_<KEY>`` environment
variables, ``--set key=value`` and dedicated flags.
Exit codes: 0 success, 1 infeasible model, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import allocator, egogen, experiments, requests, scheduler
from .core import ModelParams, ValidationError, validate_instance

ENV_PREFIX = "SPARETIME_"

# key -> (parser, default)
CONFIG_KEYS = {
    "seed": (int, 0),
    "beta": (float, 1.29),
    "gamma": (float, None),
    "c": (float, None),
    "delta": (float, None),
    "z_max_hours": (float, 304.0),
    "slot_hours": (float, 8.0),
    "k_days": (int, 364),
    "y_frac": (float, 1.0),
    "conflict_density": (float, 0.2),
    "deadline_frac": (float, 0.2),
    "network_size": (int, None),
    "repetitions": (int, 10),
    "out_dir": (str, "out"),
}
LIST_KEYS = {"y_frac", "conflict_density", "deadline_frac", "network_size", "gamma"}

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    pass


def parse_config_text(text: str, origin: str = "config") -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value
    return raw


def _convert(key: str, value: str):
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = CONFIG_KEYS[key][0]
    try:
        if key in LIST_KEYS and "," in value:
            return tuple(kind(v.strip()) for v in value.split(",") if v.strip())
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None


def load_config(path=None, overrides=(), environ=None) -> dict:
    environ = os.environ if environ is None else environ
    raw = {}
    if path:
        try:
            raw.update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for key in CONFIG_KEYS:
        env = environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            raw[key] = env
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    cfg = {k: default for k, (_, default) in CONFIG_KEYS.items()}
    for k, v in raw.items():
        cfg[k] = _convert(k, v)
    _check_ranges(cfg)
    return cfg


def _values(cfg: dict, key: str) -> tuple:
    v = cfg[key]
    return v if isinstance(v, tuple) else (v,)


def _scalar(cfg: dict, key: str):
    v = cfg[key]
    if isinstance(v, tuple):
        raise ConfigError(f"{key}: a single value is required here, got a list")
    return v


def _check_ranges(cfg: dict) -> None:
    for d in _values(cfg, "conflict_density"):
        if not 0.0 <= d <= 1.0:
            raise ConfigError(f"conflict_density: must lie in [0, 1], got {d}")
    for d in _values(cfg, "deadline_frac"):
        if not 0.0 < d <= 1.0:
            raise ConfigError(f"deadline_frac: must lie in (0, 1], got {d}")
    for y in _values(cfg, "y_frac"):
        if y < 0:
            raise ConfigError(f"y_frac: must be >= 0, got {y}")
    for n in _values(cfg, "network_size"):
        if n is not None and n < 3:
            raise ConfigError(f"network_size: must be >= 3, got {n}")
    if cfg["repetitions"] < 1:
        raise ConfigError("repetitions: must be >= 1")
    try:
        params_from_config(cfg)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def params_from_config(cfg: dict, gamma=None) -> ModelParams:
    c, delta = cfg["c"], cfg["delta"]
    g = gamma if gamma is not None else cfg["gamma"]
    if isinstance(g, tuple):
        g = g[0]
    kw = dict(beta=cfg["beta"], z_max=cfg["z_max_hours"], slot_hours=cfg["slot_hours"], horizon_k=cfg["k_days"])
    if c is not None or delta is not None:
        return ModelParams(compression_c=c, cue_delta=delta, gamma=g, **kw)
    if g is not None:
        return ModelParams(**kw).with_gamma(g)
    return ModelParams(**kw)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def cmd_gen(cfg: dict, out: Path) -> int:
    seed = cfg["seed"]
    params = params_from_config(cfg)
    size = _scalar(cfg, "network_size")
    network = egogen.generate_ego_network(experiments.sub_seed(seed, experiments.STREAM_NETWORK), size_override=size)
    conflicts = egogen.generate_conflict_graph(
        experiments.sub_seed(seed, experiments.STREAM_CONFLICTS), network.n, _scalar(cfg, "conflict_density")
    )
    skeletons = requests.generate_skeletons(
        experiments.sub_seed(seed, experiments.STREAM_REQUESTS), network, _scalar(cfg, "deadline_frac"), params
    )
    _write(out / "instance.txt", egogen.dumps_instance(network, conflicts))
    _write(out / "skeletons.csv", requests.skeletons_csv(skeletons))
    print(f"wrote {out}/instance.txt ({network.n} alters, {len(conflicts.edges)} conflicts) "
          f"and {out}/skeletons.csv ({len(skeletons)} requests)")
    return EXIT_OK


def cmd_run(cfg: dict, instance_dir: Path, out: Path, arm: str) -> int:
    try:
        network, conflicts = egogen.read_instance(instance_dir / "instance.txt")
        skeletons = requests.read_skeletons_csv((instance_dir / "skeletons.csv").read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read instance: {exc}") from None
    base = params_from_config(cfg)
    problems = validate_instance(network, conflicts, base)
    if problems:
        raise ConfigError("invalid instance: " + "; ".join(problems))
    status = EXIT_OK
    for name in (("A", "nonA") if arm == "both" else (arm,)):
        budget = _scalar(cfg, "y_frac") * network.baseline_capacity if name == "A" else 0.0
        params = replace(base, avatar_budget_Y=budget)
        try:
            alloc = allocator.solve_allocation(network, params)
        except allocator.InfeasibleAllocation as exc:
            print(f"[{name}] infeasible allocation: {exc}", file=sys.stderr)
            status = EXIT_INFEASIBLE
            continue
        reqs = requests.materialize(skeletons, alloc, params)
        sched = scheduler.schedule(reqs, conflicts, params, alloc)
        violations = scheduler.validate_schedule(sched, reqs, conflicts, alloc, params)
        report = scheduler.evaluate(sched, reqs, alloc, network, params)
        k = params.horizon_k
        _write(out / f"allocation_{name}.csv", allocator.allocation_csv(alloc))
        _write(out / f"requests_{name}.csv", requests.requests_csv(reqs))
        _write(out / f"schedule_{name}.csv", scheduler.schedule_csv(sched, reqs, k))
        _write(out / f"summary_{name}.csv", scheduler.summary_csv(report))
        lines = [f"{v.constraint}\t{v.residual!r}\t{v.detail}" for v in violations]
        if sched.unscheduled:
            lines.append("unscheduled\t" + " ".join(map(str, sched.unscheduled)))
        _write(out / f"validation_{name}.txt", "\n".join(lines) + ("\n" if lines else ""))
        print(f"[{name}] cost={report.total_cost} days, spare={report.spare_time:.2f} h, "
              f"year2={report.n_year2}, unscheduled={report.n_unscheduled}, violations={len(violations)}")
        if violations or sched.unscheduled:
            status = EXIT_INFEASIBLE
    return status


PRESETS = {
    "table2": dict(),
    "ci": dict(
        repetitions=2,
        network_sizes=(68,),
        conflict_densities=(0.0, 0.4, 0.8),
        deadline_fracs=(0.2,),
        y_fracs=(0.5, 1.0),
        gammas=(0.2, 0.8),
    ),
}
CI_SIZE_SAMPLES = 1000
TABLE2_SIZE_SAMPLES = 10_000


def sweep_config(cfg: dict, preset: str, explicit: set) -> experiments.SweepConfig:
    kw = dict(PRESETS[preset])
    kw.update(
        base_seed=cfg["seed"], beta=cfg["beta"], z_max=cfg["z_max_hours"],
        slot_hours=cfg["slot_hours"], horizon_k=cfg["k_days"],
    )
    if "repetitions" in explicit:
        kw["repetitions"] = cfg["repetitions"]
    axes = {
        "network_size": "network_sizes", "conflict_density": "conflict_densities",
        "deadline_frac": "deadline_fracs", "y_frac": "y_fracs", "gamma": "gammas",
    }
    for key, attr in axes.items():
        if key in explicit and cfg[key] is not None:
            kw[attr] = _values(cfg, key)
    return experiments.SweepConfig(**kw)


def cmd_sweep(cfg: dict, preset: str, out: Path, jobs: int, explicit: set) -> int:
    if preset == "fig3":
        z = cfg["z_max_hours"] if "z_max_hours" in explicit else 300.0
        net = experiments.fig3_network(seed=cfg["seed"])
        table = experiments.fig3_curve(net, beta=cfg["beta"], z_max=z)
        out.mkdir(parents=True, exist_ok=True)
        experiments.write_csv(out / "fig3_spare_time.csv", experiments.rows_csv(table))
        print(f"wrote {out}/fig3_spare_time.csv ({len(table)} points)")
        return EXIT_OK
    config = sweep_config(cfg, preset, explicit)

    def progress(done, total):
        print(f"\rinstances {done}/{total}", end="", file=sys.stderr, flush=True)

    rows, per_alter = experiments.sweep(config, jobs=jobs, progress=progress)
    print(file=sys.stderr)
    samples = CI_SIZE_SAMPLES if preset == "ci" else TABLE2_SIZE_SAMPLES
    sizes = experiments.network_sizes(config.base_seed, samples)
    tables = experiments.summarize(rows, per_alter, sizes, beta=config.beta)
    written = experiments.write_outputs(out, rows, per_alter, tables)
    for path in written:
        print(f"wrote {path}")
    if tables["findings"]:
        print(f"{len(tables['findings'])} instances where the avatar arm cost more; see findings.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")

    parser = argparse.ArgumentParser(prog="sparetime", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="generate a network, conflict graph and request skeletons")
    run = sub.add_parser("run", parents=[common], help="allocate, schedule, validate and cost an instance")
    run.add_argument("--instance", help="directory holding instance.txt and skeletons.csv (default: --out)")
    run.add_argument("--arm", choices=("A", "nonA", "both"), default="both")
    sw = sub.add_parser("sweep", parents=[common], help="run an experiment campaign")
    sw.add_argument("--preset", choices=("table2", "fig3", "ci"), default="ci")
    sw.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"out_dir={args.out}")
    try:
        cfg = load_config(args.config, overrides)
        explicit = set()
        if args.config:
            explicit |= set(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
        explicit |= {k for k in CONFIG_KEYS if ENV_PREFIX + k.upper() in os.environ}
        explicit |= {o.split("=", 1)[0].strip() for o in overrides}
        out = Path(cfg["out_dir"])
        if args.command == "gen":
            return cmd_gen(cfg, out)
        if args.command == "run":
            return cmd_run(cfg, Path(args.instance) if args.instance else out, out, args.arm)
        return cmd_sweep(cfg, args.preset, out, max(1, args.jobs), explicit)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
