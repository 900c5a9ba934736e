"""Seeded generation of layered ego networks and conflict graphs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Optional, Union

import numpy as np

from .core import Alter, ConflictGraph, EgoNetwork, Layer, ValidationError

LAYERS = (Layer.SUPPORT, Layer.SYMPATHY, Layer.ACTIVE)

# target network-size quantiles (p10, p50, p90) and truncation range
SIZE_QUANTILES = (68.0, 126.0, 170.0)
SIZE_BOUNDS = (20, 250)
DEMAND_JITTER_SIGMA = 0.25

_Z90 = NormalDist().inv_cdf(0.9)


@dataclass(frozen=True)
class LayerStats:
    cumulative_size_means: tuple = (4.6, 14.3, 132.5)
    per_alter_hours: tuple = (74.0, 38.72, 8.81)

    def __post_init__(self):
        sizes, hours = self.cumulative_size_means, self.per_alter_hours
        if len(sizes) != 3 or len(hours) != 3:
            raise ValidationError("LayerStats", "exactly three layers are modelled")
        if not all(a < b for a, b in zip(sizes, sizes[1:])) or sizes[0] <= 0:
            raise ValidationError("cumulative_size_means", "must be positive and strictly increasing")
        if not all(a > b for a, b in zip(hours, hours[1:])) or hours[-1] <= 0:
            raise ValidationError("per_alter_hours", "must be positive and strictly decreasing")

    @property
    def marginal_sizes(self) -> tuple:
        c = self.cumulative_size_means
        return (c[0], c[1] - c[0], c[2] - c[1])

    def expected_capacity(self) -> float:
        return math.fsum(s * h for s, h in zip(self.marginal_sizes, self.per_alter_hours))


def layer_partition(n: int, stats: LayerStats = LayerStats()) -> tuple:
    """Split ``n`` alters over the marginal layers by largest remainder.

    Every layer receives at least one alter once ``n >= 3``.
    """
    marginal = stats.marginal_sizes
    total = sum(marginal)
    quotas = [n * m / total for m in marginal]
    counts = [int(math.floor(q)) for q in quotas]
    order = sorted(range(3), key=lambda i: (-(quotas[i] - counts[i]), -i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    if n >= 3:
        for i in range(3):
            while counts[i] == 0:
                donor = max(range(3), key=lambda j: counts[j])
                counts[donor] -= 1
                counts[i] += 1
    return tuple(counts)


def sample_network_size(rng: np.random.Generator) -> int:
    """Draw a network size from a two-piece lognormal hitting the target quantiles."""
    p10, p50, p90 = SIZE_QUANTILES
    z = rng.standard_normal()
    sigma = math.log(p50 / p10) / _Z90 if z < 0 else math.log(p90 / p50) / _Z90
    size = int(round(p50 * math.exp(sigma * z)))
    return min(max(size, SIZE_BOUNDS[0]), SIZE_BOUNDS[1])


def generate_ego_network(
    seed: int,
    stats: LayerStats = LayerStats(),
    size_override: Optional[int] = None,
    jitter: bool = True,
    jitter_sigma: float = DEMAND_JITTER_SIGMA,
) -> EgoNetwork:
    if size_override is not None and size_override < 3:
        raise ValidationError("size_override", f"must be >= 3, got {size_override}")
    rng = np.random.default_rng(seed)
    n = sample_network_size(rng) if size_override is None else int(size_override)
    counts = layer_partition(n, stats)

    alters = []
    for layer, count, mean in zip(LAYERS, counts, stats.per_alter_hours):
        if jitter:
            # mean-preserving multiplicative noise
            factors = np.exp(jitter_sigma * rng.standard_normal(count) - 0.5 * jitter_sigma**2)
        else:
            factors = np.ones(count)
        for f in factors:
            alters.append(Alter(len(alters), layer, float(mean * f)))
    return EgoNetwork(tuple(alters))


def generate_conflict_graph(seed: int, n: int, density: float) -> ConflictGraph:
    """Uniform random conflict graph with ``round(density * n(n-1)/2)`` edges.

    Edges are a prefix of a seeded permutation of all pairs, so for a fixed
    seed the graph at a lower density is a subgraph of the one at a higher density.
    """
    if not (0.0 <= density <= 1.0):
        raise ValidationError("conflict_density", f"must lie in [0, 1], got {density!r}")
    if n < 1:
        raise ValidationError("n", "must be >= 1")
    n_pairs = n * (n - 1) // 2
    m = int(round(density * n_pairs))
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_pairs)[:m]
    iu, ju = np.triu_indices(n, k=1)
    edges = frozenset((int(iu[p]), int(ju[p])) for p in order)
    return ConflictGraph(n, edges)


def dumps_instance(network: EgoNetwork, conflicts: ConflictGraph) -> str:
    lines = [f"n={network.n}"]
    for a in network.alters:
        lines.append(f"alter {a.id} {a.layer.value} {a.annual_demand!r}")
    for i, j in sorted(conflicts.edges):
        lines.append(f"edge {i} {j}")
    return "\n".join(lines) + "\n"


def loads_instance(text: str) -> tuple:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("n="):
        raise ValueError("instance text must start with an 'n=<int>' header")
    n = int(lines[0][2:])
    alters, edges = [], set()
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "alter" and len(parts) == 4:
            alters.append(Alter(int(parts[1]), Layer(parts[2]), float(parts[3])))
        elif parts[0] == "edge" and len(parts) == 3:
            edges.add((int(parts[1]), int(parts[2])))
        else:
            raise ValueError(f"unrecognised instance line: {ln!r}")
    if len(alters) != n:
        raise ValueError(f"header says n={n} but {len(alters)} alters were listed")
    return EgoNetwork(tuple(alters)), ConflictGraph(n, frozenset(edges))


def write_instance(path: Union[str, Path], network: EgoNetwork, conflicts: ConflictGraph) -> None:
    Path(path).write_text(dumps_instance(network, conflicts), encoding="utf-8", newline="\n")


def read_instance(path: Union[str, Path]) -> tuple:
    return loads_instance(Path(path).read_text(encoding="utf-8"))
