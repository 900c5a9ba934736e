"""Shared domain types and instance validation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

DEFAULT_BETA = 1.29
DEFAULT_COMPRESSION = 0.54
DEFAULT_CUE_DELTA = 7 / 6
DEFAULT_Z_MAX = 304.0
DEFAULT_SLOT_HOURS = 8.0
DEFAULT_HORIZON = 364

GAMMA_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when a parameter or instance field is out of range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class Violation(NamedTuple):
    """One failed constraint; ``residual`` is the amount by which it is exceeded."""

    constraint: str
    residual: float
    detail: str


class Layer(str, enum.Enum):
    SUPPORT = "support"
    SYMPATHY = "sympathy"
    ACTIVE = "active"


def derive_gamma(compression_c: float, cue_delta: float) -> float:
    """Debriefing efficiency as the product of compression ratio and cue efficiency."""
    if not (0.0 < compression_c <= 1.0):
        raise ValidationError("compression_c", f"must lie in (0, 1], got {compression_c!r}")
    if not cue_delta > 0.0:
        raise ValidationError("cue_delta", f"must be positive, got {cue_delta!r}")
    return compression_c * cue_delta


@dataclass(frozen=True)
class ModelParams:
    """Scalar model constants, all times in hours and days as integer indices.

    ``gamma`` may be given directly or derived from ``compression_c`` and
    ``cue_delta``. Use :meth:`with_gamma` to pin gamma and drop the factors.
    ``x_prime=None`` means the actual capacity equals the paired network's
    baseline capacity.
    """

    beta: float = DEFAULT_BETA
    compression_c: Optional[float] = DEFAULT_COMPRESSION
    cue_delta: Optional[float] = DEFAULT_CUE_DELTA
    gamma: Optional[float] = None
    avatar_budget_Y: float = 0.0
    z_max: float = DEFAULT_Z_MAX
    slot_hours: float = DEFAULT_SLOT_HOURS
    horizon_k: int = DEFAULT_HORIZON
    x_prime: Optional[float] = None
    # per-alter override hook; shipped solvers reject it
    beta_per_alter: Optional[tuple] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("beta", f"must be positive, got {self.beta!r}")
        has_factors = self.compression_c is not None and self.cue_delta is not None
        if (self.compression_c is None) != (self.cue_delta is None):
            raise ValidationError("compression_c", "compression_c and cue_delta must be given together")
        if has_factors:
            derived = derive_gamma(self.compression_c, self.cue_delta)
            if self.gamma is None:
                object.__setattr__(self, "gamma", derived)
            elif abs(self.gamma - derived) > GAMMA_TOL:
                raise ValidationError(
                    "gamma", f"{self.gamma!r} disagrees with compression_c*cue_delta={derived!r}"
                )
        elif self.gamma is None:
            raise ValidationError("gamma", "either gamma or (compression_c, cue_delta) is required")
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError("gamma", f"must lie in (0, 1], got {self.gamma!r}")
        if self.avatar_budget_Y < 0:
            raise ValidationError("avatar_budget_Y", "must be >= 0")
        if self.z_max < 0:
            raise ValidationError("z_max", "must be >= 0")
        if not self.slot_hours > 0:
            raise ValidationError("slot_hours", "must be > 0")
        if int(self.horizon_k) != self.horizon_k or self.horizon_k < 1:
            raise ValidationError("horizon_k", "must be an integer >= 1")
        if self.x_prime is not None and self.x_prime < 0:
            raise ValidationError("x_prime", "must be >= 0")

    def with_gamma(self, gamma: float) -> "ModelParams":
        return replace(self, gamma=gamma, compression_c=None, cue_delta=None)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def capacity(self, network: "EgoNetwork") -> float:
        """Actual socialization capacity for ``network``."""
        return network.baseline_capacity if self.x_prime is None else self.x_prime


@dataclass(frozen=True)
class Alter:
    id: int
    layer: Layer
    annual_demand: float

    def __post_init__(self):
        if not self.annual_demand > 0:
            raise ValidationError("annual_demand", f"alter {self.id} has non-positive demand")


@dataclass(frozen=True)
class EgoNetwork:
    alters: tuple
    baseline_capacity: float = field(init=False)

    def __post_init__(self):
        alters = tuple(self.alters)
        object.__setattr__(self, "alters", alters)
        ids = [a.id for a in alters]
        if len(set(ids)) != len(ids):
            raise ValidationError("alters", "alter ids must be unique")
        object.__setattr__(self, "baseline_capacity", math.fsum(a.annual_demand for a in alters))

    @classmethod
    def from_demands(cls, demands: Sequence[float], layer: Layer = Layer.ACTIVE) -> "EgoNetwork":
        return cls(tuple(Alter(i, layer, float(d)) for i, d in enumerate(demands)))

    def __len__(self) -> int:
        return len(self.alters)

    @property
    def n(self) -> int:
        return len(self.alters)

    @property
    def demands(self) -> list:
        return [a.annual_demand for a in self.alters]

    def layer_sizes(self) -> dict:
        sizes = {layer: 0 for layer in Layer}
        for a in self.alters:
            sizes[a.layer] += 1
        return sizes


@dataclass(frozen=True)
class ConflictGraph:
    n: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        # normalize to sorted pairs; keep malformed ones so validate_instance can report them
        object.__setattr__(self, "edges", frozenset(tuple(sorted(e)) for e in self.edges))

    def neighbours(self) -> list:
        adj = [set() for _ in range(self.n)]
        for i, j in self.edges:
            if i != j and 0 <= i < self.n and 0 <= j < self.n:
                adj[i].add(j)
                adj[j].add(i)
        return adj

    def conflicts(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def without_edges(self) -> "ConflictGraph":
        return ConflictGraph(self.n, frozenset())


def validate_instance(network: EgoNetwork, conflicts: ConflictGraph, params: ModelParams) -> list:
    """Return a list of human-readable violations; empty means the instance is usable."""
    report = []
    baseline = network.baseline_capacity
    if params.x_prime is not None and params.x_prime > baseline * (1 + 1e-12):
        report.append(f"capacity exceeds baseline: x_prime={params.x_prime} > X~={baseline}")
    if params.avatar_budget_Y < 0:
        report.append("negative avatar budget")
    if params.z_max < 0:
        report.append("negative z_max")
    if conflicts.n != network.n:
        report.append(f"conflict graph size {conflicts.n} != network size {network.n}")
    max_edges = conflicts.n * (conflicts.n - 1) // 2
    for i, j in sorted(conflicts.edges):
        if i == j:
            report.append(f"self-loop on alter {i}")
        elif i < 0 or j >= conflicts.n:
            report.append(f"edge ({i}, {j}) out of range for n={conflicts.n}")
    if len(conflicts.edges) > max_edges:
        report.append(f"too many edges: {len(conflicts.edges)} > {max_edges}")
    ids = sorted(a.id for a in network.alters)
    if ids != list(range(network.n)):
        report.append("alter ids must be 0..n-1")
    return report
