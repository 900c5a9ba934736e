import math
import sys

import numpy as np
import pytest

from sparetime.allocator import TimeAllocation
from sparetime.core import ConflictGraph, ModelParams
from sparetime.requests import MaterializedRequest, Mode


def make_request(rid, alter, window, duration, mode=Mode.PHYSICAL, gamma=0.63, beta=1.29):
    debrief = gamma * duration if mode is Mode.AVATAR else 0.0
    presence = duration / beta if mode is Mode.AVATAR else duration
    return MaterializedRequest(rid, alter, mode, duration, debrief, window[0], window[1], presence)


def allocation_for(requests, n, gamma=0.63):
    """Per-alter mode totals implied by a request list."""
    x = [math.fsum(r.duration for r in requests if r.alter_id == v and r.mode is Mode.PHYSICAL) for v in range(n)]
    y = [math.fsum(r.duration for r in requests if r.alter_id == v and r.mode is Mode.AVATAR) for v in range(n)]
    return TimeAllocation(tuple(x), tuple(y), gamma)


def tiny_instance(seed, max_alters=4, max_k=6, max_requests=6):
    """Random instance small enough for exhaustive search."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_alters + 1))
    k = int(rng.integers(2, max_k + 1))
    slot = float(rng.choice([2.0, 3.0, 4.0]))
    params = ModelParams(slot_hours=slot, horizon_k=k, z_max=float(rng.choice([2.0, 100.0])))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = frozenset(p for p in pairs if rng.random() < 0.5)
    reqs = []
    for rid in range(int(rng.integers(1, max_requests + 1))):
        alter = int(rng.integers(0, n))
        start = int(rng.integers(1, k + 1))
        end = int(rng.integers(start, k + 1))
        mode = Mode.AVATAR if rng.random() < 0.35 else Mode.PHYSICAL
        duration = float(rng.integers(1, int(slot) + 1))
        reqs.append(make_request(rid, alter, (start, end), duration, mode, params.gamma, params.beta))
    return reqs, ConflictGraph(n, edges), params, allocation_for(reqs, n, params.gamma)


@pytest.fixture
def default_params():
    return ModelParams()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[num])
