"""Report containers, JSON helpers and the seeded chunk machinery shared by the samplers."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .means import INF

SCHEMA = "uconvex/1"

#: rows per independently seeded random stream; fixed so results do not depend on threading
CHUNK = 4096


@dataclass
class CheckReport:
    """Outcome of a randomized property check.

    ``worst`` is the largest observed violation magnitude (negative when the
    inequality held with slack everywhere); it is reported even on a pass.
    """

    property: str
    samples: int
    violations: int
    worst: float
    witness: Any = None
    p: Any = None
    tolerance: float = 1e-9
    details: dict = field(default_factory=dict)
    passed: bool | None = None

    def __post_init__(self):
        if self.passed is None:
            self.passed = self.violations == 0

    def to_dict(self):
        return {
            "property": self.property,
            "p": _plain(self.p),
            "samples": int(self.samples),
            "violations": int(self.violations),
            "worst": _plain(self.worst),
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
            "witness": _plain(self.witness),
            "details": _plain(self.details),
        }

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.property}: samples={self.samples} violations={self.violations} worst={self.worst:.3e}"


def _plain(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if obj is INF:
        return "inf"
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return str(obj)


def dumps(payload):
    """Deterministic JSON text with the schema tag in front."""
    body = {"schema": SCHEMA}
    body.update(_plain(payload))
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def chunk_rng(seed, *key):
    """Generator for stream ``key``; identical for a given ``(seed, key)`` no matter who draws it."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def map_ordered(fn, items, threads=1):
    """``list(map(fn, items))``, optionally on a thread pool; output order is input order."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
