"""Gated, weighted reciprocal objective over a flow ledger.

A (step, building) cell contributes its four reward values only when its
unmet load and its uncommitted PV are both exactly zero. The gated totals
are averaged per building and day, weighted, summed, and inverted; lower is
better. A zero weighted sum maps to ``+inf``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .dispatch import (
    DIRECT_LOCAL_PV,
    DIRECT_OWN_PV,
    LOCAL_STORAGE,
    NEED,
    OWN_STORAGE_LOADING,
    PV_REMAINING,
    FlowLedger,
)
from .errors import InvalidArgumentError
from .model import ScenarioSpec


@dataclass(frozen=True)
class ObjectiveWeights:
    w1: float = 1000.0  # direct local PV consumption
    w2: float = 100.0  # direct own PV consumption
    w3: float = 10.0  # local storage consumption
    w4: float = 1.0  # own storage loading

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "w4"):
            w = getattr(self, name)
            if not (w > 0 and math.isfinite(w)):
                raise InvalidArgumentError(f"weight {name} must be a positive finite number, got {w}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4])


@dataclass(frozen=True)
class ObjectiveBreakdown:
    avg_direct_local_pv: float
    avg_direct_own_pv: float
    avg_local_storage_consumption: float
    avg_own_storage_loading: float
    gated_step_count: int
    weighted_sum: float
    value: float

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON has no infinity; a null value means "no reward at all".
        if math.isinf(d["value"]):
            d["value"] = None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveBreakdown":
        d = dict(d)
        if d["value"] is None:
            d["value"] = math.inf
        return cls(**d)


@njit(cache=True)
def gated_sums(cells):
    """Gated reward totals and the number of failing cells, in (step, building) order."""
    out = np.zeros(4)
    failed = 0
    for i in range(cells.shape[0]):
        for b in range(cells.shape[1]):
            if cells[i, b, NEED] == 0.0 and cells[i, b, PV_REMAINING] == 0.0:
                out[0] += cells[i, b, DIRECT_LOCAL_PV]
                out[1] += cells[i, b, DIRECT_OWN_PV]
                out[2] += cells[i, b, LOCAL_STORAGE]
                out[3] += cells[i, b, OWN_STORAGE_LOADING]
            else:
                failed += 1
    return out, failed


@njit(cache=True)
def weighted_value(sums, divisor, weights):
    """Return (weighted_sum, value) from raw gated totals."""
    total = 0.0
    for k in range(4):
        total += weights[k] * (sums[k] / divisor)
    if total > 0.0:
        return total, 1.0 / total
    return total, np.inf


def averaging_divisor(spec: ScenarioSpec) -> float:
    return float(spec.horizon_days * spec.num_buildings)


def breakdown_from_sums(sums: np.ndarray, gated_step_count: int, spec: ScenarioSpec,
                        weights: ObjectiveWeights) -> ObjectiveBreakdown:
    divisor = averaging_divisor(spec)
    weighted_sum, value = weighted_value(sums, divisor, weights.as_array())
    avgs = [float(s / divisor) for s in sums]
    return ObjectiveBreakdown(*avgs, int(gated_step_count), float(weighted_sum), float(value))


def evaluate(ledger: FlowLedger, spec: ScenarioSpec,
             weights: ObjectiveWeights = ObjectiveWeights()) -> ObjectiveBreakdown:
    if ledger.num_buildings != spec.num_buildings or ledger.n_steps != spec.n_steps:
        raise InvalidArgumentError(
            f"ledger is {ledger.n_steps}x{ledger.num_buildings}, scenario expects "
            f"{spec.n_steps}x{spec.num_buildings}"
        )
    sums, failed = gated_sums(ledger.cells)
    return breakdown_from_sums(sums, failed, spec, weights)


def compare(a: ObjectiveBreakdown, b: ObjectiveBreakdown) -> int:
    """-1 if ``a`` is better (smaller value), 1 if worse, 0 if equal. ``+inf`` is worst."""
    if a.value < b.value:
        return -1
    if a.value > b.value:
        return 1
    return 0
