"""Actions, scenario presets and ranking helpers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvariantViolation


class Action(IntEnum):
    DO_NO_MORE_ACTIVITY = 1
    OWN_PV_TO_OWN_LOADS = 2
    OWN_PV_TO_OWN_STORAGE = 3
    OWN_STORAGE_TO_OWN_LOADS = 4
    OWN_PV_TO_GRID = 5
    GRID_TO_OWN_LOADS = 6
    OWN_PV_TO_NEIGHBOUR_LOADS = 7
    NEIGHBOUR_PV_TO_OWN_LOADS = 8
    OWN_PV_TO_NEIGHBOUR_STORAGE = 9
    NEIGHBOUR_PV_TO_OWN_STORAGE = 10
    OWN_STORAGE_TO_NEIGHBOUR_LOADS = 11
    NEIGHBOUR_STORAGE_TO_OWN_LOADS = 12
    OWN_STORAGE_TO_GRID = 13
    GRID_TO_OWN_STORAGE = 14


TERMINATOR = Action.DO_NO_MORE_ACTIVITY

# (source, sink) per action; the terminator moves nothing.
ACTION_ROUTES: dict[Action, tuple[str, str] | None] = {
    Action.DO_NO_MORE_ACTIVITY: None,
    Action.OWN_PV_TO_OWN_LOADS: ("own_pv", "own_loads"),
    Action.OWN_PV_TO_OWN_STORAGE: ("own_pv", "own_storage"),
    Action.OWN_STORAGE_TO_OWN_LOADS: ("own_storage", "own_loads"),
    Action.OWN_PV_TO_GRID: ("own_pv", "grid"),
    Action.GRID_TO_OWN_LOADS: ("grid", "own_loads"),
    Action.OWN_PV_TO_NEIGHBOUR_LOADS: ("own_pv", "neighbour_loads"),
    Action.NEIGHBOUR_PV_TO_OWN_LOADS: ("neighbour_pv", "own_loads"),
    Action.OWN_PV_TO_NEIGHBOUR_STORAGE: ("own_pv", "neighbour_storage"),
    Action.NEIGHBOUR_PV_TO_OWN_STORAGE: ("neighbour_pv", "own_storage"),
    Action.OWN_STORAGE_TO_NEIGHBOUR_LOADS: ("own_storage", "neighbour_loads"),
    Action.NEIGHBOUR_STORAGE_TO_OWN_LOADS: ("neighbour_storage", "own_loads"),
    Action.OWN_STORAGE_TO_GRID: ("own_storage", "grid"),
    Action.GRID_TO_OWN_STORAGE: ("grid", "own_storage"),
}

STORAGE_ACTIONS = frozenset({3, 4, 9, 10, 11, 12, 13, 14})

_BASE = (1, 2, 5, 6)
_NEIGHBOUR_PV = (7, 8)
_OWN_STORAGE = (3, 4)
_NEIGHBOUR_STORAGE = (9, 10, 11, 12)
_GRID_STORAGE = (13, 14)

PRESET_ACTIONS: dict[str, frozenset[int]] = {
    "1": frozenset(_BASE),
    "2": frozenset(_BASE + _NEIGHBOUR_PV),
    "3a": frozenset(_BASE + _OWN_STORAGE),
    "3b": frozenset(_BASE + _OWN_STORAGE + _GRID_STORAGE),
    "4a": frozenset(_BASE + _OWN_STORAGE + _NEIGHBOUR_PV),
    "4b": frozenset(_BASE + _OWN_STORAGE + _NEIGHBOUR_PV + _GRID_STORAGE),
    "5a": frozenset(_BASE + _OWN_STORAGE + _NEIGHBOUR_PV + _NEIGHBOUR_STORAGE),
    "5b": frozenset(range(1, 15)),
}
SCENARIO_IDS: tuple[str, ...] = tuple(PRESET_ACTIONS)

DEFAULT_STORAGE_KWH = 16.0
DEFAULT_BUILDINGS = 6
DEFAULT_DAYS = 30
DEFAULT_STEPS_PER_DAY = 24


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: str
    selectable_actions: frozenset[int]
    num_buildings: int = DEFAULT_BUILDINGS
    storage_capacity_kwh: float = DEFAULT_STORAGE_KWH
    horizon_days: int = DEFAULT_DAYS
    steps_per_day: int = DEFAULT_STEPS_PER_DAY

    def __post_init__(self):
        actions = frozenset(int(a) for a in self.selectable_actions)
        object.__setattr__(self, "selectable_actions", actions)
        bad = sorted(a for a in actions if not 1 <= a <= 14)
        if bad:
            raise InvalidArgumentError(f"unknown action ids {bad}")
        if 1 not in actions or 2 not in actions:
            raise InvalidArgumentError("selectable actions must include 1 and 2")
        if self.storage_capacity_kwh < 0:
            raise InvalidArgumentError("storage_capacity_kwh must be >= 0")
        if self.storage_capacity_kwh == 0 and actions & STORAGE_ACTIONS:
            raise InvalidArgumentError(
                f"storage actions {sorted(actions & STORAGE_ACTIONS)} need a non-zero storage capacity"
            )
        if self.num_buildings < 1:
            raise InvalidArgumentError("num_buildings must be >= 1")
        if self.horizon_days < 1 or self.steps_per_day < 1:
            raise InvalidArgumentError("horizon_days and steps_per_day must be >= 1")

    @property
    def actions(self) -> tuple[int, ...]:
        """Selectable actions in ascending id order."""
        return tuple(sorted(self.selectable_actions))

    @property
    def n_actions(self) -> int:
        return len(self.selectable_actions)

    @property
    def n_steps(self) -> int:
        return self.horizon_days * self.steps_per_day

    def with_overrides(self, **changes) -> "ScenarioSpec":
        return replace(self, **changes)


def scenario_preset(scenario_id: str, **overrides) -> ScenarioSpec:
    """Build one of the eight benchmark scenarios.

    Keyword overrides (``horizon_days``, ``num_buildings``, ...) are applied on
    top of the preset; storage defaults to 0 kWh for scenarios 1 and 2.
    """
    label = str(scenario_id).strip().lower()
    if label not in PRESET_ACTIONS:
        raise InvalidArgumentError(
            f"unknown scenario {scenario_id!r}; expected one of {', '.join(SCENARIO_IDS)}"
        )
    actions = PRESET_ACTIONS[label]
    storage = DEFAULT_STORAGE_KWH if actions & STORAGE_ACTIONS else 0.0
    kwargs = dict(storage_capacity_kwh=storage)
    kwargs.update(overrides)
    return ScenarioSpec(label, actions, **kwargs)


def effective_prefix(ranking: Sequence[int]) -> tuple[int, ...]:
    """Actions ranked strictly before the terminator."""
    ranking = tuple(int(a) for a in ranking)
    try:
        cut = ranking.index(TERMINATOR)
    except ValueError:
        raise InvariantViolation(f"ranking {list(ranking)} has no terminator (action 1)") from None
    return ranking[:cut]


@dataclass(frozen=True)
class Violation:
    kind: str  # "duplicate" | "foreign" | "missing"
    action: int

    def __str__(self):
        return f"{self.kind}({self.action})"


def validate_ranking(ranking: Iterable[int], spec: ScenarioSpec) -> list[Violation]:
    """Every way ``ranking`` fails to be a permutation of the spec's actions.

    An empty list means the ranking is valid. A missing terminator is
    reported as ``missing(1)`` alongside other missing actions.
    """
    ranking = [int(a) for a in ranking]
    violations = []
    seen = set()
    for a in ranking:
        if a not in spec.selectable_actions:
            violations.append(Violation("foreign", a))
        elif a in seen:
            violations.append(Violation("duplicate", a))
        seen.add(a)
    for a in spec.actions:
        if a not in seen:
            violations.append(Violation("missing", a))
    return violations


def check_ranking(ranking: Iterable[int], spec: ScenarioSpec) -> tuple[int, ...]:
    ranking = tuple(int(a) for a in ranking)
    violations = validate_ranking(ranking, spec)
    if violations:
        raise InvalidArgumentError(
            f"invalid ranking {list(ranking)} for scenario {spec.scenario_id}: "
            + ", ".join(map(str, violations))
        )
    return ranking


@dataclass
class NeighbourhoodState:
    """State of charge per building, in kWh, and the part of it that came from PV.

    ``soc_pv_kwh`` defaults to ``soc_kwh``: energy already stored at the start
    counts as PV energy.
    """

    soc_kwh: np.ndarray = field(default_factory=lambda: np.zeros(DEFAULT_BUILDINGS))
    soc_pv_kwh: np.ndarray | None = None

    def __post_init__(self):
        self.soc_kwh = np.array(self.soc_kwh, dtype=float).reshape(-1)
        if self.soc_pv_kwh is None:
            self.soc_pv_kwh = self.soc_kwh.copy()
        else:
            self.soc_pv_kwh = np.array(self.soc_pv_kwh, dtype=float).reshape(-1)
        if self.soc_pv_kwh.shape != self.soc_kwh.shape:
            raise InvalidArgumentError("soc_pv_kwh needs one value per building")
        if np.any(self.soc_kwh < 0) or np.any(self.soc_pv_kwh < 0) or np.any(self.soc_pv_kwh > self.soc_kwh):
            raise InvalidArgumentError("need 0 <= soc_pv_kwh <= soc_kwh")

    @classmethod
    def empty(cls, num_buildings: int) -> "NeighbourhoodState":
        return cls(np.zeros(num_buildings))

    @property
    def num_buildings(self) -> int:
        return len(self.soc_kwh)

    def copy(self) -> "NeighbourhoodState":
        return NeighbourhoodState(self.soc_kwh.copy(), self.soc_pv_kwh.copy())
