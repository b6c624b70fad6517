"""Synthetic hourly load and PV profiles, normalized to a daily energy budget.

Randomness comes only from ``numpy.random.default_rng(seed)`` (PCG64); each
generator call builds its own instance, so there is no global RNG state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError, ProfileFormatError

DAILY_ENERGY_KWH = 16.0
BASE_LOAD_SHARE = 0.30

Kind = Literal["load", "pv"]


@dataclass(frozen=True)
class EnergyProfile:
    values: np.ndarray
    building_id: int
    kind: Kind

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise InvalidArgumentError("profile values must be one-dimensional")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidArgumentError(
                f"{self.kind} profile of building {self.building_id} has negative or non-finite values"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, EnergyProfile):
            return NotImplemented
        return (
            self.building_id == other.building_id
            and self.kind == other.kind
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def mean_daily(self, steps_per_day: int = 24) -> float:
        return float(self.values.sum()) / (len(self.values) / steps_per_day)


@dataclass(frozen=True)
class ProfileSet:
    loads: tuple[EnergyProfile, ...]
    pv: tuple[EnergyProfile, ...]
    steps_per_day: int = 24

    def __post_init__(self):
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "pv", tuple(self.pv))
        if not self.loads or len(self.loads) != len(self.pv):
            raise InvalidArgumentError("need one load and one PV profile per building")
        lengths = {len(p) for p in self.loads + self.pv}
        if len(lengths) != 1:
            raise InvalidArgumentError(f"profiles have differing lengths {sorted(lengths)}")
        (n,) = lengths
        if n == 0 or n % self.steps_per_day:
            raise InvalidArgumentError(
                f"profile length {n} is not a whole number of {self.steps_per_day}-step days"
            )

    @property
    def num_buildings(self) -> int:
        return len(self.loads)

    @property
    def n_steps(self) -> int:
        return len(self.loads[0])

    @property
    def days(self) -> int:
        return self.n_steps // self.steps_per_day

    def load_matrix(self) -> np.ndarray:
        """Loads as a C-contiguous (steps, buildings) array."""
        return np.ascontiguousarray(np.column_stack([p.values for p in self.loads]))

    def pv_matrix(self) -> np.ndarray:
        return np.ascontiguousarray(np.column_stack([p.values for p in self.pv]))

    def truncated(self, days: int) -> "ProfileSet":
        n = days * self.steps_per_day
        if days < 1 or n > self.n_steps:
            raise InvalidArgumentError(f"cannot truncate {self.days} days to {days}")
        cut = lambda ps: tuple(EnergyProfile(p.values[:n], p.building_id, p.kind) for p in ps)
        return ProfileSet(cut(self.loads), cut(self.pv), self.steps_per_day)


def _check_dims(num_buildings: int, days: int, steps_per_day: int):
    if days < 1:
        raise InvalidArgumentError("days must be >= 1")
    if num_buildings < 1:
        raise InvalidArgumentError("num_buildings must be >= 1")
    if steps_per_day < 1:
        raise InvalidArgumentError("steps_per_day must be >= 1")


def _hours(steps_per_day: int) -> np.ndarray:
    # Mid-step hour of day.
    width = 24.0 / steps_per_day
    return (np.arange(steps_per_day) + 0.5) * width


def _bump(hours: np.ndarray, centre: float, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((hours - centre) / width) ** 2)


def normalize(profile: EnergyProfile, target_daily_kwh: float = DAILY_ENERGY_KWH,
              steps_per_day: int = 24) -> EnergyProfile:
    """Scale ``profile`` so its mean daily energy equals ``target_daily_kwh``."""
    values = profile.values
    if len(values) % steps_per_day:
        raise InvalidArgumentError("profile length is not a whole number of days")
    total = float(values.sum())
    if total <= 0.0:
        raise DegenerateInputError(
            f"{profile.kind} profile of building {profile.building_id} has zero total energy"
        )
    days = len(values) // steps_per_day
    target = target_daily_kwh * days
    if total == target:
        return profile
    return EnergyProfile(values * (target / total), profile.building_id, profile.kind)


def generate_loads(seed: int, num_buildings: int = 6, days: int = 30, steps_per_day: int = 24,
                   daily_kwh: float = DAILY_ENERGY_KWH) -> tuple[EnergyProfile, ...]:
    """Household loads: flat base plus morning and evening peaks.

    The base carries 30% of each day's energy. Peak heights, and slightly
    the peak times, vary per (building, day).
    """
    _check_dims(num_buildings, days, steps_per_day)
    rng = np.random.default_rng(seed)
    hours = _hours(steps_per_day)
    profiles = []
    for b in range(num_buildings):
        morning_centre = 7.5 + rng.uniform(-0.75, 0.75)
        evening_centre = 19.5 + rng.uniform(-1.0, 1.0)
        morning_weight = rng.uniform(0.3, 0.5)
        days_out = []
        for _ in range(days):
            peaks = (
                morning_weight * rng.uniform(0.7, 1.3) * _bump(hours, morning_centre + rng.normal(0, 0.25), 1.0)
                + (1 - morning_weight) * rng.uniform(0.7, 1.3) * _bump(hours, evening_centre + rng.normal(0, 0.25), 1.6)
            )
            peaks *= (1 - BASE_LOAD_SHARE) / peaks.sum()
            day = BASE_LOAD_SHARE / steps_per_day + peaks
            days_out.append(day * rng.uniform(0.8, 1.2))
        raw = EnergyProfile(np.concatenate(days_out), b, "load")
        profiles.append(normalize(raw, daily_kwh, steps_per_day))
    return tuple(profiles)


def generate_pv(seed: int, num_buildings: int = 6, days: int = 30, steps_per_day: int = 24,
                daily_kwh: float = DAILY_ENERGY_KWH) -> tuple[EnergyProfile, ...]:
    """One PV curve (half-cosine from 06:00 to 18:00), copied to every building."""
    _check_dims(num_buildings, days, steps_per_day)
    rng = np.random.default_rng(seed)
    hours = _hours(steps_per_day)
    shape = np.where((hours > 6.0) & (hours < 18.0), np.sin(np.pi * (hours - 6.0) / 12.0), 0.0)
    amplitude = rng.uniform(0.3, 1.3, size=days)
    raw = EnergyProfile(np.concatenate([a * shape for a in amplitude]), 0, "pv")
    values = normalize(raw, daily_kwh, steps_per_day).values
    return tuple(EnergyProfile(values, b, "pv") for b in range(num_buildings))


def default_profiles(seed: int = 42, num_buildings: int = 6, days: int = 30,
                     steps_per_day: int = 24) -> ProfileSet:
    """Loads from ``seed`` and PV from ``seed + 1``."""
    return ProfileSet(
        generate_loads(seed, num_buildings, days, steps_per_day),
        generate_pv(seed + 1, num_buildings, days, steps_per_day),
        steps_per_day,
    )


CSV_FIELDS = ("building_id", "step_index", "kind", "kwh")


def export_csv(profiles: ProfileSet, path) -> None:
    # repr-precision floats so import_csv(export_csv(s)) is exact.
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for kind, group in (("load", profiles.loads), ("pv", profiles.pv)):
            for p in group:
                for k, v in enumerate(p.values):
                    writer.writerow((p.building_id, k, kind, repr(float(v))))


def import_csv(path, steps_per_day: int = 24) -> ProfileSet:
    path = Path(path)
    series: dict[tuple[str, int], dict[int, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_FIELDS:
            raise ProfileFormatError(f"header must be {','.join(CSV_FIELDS)}", row=1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ProfileFormatError(f"expected 4 columns, got {len(row)}", row=row_no)
            try:
                building, step, kind, kwh = int(row[0]), int(row[1]), row[2].strip(), float(row[3])
            except ValueError as exc:
                raise ProfileFormatError(str(exc), row=row_no) from None
            if kind not in ("load", "pv"):
                raise ProfileFormatError(f"kind must be 'load' or 'pv', got {kind!r}", row=row_no)
            if kwh < 0 or not np.isfinite(kwh):
                raise ProfileFormatError(f"kwh must be non-negative, got {row[3]}", row=row_no)
            if building < 0 or step < 0:
                raise ProfileFormatError("building_id and step_index must be >= 0", row=row_no)
            steps = series.setdefault((kind, building), {})
            if step in steps:
                raise ProfileFormatError(f"duplicate step {step} for {kind} of building {building}", row=row_no)
            steps[step] = kwh

    buildings = sorted({b for _, b in series})
    if not buildings:
        raise ProfileFormatError("no data rows")
    if buildings != list(range(len(buildings))):
        raise ProfileFormatError(f"building ids must be 0..N-1, got {buildings}")
    out: dict[str, list[EnergyProfile]] = {"load": [], "pv": []}
    lengths = {}
    for kind in ("load", "pv"):
        for b in buildings:
            steps = series.get((kind, b))
            if steps is None:
                raise ProfileFormatError(f"building {b} has no {kind} rows")
            n = max(steps) + 1
            missing = sorted(set(range(n)) - set(steps))
            if missing:
                raise ProfileFormatError(f"{kind} of building {b} is missing steps starting at {missing[0]}")
            lengths[(kind, b)] = n
            out[kind].append(EnergyProfile(np.array([steps[k] for k in range(n)]), b, kind))
    if len(set(lengths.values())) != 1:
        detail = ", ".join(f"{k}[{b}]={n}" for (k, b), n in sorted(lengths.items()))
        raise ProfileFormatError(f"ragged lengths across buildings: {detail}")
    try:
        return ProfileSet(tuple(out["load"]), tuple(out["pv"]), steps_per_day)
    except InvalidArgumentError as exc:
        raise ProfileFormatError(str(exc)) from None
