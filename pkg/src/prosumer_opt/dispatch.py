"""Greedy per-timestep execution of an action ranking.

Every action in the effective prefix runs once per step, building by
building in ascending index order, and moves the largest amount the
action's preconditions allow. Pairwise actions scan partners in ascending
index order.

The step kernel is compiled with numba; ``simulate`` records the full
ledger while :func:`gated_reward_sums` runs the same kernel but keeps only
the per-cell values needed by the objective.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .errors import InvalidArgumentError
from .model import NeighbourhoodState, ScenarioSpec, check_ranking, effective_prefix
from .profiles import ProfileSet

SNAP = 1e-12

# Per-(step, building) ledger columns.
NEED = 0  # energy_necessary_to_obtain
PV_REMAINING = 1
DIRECT_LOCAL_PV = 2
DIRECT_OWN_PV = 3
LOCAL_STORAGE = 4
OWN_STORAGE_LOADING = 5
PV_TO_OWN_LOADS = 6
PV_TO_OWN_STORAGE = 7
STORAGE_TO_OWN_LOADS = 8
PV_TO_GRID = 9
GRID_TO_LOADS = 10
STORAGE_TO_GRID = 11
GRID_TO_STORAGE = 12
SOC = 13
SOC_PV = 14  # PV-origin share of SOC
OWN_STORED_PV_TO_LOADS = 15
NEIGHBOUR_STORED_PV_TO_LOADS = 16
N_CELL = 17

CELL_FIELDS = (
    "energy_necessary_to_obtain",
    "pv_energy_remaining",
    "direct_local_pv_consumption",
    "direct_own_pv_consumption",
    "local_storage_consumption",
    "own_storage_loading",
    "pv_to_own_loads",
    "pv_to_own_storage",
    "storage_to_own_loads",
    "pv_to_grid",
    "grid_to_loads",
    "storage_to_grid",
    "grid_to_storage",
    "soc_kwh",
    "soc_pv_kwh",
    "own_stored_pv_to_loads",
    "neighbour_stored_pv_to_loads",
)

# Pairwise channels, indexed [channel, sender, receiver].
PAIR_PV_TO_LOADS = 0
PAIR_PV_TO_STORAGE = 1
PAIR_STORAGE_TO_LOADS = 2
N_PAIR = 3

PAIR_FIELDS = ("pv_to_neighbour_loads", "pv_to_neighbour_storage", "storage_to_neighbour_loads")


@njit(cache=True, inline="always")
def _snap_zero(x):
    return 0.0 if x <= SNAP else x


@njit(cache=True, inline="always")
def _snap_cap(x, cap):
    if x >= cap - SNAP:
        return cap
    return 0.0 if x <= SNAP else x


# Kernels index the (steps, B) inputs with the step ``i`` and the output
# buffers ``cells`` (K, B, N_CELL) / ``pairs`` (K, N_PAIR, B, B) with a slot
# ``c``; slicing per step costs more than the dispatch itself.

@njit(cache=True, inline="always")
def _discharge(s, x, soc, soc_pv, cap):
    # Draws PV-origin and grid-origin energy in proportion; returns the PV part.
    pv_part = x * (soc_pv[s] / soc[s])
    soc[s] = _snap_cap(soc[s] - x, cap)
    soc_pv[s] = min(_snap_zero(soc_pv[s] - pv_part), soc[s])
    return pv_part


@njit(cache=True, inline="always")
def _pv_to_loads(s, r, pv_rem, need, cells, pairs, c):
    x = min(pv_rem[s], need[r])
    if x > 0.0:
        pv_rem[s] = _snap_zero(pv_rem[s] - x)
        need[r] = _snap_zero(need[r] - x)
        pairs[c, PAIR_PV_TO_LOADS, s, r] += x
        cells[c, r, DIRECT_LOCAL_PV] += x


@njit(cache=True, inline="always")
def _pv_to_storage(s, r, pv_rem, soc, soc_pv, cap, cells, pairs, c):
    x = min(pv_rem[s], cap - soc[r])
    if x > 0.0:
        pv_rem[s] = _snap_zero(pv_rem[s] - x)
        soc[r] = _snap_cap(soc[r] + x, cap)
        soc_pv[r] = min(soc_pv[r] + x, soc[r])
        pairs[c, PAIR_PV_TO_STORAGE, s, r] += x
        cells[c, r, OWN_STORAGE_LOADING] += x


@njit(cache=True, inline="always")
def _storage_to_loads(s, r, soc, soc_pv, need, cap, cells, pairs, c):
    x = min(soc[s], need[r])
    if x > 0.0:
        pv_part = _discharge(s, x, soc, soc_pv, cap)
        need[r] = _snap_zero(need[r] - x)
        pairs[c, PAIR_STORAGE_TO_LOADS, s, r] += x
        cells[c, r, LOCAL_STORAGE] += pv_part
        cells[c, r, NEIGHBOUR_STORED_PV_TO_LOADS] += pv_part


@njit(cache=True, inline="always")
def _collect_above(v, floor, out):
    # Indices with v > floor, ascending; resources only shrink within one
    # action, so buildings skipped here could not have moved energy anyway.
    n = 0
    for b in range(v.shape[0]):
        if v[b] > floor:
            out[n] = b
            n += 1
    return n


@njit(cache=True, inline="always")
def _collect_below(v, ceiling, out):
    n = 0
    for b in range(v.shape[0]):
        if v[b] < ceiling:
            out[n] = b
            n += 1
    return n


@njit(cache=True)
def run_kernel(prefix, pv, load, soc, soc_pv, cap, cells, pairs, full):
    """Dispatch every step of ``pv``/``load`` (steps, B) in order.

    ``soc`` and its PV-origin part ``soc_pv`` are updated in place. With
    ``full`` set, step ``i`` writes into ``cells[i]``/``pairs[i]`` (zeroed by
    the caller); otherwise slot 0 is reused and only the gated reward totals
    matter. Returns the four gated totals in (step, building) order.
    """
    nb = pv.shape[1]
    pv_rem = np.empty(nb)
    need = np.empty(nb)
    snd = np.empty(nb, dtype=np.int64)
    rcv = np.empty(nb, dtype=np.int64)
    out = np.zeros(4)
    c = 0
    for i in range(pv.shape[0]):
        if full:
            c = i
        else:
            # Only the reward columns are read back in this mode.
            for b in range(nb):
                cells[0, b, DIRECT_LOCAL_PV] = 0.0
                cells[0, b, DIRECT_OWN_PV] = 0.0
                cells[0, b, LOCAL_STORAGE] = 0.0
                cells[0, b, OWN_STORAGE_LOADING] = 0.0
        for b in range(nb):
            pv_rem[b] = _snap_zero(pv[i, b])
            need[b] = _snap_zero(load[i, b])
        for a in prefix:
            if a == 2:
                for b in range(nb):
                    x = min(pv_rem[b], need[b])
                    if x > 0.0:
                        pv_rem[b] = _snap_zero(pv_rem[b] - x)
                        need[b] = _snap_zero(need[b] - x)
                        cells[c, b, PV_TO_OWN_LOADS] += x
                        cells[c, b, DIRECT_OWN_PV] += x
                        cells[c, b, DIRECT_LOCAL_PV] += x
            elif a == 3:
                for b in range(nb):
                    x = min(pv_rem[b], cap - soc[b])
                    if x > 0.0:
                        pv_rem[b] = _snap_zero(pv_rem[b] - x)
                        soc[b] = _snap_cap(soc[b] + x, cap)
                        soc_pv[b] = min(soc_pv[b] + x, soc[b])
                        cells[c, b, PV_TO_OWN_STORAGE] += x
                        cells[c, b, OWN_STORAGE_LOADING] += x
            elif a == 4:
                for b in range(nb):
                    x = min(soc[b], need[b])
                    if x > 0.0:
                        pv_part = _discharge(b, x, soc, soc_pv, cap)
                        need[b] = _snap_zero(need[b] - x)
                        cells[c, b, STORAGE_TO_OWN_LOADS] += x
                        cells[c, b, LOCAL_STORAGE] += pv_part
                        cells[c, b, OWN_STORED_PV_TO_LOADS] += pv_part
            elif a == 5:
                for b in range(nb):
                    cells[c, b, PV_TO_GRID] += pv_rem[b]
                    pv_rem[b] = 0.0
            elif a == 6:
                for b in range(nb):
                    cells[c, b, GRID_TO_LOADS] += need[b]
                    need[b] = 0.0
            elif a == 7 or a == 8:
                ns = _collect_above(pv_rem, 0.0, snd)
                nr = _collect_above(need, 0.0, rcv)
                if ns == 0 or nr == 0:
                    continue
                if a == 7:
                    for u in range(ns):
                        for v in range(nr):
                            if snd[u] != rcv[v]:
                                _pv_to_loads(snd[u], rcv[v], pv_rem, need, cells, pairs, c)
                                if pv_rem[snd[u]] == 0.0:
                                    break
                else:
                    for v in range(nr):
                        for u in range(ns):
                            if snd[u] != rcv[v]:
                                _pv_to_loads(snd[u], rcv[v], pv_rem, need, cells, pairs, c)
                                if need[rcv[v]] == 0.0:
                                    break
            elif a == 9 or a == 10:
                ns = _collect_above(pv_rem, 0.0, snd)
                nr = _collect_below(soc, cap, rcv)
                if ns == 0 or nr == 0:
                    continue
                if a == 9:
                    for u in range(ns):
                        for v in range(nr):
                            if snd[u] != rcv[v]:
                                _pv_to_storage(snd[u], rcv[v], pv_rem, soc, soc_pv, cap, cells, pairs, c)
                                if pv_rem[snd[u]] == 0.0:
                                    break
                else:
                    for v in range(nr):
                        for u in range(ns):
                            if snd[u] != rcv[v]:
                                _pv_to_storage(snd[u], rcv[v], pv_rem, soc, soc_pv, cap, cells, pairs, c)
                                if soc[rcv[v]] == cap:
                                    break
            elif a == 11 or a == 12:
                ns = _collect_above(soc, 0.0, snd)
                nr = _collect_above(need, 0.0, rcv)
                if ns == 0 or nr == 0:
                    continue
                if a == 11:
                    for u in range(ns):
                        for v in range(nr):
                            if snd[u] != rcv[v]:
                                _storage_to_loads(snd[u], rcv[v], soc, soc_pv, need, cap, cells, pairs, c)
                                if soc[snd[u]] == 0.0:
                                    break
                else:
                    for v in range(nr):
                        for u in range(ns):
                            if snd[u] != rcv[v]:
                                _storage_to_loads(snd[u], rcv[v], soc, soc_pv, need, cap, cells, pairs, c)
                                if need[rcv[v]] == 0.0:
                                    break
            elif a == 13:
                for b in range(nb):
                    cells[c, b, STORAGE_TO_GRID] += soc[b]
                    soc[b] = 0.0
                    soc_pv[b] = 0.0
            elif a == 14:
                for b in range(nb):
                    cells[c, b, GRID_TO_STORAGE] += cap - soc[b]
                    soc[b] = cap
            else:
                break

        for b in range(nb):
            cells[c, b, NEED] = need[b]
            cells[c, b, PV_REMAINING] = pv_rem[b]
            cells[c, b, SOC] = soc[b]
            cells[c, b, SOC_PV] = soc_pv[b]
            if need[b] == 0.0 and pv_rem[b] == 0.0:
                out[0] += cells[c, b, DIRECT_LOCAL_PV]
                out[1] += cells[c, b, DIRECT_OWN_PV]
                out[2] += cells[c, b, LOCAL_STORAGE]
                out[3] += cells[c, b, OWN_STORAGE_LOADING]
    return out


@njit(cache=True)
def gated_reward_sums(prefix, pv, load, soc0, cap):
    """Gated reward totals of a whole run without keeping the ledger.

    Uses the (step, building) summation order of
    :func:`prosumer_opt.objective.gated_sums`, so both routes agree bit for bit.
    """
    nb = pv.shape[1]
    cells = np.zeros((1, nb, N_CELL))
    pairs = np.zeros((1, N_PAIR, nb, nb))
    return run_kernel(prefix, pv, load, soc0.copy(), soc0.copy(), cap, cells, pairs, False)


@dataclass(frozen=True)
class StepFlows:
    """Flows of one timestep. ``cells`` is (B, N_CELL); ``pairs`` is (N_PAIR, B, B)."""

    cells: np.ndarray
    pairs: np.ndarray

    def pv_to_neighbour_loads(self, building: int) -> np.ndarray:
        """Per-partner kWh sent by ``building`` to its neighbours' loads."""
        return self.pairs[PAIR_PV_TO_LOADS, building]

    def pv_from_neighbour_to_loads(self, building: int) -> np.ndarray:
        return self.pairs[PAIR_PV_TO_LOADS, :, building]

    def pv_to_neighbour_storage(self, building: int) -> np.ndarray:
        return self.pairs[PAIR_PV_TO_STORAGE, building]

    def pv_from_neighbour_to_storage(self, building: int) -> np.ndarray:
        return self.pairs[PAIR_PV_TO_STORAGE, :, building]

    def storage_to_neighbour_loads(self, building: int) -> np.ndarray:
        return self.pairs[PAIR_STORAGE_TO_LOADS, building]

    def storage_from_neighbour_to_loads(self, building: int) -> np.ndarray:
        return self.pairs[PAIR_STORAGE_TO_LOADS, :, building]

    def field(self, name: str) -> np.ndarray:
        return self.cells[:, CELL_FIELDS.index(name)]


@dataclass(frozen=True)
class FlowLedger:
    """Full record of a simulation.

    ``cells[i, j, k]`` is ledger column ``k`` (see :data:`CELL_FIELDS`) for
    step ``i`` and building ``j``; ``pairs[i, c, s, r]`` is the kWh moved on
    pairwise channel ``c`` from building ``s`` to building ``r``.
    """

    cells: np.ndarray
    pairs: np.ndarray
    initial_soc: np.ndarray
    pv: np.ndarray
    load: np.ndarray
    storage_capacity_kwh: float
    steps_per_day: int = 24

    @property
    def n_steps(self) -> int:
        return self.cells.shape[0]

    @property
    def num_buildings(self) -> int:
        return self.cells.shape[1]

    @property
    def days(self) -> float:
        return self.n_steps / self.steps_per_day

    def field(self, name: str) -> np.ndarray:
        """(steps, buildings) array of one ledger column."""
        return self.cells[:, :, CELL_FIELDS.index(name)]

    def step_flows(self, i: int) -> StepFlows:
        return StepFlows(self.cells[i], self.pairs[i])

    def received(self, channel: int) -> np.ndarray:
        """(steps, buildings) kWh received on a pairwise channel."""
        return self.pairs[:, channel].sum(axis=1)

    def sent(self, channel: int) -> np.ndarray:
        return self.pairs[:, channel].sum(axis=2)

    def soc_before(self) -> np.ndarray:
        """State of charge at the start of every step."""
        return np.vstack([self.initial_soc[None, :], self.cells[:-1, :, SOC]])

    def balance_residuals(self) -> dict[str, np.ndarray]:
        """Load, PV and storage balance errors per (step, building); all zero for a sound ledger."""
        c = self.cells
        load = self.load - (
            c[:, :, PV_TO_OWN_LOADS] + c[:, :, STORAGE_TO_OWN_LOADS] + c[:, :, GRID_TO_LOADS]
            + self.received(PAIR_PV_TO_LOADS) + self.received(PAIR_STORAGE_TO_LOADS) + c[:, :, NEED]
        )
        pv = self.pv - (
            c[:, :, PV_TO_OWN_LOADS] + c[:, :, PV_TO_OWN_STORAGE] + c[:, :, PV_TO_GRID]
            + self.sent(PAIR_PV_TO_LOADS) + self.sent(PAIR_PV_TO_STORAGE) + c[:, :, PV_REMAINING]
        )
        storage = c[:, :, SOC] - (
            self.soc_before() + c[:, :, PV_TO_OWN_STORAGE] + self.received(PAIR_PV_TO_STORAGE)
            + c[:, :, GRID_TO_STORAGE] - c[:, :, STORAGE_TO_OWN_LOADS]
            - self.sent(PAIR_STORAGE_TO_LOADS) - c[:, :, STORAGE_TO_GRID]
        )
        return {"load": load, "pv": pv, "storage": storage}

    def to_csv(self, path) -> None:
        """One row per (step, building): every cell column plus per-channel neighbour totals."""
        sent = {f"{name}_sent": self.sent(ch) for ch, name in enumerate(PAIR_FIELDS)}
        recv = {f"{name}_received": self.received(ch) for ch, name in enumerate(PAIR_FIELDS)}
        extra = {**sent, **recv}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("step_index", "building_id", "pv_kwh", "load_kwh") + CELL_FIELDS + tuple(extra))
            for i in range(self.n_steps):
                for j in range(self.num_buildings):
                    row = [i, j, f"{self.pv[i, j]:.9g}", f"{self.load[i, j]:.9g}"]
                    row += [f"{v:.9g}" for v in self.cells[i, j]]
                    row += [f"{arr[i, j]:.9g}" for arr in extra.values()]
                    writer.writerow(row)


def _prefix_array(ranking: Sequence[int]) -> np.ndarray:
    return np.asarray(effective_prefix(ranking), dtype=np.int64)


def _check_inputs(spec: ScenarioSpec, profiles: ProfileSet, initial_soc) -> np.ndarray:
    if profiles.num_buildings != spec.num_buildings:
        raise InvalidArgumentError(
            f"profiles have {profiles.num_buildings} buildings, scenario expects {spec.num_buildings}"
        )
    if profiles.steps_per_day != spec.steps_per_day or profiles.n_steps != spec.n_steps:
        raise InvalidArgumentError(
            f"profiles cover {profiles.n_steps} steps at {profiles.steps_per_day}/day, "
            f"scenario expects {spec.n_steps} at {spec.steps_per_day}/day"
        )
    if initial_soc is None:
        return np.zeros(spec.num_buildings)
    soc = np.array(initial_soc, dtype=float).reshape(-1)
    if soc.shape != (spec.num_buildings,):
        raise InvalidArgumentError("initial_soc needs one value per building")
    if np.any(soc < 0) or np.any(soc > spec.storage_capacity_kwh):
        raise InvalidArgumentError("initial_soc must lie in [0, storage capacity]")
    return soc


def simulate(spec: ScenarioSpec, ranking: Sequence[int], profiles: ProfileSet,
             initial_soc=None) -> FlowLedger:
    """Dispatch ``profiles`` under ``ranking`` for the whole horizon.

    Storage starts empty unless ``initial_soc`` is given.
    """
    check_ranking(ranking, spec)
    soc0 = _check_inputs(spec, profiles, initial_soc)
    pv, load = profiles.pv_matrix(), profiles.load_matrix()
    n, nb = pv.shape
    cells = np.zeros((n, nb, N_CELL))
    pairs = np.zeros((n, N_PAIR, nb, nb))
    run_kernel(_prefix_array(ranking), pv, load, soc0.copy(), soc0.copy(), float(spec.storage_capacity_kwh),
               cells, pairs, True)
    return FlowLedger(cells, pairs, soc0, pv, load, float(spec.storage_capacity_kwh), spec.steps_per_day)


def step(spec: ScenarioSpec, ranking: Sequence[int], pv_this_step, load_this_step,
         state: NeighbourhoodState) -> tuple[StepFlows, NeighbourhoodState]:
    """Execute one timestep without touching ``state``; returns flows and the new state.

    ``ranking`` may be a full ranking or an already-cut prefix ending anywhere;
    only actions before the terminator run.
    """
    pv = np.array(pv_this_step, dtype=float).reshape(-1)
    load = np.array(load_this_step, dtype=float).reshape(-1)
    nb = state.num_buildings
    if pv.shape != (nb,) or load.shape != (nb,):
        raise InvalidArgumentError("pv and load need one value per building")
    if np.any(pv < 0) or np.any(load < 0):
        raise InvalidArgumentError("pv and load must be non-negative")
    ranking = tuple(ranking)
    prefix = effective_prefix(ranking) if 1 in ranking else ranking
    soc = state.soc_kwh.copy()
    soc_pv = state.soc_pv_kwh.copy()
    if np.any(soc > spec.storage_capacity_kwh):
        raise InvalidArgumentError("state of charge exceeds the storage capacity")
    cells = np.zeros((1, nb, N_CELL))
    pairs = np.zeros((1, N_PAIR, nb, nb))
    run_kernel(np.asarray(prefix, dtype=np.int64), pv[None, :], load[None, :], soc, soc_pv,
               float(spec.storage_capacity_kwh), cells, pairs, True)
    return StepFlows(cells[0], pairs[0]), NeighbourhoodState(soc, soc_pv)
