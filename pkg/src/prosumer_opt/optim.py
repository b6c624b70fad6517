"""Ranking search: exhaustive enumeration, adjacent-swap descent, and annealing
over continuous position variables.

All three share :class:`RankingEvaluator`, which memoizes objective values by
effective prefix; rankings that agree before the terminator dispatch
identically, so a cache hit still counts as an evaluation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit, types
from numba.typed import Dict

from .dispatch import gated_reward_sums, simulate
from .errors import CapExceededError, InvalidArgumentError, InvariantViolation
from .model import TERMINATOR, ScenarioSpec, check_ranking, effective_prefix
from .objective import (
    ObjectiveBreakdown,
    ObjectiveWeights,
    averaging_divisor,
    evaluate,
    weighted_value,
)
from .profiles import ProfileSet

COLLISION_TOL = 1e-9
DEFAULT_EXHAUSTIVE_CAP = 10
MAX_TRACE_POINTS = 10_000


class RankingEvaluator:
    """Objective value of a ranking for one (scenario, profiles, weights) triple."""

    def __init__(self, spec: ScenarioSpec, profiles: ProfileSet,
                 weights: ObjectiveWeights = ObjectiveWeights(), initial_soc=None):
        from .dispatch import _check_inputs

        self.spec = spec
        self.profiles = profiles
        self.weights = weights
        self.initial_soc = _check_inputs(spec, profiles, initial_soc)
        self.pv = profiles.pv_matrix()
        self.load = profiles.load_matrix()
        self.cap = float(spec.storage_capacity_kwh)
        self.divisor = averaging_divisor(spec)
        self.weight_array = weights.as_array()
        self.evaluations = 0
        self._cache: dict[tuple[int, ...], float] = {}
        # Shared with the compiled annealing loop, keyed by _prefix_code.
        self.kernel_cache = Dict.empty(types.int64, types.float64)

    def prefix_value(self, prefix: tuple[int, ...]) -> float:
        value = self._cache.get(prefix)
        if value is None:
            sums = gated_reward_sums(np.asarray(prefix, dtype=np.int64), self.pv, self.load,
                                     self.initial_soc, self.cap)
            value = float(weighted_value(sums, self.divisor, self.weight_array)[1])
            self._cache[prefix] = value
        return value

    def value(self, ranking: Sequence[int]) -> float:
        self.evaluations += 1
        return self.prefix_value(effective_prefix(ranking))

    def breakdown(self, ranking: Sequence[int]) -> ObjectiveBreakdown:
        ledger = simulate(self.spec, ranking, self.profiles, self.initial_soc)
        return evaluate(ledger, self.spec, self.weights)


@dataclass(frozen=True)
class SaConfig:
    seed: int = 0
    sd: float = 1.5
    iterations_per_action: int = 67_350
    initial_temperature: float = 1.0
    freeze_threshold: float = 1e-3
    cooling_factor: float | None = None  # None: freeze at 90% of the budget

    def __post_init__(self):
        if not self.sd > 0:
            raise InvalidArgumentError("sd must be > 0")
        if self.iterations_per_action < 1:
            raise InvalidArgumentError("iterations_per_action must be >= 1")
        if not self.initial_temperature > 0 or not self.freeze_threshold > 0:
            raise InvalidArgumentError("temperatures must be > 0")
        if not self.freeze_threshold < self.initial_temperature:
            raise InvalidArgumentError("freeze_threshold must be below initial_temperature")
        if self.cooling_factor is not None and not 0 < self.cooling_factor < 1:
            raise InvalidArgumentError("cooling_factor must lie in (0, 1)")

    def budget(self, n_actions: int) -> int:
        return self.iterations_per_action * n_actions

    def cooling(self, n_actions: int) -> float:
        if self.cooling_factor is not None:
            return self.cooling_factor
        ratio = self.freeze_threshold / self.initial_temperature
        return ratio ** (1.0 / (0.9 * self.budget(n_actions)))


@dataclass
class SearchResult:
    algorithm: str
    best_ranking: tuple[int, ...]
    best_breakdown: ObjectiveBreakdown
    evaluations: int
    optimal_set: tuple[tuple[int, ...], ...] | None = None
    rounds: int | None = None
    seed: int | None = None
    trace: list[tuple[int, float]] = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.best_breakdown.value

    @property
    def weighted_sum(self) -> float:
        return self.best_breakdown.weighted_sum

    def to_dict(self) -> dict:
        d = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "ranking": list(self.best_ranking),
            "effective_prefix": list(effective_prefix(self.best_ranking)),
            "value": None if math.isinf(self.value) else self.value,
            "weighted_sum": self.weighted_sum,
            "evaluations": self.evaluations,
            "breakdown": self.best_breakdown.to_dict(),
        }
        if self.rounds is not None:
            d["rounds"] = self.rounds
        if self.optimal_set is not None:
            d["optimal_set"] = [list(r) for r in self.optimal_set]
        if self.trace:
            d["trace"] = [[it, None if math.isinf(v) else v] for it, v in self.trace]
        return d


# --- position-variable encoding -------------------------------------------------

def positions_to_ranking(positions: Sequence[float], actions: Sequence[int]) -> tuple[int, ...]:
    """Order ``actions`` by position, highest first."""
    pos = np.asarray(positions, dtype=float)
    if pos.shape != (len(actions),):
        raise InvalidArgumentError("need exactly one position per action")
    gaps = np.diff(np.sort(pos))
    if gaps.size and gaps.min() <= COLLISION_TOL:
        raise InvariantViolation("two position variables coincide")
    order = np.argsort(-pos, kind="stable")
    return tuple(int(actions[k]) for k in order)


@njit(cache=True)
def metropolis_accept(delta_rel, temperature, rng):
    """Accept a degradation of ``delta_rel`` with probability exp(-delta_rel / T)."""
    return rng.random() < math.exp(-delta_rel / temperature)


@njit(cache=True)
def _reflect(x, upper):
    period = 2.0 * upper
    x = x - period * math.floor(x / period)
    if x > upper:
        x = period - x
    return x


@njit(cache=True)
def _collides(pos, i):
    for j in range(i):
        if abs(pos[i] - pos[j]) <= COLLISION_TOL:
            return True
    return False


@njit(cache=True)
def _decode(pos, actions, out):
    order = np.argsort(-pos)
    for r in range(order.shape[0]):
        out[r] = actions[order[r]]


@njit(cache=True)
def _prefix_code(ranking):
    # Base-15 digits of the ids before the terminator; ids are >= 2 so codes are unique.
    code = 0
    for a in ranking:
        if a == 1:
            break
        code = code * 15 + a
    return code


@njit(cache=True)
def _kernel_value(ranking, pv, load, soc0, cap, divisor, weights, cache):
    code = _prefix_code(ranking)
    cached = cache.get(code, -1.0)
    if cached >= 0.0:
        return cached
    k = 0
    while ranking[k] != 1:
        k += 1
    sums = gated_reward_sums(ranking[:k], pv, load, soc0, cap)
    value = weighted_value(sums, divisor, weights)[1]
    cache[code] = value
    return value


@njit(cache=True)
def _anneal(actions, pv, load, soc0, cap, divisor, weights, cache, rng,
            sd, budget, t0, cooling, freeze, stride):
    n = actions.shape[0]
    upper = float(n)

    ref = np.empty(n)
    for i in range(n):
        ref[i] = rng.uniform(0.0, upper)
        while _collides(ref, i):
            ref[i] = rng.uniform(0.0, upper)
    ranking = np.empty(n, dtype=np.int64)
    _decode(ref, actions, ranking)
    ref_val = _kernel_value(ranking, pv, load, soc0, cap, divisor, weights, cache)
    best_val = ref_val
    best_rank = ranking.copy()

    n_trace = budget // stride + 2
    trace_it = np.empty(n_trace, dtype=np.int64)
    trace_val = np.empty(n_trace)
    trace_it[0] = 0
    trace_val[0] = best_val
    t_count = 1

    cand = np.empty(n)
    temperature = t0
    for it in range(1, budget):
        for i in range(n):
            cand[i] = _reflect(ref[i] + sd * rng.normal(), upper)
            while _collides(cand, i):
                cand[i] = _reflect(ref[i] + sd * rng.normal(), upper)
        _decode(cand, actions, ranking)
        val = _kernel_value(ranking, pv, load, soc0, cap, divisor, weights, cache)

        if val <= ref_val:
            accept = True
        elif temperature < freeze:
            accept = False
        else:
            accept = metropolis_accept((val - ref_val) / ref_val, temperature, rng)
        if accept:
            ref[:] = cand
            ref_val = val
            if val < best_val:
                best_val = val
                best_rank[:] = ranking
        temperature *= cooling

        if it % stride == 0 or it == budget - 1:
            trace_it[t_count] = it
            trace_val[t_count] = best_val
            t_count += 1
    return best_rank, best_val, trace_it[:t_count], trace_val[:t_count]


# --- searches ---------------------------------------------------------------------

def _canonical(prefix: tuple[int, ...], actions: Sequence[int]) -> tuple[int, ...]:
    rest = sorted(a for a in actions if a not in prefix and a != TERMINATOR)
    return prefix + (int(TERMINATOR),) + tuple(rest)


def exhaustive_search(spec: ScenarioSpec, profiles: ProfileSet,
                      weights: ObjectiveWeights = ObjectiveWeights(),
                      cap: int = DEFAULT_EXHAUSTIVE_CAP,
                      evaluator: RankingEvaluator | None = None) -> SearchResult:
    """Evaluate all n! rankings.

    ``optimal_set`` holds one ranking per optimal effective prefix, written as
    the prefix, the terminator, then the ignored actions in ascending order.
    """
    if spec.n_actions > cap:
        raise CapExceededError(spec.n_actions, cap)
    ev = evaluator or RankingEvaluator(spec, profiles, weights)
    best = math.inf
    best_prefixes: set[tuple[int, ...]] = set()
    evaluations = 0
    for perm in itertools.permutations(spec.actions):
        evaluations += 1
        prefix = perm[:perm.index(1)]
        v = ev.prefix_value(prefix)
        if v < best:
            best = v
            best_prefixes = {prefix}
        elif v == best:
            best_prefixes.add(prefix)
    ev.evaluations += evaluations
    optimal = tuple(sorted(_canonical(p, spec.actions) for p in best_prefixes))
    best_ranking = optimal[0]
    return SearchResult("exhaustive", best_ranking, ev.breakdown(best_ranking), evaluations,
                        optimal_set=optimal)


def gradient_descent(spec: ScenarioSpec, profiles: ProfileSet,
                     weights: ObjectiveWeights = ObjectiveWeights(), seed: int = 0,
                     start: Sequence[int] | None = None,
                     evaluator: RankingEvaluator | None = None) -> SearchResult:
    """Steepest descent over adjacent transpositions from a random (or given) start.

    Each round tries all n-1 neighbour swaps and applies the one with the
    largest decrease; the lowest swap index wins ties. Stops after the first
    round without an improving swap.
    """
    ev = evaluator or RankingEvaluator(spec, profiles, weights)
    if start is None:
        rng = np.random.default_rng(seed)
        current = [int(a) for a in rng.permutation(np.array(spec.actions))]
    else:
        current = list(check_ranking(start, spec))
    before = ev.evaluations
    value = ev.value(current)
    trace = [(0, value)]
    rounds = 0
    while True:
        rounds += 1
        # Largest decrease == smallest resulting value; also well-defined from +inf.
        best_k, best_val = -1, value
        for k in range(len(current) - 1):
            cand = current.copy()
            cand[k], cand[k + 1] = cand[k + 1], cand[k]
            v = ev.value(cand)
            if v < best_val:
                best_k, best_val = k, v
        if best_k < 0:
            break
        current[best_k], current[best_k + 1] = current[best_k + 1], current[best_k]
        value = best_val
        trace.append((rounds, value))
    ranking = tuple(current)
    return SearchResult("gradient_descent", ranking, ev.breakdown(ranking), ev.evaluations - before,
                        rounds=rounds, seed=seed, trace=trace)


def simulated_annealing(spec: ScenarioSpec, profiles: ProfileSet,
                        weights: ObjectiveWeights = ObjectiveWeights(),
                        config: SaConfig = SaConfig(),
                        evaluator: RankingEvaluator | None = None) -> SearchResult:
    """Anneal one continuous position per action; rankings decode by descending position.

    Runs exactly ``config.budget(n)`` evaluations and returns the best
    ranking seen.
    """
    ev = evaluator or RankingEvaluator(spec, profiles, weights)
    n = spec.n_actions
    budget = config.budget(n)
    stride = max(1, math.ceil(budget / (MAX_TRACE_POINTS - 2)))
    rng = np.random.default_rng(config.seed)
    rank, _, trace_it, trace_val = _anneal(
        np.asarray(spec.actions, dtype=np.int64), ev.pv, ev.load, ev.initial_soc, ev.cap,
        ev.divisor, ev.weight_array, ev.kernel_cache, rng,
        float(config.sd), budget, float(config.initial_temperature), float(config.cooling(n)),
        float(config.freeze_threshold), stride,
    )
    ev.evaluations += budget
    ranking = tuple(int(a) for a in rank)
    trace = [(int(i), float(v)) for i, v in zip(trace_it, trace_val)]
    return SearchResult("simulated_annealing", ranking, ev.breakdown(ranking), budget,
                        seed=config.seed, trace=trace)


def random_rankings(spec: ScenarioSpec, count: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    actions = np.array(spec.actions)
    for _ in range(count):
        yield tuple(int(a) for a in rng.permutation(actions))
