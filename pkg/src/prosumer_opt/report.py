"""Self-consumption decomposition and the report files written by the CLI.

Every report file is a pure function of a :class:`ReportBundle`, and a bundle
can be rebuilt from ``report.json``; regenerating the files from a parsed
report yields identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dispatch import (
    NEIGHBOUR_STORED_PV_TO_LOADS,
    OWN_STORED_PV_TO_LOADS,
    PAIR_PV_TO_LOADS,
    PV_TO_OWN_LOADS,
    FlowLedger,
)
from .errors import DegenerateInputError
from .optim import SearchResult

SCHEMA_VERSION = 1
PERCENT_BASE = "load"
OPTIMIZERS = ("exhaustive", "gradient_descent", "simulated_annealing")


@dataclass(frozen=True)
class SelfConsumption:
    """Share of total load energy covered by each local PV channel, in percent."""

    direct_own_pv: float
    direct_neighbour_pv: float
    own_stored_pv: float
    neighbour_stored_pv: float
    total_local: float

    COMPONENTS = ("direct_own_pv", "direct_neighbour_pv", "own_stored_pv", "neighbour_stored_pv")

    def components(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.COMPONENTS}


def decompose_self_consumption(ledger: FlowLedger) -> SelfConsumption:
    """Split the load served by local PV into direct and stored, own and neighbour.

    Storage channels count only the PV-origin part of discharged energy, so
    grid-charged storage never shows up as local PV consumption.
    """
    total_load = float(ledger.load.sum())
    if total_load <= 0.0:
        raise DegenerateInputError("total load over the horizon is zero; percentages are undefined")
    c = ledger.cells
    parts = [
        c[:, :, PV_TO_OWN_LOADS].sum(),
        ledger.received(PAIR_PV_TO_LOADS).sum(),
        c[:, :, OWN_STORED_PV_TO_LOADS].sum(),
        c[:, :, NEIGHBOUR_STORED_PV_TO_LOADS].sum(),
    ]
    pct = [float(100.0 * p / total_load) for p in parts]
    return SelfConsumption(*pct, total_local=float(100.0 * sum(parts) / total_load))


# --- report structure -------------------------------------------------------------

@dataclass
class SeedRun:
    seed: int | None
    ranking: list[int]
    value: float | None  # None encodes +inf
    weighted_sum: float
    evaluations: int
    rounds: int | None = None

    @classmethod
    def from_result(cls, r: SearchResult) -> "SeedRun":
        return cls(r.seed, list(r.best_ranking), None if math.isinf(r.value) else r.value,
                   r.weighted_sum, r.evaluations, r.rounds)

    @property
    def sort_value(self) -> float:
        return math.inf if self.value is None else self.value


@dataclass
class OptimizerReport:
    algorithm: str
    best_ranking: list[int]
    value: float | None
    weighted_sum: float
    evaluations: int
    breakdown: dict
    self_consumption: dict
    runs: list[SeedRun] = field(default_factory=list)
    optimal_set: list[list[int]] | None = None

    @property
    def optimal_runs(self) -> int:
        """Runs whose value equals the best value found by this optimizer."""
        best = min(r.sort_value for r in self.runs)
        return sum(r.sort_value == best for r in self.runs)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["optimal_set"] is None:
            del d["optimal_set"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerReport":
        d = dict(d)
        d["runs"] = [SeedRun(**r) for r in d.get("runs", [])]
        d.setdefault("optimal_set", None)
        return cls(**d)


@dataclass
class ScenarioReport:
    scenario_id: str
    n_actions: int
    storage_capacity_kwh: float
    optimizers: dict[str, OptimizerReport]

    def best(self) -> OptimizerReport:
        """Lowest value over optimizers; earlier optimizers in OPTIMIZERS win ties."""
        ordered = [self.optimizers[k] for k in OPTIMIZERS if k in self.optimizers]
        return min(ordered, key=lambda o: math.inf if o.value is None else o.value)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "n_actions": self.n_actions,
            "storage_capacity_kwh": self.storage_capacity_kwh,
            "optimizers": {k: v.to_dict() for k, v in self.optimizers.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioReport":
        return cls(d["scenario_id"], d["n_actions"], d["storage_capacity_kwh"],
                   {k: OptimizerReport.from_dict(v) for k, v in d["optimizers"].items()})


@dataclass
class ReportBundle:
    config: dict
    scenarios: list[ScenarioReport]
    percent_base: str = PERCENT_BASE
    schema_version: int = SCHEMA_VERSION

    def scenario(self, scenario_id: str) -> ScenarioReport:
        for s in self.scenarios:
            if s.scenario_id == scenario_id:
                return s
        raise KeyError(scenario_id)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "percent_base": self.percent_base,
            "config": self.config,
            "scenarios": [s.to_dict() for s in self.scenarios],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportBundle":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(d["config"], [ScenarioReport.from_dict(s) for s in d["scenarios"]],
                   d["percent_base"], d["schema_version"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ReportBundle":
        return cls.from_dict(json.loads(text))

    # --- tables -------------------------------------------------------------------

    def evaluations_table(self) -> list[list]:
        rows = [["scenario", "n_actions", "exhaustive_evaluations", "gradient_descent_evaluations",
                 "gradient_descent_rounds", "simulated_annealing_evaluations"]]
        for s in self.scenarios:
            ex = s.optimizers.get("exhaustive")
            gd = s.optimizers.get("gradient_descent")
            sa = s.optimizers.get("simulated_annealing")
            gd_run = _best_run(gd) if gd else None
            rows.append([
                s.scenario_id, s.n_actions,
                ex.evaluations if ex else "",
                gd.evaluations if gd else "",
                gd_run.rounds if gd_run else "",
                sa.evaluations if sa else "",
            ])
        return rows

    def objective_table(self) -> list[list]:
        rows = [["scenario", "optimizer", "ranking", "effective_prefix", "avg_direct_local_pv",
                 "avg_direct_own_pv", "avg_local_storage_consumption", "avg_own_storage_loading",
                 "weighted_sum", "value", "optimal_runs", "runs"]]
        for s in self.scenarios:
            for name in OPTIMIZERS:
                o = s.optimizers.get(name)
                if o is None:
                    continue
                b = o.breakdown
                prefix = o.best_ranking[:o.best_ranking.index(1)]
                rows.append([
                    s.scenario_id, name, _join(o.best_ranking), _join(prefix),
                    _num(b["avg_direct_local_pv"]), _num(b["avg_direct_own_pv"]),
                    _num(b["avg_local_storage_consumption"]), _num(b["avg_own_storage_loading"]),
                    _num(o.weighted_sum), _num(o.value), o.optimal_runs, len(o.runs),
                ])
        return rows

    def self_consumption_table(self) -> list[list]:
        rows = [["scenario", "optimizer", *(f"{c}_pct" for c in SelfConsumption.COMPONENTS), "total_local_pct"]]
        for s in self.scenarios:
            for name in OPTIMIZERS:
                o = s.optimizers.get(name)
                if o is None:
                    continue
                sc = o.self_consumption
                rows.append([s.scenario_id, name,
                             *(_num(sc[c]) for c in SelfConsumption.COMPONENTS), _num(sc["total_local"])])
        return rows

    def plot_table(self, scenario_id: str) -> list[list]:
        """Stacked-bar data: one row per (optimizer, component), cumulative bounds included."""
        s = self.scenario(scenario_id)
        rows = [["scenario", "optimizer", "component", "percent", "stack_bottom", "stack_top"]]
        for name in OPTIMIZERS:
            o = s.optimizers.get(name)
            if o is None:
                continue
            bottom = 0.0
            for comp in SelfConsumption.COMPONENTS:
                v = o.self_consumption[comp]
                rows.append([scenario_id, name, comp, _num(v), _num(bottom), _num(bottom + v)])
                bottom += v
        return rows

    def files(self) -> dict[str, str]:
        """File name to content for every report file derived from the bundle."""
        out = {
            "report.json": self.to_json(),
            "tableV.csv": _csv(self.evaluations_table()),
            "tableVII.csv": _csv(self.objective_table()),
            "tableVIII.csv": _csv(self.self_consumption_table(),
                                  header_note=f"# percentages of total {self.percent_base} energy"),
        }
        for s in self.scenarios:
            out[f"plot_{s.scenario_id}.csv"] = _csv(self.plot_table(s.scenario_id))
        return out

    def write(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files().items():
            path = out_dir / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
        return written


def _best_run(o: OptimizerReport) -> SeedRun | None:
    if not o.runs:
        return None
    return min(o.runs, key=lambda r: r.sort_value)


def _join(ranking) -> str:
    return " ".join(str(a) for a in ranking)


def _num(v) -> str:
    if v is None:
        return "inf"
    return f"{v:.9g}"


def _csv(rows: list[list], header_note: str | None = None) -> str:
    buf = io.StringIO()
    if header_note:
        buf.write(header_note + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def read_csv_rows(path) -> list[list[str]]:
    """Rows of a report CSV, skipping ``#`` comment lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.reader(lines))


def optimizer_report(results: list[SearchResult], ledger: FlowLedger) -> OptimizerReport:
    """Summarize one optimizer's runs; ``ledger`` belongs to the best run's ranking."""
    runs = [SeedRun.from_result(r) for r in results]
    best = min(results, key=lambda r: r.value)  # first (lowest seed) wins ties
    sc = decompose_self_consumption(ledger)
    return OptimizerReport(
        algorithm=best.algorithm,
        best_ranking=list(best.best_ranking),
        value=None if math.isinf(best.value) else best.value,
        weighted_sum=best.weighted_sum,
        evaluations=best.evaluations,
        breakdown=best.best_breakdown.to_dict(),
        self_consumption=asdict(sc),
        runs=runs,
        optimal_set=[list(r) for r in best.optimal_set] if best.optimal_set is not None else None,
    )


def totals_consistent(sc: SelfConsumption, tol: float = 0.01) -> bool:
    return abs(sum(sc.components().values()) - sc.total_local) <= tol and np.isfinite(sc.total_local)
