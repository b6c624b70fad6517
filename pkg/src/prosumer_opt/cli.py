"""Batch front-end: run optimizers over scenario presets and write reports.

Settings come from built-in defaults, then an optional INI file, then
command-line flags. Exit codes: 0 success, 2 configuration error,
3 exhaustive search refused because a scenario has too many actions.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dispatch import simulate
from .errors import CapExceededError, DegenerateInputError, ProfileFormatError
from .model import SCENARIO_IDS, scenario_preset
from .objective import ObjectiveWeights
from .optim import (
    DEFAULT_EXHAUSTIVE_CAP,
    RankingEvaluator,
    SaConfig,
    exhaustive_search,
    gradient_descent,
    simulated_annealing,
)
from .profiles import ProfileSet, default_profiles, export_csv, import_csv
from .report import OPTIMIZERS, ReportBundle, ScenarioReport, optimizer_report

log = logging.getLogger("prosumer_opt")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3


class ConfigError(Exception):
    """Invalid run configuration; ``field`` names the offending setting."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class RunConfig:
    scenarios: tuple[str, ...] = ("1",)
    optimizers: tuple[str, ...] = OPTIMIZERS
    seed: int = 0
    num_seeds: int = 1
    days: int = 30
    profiles: str = "generated"  # or a CSV path
    profile_seed: int = 42
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    sa: SaConfig = field(default_factory=SaConfig)
    cap: int = DEFAULT_EXHAUSTIVE_CAP
    out: Path | None = None
    plots: bool = True

    def __post_init__(self):
        if self.days < 1:
            raise ConfigError("days", "must be >= 1")
        if self.num_seeds < 1:
            raise ConfigError("seeds", "must be >= 1")
        if self.cap < 1:
            raise ConfigError("cap", "must be >= 1")
        if not self.scenarios:
            raise ConfigError("scenario", "no scenario selected")
        for s in self.scenarios:
            if s not in SCENARIO_IDS:
                raise ConfigError("scenario", f"unknown scenario {s!r}; expected {', '.join(SCENARIO_IDS)} or all")
        for o in self.optimizers:
            if o not in OPTIMIZERS:
                raise ConfigError("optimizer", f"unknown optimizer {o!r}; expected {', '.join(OPTIMIZERS)} or all")

    @property
    def seeds(self) -> range:
        return range(self.seed, self.seed + self.num_seeds)

    def describe(self) -> dict:
        """Settings that determine the report contents (output location excluded)."""
        return {
            "scenarios": list(self.scenarios),
            "optimizers": list(self.optimizers),
            "seed": self.seed,
            "seeds": self.num_seeds,
            "days": self.days,
            "profiles": self.profiles,
            "profile_seed": self.profile_seed,
            "weights": {k: getattr(self.weights, k) for k in ("w1", "w2", "w3", "w4")},
            "simulated_annealing": {
                "sd": self.sa.sd,
                "iterations_per_action": self.sa.iterations_per_action,
                "initial_temperature": self.sa.initial_temperature,
                "freeze_threshold": self.sa.freeze_threshold,
            },
            "cap": self.cap,
        }


def _split_list(text: str, allowed: tuple[str, ...]) -> tuple[str, ...]:
    items = [t.strip().lower() for t in str(text).split(",") if t.strip()]
    if items == ["all"]:
        return allowed
    return tuple(dict.fromkeys(items))


# --- configuration loading ----------------------------------------------------------

_RUN_KEYS = {"scenario", "optimizer", "seed", "seeds", "days", "profiles", "profile_seed", "out", "plots"}
_SA_KEYS = {"sd", "iterations_per_action", "initial_temperature", "freeze_threshold"}


def _read_ini(path: Path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    known = {"run": _RUN_KEYS, "weights": {"w1", "w2", "w3", "w4"},
             "simulated_annealing": _SA_KEYS, "exhaustive": {"cap"}}
    values: dict = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(section, f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in known[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            values[(section, key)] = raw
    # Relative profile/output paths are taken relative to the config file.
    for key in ("profiles", "out"):
        raw = values.get(("run", key))
        if raw and raw != "generated" and not Path(raw).is_absolute():
            values[("run", key)] = str(path.parent / raw)
    return values


def _as(kind, name: str, raw):
    try:
        if kind is bool:
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected {kind.__name__}, got {raw!r}") from None


def build_config(args: argparse.Namespace) -> RunConfig:
    values = _read_ini(Path(args.config)) if args.config else {}
    flag_map = {
        ("run", "scenario"): args.scenario, ("run", "optimizer"): args.optimizer,
        ("run", "seed"): args.seed, ("run", "seeds"): args.seeds, ("run", "days"): args.days,
        ("run", "profiles"): args.profiles, ("run", "profile_seed"): args.profile_seed,
        ("run", "out"): args.out, ("run", "plots"): args.plots,
        ("simulated_annealing", "sd"): args.sa_sd,
        ("simulated_annealing", "iterations_per_action"): args.sa_iters_per_action,
        ("exhaustive", "cap"): args.cap,
    }
    for key, v in flag_map.items():
        if v is not None:
            values[key] = v

    def get(section, key, kind, default):
        raw = values.get((section, key))
        return default if raw is None else _as(kind, f"{section}.{key}" if section != "run" else key, raw)

    base = RunConfig.__dataclass_fields__
    try:
        weights = ObjectiveWeights(**{
            k: get("weights", k, float, getattr(ObjectiveWeights(), k)) for k in ("w1", "w2", "w3", "w4")
        })
    except ValueError as exc:
        raise ConfigError("weights", str(exc)) from None
    defaults = SaConfig()
    try:
        sa = SaConfig(
            seed=0,
            sd=get("simulated_annealing", "sd", float, defaults.sd),
            iterations_per_action=get("simulated_annealing", "iterations_per_action", int,
                                      defaults.iterations_per_action),
            initial_temperature=get("simulated_annealing", "initial_temperature", float,
                                    defaults.initial_temperature),
            freeze_threshold=get("simulated_annealing", "freeze_threshold", float, defaults.freeze_threshold),
        )
    except ValueError as exc:
        raise ConfigError("simulated_annealing", str(exc)) from None
    out = values.get(("run", "out"))
    return RunConfig(
        scenarios=_split_list(values.get(("run", "scenario"), "1"), SCENARIO_IDS),
        optimizers=_split_list(values.get(("run", "optimizer"), "all"), OPTIMIZERS),
        seed=get("run", "seed", int, base["seed"].default),
        num_seeds=get("run", "seeds", int, base["num_seeds"].default),
        days=get("run", "days", int, base["days"].default),
        profiles=str(values.get(("run", "profiles"), "generated")),
        profile_seed=get("run", "profile_seed", int, base["profile_seed"].default),
        weights=weights,
        sa=sa,
        cap=get("exhaustive", "cap", int, base["cap"].default),
        out=Path(out) if out else None,
        plots=get("run", "plots", bool, True),
    )


# --- orchestration ---------------------------------------------------------------------

def load_profiles(config: RunConfig) -> ProfileSet:
    if config.profiles == "generated":
        return default_profiles(config.profile_seed, days=config.days)
    try:
        profiles = import_csv(config.profiles)
    except OSError as exc:
        raise ConfigError("profiles", f"cannot read {config.profiles}: {exc.strerror}") from None
    except ProfileFormatError as exc:
        raise ConfigError("profiles", str(exc)) from None
    if profiles.days < config.days:
        raise ConfigError("profiles", f"file covers {profiles.days} days, {config.days} requested")
    return profiles.truncated(config.days) if profiles.days > config.days else profiles


def check_cap(config: RunConfig) -> None:
    """Refuse up front rather than after hours of other searches."""
    if "exhaustive" not in config.optimizers:
        return
    for sid in config.scenarios:
        n = len(scenario_preset(sid).selectable_actions)
        if n > config.cap:
            raise CapExceededError(n, config.cap)


def run_scenario(config: RunConfig, scenario_id: str, profiles: ProfileSet) -> tuple[ScenarioReport, dict]:
    spec = scenario_preset(scenario_id, horizon_days=config.days, num_buildings=profiles.num_buildings)
    ev = RankingEvaluator(spec, profiles, config.weights)
    reports, ledgers = {}, {}
    for name in OPTIMIZERS:
        if name not in config.optimizers:
            continue
        if name == "exhaustive":
            results = [exhaustive_search(spec, profiles, config.weights, cap=config.cap, evaluator=ev)]
        elif name == "gradient_descent":
            results = [gradient_descent(spec, profiles, config.weights, seed=s, evaluator=ev) for s in config.seeds]
        else:
            results = [simulated_annealing(spec, profiles, config.weights, replace(config.sa, seed=s), evaluator=ev)
                       for s in config.seeds]
        best = min(results, key=lambda r: r.value)
        ledger = simulate(spec, best.best_ranking, profiles)
        reports[name] = optimizer_report(results, ledger)
        ledgers[name] = ledger
        log.info("scenario %s %s: weighted sum %.6g", scenario_id, name, best.weighted_sum)
    report = ScenarioReport(scenario_id, spec.n_actions, spec.storage_capacity_kwh, reports)
    return report, ledgers[report.best().algorithm]


def run(config: RunConfig) -> ReportBundle:
    """Run every requested (scenario, optimizer) pair and write reports if ``config.out`` is set."""
    check_cap(config)
    profiles = load_profiles(config)
    scenarios, ledgers = [], {}
    for sid in config.scenarios:
        report, ledger = run_scenario(config, sid, profiles)
        scenarios.append(report)
        ledgers[sid] = ledger
    bundle = ReportBundle(config.describe(), scenarios)
    if config.out is not None:
        bundle.write(config.out)
        for sid, ledger in ledgers.items():
            ledger.to_csv(config.out / f"ledger_{sid}.csv")
        if config.plots:
            from .plotting import plot_all

            plot_all(bundle, config.out)
    return bundle


# --- argument parsing ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prosumer-opt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="optimize action rankings and write reports")
    r.add_argument("--config", help="INI file with [run], [weights], [simulated_annealing], [exhaustive]")
    r.add_argument("--scenario", help=f"comma list of {', '.join(SCENARIO_IDS)}, or 'all'")
    r.add_argument("--optimizer", help=f"comma list of {', '.join(OPTIMIZERS)}, or 'all'")
    r.add_argument("--seed", help="first optimizer seed")
    r.add_argument("--seeds", help="number of consecutive seeds for the randomized optimizers")
    r.add_argument("--days", help="horizon in days")
    r.add_argument("--profiles", help="'generated' or a profile CSV path")
    r.add_argument("--profile-seed", dest="profile_seed", help="seed for generated profiles")
    r.add_argument("--out", help="output directory")
    r.add_argument("--sa-sd", dest="sa_sd", help="standard deviation of the position perturbation")
    r.add_argument("--sa-iters-per-action", dest="sa_iters_per_action", help="annealing evaluations per action")
    r.add_argument("--cap", help="largest action count exhaustive search accepts")
    r.add_argument("--no-plots", dest="plots", action="store_const", const="false",
                   help="skip PNG figures")

    p = sub.add_parser("profiles", help="write generated profiles to CSV")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--days", type=int, default=30)
    p.add_argument("--buildings", type=int, default=6)
    p.add_argument("--out", required=True, help="CSV path")

    sub.add_parser("scenarios", help="list scenario presets")
    return parser


def _print_summary(bundle: ReportBundle) -> None:
    for s in bundle.scenarios:
        for name, o in s.optimizers.items():
            prefix = o.best_ranking[:o.best_ranking.index(1)]
            print(f"{s.scenario_id:>3} {name:<20} weighted_sum={o.weighted_sum:.6g} "
                  f"prefix={' '.join(map(str, prefix)) or '-'} evaluations={o.evaluations} "
                  f"local={o.self_consumption['total_local']:.1f}%")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "scenarios":
            for sid in SCENARIO_IDS:
                spec = scenario_preset(sid)
                print(f"{sid:>3}  storage={spec.storage_capacity_kwh:g} kWh  actions={' '.join(map(str, spec.actions))}")
            return EXIT_OK
        if args.command == "profiles":
            export_csv(default_profiles(args.seed, args.buildings, args.days), args.out)
            return EXIT_OK
        config = build_config(args)
        bundle = run(config)
    except ConfigError as exc:
        print(f"prosumer-opt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceededError as exc:
        print(f"prosumer-opt: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DegenerateInputError, ValueError) as exc:
        print(f"prosumer-opt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _print_summary(bundle)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
