import numpy as np
import pytest

from conftest import week_evaluator, week_optimum, week_profiles
from prosumer_opt.dispatch import simulate
from prosumer_opt.errors import DegenerateInputError
from prosumer_opt.model import ScenarioSpec, scenario_preset
from prosumer_opt.profiles import EnergyProfile, ProfileSet
from prosumer_opt.report import (
    ReportBundle,
    ScenarioReport,
    decompose_self_consumption,
    optimizer_report,
    read_csv_rows,
    totals_consistent,
)


def flat_profiles(load, pv, nb=2, days=1):
    n = 24 * days
    return ProfileSet(tuple(EnergyProfile(np.full(n, load), b, "load") for b in range(nb)),
                      tuple(EnergyProfile(np.full(n, pv), b, "pv") for b in range(nb)))


def test_full_pv_coverage_is_all_direct_own():
    spec = ScenarioSpec("1", {1, 2, 5, 6}, num_buildings=2, storage_capacity_kwh=0.0, horizon_days=1)
    sc = decompose_self_consumption(simulate(spec, [2, 5, 6, 1], flat_profiles(1.0, 1.5)))
    assert sc.direct_own_pv == 100.0
    assert sc.direct_neighbour_pv == sc.own_stored_pv == sc.neighbour_stored_pv == 0.0
    assert sc.total_local == 100.0


def test_grid_only_ranking_uses_no_local_channel():
    spec = scenario_preset("1", horizon_days=7)
    sc = decompose_self_consumption(simulate(spec, [6, 5, 1, 2], week_profiles()))
    assert sc.total_local == 0.0 and all(v == 0.0 for v in sc.components().values())


def test_zero_load_is_degenerate():
    spec = ScenarioSpec("1", {1, 2, 5, 6}, num_buildings=2, storage_capacity_kwh=0.0, horizon_days=1)
    with pytest.raises(DegenerateInputError):
        decompose_self_consumption(simulate(spec, [2, 5, 6, 1], flat_profiles(0.0, 1.0)))


@pytest.mark.parametrize("sid", ["1", "2", "3a", "4a"])
def test_components_sum_to_total(sid):
    ev = week_evaluator(sid)
    sc = decompose_self_consumption(simulate(ev.spec, week_optimum(sid).best_ranking, ev.profiles))
    assert totals_consistent(sc)
    assert all(0.0 <= v <= 100.0 for v in sc.components().values())


def test_scenario_1_has_only_direct_own():
    ev = week_evaluator("1")
    sc = decompose_self_consumption(simulate(ev.spec, week_optimum("1").best_ranking, ev.profiles))
    assert sc.total_local == sc.direct_own_pv > 0


def test_storage_raises_local_share():
    totals = {}
    for sid in ("1", "3a"):
        ev = week_evaluator(sid)
        totals[sid] = decompose_self_consumption(
            simulate(ev.spec, week_optimum(sid).best_ranking, ev.profiles)).total_local
    assert totals["3a"] > totals["1"]


def bundle():
    scenarios = []
    for sid in ("1", "2"):
        ev = week_evaluator(sid)
        r = week_optimum(sid)
        rep = optimizer_report([r], simulate(ev.spec, r.best_ranking, ev.profiles))
        scenarios.append(ScenarioReport(sid, ev.spec.n_actions, ev.spec.storage_capacity_kwh, {"exhaustive": rep}))
    return ReportBundle({"days": 7}, scenarios)


def test_report_round_trip():
    b = bundle()
    files = b.files()
    again = ReportBundle.from_json(files["report.json"]).files()
    assert again == files


def test_report_files_and_schema(tmp_path):
    b = bundle()
    b.write(tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["plot_1.csv", "plot_2.csv", "report.json", "tableV.csv", "tableVII.csv", "tableVIII.csv"]
    assert b.to_dict()["schema_version"] == 1
    table_v = read_csv_rows(tmp_path / "tableV.csv")
    assert table_v[1][:3] == ["1", "4", "24"] and table_v[2][:3] == ["2", "6", "720"]
    table_viii = read_csv_rows(tmp_path / "tableVIII.csv")
    assert table_viii[0][-1] == "total_local_pct"
    assert (tmp_path / "tableVIII.csv").read_text().startswith("# percentages of total load energy")


def test_plot_table_stacks():
    rows = bundle().plot_table("1")
    tops = [float(r[5]) for r in rows[1:]]
    assert tops == sorted(tops)


def test_unknown_schema_rejected():
    d = bundle().to_dict()
    d["schema_version"] = 2
    with pytest.raises(ValueError):
        ReportBundle.from_dict(d)
