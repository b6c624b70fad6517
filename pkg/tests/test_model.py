import pytest
from hypothesis import given, strategies as st

from prosumer_opt.errors import InvalidArgumentError, InvariantViolation
from prosumer_opt.model import (
    ACTION_ROUTES,
    PRESET_ACTIONS,
    SCENARIO_IDS,
    STORAGE_ACTIONS,
    Action,
    NeighbourhoodState,
    ScenarioSpec,
    check_ranking,
    effective_prefix,
    scenario_preset,
    validate_ranking,
)


def test_every_action_has_one_route():
    assert [int(a) for a in Action] == list(range(1, 15))
    routes = [ACTION_ROUTES[a] for a in Action if a != Action.DO_NO_MORE_ACTIVITY]
    assert len(set(routes)) == 13
    assert ACTION_ROUTES[Action.DO_NO_MORE_ACTIVITY] is None


@pytest.mark.parametrize("sid, count", list(zip(SCENARIO_IDS, (4, 6, 6, 8, 8, 10, 12, 14))))
def test_preset_action_counts(sid, count):
    assert scenario_preset(sid).n_actions == count


def test_preset_contents():
    assert scenario_preset("1").selectable_actions == {1, 2, 5, 6}
    assert scenario_preset("3b").selectable_actions == {1, 2, 3, 4, 5, 6, 13, 14}
    assert scenario_preset("5b").selectable_actions == set(range(1, 15))


def test_preset_defaults():
    s1, s3 = scenario_preset("1"), scenario_preset("3a")
    assert (s1.num_buildings, s1.horizon_days, s1.steps_per_day) == (6, 30, 24)
    assert s1.storage_capacity_kwh == 0.0
    assert scenario_preset("2").storage_capacity_kwh == 0.0
    assert s3.storage_capacity_kwh == 16.0
    assert scenario_preset("4b", horizon_days=7).n_steps == 168


def test_every_preset_keeps_base_actions_and_storage_rule():
    for sid in SCENARIO_IDS:
        spec = scenario_preset(sid)
        assert {1, 2} <= spec.selectable_actions
        if spec.storage_capacity_kwh == 0:
            assert not spec.selectable_actions & STORAGE_ACTIONS


def test_unknown_preset_rejected():
    with pytest.raises(InvalidArgumentError, match="unknown scenario"):
        scenario_preset("6")


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        ScenarioSpec("x", {2, 5})
    with pytest.raises(InvalidArgumentError, match="storage"):
        ScenarioSpec("x", {1, 2, 3}, storage_capacity_kwh=0.0)
    with pytest.raises(InvalidArgumentError):
        ScenarioSpec("x", {1, 2, 15})
    with pytest.raises(InvalidArgumentError):
        ScenarioSpec("x", {1, 2}, num_buildings=0)


@pytest.mark.parametrize("ranking, prefix", [
    ([2, 5, 6, 1], (2, 5, 6)),
    ([1, 2, 5, 6], ()),
    ([2, 1, 5, 6], (2,)),
])
def test_effective_prefix_examples(ranking, prefix):
    assert effective_prefix(ranking) == prefix


def test_effective_prefix_needs_terminator():
    with pytest.raises(InvariantViolation):
        effective_prefix([2, 5, 6])


@given(st.permutations(list(range(1, 15))), st.lists(st.integers(1, 14), max_size=5))
def test_effective_prefix_ignores_suffix(ranking, junk):
    p = effective_prefix(ranking)
    assert effective_prefix(list(p) + [1] + junk) == p
    assert 1 not in p


def test_validate_examples():
    s1 = scenario_preset("1")
    assert validate_ranking([2, 5, 6, 1], s1) == []
    assert [str(v) for v in validate_ranking([2, 2, 6, 1], s1)] == ["duplicate(2)", "missing(5)"]
    assert [str(v) for v in validate_ranking([2, 7, 6, 1], s1)] == ["foreign(7)", "missing(5)"]
    assert [str(v) for v in validate_ranking([2, 5, 6], s1)] == ["missing(1)"]


@given(st.sampled_from(SCENARIO_IDS), st.data())
def test_validate_accepts_exactly_permutations(sid, data):
    spec = scenario_preset(sid)
    perm = data.draw(st.permutations(spec.actions))
    assert validate_ranking(perm, spec) == []
    mutated = data.draw(st.lists(st.integers(1, 14), min_size=1, max_size=16))
    ok = sorted(mutated) == list(spec.actions)
    assert (validate_ranking(mutated, spec) == []) == ok


def test_check_ranking_raises_with_all_violations():
    with pytest.raises(InvalidArgumentError, match=r"foreign\(7\).*missing\(5\)"):
        check_ranking([2, 7, 6, 1], scenario_preset("1"))


def test_state_defaults_pv_share_to_full():
    state = NeighbourhoodState([1.0, 2.0])
    assert list(state.soc_pv_kwh) == [1.0, 2.0]
    with pytest.raises(InvalidArgumentError):
        NeighbourhoodState([1.0], [2.0])
    copy = state.copy()
    copy.soc_kwh[0] = 5
    assert state.soc_kwh[0] == 1.0
    assert NeighbourhoodState.empty(3).num_buildings == 3


def test_preset_table_is_consistent():
    assert set(PRESET_ACTIONS) == set(SCENARIO_IDS)
    assert PRESET_ACTIONS["3a"] < PRESET_ACTIONS["3b"] < PRESET_ACTIONS["4b"] < PRESET_ACTIONS["5b"]
