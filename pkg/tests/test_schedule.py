import pytest
from hypothesis import given
from hypothesis import strategies as st

from fedalu.schedule import ScheduleConfig, effective_knowledge_round, exchange_count, should_exchange


@pytest.mark.parametrize("t,s,expected", [(0, 3, True), (4, 3, False), (6, 3, True), (0, 1, True)])
def test_should_exchange(t, s, expected):
    assert should_exchange(t, s) is expected


def test_s1_exchanges_every_round():
    assert all(should_exchange(t, 1) for t in range(200))
    assert all(effective_knowledge_round(t, 1) == t for t in range(200))


@pytest.mark.parametrize("t,s,expected", [(7, 3, 6), (9, 3, 9), (0, 5, 0), (4, 5, 0)])
def test_effective_knowledge_round(t, s, expected):
    assert effective_knowledge_round(t, s) == expected


@pytest.mark.parametrize("T,s,expected", [(10, 1, 10), (10, 3, 4), (10, 5, 2), (30, 10, 3), (1, 50, 1)])
def test_exchange_count(T, s, expected):
    assert exchange_count(T, s) == expected


@given(st.integers(0, 5000), st.integers(1, 60))
def test_effective_round_properties(t, s):
    r = effective_knowledge_round(t, s)
    assert r % s == 0 and t - s < r <= t
    assert should_exchange(t, s) == (r == t)


@given(st.integers(1, 1000), st.integers(1, 50))
def test_exchange_count_matches_enumeration(T, s):
    assert exchange_count(T, s) == sum(should_exchange(t, s) for t in range(T))


@given(st.integers(0, 100), st.integers(1, 20))
def test_staleness_constant_within_window(m, s):
    assert {effective_knowledge_round(t, s) for t in range(m * s, (m + 1) * s)} == {m * s}


def test_invalid_arguments():
    with pytest.raises(ValueError):
        should_exchange(0, 0)
    with pytest.raises(ValueError):
        effective_knowledge_round(-1, 2)
    with pytest.raises(ValueError):
        exchange_count(0, 1)
    with pytest.raises(ValueError):
        ScheduleConfig(s=0, total_rounds=5)


def test_schedule_config_round_states():
    cfg = ScheduleConfig(s=3, total_rounds=7)
    states = list(cfg.rounds())
    assert [st.last_exchange_round for st in states] == [0, 0, 0, 3, 3, 3, 6]
    assert [st.staleness for st in states] == [0, 1, 2, 0, 1, 2, 0]
    assert cfg.exchanges == 3
