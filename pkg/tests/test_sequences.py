import json

import numpy as np
import pytest

from echoprop.sequences import (
    HorizonError,
    InputWindow,
    concat_gamma,
    dump_window,
    load_window,
    product_distance,
    shift_window,
    truncate_past,
    truncation_bound,
    window_from_literal,
    window_to_literal,
)


def window(past, future=(), dim=1):
    return InputWindow.from_arrays(past, future, input_dim=dim)


def test_entry_by_logical_time():
    w = window([1.0, 2.0, 3.0], [4.0, 5.0])
    assert w.past_horizon == 3 and w.future_horizon == 2
    assert [float(w.entry(t)[0]) for t in range(-2, 3)] == [1, 2, 3, 4, 5]
    with pytest.raises(HorizonError):
        w.entry(3)
    with pytest.raises(HorizonError):
        w.entry(-3)


def test_window_is_immutable():
    w = window([1.0, 2.0])
    with pytest.raises(ValueError):
        w.past[0, 0] = 9.0


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        window([1.0, np.nan])


def test_shift_zero_is_identity():
    w = window([1.0, 2.0], [3.0])
    assert shift_window(w, 0) == w


def test_shift_minus_one_moves_future_into_past():
    # entry(t) of the result is entry(t - 1) of w: the old u_0 sits at time 1
    w = window([1.0, 2.0], [3.0])
    s = shift_window(w, -1)
    assert s.past_horizon == 1 and s.future_horizon == 2
    assert float(s.entry(1)[0]) == 2.0
    s = shift_window(w, 1)
    assert s.past_horizon == 3 and s.future_horizon == 0
    assert float(s.entry(0)[0]) == 3.0


def test_shift_is_reindexing(rng):
    w = window(rng.normal(size=6), rng.normal(size=4))
    for k in range(-6, 5):
        s = shift_window(w, k)
        for t in s.times():
            assert np.array_equal(s.entry(t), w.entry(t + k))
        back = shift_window(s, -k)
        assert back == w


def test_shift_exhausted():
    w = window([1.0, 2.0], [3.0])
    with pytest.raises(HorizonError):
        shift_window(w, 2)
    with pytest.raises(HorizonError):
        shift_window(w, -3)


def test_truncate_past():
    w = window([1.0, 2.0, 3.0], [4.0, 5.0])
    t = truncate_past(w)
    assert t.past_horizon == 3 and t.future_horizon == 0
    assert np.array_equal(t.past, w.past)
    assert truncate_past(t) == t


def test_concat_gamma_smallest_case():
    g = concat_gamma(1, window([7.0]), window([9.0]))
    assert g.past_horizon == 2
    assert float(g.entry(-1)[0]) == 7.0 and float(g.entry(0)[0]) == 9.0


def test_concat_gamma_keeps_recent_entries(rng):
    u = window(rng.normal(size=10))
    v = window(rng.normal(size=5))
    g = concat_gamma(4, v, u)
    assert g.past_horizon == 9
    for t in range(-3, 1):
        assert np.array_equal(g.entry(t), u.entry(t))
    for t in range(-8, -3):
        assert np.array_equal(g.entry(t), v.entry(t + 4))
    with pytest.raises(HorizonError):
        concat_gamma(11, v, u)


def test_concat_gamma_self_equals_self_when_tail_matches():
    u = window(np.arange(8.0))
    assert concat_gamma(3, window(np.arange(5.0)), u) == u


def test_product_distance_single_term():
    a = np.zeros(6)
    b = a.copy()
    b[-4] = 5.0  # time -3
    assert product_distance(window(a), window(b)) == 0.125


def test_product_distance_errors_and_zero():
    a = window([1.0, 2.0])
    assert product_distance(a, a) == 0.0
    with pytest.raises(HorizonError):
        product_distance(a, window([1.0]))


def test_truncation_bound():
    assert truncation_bound(3) == 0.125
    assert truncation_bound(0) == 1.0


def test_literal_round_trip(tmp_path, rng):
    w = window(rng.normal(size=(4, 2)), rng.normal(size=(3, 2)), dim=2)
    lit = window_to_literal(w)
    assert window_from_literal(json.loads(json.dumps(lit))) == w
    path = tmp_path / "w.json"
    dump_window(w, path)
    assert load_window(path) == w


def test_literal_rejects_missing_times():
    lit = {"past_horizon": 2, "future_horizon": 0, "input_dim": 1, "entries": [[0, [1.0]]]}
    with pytest.raises(ValueError):
        window_from_literal(lit)


def test_load_window_reports_path(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError, match="bad.json"):
        load_window(bad)
