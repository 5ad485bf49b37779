import json

import numpy as np
import pytest

from tsgraph.bench import (
    PowerCurve,
    error_rate_experiment,
    error_rates,
    fwer_power_experiment,
    loglog_slope,
    matched_power,
    mht_alpha_grid,
    parallel_scaling_experiment,
    replication_seeds,
    select_graph,
    stepwise_alpha_grid,
    timing_experiment,
    write_csv,
    write_json,
)
from tsgraph.graph import Graph
from tsgraph.var import model_a, model_b, simulate


def test_grids():
    g = mht_alpha_grid()
    assert g[0] == 0 and g[-1] == 0.5 and len(g) == 401
    assert np.allclose(np.diff(g), 0.00125)
    sw = stepwise_alpha_grid()
    assert sw[-1] == pytest.approx(0.5 ** 5)
    assert np.all(np.diff(sw) >= 0)


def test_replication_seeds_reproducible():
    a = [s.generate_state(1)[0] for s in replication_seeds(3, 5)]
    b = [s.generate_state(1)[0] for s in replication_seeds(3, 5)]
    assert a == b and len(set(a)) == 5


def test_error_rates():
    est = Graph(4, frozenset([(1, 2), (3, 4)]))
    r = error_rates(est, {(1, 2), (2, 3)})
    assert r.type1_pct == pytest.approx(50.0)
    assert r.type2_pct == pytest.approx(25.0)


def test_select_graph_methods_agree_on_clear_case():
    X = simulate(model_a(), 1024, 3)
    a = select_graph(X, 64, 0.05, "mht")
    b = select_graph(X, 64, 0.05, "stepwise")
    assert a.graph == b.graph
    with pytest.raises(ValueError):
        select_graph(X, 64, 0.05, "lasso")


def test_power_experiment_small():
    curves = fwer_power_experiment(
        model_b(0.0), [(2, 3), (2, 5)], [(3, 4)], 256, 8,
        alpha_grid=np.array([0.0, 0.05, 0.5]), reps=4, seed=1,
        candidates=[(2, 3), (2, 5), (3, 4)],
    )
    for c in curves.values():
        assert c.reps == 4
        assert all(0 <= v <= 1 for v in c.fwer + c.effective_power)
    # nothing can be rejected at alpha = 0
    assert curves["mht"].fwer[0] == 0 and curves["mht"].effective_power[0] == 0
    rows = curves["mht"].rows()
    assert {"method", "alpha", "fwer", "effective_power"} <= set(rows[0])


def test_matched_power_spans_common_range():
    a = PowerCurve("a", [0, 1, 2], [0.0, 0.1, 0.4], [0.0, 0.5, 0.9], 10)
    b = PowerCurve("b", [0, 1, 2], [0.0, 0.05, 0.2], [0.1, 0.4, 0.6], 10)
    pts = matched_power(a, b, 3)
    assert [p[0] for p in pts] == pytest.approx([0.0, 0.1, 0.2])
    assert pts[1][1:] == (0.5, 0.4)


def test_timing_and_slope():
    rows = timing_experiment([4, 8], 256, 8, seed=0)
    assert [r["p"] for r in rows] == [4, 8]
    assert rows[1]["statistics_computed"] == 28
    assert loglog_slope([1, 2, 4], [3, 24, 192]) == pytest.approx(3.0)


def test_error_experiment_rows():
    rows = error_rate_experiment([6, 7], [0.05], 256, 8, reps=1, seed=2)
    assert len(rows) == 2
    assert all(0 <= r["type1_pct"] <= 100 for r in rows)


def test_parallel_identical():
    rows, identical = parallel_scaling_experiment(6, 256, 8, [1, 2], seed=0)
    assert identical
    assert [r["workers"] for r in rows] == [1, 2]


def test_writers(tmp_path):
    write_csv([{"a": 1, "b": 2.5}], tmp_path / "x.csv")
    assert (tmp_path / "x.csv").read_text().splitlines() == ["a,b", "1,2.5"]
    write_json({"k": [1, 2]}, tmp_path / "x.json")
    assert json.loads((tmp_path / "x.json").read_text()) == {"k": [1, 2]}
