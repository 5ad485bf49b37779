import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from tsgraph.errors import DomainError
from tsgraph.graph import all_pairs, n_edges
from tsgraph.kl import KlContext, TestRecord, all_single_edge_statistics
from tsgraph.selection import (
    StepTable,
    gaussian_quantile,
    holm_levels,
    matsuda_select,
    mht_select,
    stepwise_count,
    stepwise_final_k,
    stepwise_level,
    stepwise_steps,
)
from tsgraph.spectral import estimate_spectrum, window_constants
from tsgraph.var import model_a, simulate


def _bisect_quantile(q):
    cdf = lambda x: 0.5 * (1 + math.erf(x / math.sqrt(2)))
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("q", [1e-6, 0.01, 0.2, 0.5, 0.8, 0.95, 0.995, 0.999999])
def test_quantile_matches_bisection(q):
    assert abs(gaussian_quantile(q) - _bisect_quantile(q)) < 1e-8


def test_quantile_known_values():
    assert gaussian_quantile(0.5) == 0
    assert gaussian_quantile(0.995) == pytest.approx(2.5758, abs=1e-4)
    assert gaussian_quantile(0.95) == pytest.approx(1.6449, abs=1e-4)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            gaussian_quantile(bad)


def test_holm_levels():
    got = np.round(holm_levels(10, 0.05), 2)
    assert_allclose(got, [1.64, 1.96, 2.13, 2.24, 2.33, 2.39, 2.45, 2.50, 2.54, 2.58], atol=1e-12)
    assert holm_levels(1, 0.05)[0] == pytest.approx(1.6449, abs=1e-4)
    lv = holm_levels(45, 0.1)
    assert np.all(np.diff(lv) > 0)
    assert np.all(np.isinf(holm_levels(3, 0.0)))


def test_stepwise_level():
    assert stepwise_level(1, 0.05) == pytest.approx(1.6449, abs=1e-4)
    assert stepwise_level(10, 0.05) == pytest.approx(2.567, abs=1e-3)
    alphas = np.linspace(0.001, 0.5, 50)
    lv = [stepwise_level(10, a) for a in alphas]
    assert np.all(np.diff(lv) < 0)
    assert math.isinf(stepwise_level(10, 0.0))


# statistics of a five-vertex example
TABLE = {(4, 5): 73.17, (1, 5): 67.92, (1, 2): 53.71, (1, 4): 22.25, (2, 4): 18.16,
         (1, 3): 12.72, (3, 5): 5.86, (2, 5): 1.89, (2, 3): 0.54, (3, 4): 0.21}


def _records(zmap, p=5):
    return [TestRecord(e, i, zmap[e]) for i, e in enumerate(all_pairs(p), start=1)]


def test_mht_five_vertex_example():
    res = mht_select(_records(TABLE), 0.05)
    assert res.graph.missing == {(2, 5), (2, 3), (3, 4)}
    assert res.statistics_computed == 10
    by_edge = {r.edge: r for r in res.records}
    assert by_edge[(3, 5)].rejected and not by_edge[(2, 5)].rejected
    assert by_edge[(3, 5)].critical == pytest.approx(holm_levels(10, 0.05)[3])
    text = res.format_table()
    assert text.splitlines()[1].split()[:2] == ["10", "(4,5)"]


def test_mht_all_accept_and_all_reject():
    low = {e: 0.1 for e in all_pairs(4)}
    assert mht_select(_records(low, 4), 0.05).graph.n_missing == 6
    high = {e: 10.0 for e in all_pairs(4)}
    assert mht_select(_records(high, 4), 0.05).graph.is_saturated


def test_mht_rejects_duplicate_ordinals():
    recs = _records(TABLE)
    recs[1] = TestRecord(recs[1].edge, 1, recs[1].z)
    with pytest.raises(DomainError):
        mht_select(recs, 0.05)


zs = st.lists(st.floats(-5, 10, allow_nan=False), min_size=10, max_size=10)


@given(zs, st.floats(0.001, 0.5))
def test_mht_missing_set_is_lower_set(z, alpha):
    recs = [TestRecord(e, i + 1, z[i]) for i, e in enumerate(all_pairs(5))]
    res = mht_select(recs, alpha)
    missing_z = [r.z for r in res.records if not r.rejected]
    present_z = [r.z for r in res.records if r.rejected]
    if missing_z and present_z:
        assert max(missing_z) <= min(present_z)


@given(zs, st.randoms(use_true_random=False))
def test_mht_permutation_invariant(z, rnd):
    recs = [TestRecord(e, i + 1, z[i]) for i, e in enumerate(all_pairs(5))]
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    assert mht_select(recs, 0.05).graph == mht_select(shuffled, 0.05).graph


def test_mht_ties_broken_by_ordinal():
    z = {e: 10.0 for e in all_pairs(3)}
    z[(1, 2)] = z[(1, 3)] = 1.8  # between C_1 and C_2
    res = mht_select(_records(z, 3), 0.05)
    # sorted ascending (1,2) then (1,3): (1,3) meets C_2 first and is accepted, so both go
    assert res.graph.missing == {(1, 2), (1, 3)}


# stepwise path of the same example: statistics per step, smallest removed
STEPS = [
    {(1, 2): 53.71, (1, 3): 12.72, (1, 4): 22.25, (1, 5): 67.92, (2, 3): 0.54,
     (2, 4): 18.16, (2, 5): 1.89, (3, 4): 0.21, (3, 5): 5.86, (4, 5): 73.17},
    {(1, 2): 54.03, (1, 3): 14.62, (1, 4): 24.14, (1, 5): 68.96, (2, 3): 0.20,
     (2, 4): 17.82, (2, 5): 1.90, (3, 5): 5.29, (4, 5): 72.60},
    {(1, 2): 57.02, (1, 3): 17.55, (1, 4): 24.14, (1, 5): 70.12, (2, 4): 17.82,
     (2, 5): 1.94, (3, 5): 5.50, (4, 5): 72.60},
    {(1, 2): 67.63, (1, 3): 17.54, (1, 4): 23.71, (1, 5): 79.62, (2, 4): 22.41,
     (3, 5): 5.49, (4, 5): 77.23},
]


def test_stepwise_five_vertex_path():
    tables = []
    missing = []
    for k, z in enumerate(STEPS):
        t = StepTable(k, tuple(missing), z)
        t.removed = min(z, key=z.get)
        missing.append(t.removed)
        tables.append(t)
    k = stepwise_final_k(tables, 10, 0.05)
    assert k == 3
    assert [t.removed for t in tables[:k]] == [(3, 4), (2, 3), (2, 5)]
    assert [round(t.level, 2) for t in tables] == [2.57, 2.53, 2.49, 2.44]


def test_stepwise_count_formula():
    for L in (10, 45, 190):
        for k in range(0, min(L, 12)):
            assert stepwise_count(L, k) == sum(L - i for i in range(k + 1))


@pytest.fixture(scope="module")
def model_a_estimate():
    X = simulate(model_a(), 1024, 3)
    S = estimate_spectrum(X, 64)
    return S, KlContext(1024, 64, window_constants("cosine"), 5)


def test_stepwise_on_model_a(model_a_estimate):
    S, ctx = model_a_estimate
    res = matsuda_select(S, ctx, 0.05)
    k = res.graph.n_missing
    assert res.graph.missing == {(2, 3), (2, 5), (3, 4)}
    assert res.statistics_computed == stepwise_count(10, k)
    assert len(res.steps) == k + 1
    for t in res.steps:
        if t.removed is not None:
            assert t.z[t.removed] <= t.level
    assert all(v > res.steps[-1].level for v in res.steps[-1].z.values())
    assert "*" in res.format_table()


def test_mht_on_model_a(model_a_estimate):
    S, ctx = model_a_estimate
    res = mht_select(all_single_edge_statistics(S, ctx), 0.05, 5)
    assert res.graph.missing == {(2, 3), (2, 5), (3, 4)}
    assert res.statistics_computed == n_edges(5)


def test_stepwise_immediate_stop(model_a_estimate):
    S, ctx = model_a_estimate
    res = matsuda_select(S, ctx, 0.05, candidates=[(1, 2), (4, 5)])
    assert res.graph.is_saturated
    assert res.statistics_computed == 2


def test_stepwise_steps_exhaust_candidates(model_a_estimate):
    S, ctx = model_a_estimate
    steps = list(stepwise_steps(S, ctx, candidates=[(2, 3), (3, 4)]))
    assert [t.removed for t in steps] == [(3, 4), (2, 3), None]


def test_result_serialization(model_a_estimate):
    S, ctx = model_a_estimate
    res = matsuda_select(S, ctx, 0.05)
    d = res.to_dict()
    assert d["method"] == "stepwise"
    assert d["graph"]["missing"] == [[2, 3], [2, 5], [3, 4]]
    assert len(d["steps"]) == len(res.steps)
    res.to_json()
