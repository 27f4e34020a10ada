import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qccantor import sigma_finite as sf
from qccantor.errors import AreaError, DomainError, FormatError, RangeError

# frozen from mpmath at 40 digits
LAM1 = 0.9102392266268374
LAM2 = 0.5100697232983947
LAM_SQ_SUM = 1.8880018769319028


@pytest.fixture(scope="module")
def plan_low():
    return sf.glue_plan(2.0, 0.25, 6)


@pytest.fixture(scope="module")
def plan_k1():
    return sf.glue_plan(1.0, 0.5, 3)


def test_lambda_values():
    assert sf.lam(1) == pytest.approx(LAM1, rel=1e-15)
    assert sf.lam(2) == pytest.approx(LAM2, rel=1e-15)
    with pytest.raises(DomainError):
        sf.lam(0)


def test_lambda_square_sum():
    s = sf.lam_square_sum()
    assert 0 < s.error_bound < 1e-11
    assert abs(s.value - LAM_SQ_SUM) <= s.error_bound
    assert s.upper >= LAM_SQ_SUM


def test_lower_powers_diverge():
    n = np.arange(1, 10 ** 6 + 1, dtype=float)
    v = sf.lam(n) ** 1.5
    marks = [math.fsum(v[: 10 ** j].tolist()) for j in (2, 4, 6)]
    assert marks[0] < marks[1] < marks[2]
    assert marks[2] - marks[1] > 2.0  # still gaining mass at n = 1e6
    sq = np.cumsum(sf.lam(n) ** 2)
    assert sq[-1] - sq[10 ** 4 - 1] < 0.1  # square sums settle


def test_bracket_example():
    assert sf.bracket_exponent(0.003) == 8
    assert 0.003 < 2.0 ** -8 <= 0.006


@given(x=st.floats(1e-300, 1e300))
def test_bracket_property(x):
    c = sf.bracket_exponent(x)
    assert bool(sf.bracket_holds(x, c))
    p = math.ldexp(1.0, -c)
    assert x < p <= 2 * x


def test_bracket_rejects_nonpositive():
    with pytest.raises(DomainError):
        sf.bracket_exponent(0.0)


@given(ix=st.integers(0, 2 ** 31 - 1), iy=st.integers(0, 2 ** 31 - 1))
def test_morton_round_trip(ix, iy):
    code = sf.morton_encode(np.array([ix]), np.array([iy]))
    x, y = sf.morton_decode(code)
    assert (int(x[0]), int(y[0])) == (ix, iy)


def test_place_parent_itself():
    pl = sf.dyadic_place(3, [3])
    assert (pl.ix[0], pl.iy[0]) == (0, 0)


def test_place_four_children():
    pl = sf.dyadic_place(3, [4, 4, 4, 4])
    assert sorted(zip(pl.ix.tolist(), pl.iy.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert sf.dyadic_disjoint(pl)


def test_place_mixed():
    pl = sf.dyadic_place(2, [3, 4, 4])
    assert (pl.ix[0], pl.iy[0]) == (0, 0)
    # the next child (right of child 0) is subdivided for the two smaller squares
    assert [(int(a), int(b)) for a, b in zip(pl.ix[1:], pl.iy[1:])] == [(2, 0), (3, 0)]
    assert sf.dyadic_disjoint(pl)


def test_place_overfull():
    with pytest.raises(AreaError):
        sf.dyadic_place(1, [2, 2, 2, 2, 2])
    with pytest.raises(AreaError):
        sf.dyadic_place(3, [2])


def test_disjoint_detects_overlap():
    bad = sf.Placement(0, np.array([1, 2]), np.array([0, 1]), np.array([0, 1]))
    assert not sf.dyadic_disjoint(bad)


@given(st.lists(st.integers(3, 9), min_size=1, max_size=40))
def test_placement_property(demands):
    area = sum(4.0 ** -(c - 2) for c in demands)
    if area > 1:
        with pytest.raises(AreaError):
            sf.dyadic_place(2, demands)
        return
    pl = sf.dyadic_place(2, demands)
    assert list(pl.c) == demands
    assert sf.dyadic_disjoint(pl)


def test_plan_invariants(plan_low):
    rep = sf.verify_glue(plan_low)
    assert rep["ok"], rep["problems"]
    for row in rep["per_k"]:
        assert row["bracket"] and row["disjoint"] and row["target_ok"]
        assert row["area_sum"] < 4.0 ** -row["k"] / 1000
        assert row["source_sum"] > row["target_sum"]
    assert rep["total_copy_area"] < rep["total_area_cap"] < 1 / 3000


def test_plan_eps_is_largest_power(plan_low):
    s2 = plan_low.lam_sq_upper
    for lv in plan_low.levels:
        bound = 1e-3 * 4.0 ** -lv.k
        assert lv.eps ** 2 * s2 < bound
        assert (2 * lv.eps) ** 2 * s2 >= bound


def test_plan_copy_counts_minimal(plan_low):
    for lv in plan_low.levels:
        x = lv.scales()
        d = plan_low.d_prime
        assert math.fsum((x ** d).tolist()) > 1.0
        assert math.fsum((x[:-1] ** d).tolist()) <= 1.0


def test_plan_k1_sides_coincide(plan_k1):
    rep = sf.verify_glue(plan_k1)
    assert rep["ok"]
    for row in rep["per_k"]:
        assert row["source_sum"] == row["target_sum"]


def test_plan_certificates(plan_k1):
    rep = sf.verify_glue(plan_k1, certificates={"source": math.log(0.5), "target": math.log(0.5)})
    assert rep["ok"]
    for row in rep["per_k"]:
        assert row["target_contribution"] == row["source_contribution"]


def test_plan_range_error():
    with pytest.raises(RangeError) as info:
        sf.glue_plan(2.0, 2 / 3, 4, max_copies=100_000)
    assert info.value.max_feasible is not None


def test_plan_json(plan_low):
    doc = json.loads(json.dumps(plan_low.to_json()))
    back = sf.GluePlan.from_json(doc)
    assert back.to_json() == plan_low.to_json()
    with pytest.raises(FormatError):
        sf.GluePlan.from_json({"version": "other"})


def test_plan_tree_mismatch(plan_low, small_tree):
    with pytest.raises(DomainError):
        sf.verify_glue(plan_low, tree=small_tree)
