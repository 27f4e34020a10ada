import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qccantor import gauge as gm
from qccantor.errors import BracketError, DomainError, PreconditionError, ResolutionError
from qccantor.gauge import GaugeSpec, power_gauge

# frozen from an mpmath evaluation at 40 digits
LOG_H_POWER = -1.3862943611198906
LOG_H_LOG = -2.6137056388801094


def test_power_evaluation():
    assert power_gauge(2 / 3).eval_log(math.log(0.125)) == pytest.approx(LOG_H_POWER, rel=1e-15)


def test_log_power_evaluation():
    g = GaugeSpec(d=1.0, eps_kind="log_power", beta=1.0, t_cutoff=0.5)
    assert g.eval_log(-4.0) == pytest.approx(LOG_H_LOG, rel=1e-15)


def test_invert_power_closed_form():
    lt = gm.invert(power_gauge(2 / 3), math.log(0.01))
    assert math.exp(lt) == pytest.approx(0.001, rel=1e-12)


def test_invert_inverse_log():
    g = GaugeSpec(d=1.0, eps_kind="inv_log_power", beta=1.0, t_cutoff=0.3)
    lt = gm.invert(g, -5.0 - math.log(5.0))
    assert lt == pytest.approx(-5.0, abs=1e-12)
    assert g.eval_log(lt) == pytest.approx(-5.0 - math.log(5.0), abs=1e-12)


GAUGES = [
    power_gauge(0.5),
    GaugeSpec(d=1.0, eps_kind="log_power", beta=2.0, t_cutoff=0.1),
    GaugeSpec(d=1.0, eps_kind="inv_log_power", beta=1.0, t_cutoff=0.3),
    GaugeSpec.tabulated(1.2, [-50.0, -10.0, -2.0], [1.0, 0.5, 0.0], t_cutoff=0.2),
]


@pytest.mark.parametrize("g", GAUGES, ids=lambda g: g.short_name())
@given(v=st.floats(0.0, 1.0))
def test_invert_round_trip(g, v):
    u = -400.0 + v * (min(-1.7, g.log_cutoff - 0.01) + 400.0)
    target = g.eval_log(u)
    back = gm.invert(g, target)
    assert abs(g.eval_log(back) - target) <= 1e-14 * max(1.0, abs(target))


def test_invert_vectorized_matches_scalar():
    g = GAUGES[2]
    targets = np.linspace(-40.0, -3.0, 7)
    vec = gm.invert(g, targets)
    assert np.allclose(vec, [gm.invert(g, float(t)) for t in targets], rtol=0, atol=1e-13)


def test_invert_bad_bracket():
    with pytest.raises(BracketError):
        gm.invert(power_gauge(1.0), -3.0, bracket=(-2.0, -1.0))


@pytest.mark.parametrize("g", GAUGES, ids=lambda g: g.short_name())
def test_strictly_increasing_on_grid(g):
    grid = -np.geomspace(1e6, -g.log_cutoff + 0.01 if not g.is_power else 0.01, 400)
    v = np.asarray(g.eval_log(grid))
    assert np.all(np.diff(v) > 0)
    assert v[0] < -1e5 * g.d * 0.5  # h -> 0 at the small end


def test_monotonicity_labels():
    assert GAUGES[0].monotonicity() == "constant"
    assert GAUGES[1].monotonicity() == "decreasing"
    assert GAUGES[2].monotonicity() == "increasing"
    assert GAUGES[3].monotonicity() == "decreasing"


def test_spec_validation():
    with pytest.raises(DomainError):
        GaugeSpec(d=2.5)
    with pytest.raises(DomainError):
        GaugeSpec(d=1.0, eps_kind="log_power", beta=0.0, t_cutoff=0.5)
    with pytest.raises(DomainError):
        GaugeSpec(d=1.0, eps_kind="log_power", beta=1.0, t_cutoff=1.0)
    with pytest.raises(DomainError):
        GAUGES[1].eval_log(math.log(0.2))


def test_descriptor_round_trip():
    for g in GAUGES:
        assert GaugeSpec.from_descriptor(g.descriptor()) == g


def test_conjugate_dimension_examples():
    assert gm.conjugate_dimension(2, 2 / 3) == pytest.approx(1.0, rel=1e-15)
    assert gm.conjugate_dimension(1, 1.3) == 1.3
    assert gm.conjugate_dimension(2, 1.0) == pytest.approx(4 / 3, rel=1e-15)
    with pytest.raises(DomainError):
        gm.conjugate_dimension(0.5, 1.0)


@given(K=st.floats(1.0, 20.0), d=st.floats(0.01, 1.99))
def test_conjugate_dimension_properties(K, d):
    dp = gm.conjugate_dimension(K, d)
    assert d <= dp * (1 + 1e-15) and dp < 2.0
    # the inverse map uses 1/K
    assert gm.conjugate_dimension(1 / K, dp, allow_inverse=True) == pytest.approx(d, rel=1e-12)


@given(K=st.floats(1.01, 20.0))
def test_critical_exponent_is_fixed(K):
    assert gm.conjugate_dimension(K, 2 / (K + 1)) == pytest.approx(1.0, rel=1e-14)


def test_target_gauge_unit():
    tg = gm.target_gauge(power_gauge(2 / 3), 2.0)
    assert tg.is_power and tg.d == pytest.approx(1.0)


def test_target_gauge_log_power_constant():
    K, d, beta = 3.0, 0.5, 1.5
    g = GaugeSpec(d=d, eps_kind="log_power", beta=beta, t_cutoff=0.2)
    tg = gm.target_gauge(g, K)
    a = 2 / (2 + (K - 1) * d)
    x = np.linspace(-30, -2, 9)
    want = a * beta * (math.log(K) + np.log(-x))  # log of K^{a beta} log^{a beta}(1/t)
    assert np.allclose(tg.log_eps(x), want, rtol=1e-13)
    # equals eps^a evaluated at t^K
    assert np.allclose(tg.log_eps(x), a * g.log_eps(K * x), rtol=1e-13)


def test_target_gauge_inverse_log_exponent():
    g = GaugeSpec(d=2 / 3, eps_kind="inv_log_power", beta=1.0, t_cutoff=0.3)
    tg = gm.target_gauge(g, 2.0)
    assert tg.beta == pytest.approx(0.75, rel=1e-15)
    x = np.linspace(-20, -2, 5)
    assert np.allclose(tg.log_eps(x), 0.75 * g.log_eps(x), rtol=1e-14)


def test_order_compare_examples():
    assert gm.order_compare(power_gauge(0.5), power_gauge(0.6)) == "g_smaller"
    assert gm.order_compare(power_gauge(0.6), power_gauge(0.5)) == "h_smaller"
    inv = GaugeSpec(d=1.0, eps_kind="inv_log_power", beta=1.0, t_cutoff=0.5)
    assert gm.order_compare(power_gauge(1.0), inv) == "g_smaller"
    two = GaugeSpec(d=0.7, log_scale=math.log(2.0))
    assert gm.order_compare(power_gauge(0.7), two) == "equivalent"


def test_table_io(tmp_path):
    p = tmp_path / "eps.txt"
    lt = [-20.0, -10.0, -3.0]
    gm.save_table(p, lt, [2.0, 1.0, 0.5], comment="test table")
    a, b = gm.load_table(p)
    assert list(a) == lt and list(b) == [2.0, 1.0, 0.5]


# ---------------------------------------------------------------- regularization

def _far_grid(t0, n=1000):
    return -np.geomspace(1e5, -math.log(t0), n)


def test_decreasing_identity_on_monotone_input():
    lt = _far_grid(0.3)
    reg = gm.regularize_decreasing((lt, np.log(-lt)), 0.3, 1.0)
    assert np.max(np.abs(reg.eps_out - reg.eps_in) / reg.eps_in) < 1e-14


def test_decreasing_flattens_bump():
    lt = _far_grid(0.3)
    eps = -lt + 3.0 * np.exp(-((lt + 8.0) / 0.7) ** 2)
    reg = gm.regularize_decreasing((lt, np.log(eps)), 0.3, 1.0)
    inf = np.minimum.accumulate(reg.eps_in)  # grid oracle
    assert np.array_equal(inf, reg.running_inf)
    assert np.any(inf < reg.eps_in * (1 - 1e-6))  # the bump was really cut
    assert np.all(reg.eps_out <= reg.eps_in)
    assert np.all(reg.eps_out >= inf * (1 - 1e-3))
    assert np.all(np.diff(reg.eps_out) < 0)
    assert np.all(np.diff(lt + np.log(reg.eps_out)) > 0)
    assert reg.eps_out[-1] >= 0.5 * reg.eps_in[-1]


def test_decreasing_rejects_increasing():
    lt = _far_grid(0.3)
    with pytest.raises(PreconditionError):
        gm.regularize_decreasing((lt, -np.log(-lt)), 0.3, 1.0)


def _inc_reg(n=1000):
    lt = np.linspace(math.log(1e-10), math.log(0.3), n)
    return lt, gm.regularize_increasing((lt, -np.log(-lt)), 1.0, 2.0, 0.3)


def test_increasing_step_sequence():
    _, reg = _inc_reg()
    lt0 = math.log(0.3)
    for n in range(5):
        assert reg.log_t_seq[n] == lt0 * 2 ** n
    assert np.exp(reg.log_t_seq[:3]) == pytest.approx([0.3, 0.09, 0.0081], rel=1e-14)


def test_increasing_stages():
    lt, reg = _inc_reg()
    e6 = reg.eps6(lt)
    assert np.all(np.diff(e6) > 0)
    assert np.all(np.diff(e6 / np.exp(lt)) <= 0)
    assert math.isfinite(reg.log_type_constant)
    # the running supremum of an increasing input changes nothing
    assert np.allclose(reg.stages["running_sup"], reg.stages["eps1"], rtol=0, atol=0)
    assert np.all(reg.stages["final"] >= np.exp(-np.log(-lt)) * (1 - 1e-12))


def test_increasing_step_recursion():
    _, reg = _inc_reg()
    hx, hy = reg.stages["hull"]
    K = 2.0
    tn = np.exp(reg.log_t_seq)
    e3 = [float(np.interp(t, hx, hy)) if t >= hx[1] else hy[1] / hx[1] * t for t in tn]
    e3[0] = float(np.interp(0.3, hx, hy))
    steps = [e3[0]]
    for v in e3[1:]:
        steps.append(max(v, steps[-1] / K))
    assert np.allclose(reg.step_values, 10 * K * np.array(steps), rtol=1e-14)


def test_increasing_rejects_coarse_grid():
    lt = np.linspace(math.log(0.05), math.log(0.3), 10)
    with pytest.raises(ResolutionError):
        gm.regularize_increasing((lt, -np.log(-lt)), 1.0, 2.0, 0.3)


def test_increasing_needs_small_t0():
    lt = np.linspace(-30, math.log(0.3), 50)
    with pytest.raises(DomainError):
        gm.regularize_increasing((lt, -np.log(-lt)), 1.0, 2.0, 0.6)
