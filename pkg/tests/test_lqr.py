from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratealloc.lqr import GainSchedule, SystemSpec, stage_cost, step_perfect, synthesize_gains


def riccati_by_hand(a_seq, b, q, d, p_terminal):
    """Exact rational unrolling of the scalar Riccati recursion."""
    a_seq = [Fraction(a) for a in a_seq]
    b, q, d = Fraction(b), Fraction(q), Fraction(d)
    p = Fraction(p_terminal)
    f = [Fraction(0)]
    ps = [p]
    for a in reversed(a_seq):
        f.insert(0, -(a * b * p) / (d + b * b * p))
        p = q + a * a * p - (a * b * p) ** 2 / (d + b * b * p)
        ps.insert(0, p)
    return f, ps


@pytest.fixture
def two_stage():
    return SystemSpec.constant(1.0, 2, b=1.0, q=2.0, d=5.0, x0=100.0, terminal_weight=2.0)


def test_two_stage_gains_match_hand_recursion(two_stage):
    gains = synthesize_gains(two_stage)
    f, p = riccati_by_hand([1, 1], 1, 2, 5, 2)
    assert f[1] == Fraction(-2, 7)
    assert p[1] == Fraction(24, 7)
    assert f[0] == Fraction(-24, 59)
    np.testing.assert_allclose(gains.f_seq, [float(v) for v in f], rtol=1e-15)
    np.testing.assert_allclose(gains.p_seq, [float(v) for v in p], rtol=1e-15)
    assert gains.f_seq[-1] == 0.0


def test_single_stage_without_terminal_weight_has_no_control():
    spec = SystemSpec.constant(2.5, 1, b=1.3, q=2.0, d=5.0, terminal_weight=0.0)
    assert synthesize_gains(spec).f_seq.tolist() == [0.0, 0.0]


def test_zero_input_coefficient_gives_zero_gains():
    spec = SystemSpec.constant(1.7, 6, b=0.0, q=2.0, d=5.0)
    assert np.all(synthesize_gains(spec).f_seq == 0.0)


def test_terminal_weight_defaults_to_q():
    spec = SystemSpec.constant(1.0, 3, b=1.0, q=2.5, d=1.0)
    assert spec.terminal_weight == 2.5


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(q=0.0, d=1.0),
        dict(q=1.0, d=-1.0),
        dict(q=1.0, d=1.0, sigma_z2=-0.1),
        dict(q=1.0, d=1.0, c2=-1.0),
        dict(q=1.0, d=1.0, terminal_weight=-1.0),
    ],
)
def test_spec_rejects_invalid_parameters(kwargs):
    with pytest.raises(ValueError):
        SystemSpec.constant(1.0, 3, b=1.0, **kwargs)


def test_spec_rejects_empty_horizon():
    with pytest.raises(ValueError):
        SystemSpec(a_seq=(), b=1.0, q=1.0, d=1.0)


def test_jump_sequence():
    spec = SystemSpec.with_jump(1.0, 2.0, 3, 4, b=1.0, q=2.0, d=5.0)
    assert spec.a_seq == (1.0, 1.0, 1.0, 2.0)


def test_gain_schedule_requires_zero_terminal_gain():
    with pytest.raises(ValueError, match="F_T"):
        GainSchedule([-0.5, -0.5, 0.1])
    g = GainSchedule.constant(-0.3, 4)
    assert g.f_seq.tolist() == [-0.3] * 4 + [0.0]
    assert g.horizon == 4


def test_gain_schedule_is_read_only():
    g = GainSchedule.constant(-0.3, 2)
    with pytest.raises(ValueError):
        g.f_seq[0] = 1.0


@pytest.mark.parametrize(
    "x, u, expected",
    [(0.0, 0.0, 0.0), (1.0, 1.0, 7.0), (100.0, 0.0, 20000.0)],
)
def test_stage_cost(x, u, expected):
    spec = SystemSpec.constant(1.0, 1, b=1.0, q=2.0, d=5.0)
    assert stage_cost(x, u, spec) == expected


def test_step_perfect_examples(two_stage):
    gains = synthesize_gains(two_stage)
    assert step_perfect(0.0, 0, 0.0, two_stage, gains) == (0.0, 0.0)
    x_next, u = step_perfect(100.0, 0, 0.0, two_stage, gains)
    assert u == pytest.approx(-2400 / 59, rel=1e-14)
    assert x_next == pytest.approx(3500 / 59, rel=1e-14)

    spec = SystemSpec.constant(2.0, 3, b=1.0, q=1.0, d=1.0)
    assert step_perfect(5.0, 1, 1.0, spec, GainSchedule.constant(0.0, 3)) == (11.0, 0.0)
    with pytest.raises(IndexError):
        step_perfect(1.0, 3, 0.0, spec, GainSchedule.constant(0.0, 3))


plants = st.fixed_dictionaries(
    {
        "a_seq": st.lists(st.floats(-3, 3), min_size=1, max_size=15),
        "b": st.floats(-2, 2),
        "q": st.floats(0.01, 10),
        "d": st.floats(0.01, 10),
        "terminal_weight": st.floats(0, 10),
    }
)


@given(plants)
def test_riccati_cost_dominates_state_weight(p):
    spec = SystemSpec(**p)
    gains = synthesize_gains(spec)
    assert np.all(gains.p_seq >= 0)
    assert np.all(gains.p_seq[:-1] >= spec.q * (1 - 1e-12))


@given(plants)
def test_gain_sign_opposes_open_loop(p):
    spec = SystemSpec(**p)
    gains = synthesize_gains(spec)
    for t in range(spec.horizon):
        s = np.sign(spec.a_seq[t] * spec.b * gains.p_seq[t + 1])
        assert np.sign(gains.f_seq[t]) == -s


@given(st.floats(0.01, 3), st.floats(0.01, 10), st.floats(0.01, 10), st.integers(1, 15))
def test_optimal_loop_contracts(a, q, d, horizon):
    spec = SystemSpec.constant(a, horizon, b=1.0, q=q, d=d)
    gains = synthesize_gains(spec)
    closed = a + gains.f_seq[:horizon]
    assert np.all(np.abs(closed) < abs(a))


@settings(max_examples=50)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3),
       st.floats(-1e3, 1e3), st.floats(0, 1))
def test_stage_cost_is_nonnegative_and_convex(x1, u1, x2, u2, theta):
    spec = SystemSpec.constant(1.0, 1, b=1.0, q=2.0, d=5.0)
    mid = stage_cost(theta * x1 + (1 - theta) * x2, theta * u1 + (1 - theta) * u2, spec)
    chord = theta * stage_cost(x1, u1, spec) + (1 - theta) * stage_cost(x2, u2, spec)
    assert stage_cost(x1, u1, spec) >= 0
    assert mid <= chord * (1 + 1e-12) + 1e-9
