import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermoemu.model import BathParams, build_heat_leak_variant
from thermoemu.rates import RatePair, check_detailed_balance, decay_rates, edge_rates, escape_rate, work_rate

from conftest import ref_four, ref_three

pos = dict(allow_nan=False, allow_infinity=False)


def test_reference_value():
    pair = decay_rates(1.0, BathParams("hot", 3.0, 1e-6))
    assert pair.down == pytest.approx(3.5277e-6, rel=1e-4)
    assert pair.down == pytest.approx(1e-6 / (1 - math.exp(-1 / 3)), rel=1e-14)


def test_nonpositive_gap_rejected():
    with pytest.raises(ValueError):
        decay_rates(0.0, BathParams("hot", 3.0, 1e-6))


def test_zero_temperature_limit():
    pair = decay_rates(1.0, BathParams("cold", 1e-3, 1e-6))
    assert pair.up < 1e-300
    assert pair.down == pytest.approx(1e-6)


def test_detailed_balance_check():
    pair = decay_rates(0.7, BathParams("hot", 3.0, 1e-6, dim=3))
    assert check_detailed_balance(pair, 0.7, 3.0)
    assert not check_detailed_balance(RatePair(pair.down, 1.01 * pair.up), 0.7, 3.0)


def test_leak_rates_balance_at_hot_temperature():
    s = build_heat_leak_variant(ref_three(), 1e-11)
    fwd, bwd = edge_rates(s, s.leak)
    gap = s.gap(s.leak)
    assert check_detailed_balance(RatePair(bwd, fwd), gap, 3.0)


def test_edge_canonicalisation():
    s = ref_four(-0.1)
    # 3 -> 2 climbs by 0.1 when epsilon < 0: forward is absorption
    up, down = edge_rates(s, s.cycle[2])
    assert up < down
    assert up / down == pytest.approx(math.exp(-0.1 / 3.0), rel=1e-14)
    fwd, bwd = edge_rates(s, s.cycle[3])  # 2 -> 0 drops by omega_h
    assert fwd > bwd


def test_work_rate_formula():
    s = ref_three()
    kappa = escape_rate(s, 1) + escape_rate(s, 2)
    assert work_rate(s) == pytest.approx(4e-16 / kappa, rel=1e-15)
    with pytest.raises(ValueError):
        edge_rates(s, s.work_edge)


def test_leak_enters_escape_rates():
    s = ref_three()
    leaky = build_heat_leak_variant(s, 1e-6)
    assert work_rate(leaky) < work_rate(s)


@given(st.floats(1e-3, 10.0, **pos), st.floats(1e-2, 50.0, **pos), st.floats(1e-2, 50.0, **pos), st.integers(1, 3))
def test_rates_increase_with_temperature(omega, t1, t2, dim):
    lo, hi = sorted((t1, t2))
    a = decay_rates(omega, BathParams("hot", lo, 1e-6, dim))
    b = decay_rates(omega, BathParams("hot", hi, 1e-6, dim))
    assert b.down >= a.down * (1 - 1e-12)
    assert b.up >= a.up * (1 - 1e-12)
    assert a.up / a.down == pytest.approx(math.exp(-omega / lo), rel=1e-12, abs=1e-300)


@given(st.floats(1e-3, 1.0, **pos), st.integers(1, 3))
def test_high_temperature_limit(omega, dim):
    T = 1e6
    pair = decay_rates(omega, BathParams("hot", T, 1e-6, dim))
    classical = 1e-6 * omega ** dim * T / omega
    assert pair.down == pytest.approx(classical, rel=1e-5)
    assert pair.up == pytest.approx(pair.down, rel=1e-5)
