import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from frackpp.errors import DomainError, KernelStateError, UnsupportedError
from frackpp.kernel import (
    StableKernel,
    build_tabulation,
    check_kernel_bounds,
    eval_kernel,
    kernel_cdf,
    load_tabulation,
    make_kernel,
    save_tabulation,
    semigroup_defect,
    unit_mass,
)

# p(1, r) from the 30-digit large-r series (2α < 1) or small-r series (2α > 1),
# evaluated with mpmath before the tabulation was built.
SERIES_ORACLE = [
    (0.25, 1.0, 0.08610714691260411),
    (0.25, 3.0, 0.023799193000393282),
    (0.25, 10.0, 0.004872255383721116),
    (0.25, 100.0, 0.00018405372640139752),
    (0.25, 1000.0, 6.150253125301196e-06),
    (0.75, 0.0, 0.28735275145216443),
    (0.75, 0.3, 0.27799930590477956),
    (0.75, 1.0, 0.20203815960784013),
    (0.75, 2.0, 0.08453962312613753),
    (0.75, 4.0, 0.01367294179180394),
    (0.9, 0.0, 0.283068758591619),
    (0.9, 0.5, 0.26385189589824976),
    (0.9, 1.5, 0.1525706009886767),
    (0.9, 3.0, 0.03024434867695856),
]

# (1/π) ∫_0^∞ cos(10ξ) e^{-ξ^{1/2}} dξ by scipy's QAWF routine
QAWF_QUARTER_AT_10 = 0.004872255391983255

positions = st.floats(-1e4, 1e4, allow_nan=False)
times = st.floats(1e-3, 1e3, allow_nan=False)


def test_cauchy_values():
    k = make_kernel(0.5)
    assert eval_kernel(k, 1.0, 0.0) == pytest.approx(1 / math.pi, rel=1e-15)
    assert eval_kernel(k, 2.0, 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-15)


@given(times, positions)
def test_cauchy_closed_form(t, x):
    k = make_kernel(0.5)
    assert eval_kernel(k, t, x) == pytest.approx(t / (math.pi * (t * t + x * x)), rel=1e-13)


@given(times, st.floats(-50, 50))
def test_gaussian_closed_form(t, x):
    k = make_kernel(1.0)
    expected = (4 * math.pi * t) ** -0.5 * math.exp(-x * x / (4 * t))
    assert eval_kernel(k, t, x) == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_nonpositive_time_rejected():
    k = make_kernel(0.5)
    for t in (0.0, -1.0):
        with pytest.raises(DomainError):
            eval_kernel(k, t, 0.0)


def test_tabulated_without_table():
    with pytest.raises(KernelStateError):
        eval_kernel(StableKernel(0.3, 1, "tabulated"), 1.0, 0.0)


def test_mode_guards():
    with pytest.raises(DomainError):
        StableKernel(0.3, 1, "cauchy")
    with pytest.raises(DomainError):
        StableKernel(1.5)
    with pytest.raises(DomainError):
        StableKernel(1.0, 1, "tabulated")


def test_cdf_examples():
    k = make_kernel(0.5)
    assert kernel_cdf(k, 1.0, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert kernel_cdf(k, 1.0, 1.0) == pytest.approx(0.75, abs=1e-15)
    assert kernel_cdf(k, 1.0, np.inf) == 1.0
    assert kernel_cdf(k, 1.0, -np.inf) == 0.0
    assert kernel_cdf(k, 1.0, 1e12) == pytest.approx(1.0, abs=1e-12)


def test_cdf_needs_dim_one():
    with pytest.raises(UnsupportedError):
        kernel_cdf(StableKernel(0.5, 2, "cauchy"), 1.0, 0.0)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.0])
def test_cdf_monotone_and_consistent(alpha):
    k = make_kernel(alpha)
    x = np.linspace(-30, 30, 6001)
    c = kernel_cdf(k, 0.7, x)
    assert np.all(np.diff(c) >= 0)
    # away from the peak the difference quotient of the cdf is the density
    mid = 0.5 * (x[1:] + x[:-1])
    away = np.abs(mid) > 3
    slope = np.diff(c) / np.diff(x)
    assert np.allclose(slope[away], eval_kernel(k, 0.7, mid[away]), rtol=2e-3, atol=1e-12)
    # tail mass is the mirror image
    assert np.allclose(k.tail_mass(0.7, x), kernel_cdf(k, 0.7, -x), rtol=1e-12, atol=0)


def test_tabulated_half_matches_cauchy():
    tab = build_tabulation(0.5)
    exact = make_kernel(0.5)
    r = np.concatenate([[0.0], np.geomspace(1e-4, 1e3, 2000)])
    rel = np.abs(eval_kernel(tab, 1.0, r) / eval_kernel(exact, 1.0, r) - 1)
    assert rel.max() < 1e-6


@pytest.mark.parametrize("alpha,r,expected", SERIES_ORACLE)
def test_frozen_series_oracle(alpha, r, expected):
    assert eval_kernel(make_kernel(alpha), 1.0, r) == pytest.approx(expected, rel=1e-9)


def test_quadrature_oracle_quarter():
    # QAWF carries ~2e-9 relative error here; the series values above are tighter.
    assert eval_kernel(make_kernel(0.25), 1.0, 10.0) == pytest.approx(QAWF_QUARTER_AT_10, rel=1e-8)


def test_live_quadrature_oracle():
    for alpha, r in [(0.75, 1.0), (0.25, 3.0)]:
        v, _ = integrate.quad(lambda xi: math.exp(-(xi ** (2 * alpha))), 0, np.inf, weight="cos", wvar=r)
        assert eval_kernel(make_kernel(alpha), 1.0, r) == pytest.approx(v / math.pi, rel=1e-7)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.0])
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_unit_mass(alpha, t):
    assert unit_mass(make_kernel(alpha), t) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_tail_exponent(alpha):
    k = make_kernel(alpha) if alpha != 0.5 else build_tabulation(0.5)
    assert k.table.tail_exponent() == pytest.approx(-(1 + 2 * alpha), abs=0.05)


@pytest.mark.parametrize("alpha", [0.25, 0.75])
@given(t=st.floats(0.01, 100), x=st.floats(-1e5, 1e5))
def test_scaling_law(alpha, t, x):
    k = make_kernel(alpha)
    s = t ** (1 / (2 * alpha))
    assert eval_kernel(k, t, x) == pytest.approx(eval_kernel(k, 1.0, x / s) / s, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.0])
@given(t=times, x=positions)
def test_symmetry_and_positivity(alpha, t, x):
    k = make_kernel(alpha)
    v = eval_kernel(k, t, x)
    assert v == eval_kernel(k, t, -x)
    if alpha < 1.0:
        assert v > 0


def test_semigroup_examples():
    assert semigroup_defect(make_kernel(0.5), 1.0, 2.0, [0.0, 0.5, 3.0, 20.0]) < 1e-6
    assert semigroup_defect(make_kernel(1.0), 0.5, 0.5, [0.0, 0.5, 3.0]) < 1e-6
    assert semigroup_defect(make_kernel(0.75), 1.0, 1.0, [0.0, 1.0, 4.0, 30.0]) < 1e-4


@pytest.mark.parametrize("alpha", [0.25, 0.9])
def test_semigroup_tabulated(alpha):
    assert semigroup_defect(make_kernel(alpha), 0.5, 1.5, [0.0, 2.0, 50.0]) < 1e-4


def test_bounds_cauchy():
    k = make_kernel(0.5)
    ts = [0.1, 1.0, 10.0]
    xs = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 200)])
    rep = check_kernel_bounds(k, math.pi, ts, xs)
    assert rep.passed
    # the normalised Cauchy density is the constant 1/π
    assert rep.fitted == pytest.approx(math.pi, rel=1e-12)
    bad = check_kernel_bounds(k, 1.0, ts, xs)
    assert not bad.passed and bad.lower_violation > 0


@pytest.mark.parametrize("alpha", [0.25, 0.75])
def test_bounds_tabulated_finite(alpha):
    xs = np.concatenate([[0.0], np.geomspace(1e-3, 1e5, 300)])
    rep = check_kernel_bounds(make_kernel(alpha), 10.0, [0.5, 1.0, 4.0], xs)
    assert rep.passed and 1.0 <= rep.fitted < 10.0


def test_bounds_gaussian_unsupported():
    with pytest.raises(UnsupportedError):
        check_kernel_bounds(make_kernel(1.0), 2.0, [1.0], [0.0])


def test_tabulation_round_trip(tmp_path):
    k = make_kernel(0.75)
    csv_path, json_path = save_tabulation(k, tmp_path / "k75")
    assert csv_path.read_text().splitlines()[0] == "r,p1_of_r"
    back = load_tabulation(tmp_path / "k75")
    x = np.concatenate([[0.0], np.geomspace(1e-6, 1e8, 500)])
    assert np.array_equal(eval_kernel(back, 1.0, x), eval_kernel(k, 1.0, x))
    assert back.table.tail_coefficient == k.table.tail_coefficient


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.0])
def test_cell_integrals_against_quadrature(alpha):
    k = make_kernel(alpha)
    t = 0.3
    for a, b in [(-2.0, -0.5), (-0.3, 0.7), (0.2, 5.0), (40.0, 90.0)]:
        m = integrate.quad(lambda z: float(k.density(t, z)), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        g = integrate.quad(lambda z: z * float(k.density(t, z)), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        assert float(k.mass_between(t, a, b)) == pytest.approx(m, rel=1e-8, abs=1e-15)
        assert float(k.moment_between(t, a, b)) == pytest.approx(g, rel=1e-7, abs=1e-14)


@pytest.mark.parametrize("alpha", [0.25, 0.75])
def test_far_cell_weights_resist_cancellation(alpha):
    # cells far out in the heavy tail, where differencing first moments cancels
    k = make_kernel(alpha)
    t = 0.025
    zl = np.array([700.0, 5000.0, -9100.0])
    zr = np.array([750.0, 5600.0, -8700.0])
    wl, wr = k.linear_weights(t, zl, zr)
    for i in range(3):
        h = zr[i] - zl[i]
        ql = integrate.quad(lambda z: float(k.density(t, z)) * (zr[i] - z) / h, zl[i], zr[i], epsrel=1e-12)[0]
        qr = integrate.quad(lambda z: float(k.density(t, z)) * (z - zl[i]) / h, zl[i], zr[i], epsrel=1e-12)[0]
        assert wl[i] == pytest.approx(ql, rel=1e-7)
        assert wr[i] == pytest.approx(qr, rel=1e-7)
