import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frackpp.errors import ConfigError, DomainError
from frackpp.evolve import GridSpec, SimulationConfig, convolve_pl, run, theory_constants
from frackpp.operators import SingularIntegralOperator
from frackpp.reaction import logistic
from frackpp.verify import (
    AlgebraicProfile,
    heuristic_comparison,
    heuristic_front,
    lower_bound_check,
    profile_residual_sign,
    profile_sweep,
    run_id,
    supersolution_check,
)

XS = np.concatenate([-np.geomspace(1e-2, 1e5, 40)[::-1], [0.0], np.geomspace(1e-2, 1e5, 40)])


def test_heuristic_example():
    assert heuristic_front(0.5, 1, 1.0, 2.0) == pytest.approx(2**0.5 * math.e, rel=1e-15)
    assert heuristic_front(0.5, 1, 1.0, 2.0) == pytest.approx(3.844231028159117, rel=1e-15)
    with pytest.raises(DomainError):
        heuristic_front(0.5, 1, 1.0, 0.0)


@given(alpha=st.floats(0.1, 1.0), dim=st.integers(1, 3), fp0=st.floats(0.1, 3.0),
       t=st.floats(0.1, 20.0), dt=st.floats(0.01, 5.0), dfp=st.floats(0.01, 1.0))
def test_heuristic_monotone(alpha, dim, fp0, t, dt, dfp):
    base = heuristic_front(alpha, dim, fp0, t)
    assert heuristic_front(alpha, dim, fp0, t + dt) > base
    assert heuristic_front(alpha, dim, fp0 + dfp, t) > base


def test_rate_vanishes_in_high_dimension():
    rates = [theory_constants(0.5, 1.0, dim)["c_star"] for dim in (1, 10, 100, 10_000)]
    assert np.all(np.diff(rates) < 0) and rates[-1] < 1e-3


def test_supersolution_on_logistic_run(compact_half_run):
    rep = supersolution_check(compact_half_run)
    assert rep.passed
    assert rep.max_defect[0] == 0.0  # t = 0 compares u0 with itself
    assert all(d <= 0 for d in rep.max_defect[1:])
    assert rep.margin[-1] > rep.margin[1]
    assert rep.run_id == run_id(compact_half_run) and len(rep.run_id) == 12
    with pytest.raises(ConfigError):
        supersolution_check(compact_half_run, fp0=2.0)


@pytest.fixture(scope="module")
def linear_only_run():
    cfg = SimulationConfig(reaction="none", t_final=2.0, grid=GridSpec(10.0, 0.02, 1.005, 1e5))
    return run(cfg)


def test_zero_reaction_is_equality(linear_only_run):
    traj = linear_only_run
    u0 = traj.initial
    worst = 0.0
    for snap in traj.snapshots[1:]:
        bound = convolve_pl(traj.kernel, snap.t, traj.grid.x, u0.values, u0.u_left, u0.u_right)
        worst = max(worst, float(np.max(np.abs(snap.values - bound))))
    assert worst <= 5e-4
    assert supersolution_check(traj).passed


def test_lower_bound(compact_half_run):
    rep = lower_bound_check(compact_half_run, 0.3, 0.1)
    assert rep.passed and not rep.inconclusive and rep.late_minimum > 0.9
    assert rep.minima[0] == pytest.approx(1.0)
    for sigma in (0.0, 0.5, 0.7):
        with pytest.raises(DomainError):
            lower_bound_check(compact_half_run, sigma, 0.1)
    with pytest.raises(DomainError):
        lower_bound_check(compact_half_run, 0.3, 1.0)


def test_heuristic_ratio_decays(compact_half_run):
    cmp = heuristic_comparison(compact_half_run, 0.5, window=(8.0, 14.0))
    assert cmp.decays and cmp.log_slope < 0


def test_profile_guards():
    for bad in (dict(a=0.0, b0=1.0), dict(a=1.5, b0=1.0), dict(a=0.5, b0=0.0),
                dict(a=0.5, b0=1.0, orientation="side")):
        with pytest.raises(DomainError):
            AlgebraicProfile(**bad)


@pytest.mark.parametrize("a,b", [(1.0, 1.0), (0.5, 3.0), (0.2, 0.25)])
def test_half_laplacian_of_lorentzian(a, b):
    # (-Δ)^{1/2} of a b²/(b² + x²) is a b (b² - x²)/(b² + x²)²
    prof = AlgebraicProfile(a, b, r=0.0)
    x = np.linspace(-30, 30, 61) * b
    rep = profile_residual_sign(prof, SingularIntegralOperator(0.5), None, [0.0], x)
    exact = a * b * (b**2 - x**2) / (b**2 + x**2) ** 2
    assert np.max(np.abs(rep.residual[0] - exact)) <= 1e-8


def test_residual_linear_in_amplitude():
    op = SingularIntegralOperator(0.75)
    one = profile_residual_sign(AlgebraicProfile(1.0, 2.0), op, None, [0.0, 1.0], XS).residual
    half = profile_residual_sign(AlgebraicProfile(0.5, 2.0), op, None, [0.0, 1.0], XS).residual
    assert np.allclose(half, 0.5 * one, rtol=1e-12, atol=1e-15)


def test_residual_tail_vanishes():
    rep = profile_residual_sign(AlgebraicProfile(1.0, 1.0), SingularIntegralOperator(0.5), logistic(1.0),
                                [0.0], np.array([1e4, 1e5]))
    assert np.max(np.abs(rep.residual)) < 1e-6


def test_profile_sweep_region():
    times = np.linspace(0.0, 14.0, 8)
    entries = profile_sweep((0.25, 0.5, 1.0), (0.5, 1.0, 2.0, 4.0), SingularIntegralOperator(0.5),
                            logistic(1.0), times, XS, 0.5, "sub")
    holds = {(e.a, e.b0) for e in entries if e.passed}
    assert holds == {(0.25, 2.0), (0.25, 4.0), (0.5, 2.0), (0.5, 4.0)}
    supers = profile_sweep((0.25, 0.5, 1.0), (0.5, 1.0, 2.0, 4.0), SingularIntegralOperator(0.5),
                           logistic(1.0), times, XS, 0.5, "super")
    assert not any(e.passed for e in supers)
