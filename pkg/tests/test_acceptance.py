"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines
inline; they are also repeated in the terminal summary.
"""
import math
import time

import numpy as np
import pytest
from conftest import RUN_SECONDS, record_acceptance

from frackpp.evolve import Field, GradedGrid, GridSpec, LinearPropagator, SimulationConfig, run, strang_step
from frackpp.fronts import check_invasion, fit_rate, sandwich, stretch_diagnostic
from frackpp.kernel import check_kernel_bounds, eval_kernel, make_kernel, semigroup_defect, unit_mass
from frackpp.operators import SingularIntegralOperator, SpectralOperator, apply_singular_integral, apply_spectral
from frackpp.reaction import logistic
from frackpp.verify import supersolution_check


def _report(number: int, passed: bool, text: str) -> None:
    record_acceptance(f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {text}")


def test_compact_half_rate(compact_half_run):
    est = fit_rate(compact_half_run.traces[0.5], "exponential", (8.0, 14.0), "plus")
    seconds = RUN_SECONDS["compact_half"]
    ok = abs(est.rate - 0.5) <= 0.05 and seconds < 300
    _report(1, ok, f"x_0.5^+ rate {est.rate:.4f} (target 0.5 ± 0.05), {compact_half_run.grid.size} nodes, "
                   f"run {seconds:.1f} s (< 300 s)")
    assert ok


def test_compact_half_sandwich(compact_half_run):
    traces = [compact_half_run.traces[lam] for lam in (0.25, 0.5, 0.75)]
    t_end = compact_half_run.config.t_final
    band = sandwich(traces, 0.5, (t_end - t_end / 3.0, t_end))
    widen = sandwich(traces, 0.5, (10.0, 14.0))
    ok = band.band_constant <= 3.0 and widen.spread_end <= widen.spread_start + 0.05
    _report(2, ok, f"band C = {band.band_constant:.4f} (<= 3); log-spread across levels "
                   f"{widen.spread_start:.4f} at t=10 -> {widen.spread_end:.4f} at t=14 (slack 0.05)")
    assert ok


def test_monotone_half_rate(monotone_run, monotone_exp):
    est = fit_rate(monotone_run.traces[0.5], "exponential", monotone_exp.fronts.window, "minus")
    ok = abs(est.rate - 1.0) <= 0.1
    _report(3, ok, f"|x_0.5^-| rate {est.rate:.4f} (target 1.0 ± 0.1)")
    assert ok


def test_gaussian_linear_speed(gaussian_linear_run, gaussian_linear_exp):
    est = fit_rate(gaussian_linear_run.traces[0.5], "linear", gaussian_linear_exp.fronts.window, "plus")
    ok = abs(est.rate - 2.0) <= 0.1
    _report(4, ok, f"alpha=1 linear speed {est.rate:.4f} (target 2.0 ± 0.1)")
    assert ok


def test_invasion_bracketing(compact_half_run):
    inner = check_invasion(compact_half_run.snapshots, 0.3, 0.5, "compact", 0.05)
    outer = check_invasion(compact_half_run.snapshots, 0.7, 0.5, "compact", 0.05)
    at_14 = compact_half_run.snapshots[-1].t == pytest.approx(14.0)
    ok = inner.passed and outer.passed and inner.values[-1] >= 0.95 and outer.values[-1] <= 0.05 and at_14
    _report(5, ok, f"c=0.3 min {inner.values[-1]:.4f} (>= 0.95), c=0.7 max {outer.values[-1]:.2e} (<= 0.05) at t=14")
    assert ok


def test_front_stretching(compact_half_run, gaussian_linear_run, gaussian_linear_exp):
    half = stretch_diagnostic(compact_half_run.traces[0.25], compact_half_run.traces[0.75], (8.0, 14.0))
    gauss = stretch_diagnostic(gaussian_linear_run.traces[0.25], gaussian_linear_run.traces[0.75], gaussian_linear_exp.fronts.window)
    ok = abs(half.rate - 0.5) <= 0.1 and abs(gauss.rate) <= 0.05
    _report(6, ok, f"width rate alpha=1/2 {half.rate:.4f} (0.5 ± 0.1), alpha=1 {gauss.rate:.4f} (0 ± 0.05)")
    assert ok


def test_supersolution(compact_half_run):
    rep = supersolution_check(compact_half_run)
    worst = max(d - tol for d, tol in zip(rep.max_defect, rep.tolerance))
    _report(7, rep.passed, f"max(u - bound - tol) over {len(rep.times)} snapshots = {worst:.3e} (<= 0)")
    assert rep.passed


def test_kernel_properties():
    start = time.perf_counter()
    alphas = (0.25, 0.5, 0.75)
    mass = max(abs(unit_mass(make_kernel(a), t) - 1.0) for a in alphas + (1.0,) for t in (0.1, 1.0, 10.0))
    semi = max(semigroup_defect(make_kernel(a), 0.5, 1.5, [0.0, 1.0, 5.0, 40.0]) for a in alphas + (1.0,))
    xs = np.concatenate([[0.0], np.geomspace(1e-3, 1e5, 300)])
    fitted = {a: check_kernel_bounds(make_kernel(a), 10.0, [0.1, 1.0, 10.0], xs).fitted for a in alphas}
    r = np.geomspace(1e5, 1e6, 20)
    slopes = {a: float(np.polyfit(np.log(r), np.log(eval_kernel(make_kernel(a), 1.0, r)), 1)[0]) for a in alphas}
    tail_err = max(abs(slopes[a] + 1.0 + 2.0 * a) for a in alphas)
    seconds = time.perf_counter() - start
    ok = (mass <= 1e-6 and semi < 1e-4 and all(math.isfinite(b) for b in fitted.values())
          and abs(fitted[0.5] - math.pi) <= 1e-9 and tail_err <= 0.05 and seconds < 60)
    _report(8, ok, f"mass err {mass:.1e}, semigroup {semi:.1e}, B = "
                   + ", ".join(f"{b:.4f}" for b in fitted.values())
                   + f" (alpha=1/2 -> pi), tail slope err {tail_err:.1e}, {seconds:.1f} s")
    assert ok


SUITE = {
    "gauss": lambda y: np.exp(-(y**2)),
    "sech": lambda y: 2 * np.exp(-np.abs(y)) / (1 + np.exp(-2 * np.abs(y))),
    "odd_gauss": lambda y: y * np.exp(-(y**2)),
    "lorentz_sq": lambda y: 1 / (1 + y**2) ** 2,
}


def test_operator_cross_validation():
    worst = 0.0
    for a in (0.25, 0.5, 0.75):
        box = SpectralOperator(a, 800.0, 16384)
        pick = np.nonzero(np.abs(box.x) <= 5)[0][::40]
        si = SingularIntegralOperator(a)
        for u in SUITE.values():
            diff = apply_spectral(box, u(box.x))[pick] - apply_singular_integral(si, u, box.x[pick])
            worst = max(worst, float(np.max(np.abs(diff))))
    eig = 0.0
    for a in (0.1, 0.25, 0.5, 0.75, 1.0):
        box = SpectralOperator(a, 2 * math.pi, 256)
        for k in range(1, 128):
            v = np.cos(k * box.x)
            eig = max(eig, float(np.max(np.abs(apply_spectral(box, v) - k ** (2 * a) * v))) / k ** (2 * a))
    ok = worst <= 1e-3 and eig <= 1e-10
    _report(9, ok, f"spectral vs singular sup error {worst:.2e} (<= 1e-3), eigenrelation {eig:.1e} (<= 1e-10)")
    assert ok


def _strang_order():
    # stiff enough reaction that the splitting error dominates the projection error
    spec = GridSpec(core_half_width=10.0, core_spacing=0.01, stretch=1.05, half_width=1e4)
    grid = GradedGrid.symmetric(spec)
    u0 = Field(grid, 0.8 * np.exp(-grid.x**2 / 4))
    errs, dts = [], [0.2, 0.1, 0.05]
    finals = {}
    for dt in dts + [0.025]:
        cfg = SimulationConfig(alpha=0.5, growth_rate=3.0, dt=dt, t_final=1.0, snapshot_every=1.0, grid=spec,
                               levels=(0.5,))
        finals[dt] = run(cfg, initial=u0).final.values
    for dt in dts:
        errs.append(float(np.max(np.abs(finals[dt] - finals[0.025]))))
    order = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    return order, errs


def test_structural_properties(compact_half_run):
    grid = GradedGrid.symmetric(GridSpec(10.0, 0.05, 1.05, 1e4))
    kernel = make_kernel(0.5)
    prop = LinearPropagator(grid, kernel, 0.05)
    rng = np.random.default_rng(20260101)
    order_gap = 0.0
    for _ in range(20):
        u = rng.random(grid.size)
        v = np.minimum(u + rng.random(grid.size) * rng.integers(0, 2, grid.size), 1.0)
        fu, fv = Field(grid, u), Field(grid, v)
        for _ in range(5):
            fu = strang_step(fu, kernel, logistic(1.0), 0.05, prop)
            fv = strang_step(fv, kernel, logistic(1.0), 0.05, prop)
        order_gap = max(order_gap, float(np.max(fu.values - fv.values)))
    in_range = all(s.in_unit_range() for s in compact_half_run.snapshots) and compact_half_run.stats.clamped == 0
    order, errs = _strang_order()
    ok = order_gap <= 1e-10 and in_range and abs(order - 2.0) <= 0.2
    _report(10, ok, f"ordering violation {max(order_gap, 0.0):.1e} (<= 1e-10), range kept {in_range} "
                    f"(clamps {compact_half_run.stats.clamped}), Strang order {order:.3f} (2.0 ± 0.2; errors "
                    + ", ".join(f"{e:.2e}" for e in errs) + ")")
    assert ok
