"""Comparison-based checks of simulation output.

* linear supersolution  u(t, x) <= e^{f'(0) t} (p(t, ·) * u0)(x)
* heuristic front scale t^{1/(N+2α)} e^{c* t}
* lower bound  inf_{|x| <= e^{σt}} u(t, x) >= ε  for σ < c*
* sign of  ∂_t ū + A ū - f(ū)  for algebraic profiles ū = a / (1 + x²/b(t)²)
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DomainError, FitError
from .evolve import Trajectory, convolve_pl, theory_constants
from .operators import SingularIntegralOperator, apply_singular_integral
from .reaction import ReactionTerm, eval_f

__all__ = [
    "SupersolutionReport",
    "LowerBoundReport",
    "AlgebraicProfile",
    "ProfileResidualReport",
    "HeuristicComparison",
    "supersolution_check",
    "heuristic_front",
    "heuristic_comparison",
    "lower_bound_check",
    "profile_residual_sign",
    "profile_sweep",
    "SweepEntry",
    "run_id",
]


def run_id(traj: Trajectory) -> str:
    """Short stable digest of the run configuration."""
    cfg = asdict(traj.config)
    blob = json.dumps(cfg, sort_keys=True, default=list).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# linear supersolution


@dataclass
class SupersolutionReport:
    run_id: str
    times: list[float]
    max_defect: list[float]  # max_x u - e^{f'(0)t} p(t)*u0
    tolerance: list[float]
    passed: bool

    @property
    def margin(self) -> list[float]:
        return [-d for d in self.max_defect]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["margin"] = self.margin
        return d


def _discretization_estimate(traj: Trajectory, t: float) -> float:
    """Accumulated piecewise-linear projection error bound for the run up to t.

    Each step loses at most max|Δ²u|/8 at a node; the number of steps is t/dt.
    """
    u0 = traj.initial.values
    second = np.abs(u0[:-2] - 2.0 * u0[1:-1] + u0[2:])
    return (t / traj.config.dt) * float(second.max(initial=0.0)) / 8.0


def supersolution_check(
    traj: Trajectory,
    fp0: float | None = None,
    floor: float = 1e-3,
    weight: float = 1e-2,
) -> SupersolutionReport:
    """Compare every snapshot with e^{f'(0)t} p(t, ·) * u0 (u0 piecewise linear).

    Tolerance at time t is ``floor + weight * discretisation estimate``.
    """
    reaction = traj.config.make_reaction()
    if fp0 is None:
        fp0 = reaction.fp0
    elif not math.isclose(fp0, reaction.fp0, rel_tol=1e-12, abs_tol=1e-15):
        raise ConfigError(f"f'(0)={fp0} does not match the run's reaction ({reaction.fp0})")
    u0 = traj.initial
    x = traj.grid.x
    times, defects, tols = [], [], []
    for snap in traj.snapshots:
        if not snap.grid.same_as(traj.grid):
            raise ConfigError("snapshot grid differs from the run grid")
        if snap.t == 0.0:
            bound = u0.values
        else:
            bound = math.exp(fp0 * snap.t) * convolve_pl(
                traj.kernel, snap.t, x, u0.values, u0.u_left, u0.u_right
            )
        times.append(float(snap.t))
        defects.append(float(np.max(snap.values - bound)))
        tols.append(floor + weight * _discretization_estimate(traj, snap.t))
    ok = all(d <= tol for d, tol in zip(defects, tols))
    return SupersolutionReport(run_id(traj), times, defects, tols, ok)


# ---------------------------------------------------------------------------
# heuristic front position and lower bound


def heuristic_front(alpha: float, dim: int, fp0: float, t, const: float = 1.0):
    """const · t^{1/(N+2α)} · e^{c* t} with c* = f'(0)/(N+2α)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("heuristic front needs t > 0")
    n = dim + 2.0 * alpha
    out = const * t ** (1.0 / n) * np.exp(fp0 / n * t)
    return float(out) if out.ndim == 0 else out


@dataclass
class HeuristicComparison:
    level: float
    times: list[float]
    ratio: list[float]  # x_λ^+(t) / heuristic(t)
    log_slope: float  # fitted d/dt log ratio over the window
    decays: bool

    def to_dict(self) -> dict:
        return asdict(self)


def heuristic_comparison(traj: Trajectory, level: float = 0.5, window=None) -> HeuristicComparison:
    """Ratio of the measured x_λ^+(t) to the heuristic scale and its trend."""
    cfg = traj.config
    trace = traj.traces[level]
    t = trace.times
    if window is None:
        t1, t2 = t[-1] - 0.4 * (t[-1] - t[0]), t[-1]
    else:
        t1, t2 = window
    sel = (t >= t1 - 1e-9) & (t <= t2 + 1e-9) & (t > 0) & np.isfinite(trace.x_plus) & (trace.x_plus > 0)
    if np.count_nonzero(sel) < 2:
        raise FitError("not enough positive front samples in the window")
    ts = t[sel]
    ratio = trace.x_plus[sel] / heuristic_front(cfg.alpha, 1, cfg.growth_rate, ts)
    slope = float(np.polyfit(ts, np.log(ratio), 1)[0])
    return HeuristicComparison(level, ts.tolist(), ratio.tolist(), slope, slope < 0)


@dataclass
class LowerBoundReport:
    sigma: float
    epsilon: float
    times: list[float]
    minima: list[float]
    late_minimum: float
    inconclusive: bool
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def lower_bound_check(traj: Trajectory, sigma: float, epsilon: float, late_fraction: float = 1 / 3) -> LowerBoundReport:
    """m(t) = min_{|x| <= e^{σt}} u(t, x); passes when m >= ε over the late snapshots."""
    cfg = traj.config
    c_star = theory_constants(cfg.alpha, cfg.growth_rate)["c_star"]
    if not 0.0 < sigma < c_star:
        raise DomainError(f"sigma must lie in (0, c*={c_star:g}), got {sigma}")
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    times, minima = [], []
    inconclusive = False
    for snap in traj.snapshots:
        radius = math.exp(sigma * snap.t)
        x = snap.grid.x
        if radius > min(-x[0], x[-1]):
            inconclusive = True
            continue
        times.append(float(snap.t))
        minima.append(float(snap.values[np.abs(x) <= radius].min()))
    if not minima:
        return LowerBoundReport(sigma, epsilon, [], [], float("nan"), True, False)
    t_end = traj.snapshots[-1].t
    late_start = t_end - late_fraction * (t_end - traj.snapshots[0].t)
    late = [m for t, m in zip(times, minima) if t >= late_start - 1e-9]
    late_min = min(late) if late else float("nan")
    return LowerBoundReport(
        sigma=sigma,
        epsilon=epsilon,
        times=times,
        minima=minima,
        late_minimum=late_min,
        inconclusive=inconclusive,
        passed=bool(late and late_min >= epsilon and not inconclusive),
    )


# ---------------------------------------------------------------------------
# algebraic profiles


@dataclass(frozen=True)
class AlgebraicProfile:
    """ū(t, x) = a / (1 + x²/b(t)²) with b(t) = b0 e^{rt}."""

    a: float
    b0: float
    r: float = 0.5
    orientation: str = "super"

    def __post_init__(self):
        if not 0.0 < self.a <= 1.0:
            raise DomainError(f"amplitude a must lie in (0, 1], got {self.a}")
        if not self.b0 > 0:
            raise DomainError(f"b0 must be positive, got {self.b0}")
        if self.orientation not in ("super", "sub"):
            raise DomainError("orientation must be 'super' or 'sub'")

    def width(self, t):
        return self.b0 * np.exp(self.r * np.asarray(t, dtype=float))

    def shape(self, y):
        """Unit-width, unit-amplitude shape φ(y) = 1/(1 + y²)."""
        return 1.0 / (1.0 + np.asarray(y, dtype=float) ** 2)

    def value(self, t, x):
        return self.a * self.shape(np.asarray(x, dtype=float) / self.width(t))

    def time_derivative(self, t, x):
        y2 = (np.asarray(x, dtype=float) / self.width(t)) ** 2
        return self.a * 2.0 * self.r * y2 / (1.0 + y2) ** 2


@dataclass
class ProfileResidualReport:
    profile: AlgebraicProfile
    times: np.ndarray
    x: np.ndarray
    residual: np.ndarray  # shape (len(times), len(x))
    tolerance: float
    satisfied_fraction: float
    passed: bool

    @property
    def min_residual(self) -> float:
        return float(self.residual.min())

    @property
    def max_residual(self) -> float:
        return float(self.residual.max())

    def rows(self):
        for i, t in enumerate(self.times):
            for j, x in enumerate(self.x):
                yield float(t), float(x), float(self.residual[i, j])

    def to_dict(self) -> dict:
        return {
            "profile": asdict(self.profile),
            "times": self.times.tolist(),
            "x_count": int(self.x.size),
            "min_residual": self.min_residual,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "satisfied_fraction": self.satisfied_fraction,
            "passed": self.passed,
        }


def profile_residual_sign(
    profile: AlgebraicProfile,
    operator: SingularIntegralOperator,
    reaction: ReactionTerm | None,
    times,
    x,
    tol: float = 1e-8,
) -> ProfileResidualReport:
    """Evaluate ∂_t ū + A ū - f(ū) on the (t, x) samples and summarise its sign.

    A ū is computed once on the unit-width shape and rescaled,
    A[φ(·/b)](x) = b^{-2α} (Aφ)(x/b), so wide profiles cost nothing extra.
    A supersolution needs residual >= -tol everywhere, a subsolution <= tol.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    op = operator
    if op.u_left not in (None, 0.0) or op.u_right not in (None, 0.0):
        op = SingularIntegralOperator(op.alpha, op.dim, op.inner, op.outer, op.max_panel,
                                      op.nodes, op.jacobi_nodes, 0.0, 0.0)
    res = np.empty((times.size, x.size))
    for i, t in enumerate(times):
        b = float(profile.width(t))
        y = x / b
        a_phi = apply_singular_integral(op, profile.shape, y)
        u = profile.value(t, x)
        fu = 0.0 if reaction is None else eval_f(reaction, u)
        res[i] = profile.time_derivative(t, x) + profile.a * b ** (-2.0 * op.alpha) * a_phi - fu
    good = res >= -tol if profile.orientation == "super" else res <= tol
    frac = float(np.mean(good))
    return ProfileResidualReport(profile, times, x, res, tol, frac, bool(good.all()))


@dataclass
class SweepEntry:
    a: float
    b0: float
    passed: bool
    min_residual: float
    max_residual: float
    satisfied_fraction: float


def profile_sweep(
    a_values,
    b0_values,
    operator: SingularIntegralOperator,
    reaction: ReactionTerm | None,
    times,
    x,
    r: float = 0.5,
    orientation: str = "super",
    tol: float = 1e-8,
) -> list[SweepEntry]:
    """Empirical (a, b0) region where the chosen sign condition holds on the samples."""
    out = []
    for a in a_values:
        for b0 in b0_values:
            rep = profile_residual_sign(AlgebraicProfile(a, b0, r, orientation), operator, reaction, times, x, tol)
            out.append(SweepEntry(float(a), float(b0), rep.passed, rep.min_residual, rep.max_residual,
                                  rep.satisfied_fraction))
    return out
