"""Level-set positions x_λ^±(t), spreading-rate fits and front diagnostics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, FitError

__all__ = [
    "FrontTrace",
    "RateEstimate",
    "InvasionReport",
    "SandwichReport",
    "extract_levels",
    "fit_rate",
    "stretch_diagnostic",
    "check_invasion",
    "sandwich",
    "default_window",
]


def _crossing(x, u, lam, from_left: bool):
    """Leftmost (or rightmost) point where the piecewise-linear u equals lam."""
    s = u - lam
    sgn = np.sign(s)
    zero = np.flatnonzero(sgn == 0)
    cells = np.flatnonzero(sgn[:-1] * sgn[1:] < 0)
    cand = []
    if zero.size:
        i = zero[0] if from_left else zero[-1]
        cand.append(float(x[i]))
    if cells.size:
        i = cells[0] if from_left else cells[-1]
        frac = s[i] / (s[i] - s[i + 1])
        cand.append(float(x[i] + frac * (x[i + 1] - x[i])))
    if not cand:
        return None
    return min(cand) if from_left else max(cand)


def extract_levels(snapshot, levels) -> dict:
    """Map λ -> (x_λ^-, x_λ^+), or None when u never takes the value λ.

    Crossings are located by linear interpolation between bracketing nodes.
    """
    out = {}
    x, u = snapshot.grid.x, snapshot.values
    for lam in levels:
        if not 0.0 < lam < 1.0:
            raise DomainError(f"level must lie in (0, 1), got {lam}")
        lo = _crossing(x, u, lam, True)
        out[lam] = None if lo is None else (lo, _crossing(x, u, lam, False))
    return out


@dataclass
class FrontTrace:
    """Time series of x_λ^-(t) and x_λ^+(t); NaN where the level is absent."""

    level: float
    times: np.ndarray
    x_minus: np.ndarray
    x_plus: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.x_minus = np.asarray(self.x_minus, dtype=float)
        self.x_plus = np.asarray(self.x_plus, dtype=float)
        if not (self.times.shape == self.x_minus.shape == self.x_plus.shape):
            raise DomainError("trace arrays must have equal length")

    def side(self, side: str) -> np.ndarray:
        if side == "plus":
            return self.x_plus
        if side == "minus":
            return self.x_minus
        raise DomainError(f"side must be 'plus' or 'minus', got {side!r}")

    def rows(self):
        for t, xm, xp in zip(self.times, self.x_minus, self.x_plus):
            yield t, self.level, xm, xp

    def ratio(self, rate: float, side: str = "plus") -> np.ndarray:
        """|x_λ^±(t)| e^{-rate t}."""
        return np.abs(self.side(side)) * np.exp(-rate * self.times)


@dataclass
class RateEstimate:
    model: str
    rate: float
    intercept: float
    window: tuple[float, float]
    residual_rms: float
    drift: float
    drifting: bool
    samples: int
    local_rates: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def default_window(times, fraction: float = 0.4) -> tuple[float, float]:
    """The last ``fraction`` of the time span."""
    t0, t1 = float(np.min(times)), float(np.max(times))
    return (t1 - fraction * (t1 - t0), t1)


def _fit(times, values, model, window, drift_tol, min_samples, pieces=4):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = default_window(times)
    t1, t2 = map(float, window)
    if not t1 < t2:
        raise FitError(f"fit window must satisfy t1 < t2, got {window}")
    eps = 1e-9 * max(1.0, abs(t2))
    sel = (times >= t1 - eps) & (times <= t2 + eps) & np.isfinite(values)
    t, y = times[sel], values[sel]
    if t.size < min_samples:
        raise FitError(f"need at least {min_samples} samples in window {window}, got {t.size}")
    if model == "exponential":
        if np.any(y == 0) or not (np.all(y > 0) or np.all(y < 0)):
            raise FitError("exponential model needs nonzero positions of one sign")
        y = np.log(np.abs(y))
    elif model != "linear":
        raise FitError(f"unknown model {model!r}")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    local = []
    for chunk_t, chunk_y in zip(np.array_split(t, pieces), np.array_split(y, pieces)):
        if chunk_t.size >= 2:
            local.append(float(np.polyfit(chunk_t, chunk_y, 1)[0]))
    drift = local[-1] - local[0] if len(local) >= 2 else 0.0
    return RateEstimate(
        model=model,
        rate=float(slope),
        intercept=float(intercept),
        window=(t1, t2),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        drift=float(drift),
        drifting=bool(abs(drift) > drift_tol * max(abs(slope), 0.1)),
        samples=int(t.size),
        local_rates=local,
    )


def fit_rate(
    trace: FrontTrace,
    model: str = "exponential",
    window=None,
    side: str = "plus",
    drift_tol: float = 0.1,
    min_samples: int = 8,
) -> RateEstimate:
    """Least-squares slope of log|x_λ^±| (exponential) or x_λ^± (linear) against t.

    The local rate is also fitted on four consecutive sub-windows; ``drift``
    is last minus first, flagged when it exceeds ``drift_tol`` times
    max(|rate|, 0.1), which signals a window that is not yet asymptotic.
    """
    return _fit(trace.times, trace.side(side), model, window, drift_tol, min_samples)


def stretch_diagnostic(
    low: FrontTrace, high: FrontTrace, window=None, side: str = "plus", **kw
) -> RateEstimate:
    """Exponential rate of the width x_{λlow}^+ - x_{λhigh}^+ (0 for a travelling wave)."""
    if low.level >= high.level:
        raise DomainError("the first trace must carry the lower level")
    if not np.array_equal(low.times, high.times):
        raise DomainError("traces must share sample times")
    width = low.side(side) - high.side(side)
    if side == "minus":
        width = -width
    return _fit(low.times, width, "exponential", window, kw.get("drift_tol", 0.1), kw.get("min_samples", 8))


@dataclass
class InvasionReport:
    c: float
    c_theory: float
    region: str  # "inner" (expect u -> 1) or "outer" (expect u -> 0)
    times: list[float]
    values: list[float]
    threshold: float
    trend: float
    inconclusive: bool
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_invasion(
    snapshots,
    c: float,
    c_theory: float,
    geometry: str = "compact",
    threshold: float = 0.05,
) -> InvasionReport:
    """Inner/outer invasion statements at exponential radius e^{ct}.

    c < c_theory: m(t) = min u over {|x| <= e^{ct}} (compact) or {x >= -e^{ct}}
    (monotone) should approach 1.  c > c_theory: M(t) = max u over the
    complement should approach 0.  The last snapshot is compared with
    ``threshold``; a radius beyond the grid makes the report inconclusive.
    """
    if not c > 0:
        raise DomainError("invasion rate c must be positive")
    if geometry not in ("compact", "monotone"):
        raise DomainError(f"unknown geometry {geometry!r}")
    inner = c < c_theory
    times, vals = [], []
    inconclusive = False
    last_t = -math.inf
    for snap in snapshots:
        if snap.t < last_t:
            raise DomainError("snapshots must be in increasing time order")
        last_t = snap.t
        x, u = snap.grid.x, snap.values
        radius = math.exp(c * snap.t)
        if radius > min(-x[0], x[-1]):
            inconclusive = True
            continue
        if geometry == "compact":
            mask = np.abs(x) <= radius if inner else np.abs(x) >= radius
            far = () if inner else (snap.u_left, snap.u_right)
        else:
            mask = x >= -radius if inner else x <= -radius
            far = (snap.u_right,) if inner else (snap.u_left,)
        pool = np.concatenate([u[mask], far])
        if pool.size == 0:
            inconclusive = True
            continue
        times.append(float(snap.t))
        vals.append(float(pool.min() if inner else pool.max()))
    if not vals:
        return InvasionReport(c, c_theory, "inner" if inner else "outer", [], [], threshold,
                              0.0, True, False)
    tail = slice(max(0, len(vals) - 4), None)
    trend = float(np.polyfit(times[tail], vals[tail], 1)[0]) if len(vals) >= 2 else 0.0
    final = vals[-1]
    ok = final >= 1.0 - threshold if inner else final <= threshold
    return InvasionReport(
        c=c,
        c_theory=c_theory,
        region="inner" if inner else "outer",
        times=times,
        values=vals,
        threshold=threshold,
        trend=trend,
        inconclusive=inconclusive and (times[-1] < snapshots[-1].t),
        passed=bool(ok and not (inconclusive and times[-1] < snapshots[-1].t)),
    )


@dataclass
class SandwichReport:
    """Band of the ratios |x_λ^+(t)| e^{-rate t} over a window."""

    rate: float
    window: tuple[float, float]
    per_level: dict  # λ -> (min ratio, max ratio)
    band_constant: float  # smallest C with all ratios in [1/C, C]
    max_over_min: float  # worst per-level max/min
    spread_start: float  # log-spread across levels at the window start
    spread_end: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_level"] = {str(k): list(v) for k, v in self.per_level.items()}
        d["window"] = list(self.window)
        return d


def sandwich(traces, rate: float, window, side: str = "plus") -> SandwichReport:
    """Ratio band for several levels; spread = max_λ log ρ_λ - min_λ log ρ_λ."""
    t1, t2 = window
    per_level, ratios_start, ratios_end = {}, [], []
    worst_c, worst_mm = 1.0, 1.0
    for tr in traces:
        rho = tr.ratio(rate, side)
        sel = (tr.times >= t1 - 1e-9) & (tr.times <= t2 + 1e-9) & np.isfinite(rho)
        if not np.any(sel):
            raise FitError(f"level {tr.level} has no samples in {window}")
        r = rho[sel]
        per_level[tr.level] = (float(r.min()), float(r.max()))
        worst_c = max(worst_c, float(r.max()), 1.0 / float(r.min()))
        worst_mm = max(worst_mm, float(r.max() / r.min()))
        ratios_start.append(r[0])
        ratios_end.append(r[-1])
    spread = lambda v: float(np.log(max(v)) - np.log(min(v)))  # noqa: E731
    return SandwichReport(
        rate=rate,
        window=(float(t1), float(t2)),
        per_level=per_level,
        band_constant=worst_c,
        max_over_min=worst_mm,
        spread_start=spread(ratios_start),
        spread_end=spread(ratios_end),
    )
