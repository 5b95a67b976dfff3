"""KPP nonlinearities and their flows."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError

logger = logging.getLogger(__name__)

__all__ = ["ReactionTerm", "logistic", "linearized", "zero_reaction", "get_reaction", "eval_f", "reaction_flow"]


@dataclass
class ClampStats:
    """Counts inputs that had to be clamped into [0, 1]."""

    count: int = 0
    max_excursion: float = 0.0

    def record(self, u: np.ndarray) -> np.ndarray:
        low = np.minimum(u, 0.0)
        high = np.maximum(u - 1.0, 0.0)
        bad = (low < 0.0) | (high > 0.0)
        n = int(np.count_nonzero(bad))
        if n:
            self.count += n
            self.max_excursion = max(self.max_excursion, float(np.max(high - low)))
            return np.clip(u, 0.0, 1.0)
        return u


@dataclass(frozen=True)
class ReactionTerm:
    """Concave KPP reaction f with f(0) = f(1) = 0 and f'(1) < 0 < f'(0).

    ``flow`` is the exact solution map of du/dt = f(u) when known; otherwise
    an adaptive explicit Runge-Kutta integrator is used.  ``bounded=False``
    marks reactions (the linearisation f'(0) u) that are not KPP and are not
    clamped to [0, 1].
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    fp0: float
    fp1: float
    flow: Callable[[np.ndarray, float], np.ndarray] | None = None
    bounded: bool = True
    clamps: ClampStats = field(default_factory=ClampStats, compare=False, repr=False)

    def __call__(self, u):
        return eval_f(self, u)

    def check_kpp(self, samples: int = 1000, tol: float = 1e-10) -> bool:
        """Verify f(0)=f(1)=0, signs of f'(0), f'(1) and concavity on a sample."""
        u = np.linspace(0.0, 1.0, samples)
        fu = np.asarray(self.f(u), dtype=float)
        second = fu[2:] - 2 * fu[1:-1] + fu[:-2]
        return (
            abs(fu[0]) <= tol
            and abs(fu[-1]) <= tol
            and self.fp0 > 0
            and self.fp1 < 0
            and bool(np.all(second <= tol))
        )


def _logistic_flow(rate: float):
    def flow(u, dt):
        g = np.expm1(rate * dt)
        return u * (1.0 + g) / (1.0 + u * g)

    return flow


def logistic(rate: float = 1.0) -> ReactionTerm:
    """f(u) = rate · u (1 - u), with exact flow."""
    if rate <= 0:
        raise DomainError("logistic growth rate must be positive")
    return ReactionTerm(
        name="logistic",
        f=lambda u: rate * u * (1.0 - u),
        fp0=rate,
        fp1=-rate,
        flow=_logistic_flow(rate),
    )


def linearized(rate: float = 1.0) -> ReactionTerm:
    """f(u) = rate · u: the linearisation at 0 (supersolution dynamics)."""
    return ReactionTerm(
        name="linear",
        f=lambda u: rate * u,
        fp0=rate,
        fp1=rate,
        flow=lambda u, dt: u * np.exp(rate * dt),
        bounded=False,
    )


def zero_reaction() -> ReactionTerm:
    return ReactionTerm(name="none", f=np.zeros_like, fp0=0.0, fp1=0.0, flow=lambda u, dt: u)


_REGISTRY = {"logistic": logistic, "linear": linearized, "none": zero_reaction}


def get_reaction(name: str, rate: float = 1.0) -> ReactionTerm:
    """Look up a reaction by its configuration name."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise DomainError(f"unknown reaction {name!r}; choose from {sorted(_REGISTRY)}") from None
    return factory() if name == "none" else factory(rate)


def eval_f(r: ReactionTerm, u):
    """f(u); inputs outside [0, 1] are clamped and counted for KPP terms."""
    u = np.asarray(u, dtype=float)
    if r.bounded:
        u = r.clamps.record(u)
    return r.f(u)


def reaction_flow(r: ReactionTerm, u, dt: float):
    """Solve du/dt = f(u) for time ``dt`` starting from ``u`` (elementwise)."""
    if dt < 0:
        raise DomainError(f"reaction time step must be nonnegative, got {dt}")
    u = np.asarray(u, dtype=float)
    if r.bounded:
        u = r.clamps.record(u)
    if dt == 0:
        return u.copy()
    if r.flow is not None:
        return r.flow(u, dt)
    shape = u.shape
    sol = solve_ivp(
        lambda _t, y: r.f(y), (0.0, dt), u.ravel(), method="DOP853", rtol=1e-12, atol=1e-14
    )
    if not sol.success:
        raise DomainError(f"reaction integration failed: {sol.message}")
    out = sol.y[:, -1].reshape(shape)
    return np.clip(out, 0.0, 1.0) if r.bounded else out


def from_callable(name: str, f, fp0: float, fp1: float) -> ReactionTerm:
    """Wrap a user concave KPP nonlinearity (flow integrated numerically)."""
    term = ReactionTerm(name=name, f=f, fp0=fp0, fp1=fp1)
    if not term.check_kpp():
        raise DomainError(f"reaction {name!r} is not a concave KPP nonlinearity")
    return term
