"""Two independent discretisations of the fractional Laplacian (-Δ)^α on the line.

``SpectralOperator`` multiplies Fourier coefficients of periodic samples by
|ξ|^{2α}.  ``SingularIntegralOperator`` evaluates the principal-value form

    A u(x) = c_{1,α} ∫_0^∞ (2u(x) - u(x+z) - u(x-z)) z^{-1-2α} dz

for a callable u, so the two can be checked against each other.
"""
from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln, roots_jacobi

from .errors import DomainError, EvaluationError, GridError, UnsupportedError
from .reaction import ReactionTerm, eval_f

__all__ = [
    "SpectralOperator",
    "SingularIntegralOperator",
    "apply_spectral",
    "apply_singular_integral",
    "operator_residual",
    "calibrate_constant",
    "reference_constant",
]

_CHUNK = 64


@dataclass(frozen=True)
class SpectralOperator:
    """(-Δ)^α on the periodic box [x0, x0 + length) sampled at ``size`` nodes."""

    alpha: float
    length: float
    size: int
    x0: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.length > 0 or self.size < 2:
            raise DomainError("periodic box needs positive length and at least two nodes")

    @property
    def spacing(self) -> float:
        return self.length / self.size

    @property
    def x(self) -> np.ndarray:
        start = -0.5 * self.length if self.x0 is None else self.x0
        return start + self.spacing * np.arange(self.size)

    @functools.cached_property
    def frequencies(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.rfftfreq(self.size, d=self.spacing)

    @functools.cached_property
    def multipliers(self) -> np.ndarray:
        m = np.abs(self.frequencies) ** (2.0 * self.alpha)
        m[0] = 0.0
        return m


def apply_spectral(op: SpectralOperator, samples) -> np.ndarray:
    """Inverse FFT of |ξ_j|^{2α} û_j for periodic samples (last axis)."""
    u = np.asarray(samples, dtype=float)
    if u.shape[-1] != op.size:
        raise DomainError(f"expected {op.size} samples, got {u.shape[-1]}")
    return np.fft.irfft(op.multipliers * np.fft.rfft(u, axis=-1), n=op.size, axis=-1)


def _one_minus_cos_integral(alpha: float) -> float:
    """∫_0^∞ (1 - cos z) z^{-1-2α} dz by adaptive quadrature."""
    e = 1.0 + 2.0 * alpha
    head, _ = integrate.quad(lambda z: 2.0 * math.sin(0.5 * z) ** 2 * z**-e, 0.0, 1.0,
                             epsabs=0.0, epsrel=1e-13, limit=200)
    osc, _ = integrate.quad(lambda z: z**-e, 1.0, np.inf, weight="cos", wvar=1.0)
    return head + 1.0 / (2.0 * alpha) - osc


@functools.lru_cache(maxsize=None)
def calibrate_constant(alpha: float) -> float:
    """c_{1,α} fixed so that the singular integral maps cos x to cos x (symbol 1 at ξ = 1)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"singular-integral form needs 0 < alpha < 1, got {alpha}")
    return 1.0 / (2.0 * _one_minus_cos_integral(alpha))


def reference_constant(alpha: float, dim: int = 1) -> float:
    """Tabulated formula 4^α Γ(N/2 + α) / (π^{N/2} |Γ(-α)|), for cross-checks."""
    log_abs_gamma_neg = gammaln(1.0 - alpha) - math.log(alpha)
    return math.exp(alpha * math.log(4.0) + gammaln(dim / 2 + alpha) - log_abs_gamma_neg) / math.pi ** (dim / 2)


@dataclass(frozen=True)
class SingularIntegralOperator:
    """Principal-value quadrature for (-Δ)^α, 0 < α < 1, in one dimension.

    [0, inner]: Gauss-Jacobi with weight z^{1-2α} applied to the second
    difference divided by z², so the singularity is integrated exactly.
    [inner, outer]: Gauss-Legendre panels doubling in width up to ``max_panel``.
    [outer, ∞): u(x ± z) replaced by the far-field constants and integrated
    in closed form.  Far-field constants left as None are estimated by the
    windowed mean of u(x ± z) over z in [outer/2, outer].
    """

    alpha: float
    dim: int = 1
    inner: float = 0.5
    outer: float = 1.0e3
    max_panel: float = 2.0
    nodes: int = 16
    jacobi_nodes: int = 24
    u_left: float | None = None
    u_right: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"singular-integral form needs 0 < alpha < 1, got {self.alpha}")
        if self.dim != 1:
            raise UnsupportedError("the singular-integral operator is implemented for N = 1")
        if not 0.0 < self.inner < self.outer:
            raise DomainError("cutoffs must satisfy 0 < inner < outer")
        if not self.max_panel > 0:
            raise DomainError("max_panel must be positive")

    @property
    def constant(self) -> float:
        return calibrate_constant(float(self.alpha))

    @functools.cached_property
    def _rule(self):
        a = self.alpha
        t, w = roots_jacobi(self.jacobi_nodes, 0.0, 1.0 - 2.0 * a)
        z_in = 0.5 * self.inner * (1.0 + t)
        w_in = w * (0.5 * self.inner) ** (2.0 - 2.0 * a)  # includes dz and the z^{1-2α} weight
        edges = [self.inner]
        while edges[-1] < self.outer:
            cur = edges[-1]
            edges.append(min(cur + min(cur, self.max_panel), self.outer))
        edges = np.asarray(edges)
        gx, gw = np.polynomial.legendre.leggauss(self.nodes)
        lo, hi = edges[:-1, None], edges[1:, None]
        z_mid = (0.5 * (hi - lo) * gx + 0.5 * (hi + lo)).ravel()
        dz = (0.5 * (hi - lo) * gw).ravel()
        w_mid = dz * z_mid ** (-1.0 - 2.0 * a)
        # Hann-windowed mean so that oscillating u averages out quickly
        phase = np.clip(2.0 * z_mid / self.outer - 1.0, 0.0, 1.0)
        w_avg = dz * np.sin(math.pi * phase) ** 2
        return z_in, w_in, z_mid, w_mid, w_avg / w_avg.sum()

    @property
    def node_count(self) -> int:
        z_in, _, z_mid, _, _ = self._rule
        return z_in.size + z_mid.size


def _apply_chunk(op: SingularIntegralOperator, u, x: np.ndarray) -> np.ndarray:
    z_in, w_in, z_mid, w_mid, w_avg = op._rule
    ux = np.asarray(u(x), dtype=float)
    xc = x[:, None]
    near = (2.0 * ux[:, None] - u(xc + z_in) - u(xc - z_in)) / z_in**2
    right = u(xc + z_mid)
    left = u(xc - z_mid)
    mid = 2.0 * ux[:, None] - right - left
    far_l = left @ w_avg if op.u_left is None else op.u_left
    far_r = right @ w_avg if op.u_right is None else op.u_right
    a2 = 2.0 * op.alpha
    tail = (2.0 * ux - far_l - far_r) * op.outer ** (-a2) / a2
    total = near @ w_in + mid @ w_mid + tail
    if not np.all(np.isfinite(total)):
        raise EvaluationError("non-finite values encountered while applying the operator")
    return op.constant * total


def apply_singular_integral(op: SingularIntegralOperator, u, x, threads: int | None = None) -> np.ndarray:
    """(-Δ)^α u at the points ``x`` for a vectorised callable ``u``.

    ``u`` must accept arrays of any shape and be bounded; beyond
    ``op.outer`` it is replaced by its far-field constants.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise DomainError("evaluation points must be finite")
    flat = x.ravel()
    chunks = [flat[i:i + _CHUNK] for i in range(0, flat.size, _CHUNK)]
    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: _apply_chunk(op, u, c), chunks))
    else:
        parts = [_apply_chunk(op, u, c) for c in chunks]
    return np.concatenate(parts).reshape(x.shape) if parts else np.empty(x.shape)


def operator_residual(u, u_t, op, reaction: ReactionTerm | None, x=None) -> np.ndarray:
    """Pointwise u_t + A u - f(u).

    With a ``SpectralOperator``, ``u`` and ``u_t`` are samples on its grid.
    With a ``SingularIntegralOperator``, ``u`` is a callable evaluated at
    ``x`` and ``u_t`` is a callable or an array matching ``x``.
    """
    if isinstance(op, SpectralOperator):
        values = np.asarray(u, dtype=float)
        if values.shape[-1] != op.size:
            raise GridError(f"samples have length {values.shape[-1]}, operator grid has {op.size}")
        au = apply_spectral(op, values)
    elif isinstance(op, SingularIntegralOperator):
        if x is None or not callable(u):
            raise GridError("the singular-integral residual needs a callable u and points x")
        x = np.asarray(x, dtype=float)
        values = np.asarray(u(x), dtype=float)
        au = apply_singular_integral(op, u, x)
    else:
        raise DomainError(f"unsupported operator {type(op).__name__}")
    ut = np.asarray(u_t(x) if callable(u_t) else u_t, dtype=float)
    if ut.shape != values.shape:
        raise GridError(f"u_t has shape {ut.shape}, u has shape {values.shape}")
    fu = 0.0 if reaction is None else eval_f(reaction, values)
    return ut + au - fu
