"""Test functions with controlled singularities and the U functionals.

U(s1, s2; f) is the chord-defect integral

    U(s1, s2; f) = int_0^1 [ f((1-t) s1 + t s2) - (1-t) f(s1) - t f(s2) ]
                              / (t (1-t)) dt,

and U(f) = U(1, 0; f).  It vanishes on affine f, is symmetric in
(s1, s2), and for the Renyi entropy family satisfies the closed form
U(eta_g) = pi^2 (1+g) / (6 g).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import xlogy

from .errors import PreconditionError
from .quadrature import QuadResult, integrate_01, tanh_sinh_rule


@dataclass(frozen=True)
class SpectralFunction:
    """A function f applied to operator spectra.

    Attributes
    ----------
    fn : callable
        Vectorized evaluator t -> f(t).
    singular_set : tuple of float
        Points where f loses C^2 smoothness.
    gamma : float
        Holder exponent controlling |f(t)| <= C |t - z|^gamma near each
        singular point z.
    d1, d2 : callable or None
        First/second derivative evaluators valid away from the singular set.
    name : str
        Tag used in records and CSV output.
    needs_clamp : bool
        True when f is only meaningful on [0, 1] (entropy functions), so
        eigenvalues are projected onto [0, 1] before evaluation.
    poly_coeffs : tuple or None
        Low-to-high coefficients when f is a polynomial; enables
        eigendecomposition-free trace paths.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    singular_set: Tuple[float, ...] = ()
    gamma: float = 1.0
    d1: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "f"
    needs_clamp: bool = False
    poly_coeffs: Optional[Tuple[float, ...]] = None

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))

    def __post_init__(self):
        if self.gamma <= 0:
            raise PreconditionError("Holder exponent gamma must be positive")


def _eta1_raw(t):
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, 1.0)
    return -xlogy(tc, tc) - xlogy(1.0 - tc, 1.0 - tc)


def renyi_eta(gamma: float) -> SpectralFunction:
    """Renyi entropy function eta_gamma, vanishing outside (0, 1).

    gamma = 1 is the von Neumann limit -t log t - (1-t) log(1-t); otherwise
    eta_gamma(t) = log(t^gamma + (1-t)^gamma) / (1-gamma) on (0, 1).
    The singular set is {0, 1} with Holder exponent min(gamma, 1).
    """
    if gamma <= 0:
        raise PreconditionError("renyi_eta requires gamma > 0")
    if gamma == 1.0:
        def d1(t):
            t = np.asarray(t, dtype=float)
            return np.log((1.0 - t) / t)

        def d2(t):
            t = np.asarray(t, dtype=float)
            return -1.0 / (t * (1.0 - t))

        return SpectralFunction(_eta1_raw, (0.0, 1.0), 1.0, d1, d2,
                                name="eta_1", needs_clamp=True)

    g = float(gamma)

    def fn(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = (t > 0.0) & (t < 1.0)
        tm = t[m]
        out[m] = np.log(tm ** g + (1.0 - tm) ** g) / (1.0 - g)
        return out

    def d1(t):
        t = np.asarray(t, dtype=float)
        s = t ** g + (1.0 - t) ** g
        return g * (t ** (g - 1.0) - (1.0 - t) ** (g - 1.0)) / ((1.0 - g) * s)

    def d2(t):
        t = np.asarray(t, dtype=float)
        s = t ** g + (1.0 - t) ** g
        sp = g * (t ** (g - 1.0) - (1.0 - t) ** (g - 1.0))
        spp = g * (g - 1.0) * (t ** (g - 2.0) + (1.0 - t) ** (g - 2.0))
        return (spp * s - sp ** 2) / ((1.0 - g) * s ** 2)

    kappa = min(g, 1.0)
    return SpectralFunction(fn, (0.0, 1.0), kappa, d1, d2,
                            name=f"eta_{g:g}", needs_clamp=True)


def monomial(p: int) -> SpectralFunction:
    """g_p(t) = t^p with integer p >= 1."""
    if p < 1 or int(p) != p:
        raise PreconditionError("monomial requires integer p >= 1")
    p = int(p)
    coeffs = tuple([0.0] * p + [1.0])
    return SpectralFunction(
        lambda t: np.asarray(t, dtype=float) ** p,
        (), float(p) if p == 1 else 2.0,
        d1=lambda t: p * np.asarray(t, dtype=float) ** (p - 1),
        d2=lambda t: p * (p - 1) * np.asarray(t, dtype=float) ** max(p - 2, 0),
        name=f"g_{p}", poly_coeffs=coeffs)


def polynomial(coeffs) -> SpectralFunction:
    """Polynomial sum_k coeffs[k] t^k (low-to-high order)."""
    c = tuple(float(v) for v in coeffs)
    poly = np.polynomial.Polynomial(c)

    return SpectralFunction(
        lambda t: poly(np.asarray(t, dtype=float)),
        (), 2.0,
        d1=lambda t: poly.deriv(1)(np.asarray(t, dtype=float)),
        d2=lambda t: poly.deriv(2)(np.asarray(t, dtype=float)),
        name="poly[" + ",".join(f"{v:g}" for v in c) + "]",
        poly_coeffs=c)


def cusp(z: float, gamma: float) -> SpectralFunction:
    """f(t) = |t - z|^gamma with a single non-smooth point at z."""
    if gamma <= 0:
        raise PreconditionError("cusp requires gamma > 0")
    z = float(z)
    g = float(gamma)

    def fn(t):
        return np.abs(np.asarray(t, dtype=float) - z) ** g

    def d1(t):
        d = np.asarray(t, dtype=float) - z
        return g * np.sign(d) * np.abs(d) ** (g - 1.0)

    def d2(t):
        d = np.asarray(t, dtype=float) - z
        return g * (g - 1.0) * np.abs(d) ** (g - 2.0)

    return SpectralFunction(fn, (z,), min(g, 1.0), d1, d2, name=f"cusp_{z:g}_{g:g}")


def _u_integrand(f: SpectralFunction, s1: float, s2: float):
    fs1 = float(f(np.array([s1]))[0])
    fs2 = float(f(np.array([s2]))[0])

    def integrand(t, omt):
        arg = omt * s1 + t * s2
        # near t=1 rewrite through 1-t to keep the argument accurate
        arg = np.where(t > 0.5, s2 + omt * (s1 - s2), s1 + t * (s2 - s1))
        num = f.fn(arg) - (omt * fs1 + t * fs2)
        return num / (t * omt)

    return integrand


def _interior_breakpoints(f: SpectralFunction, s1: float, s2: float):
    """t in (0,1) where the chord argument crosses a singular point of f."""
    pts = []
    if s1 == s2:
        return pts
    for z in f.singular_set:
        t = (z - s1) / (s2 - s1)
        if 1e-14 < t < 1.0 - 1e-14:
            pts.append(t)
    return sorted(pts)


def u_two_point(s1: float, s2: float, f: SpectralFunction,
                rtol: float = 1e-12) -> QuadResult:
    """Two-point chord-defect functional U(s1, s2; f).

    The chord is subtracted analytically inside the integrand, so
    U(s, s; f) = 0 holds exactly and values for s1 close to s2 do not
    suffer cancellation.  The t-integral is split at interior points where
    the chord argument crosses a singular point of f; each panel is
    integrated with an adaptive tanh-sinh rule (endpoint-clustered nodes).
    """
    s1 = float(s1)
    s2 = float(s2)
    if s1 == s2:
        return QuadResult(0.0, 0.0)
    integrand = _u_integrand(f, s1, s2)
    breaks = [0.0] + _interior_breakpoints(f, s1, s2) + [1.0]
    total = 0.0
    err = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        width = b - a
        if width <= 0:
            continue

        def panel(t, omt, a=a, b=b, width=width):
            # map panel-local t onto [a, b]; keep both tt and 1-tt accurate
            tt = np.where(t <= 0.5, a + width * t, b - width * omt)
            omtt = np.where(t <= 0.5, (1.0 - a) - width * t,
                            (1.0 - b) + width * omt)
            return width * integrand(tt, omtt)

        res = integrate_01(panel, rtol=rtol)
        total += res.value
        err += res.error
    return QuadResult(total, err)


def u_functional(f: SpectralFunction, rtol: float = 1e-12) -> QuadResult:
    """One-point functional U(f) = U(1, 0; f).

    Returns the value with an error estimate from tanh-sinh level doubling.
    Raises NonIntegrableError when the endpoint behaviour of the integrand
    is not o(1/t).
    """
    return u_two_point(1.0, 0.0, f, rtol=rtol)


def u_batch(s1: np.ndarray, s2: np.ndarray, f: SpectralFunction,
            level: int = 6) -> np.ndarray:
    """Vectorized U(s1_i, s2_i; f) on arrays, fixed tanh-sinh level.

    Used by the coefficient quadratures, where millions of pairs with
    values inside [0, 1] are evaluated.  Requires that no chord crosses an
    interior singular point of f (true whenever the singular set lies on
    the boundary of the value range, as for the entropy family on [0, 1]).
    Accuracy at level 6 is ~1e-12 for eta_1-type integrands.
    """
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    lo = np.minimum(s1, s2)
    hi = np.maximum(s1, s2)
    for z in f.singular_set:
        if np.any((lo + 1e-15 < z) & (z < hi - 1e-15)):
            return np.array([u_two_point(a, b, f).value for a, b in zip(s1, s2)])
    rule = tanh_sinh_rule(level)
    t = rule.t[None, :]
    omt = rule.one_minus_t[None, :]
    left = s1[:, None] + t * (s2 - s1)[:, None]
    right = s2[:, None] + omt * (s1 - s2)[:, None]
    arg = np.where(t <= 0.5, left, right)
    fs1 = f.fn(s1)[:, None]
    fs2 = f.fn(s2)[:, None]
    num = f.fn(arg.ravel()).reshape(arg.shape) - (omt * fs1 + t * fs2)
    return (num / (t * omt)) @ rule.w


def holder_ratio(f: SpectralFunction, pairs_a, pairs_b, delta: float = 0.5) -> float:
    """max |U(s)-U(r)| / (|s1-r1|^delta + |s2-r2|^delta) over given pairs."""
    worst = 0.0
    for (s1, s2), (r1, r2) in zip(pairs_a, pairs_b):
        du = abs(u_two_point(s1, s2, f).value - u_two_point(r1, r2, f).value)
        den = abs(s1 - r1) ** delta + abs(s2 - r2) ** delta
        if den > 0:
            worst = max(worst, du / den)
    return worst
