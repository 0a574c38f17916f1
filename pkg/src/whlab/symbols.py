"""Symbol families on momentum space: sharp indicators, Fermi occupation
factors, and mollified indicators, plus smoothness-condition diagnostics
and the shared momentum quadrature policy.

The Fermi symbol is a(xi) = 1 / (1 + exp((h(xi) - mu) / T)); its T -> 0
limit is the indicator of the sub-level set {h < mu}.  All evaluators take
values in [0, 1] and are overflow-safe down to T ~ 1e-4 and below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import erf, expit, i0e

from .errors import (DimensionMismatchError, PreconditionError,
                     UnsupportedShapeError)
from .quadrature import feature_mesh, gauss_panels
from .regions import Disk, IntervalUnion, Region, disk, interval


@dataclass(frozen=True)
class Dispersion:
    """Single-particle energy h(xi) with gradient and growth metadata."""

    h: Callable[[np.ndarray], np.ndarray]
    grad_h: Callable[[np.ndarray], np.ndarray]
    mu: float
    beta1: float
    beta2: float
    dimension: int
    radial_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "h"

    @property
    def is_isotropic(self) -> bool:
        return self.radial_profile is not None


def quadratic_dispersion(dimension: int, mu: float = 1.0) -> Dispersion:
    """h(xi) = |xi|^2, the default free Hamiltonian."""
    if dimension not in (1, 2):
        raise DimensionMismatchError("dimension must be 1 or 2")

    def h(xi):
        xi = np.asarray(xi, dtype=float)
        if dimension == 1:
            return xi ** 2
        return (xi ** 2).sum(axis=-1)

    def grad(xi):
        return 2.0 * np.asarray(xi, dtype=float)

    return Dispersion(h, grad, float(mu), 2.0, 1.0, dimension,
                      radial_profile=lambda r: np.asarray(r, dtype=float) ** 2,
                      name="quadratic")


def _fermi_radius(disp: Dispersion) -> float:
    """Radius of the sub-level set {h < mu} for an isotropic dispersion."""
    if disp.radial_profile is None:
        raise UnsupportedShapeError(
            "limit region construction needs an isotropic dispersion")
    prof = disp.radial_profile
    if float(prof(np.array([0.0]))[0] if np.ndim(prof(0.0)) else prof(0.0)) >= disp.mu:
        raise PreconditionError("level set {h = mu} is empty: h(0) >= mu")
    hi = 1.0
    while float(np.asarray(prof(hi))) <= disp.mu:
        hi *= 2.0
        if hi > 1e12:
            raise PreconditionError("sub-level set {h < mu} appears unbounded")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.asarray(prof(mid))) < disp.mu:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SymbolSpec:
    """A momentum symbol xi -> a(xi) in [0, 1].

    kind is one of "indicator", "fermi", "mollified".  ``region`` is the
    T -> 0 limit set; ``T`` the temperature or mollifier width; ``beta``
    the declared decay exponent of the boundary-layer envelope (metadata,
    checked by verify_condition_at rather than inferred).
    """

    kind: str
    dimension: int
    region: Region
    T: float = 0.0
    dispersion: Optional[Dispersion] = None
    mollifier: Optional[str] = None
    beta: float = 4.0
    _eval: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)
    _radial: Optional[Callable[[np.ndarray], np.ndarray]] = field(repr=False, default=None)

    @property
    def is_smooth(self) -> bool:
        return self.kind in ("fermi", "mollified")

    def __call__(self, xi) -> np.ndarray:
        return self._eval(np.asarray(xi, dtype=float))

    def radial(self, r) -> np.ndarray:
        """Radial profile a(|xi|); available for even 1D and isotropic 2D symbols."""
        if self._radial is None:
            raise UnsupportedShapeError("symbol has no radial profile")
        return self._radial(np.asarray(r, dtype=float))

    @property
    def is_radial(self) -> bool:
        return self._radial is not None

    def rho(self, xi) -> np.ndarray:
        """Exact distance to the limit-set boundary."""
        return self.region.boundary_distance(xi)

    def is_even(self) -> bool:
        if self.kind == "fermi":
            return True  # built from even radial dispersions
        return self.region.is_even()

    def cutoff_pointwise(self, threshold: float = 1e-14) -> float:
        """sup { |xi| : a(xi) > threshold }, by bisection on the radial profile."""
        if self.kind == "indicator":
            bb = self.region.bounding_box()
            return float(np.abs(bb).max())
        prof = self._radial
        if prof is None:
            raise UnsupportedShapeError("cutoff needs a radial profile")
        hi = max(1.0, 2.0 * float(np.abs(self.region.bounding_box()).max()))
        while float(prof(np.array([hi]))[0]) > threshold:
            hi *= 2.0
            if hi > 1e9:
                raise PreconditionError("symbol does not decay")
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(prof(np.array([mid]))[0]) > threshold:
                lo = mid
            else:
                hi = mid
        return hi

    def cutoff_tail(self, tol: float = 1e-12) -> float:
        """Radius beyond which the symbol tail integral is below tol."""
        if self.kind == "indicator":
            return self.cutoff_pointwise()
        xi0 = self.cutoff_pointwise(threshold=0.5)
        for k in range(1, 60):
            hi = xi0 + k * max(self.T, 1e-6)
            r = np.linspace(hi, hi + 60 * max(self.T, 1e-6), 512)
            vals = self._radial(r)
            tail = float(np.trapezoid(vals * (r ** (self.dimension - 1)), r))
            tail *= 2.0 if self.dimension == 1 else 2.0 * np.pi
            if tail < 0.5 * tol:
                return hi
        raise PreconditionError("could not locate an integrable symbol tail")


def eval_symbol(symbol: SymbolSpec, xi) -> np.ndarray:
    """Evaluate a(xi); validates dimension and smooth-kind preconditions."""
    xi = np.asarray(xi, dtype=float)
    d = symbol.dimension
    if d == 2:
        if xi.shape[-1] != 2:
            raise DimensionMismatchError("expected 2-vectors")
    elif xi.ndim > 1:
        raise DimensionMismatchError("expected scalars for a 1D symbol")
    if symbol.is_smooth and symbol.T <= 0:
        raise PreconditionError("smooth symbol kinds require T > 0")
    return symbol(xi)


def make_indicator(region: Region) -> SymbolSpec:
    """Sharp symbol chi_Omega."""
    def ev(xi):
        return region.contains(xi).astype(float)

    radial = None
    if isinstance(region, IntervalUnion) and region.is_even():
        def radial(r):
            return region.contains(np.asarray(r, dtype=float)).astype(float)
    elif isinstance(region, Disk) and region.is_even():
        def radial(r):
            return (np.asarray(r, dtype=float) < region.radius).astype(float)

    return SymbolSpec("indicator", region.dimension, region, 0.0,
                      _eval=ev, _radial=radial)


def make_fermi(dispersion: Dispersion, T: float, beta: float = 8.0) -> SymbolSpec:
    """Fermi occupation symbol at temperature T > 0.

    The limit region is the sub-level set {h < mu}: an interval for even
    1D dispersions, a disk for isotropic 2D ones.  Evaluation uses the
    overflow-safe logistic, exact in double precision for T down to 1e-4
    and beyond.
    """
    if T <= 0:
        raise PreconditionError("fermi symbol requires T > 0")
    rF = _fermi_radius(dispersion)
    if dispersion.dimension == 1:
        region: Region = interval(-rF, rF)
    else:
        region = disk((0.0, 0.0), rF)

    h, mu = dispersion.h, dispersion.mu

    def ev(xi):
        return expit(-(h(xi) - mu) / T)

    prof = dispersion.radial_profile

    def radial(r):
        return expit(-(prof(r) - mu) / T)

    return SymbolSpec("fermi", dispersion.dimension, region, float(T),
                      dispersion=dispersion, beta=beta, _eval=ev, _radial=radial)


@lru_cache(maxsize=1)
def _bump_cdf_table():
    u = np.linspace(-1.0, 1.0, 20001)
    vals = np.exp(-1.0 / np.maximum(1.0 - u ** 2, 1e-300))
    vals[0] = vals[-1] = 0.0
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(u))])
    return u, cdf / cdf[-1]


def _bump_cdf(u):
    grid, cdf = _bump_cdf_table()
    return np.interp(np.asarray(u, dtype=float), grid, cdf, left=0.0, right=1.0)


@lru_cache(maxsize=1)
def _bump2d_norm() -> float:
    r = np.linspace(0.0, 1.0, 20001)
    vals = np.exp(-1.0 / np.maximum(1.0 - r ** 2, 1e-300)) * r
    vals[-1] = 0.0
    return float(2.0 * np.pi * np.trapezoid(vals, r))


def make_mollified(region: Region, T: float, mollifier: str = "gaussian") -> SymbolSpec:
    """Indicator smoothed by a unit-mass mollifier at width T.

    1D intervals with the Gaussian mollifier use the closed-form erf edge
    profile; the compactly supported bump reproduces the indicator exactly
    wherever the distance to the boundary exceeds T.  2D is supported for
    centred disks through radial quadrature of the convolution.
    """
    if T <= 0:
        raise PreconditionError("mollified symbol requires T > 0")
    if mollifier not in ("gaussian", "compact_bump"):
        raise PreconditionError(f"unknown mollifier {mollifier!r}")

    if isinstance(region, IntervalUnion):
        comps = region.components

        if mollifier == "gaussian":
            def ev(xi):
                xi = np.asarray(xi, dtype=float)
                out = np.zeros_like(xi)
                for l, r in comps:
                    out += 0.5 * (erf((r - xi) / T) - erf((l - xi) / T))
                return np.clip(out, 0.0, 1.0)
        else:
            def ev(xi):
                xi = np.asarray(xi, dtype=float)
                out = np.zeros_like(xi)
                for l, r in comps:
                    out += _bump_cdf((xi - l) / T) - _bump_cdf((xi - r) / T)
                return np.clip(out, 0.0, 1.0)

        radial = ev if region.is_even() else None
        return SymbolSpec("mollified", 1, region, float(T), mollifier=mollifier,
                          _eval=ev, _radial=radial)

    if isinstance(region, Disk) and region.is_even():
        R = region.radius
        # mollifier mass at |x| = r comes from the annulus |s - r| < width,
        # so quadrature runs in the local variable s = r + width*u
        if mollifier == "gaussian":
            ug, wg = gauss_panels(np.linspace(-8.0, 8.0, 33), 8)

            def radial(r):
                r = np.atleast_1d(np.asarray(r, dtype=float))
                s = r[:, None] + T * ug[None, :]
                valid = (s > 0.0) & (s < R)
                s = np.where(valid, s, 0.0)
                kern = np.exp(-((r[:, None] - s) ** 2) / T ** 2) \
                    * i0e(2.0 * r[:, None] * s / T ** 2)
                vals = (2.0 / T) * ((kern * s * valid) @ wg)
                return np.clip(vals, 0.0, 1.0)
        else:
            c2 = _bump2d_norm()
            ug, wg = gauss_panels(np.linspace(-1.0, 1.0, 17), 8)
            pg, pw = gauss_panels(np.linspace(0.0, 1.0, 5), 8)

            def radial(r):
                r = np.atleast_1d(np.asarray(r, dtype=float))
                out = np.empty_like(r)
                for i, ri in enumerate(r):
                    s = ri + T * ug
                    valid = (s > 0.0) & (s < R)
                    if ri > 1e-12 * T:
                        cmin = (ri ** 2 + s ** 2 - T ** 2) / np.maximum(2 * ri * s, 1e-300)
                        phi0 = np.arccos(np.clip(cmin, -1.0, 1.0))
                    else:
                        phi0 = np.full_like(s, np.pi)
                    phi = phi0[:, None] * pg[None, :]
                    d2 = (ri ** 2 + s[:, None] ** 2
                          - 2 * ri * s[:, None] * np.cos(phi)) / T ** 2
                    f = np.where(d2 < 1.0,
                                 np.exp(-1.0 / np.maximum(1.0 - d2, 1e-300)), 0.0)
                    ang = 2.0 * phi0 * (f @ pw)
                    out[i] = (ang * s * valid * T) @ wg / (c2 * T ** 2)
                return np.clip(out, 0.0, 1.0)

        def ev(xi):
            xi = np.asarray(xi, dtype=float)
            return radial(np.sqrt((xi ** 2).sum(axis=-1)))

        return SymbolSpec("mollified", 2, region, float(T), mollifier=mollifier,
                          _eval=ev, _radial=radial)

    raise UnsupportedShapeError(
        "mollification supports 1D interval unions and centred 2D disks")


def momentum_nodes(symbol: SymbolSpec, freq: float = 0.0):
    """Shared momentum quadrature grid for integrals of functions of a(xi).

    Uniform trapezoid on [0, Xi] (radial) resolving both the boundary
    layer (step T/16) and, when freq = alpha * max|Delta| is supplied, the
    oscillation of e^{i alpha xi Delta} with at least six points per
    period of safety margin; the resulting aliasing error is below double
    precision for every regime used here.
    """
    if not symbol.is_smooth:
        raise PreconditionError("momentum grid applies to smooth symbols")
    xi_max = max(symbol.cutoff_pointwise(1e-14), symbol.cutoff_tail(1e-12))
    h = symbol.T / 16.0
    if freq > 0:
        h = min(h, 2.0 * np.pi / (6.0 * freq))
    n = int(np.ceil(xi_max / h)) + 1
    if n > 4_000_000:
        raise PreconditionError("momentum grid too fine; check T and alpha")
    r = np.linspace(0.0, xi_max, n)
    w = np.full(n, r[1] - r[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return r, w


def momentum_integral(symbol: SymbolSpec, g) -> float:
    """Integral of g(a(xi)) over momentum space, g(0) = 0 required.

    Indicator symbols use the closed form g(1) |Omega|; smooth radial
    symbols use the shared trapezoid grid (1D even or 2D isotropic).
    """
    g0 = float(np.atleast_1d(g(np.array([0.0])))[0])
    if abs(g0) > 1e-15:
        raise PreconditionError(
            "g(0) must vanish for integrable g(a) with a decaying symbol")
    if symbol.kind == "indicator":
        g1 = float(np.atleast_1d(g(np.array([1.0])))[0])
        return g1 * symbol.region.measure
    r, w = momentum_nodes(symbol)
    vals = g(symbol.radial(r))
    if symbol.dimension == 1:
        return 2.0 * float(vals @ w)
    return 2.0 * np.pi * float((vals * r) @ w)


@dataclass(frozen=True)
class ConditionReport:
    """Observed derivative envelopes against the declared decay bound."""

    T: float
    beta: float
    points: np.ndarray
    rho: np.ndarray
    ratios: dict            # order m -> array of |D^m a| / bound
    max_ratio: dict         # order m -> float

    def summary(self) -> str:
        lines = [f"T={self.T:g} beta={self.beta:g} samples={len(self.points)}"]
        for m, val in sorted(self.max_ratio.items()):
            lines.append(f"  order {m}: max ratio {val:.6g}")
        return "\n".join(lines)


def _fd_derivatives(symbol: SymbolSpec, pts: np.ndarray, step: float):
    """Central finite differences up to order 2; returns |a-chi|, |grad|, |hess|."""
    chi = symbol.region.contains(pts).astype(float)
    a0 = symbol(pts)
    m0 = np.abs(a0 - chi)
    if symbol.dimension == 1:
        ap = symbol(pts + step)
        am = symbol(pts - step)
        g = np.abs(ap - am) / (2 * step)
        hss = np.abs(ap - 2 * a0 + am) / step ** 2
        return m0, g, hss
    e1 = np.array([step, 0.0])
    e2 = np.array([0.0, step])
    axp, axm = symbol(pts + e1), symbol(pts - e1)
    ayp, aym = symbol(pts + e2), symbol(pts - e2)
    gx = (axp - axm) / (2 * step)
    gy = (ayp - aym) / (2 * step)
    hxx = (axp - 2 * a0 + axm) / step ** 2
    hyy = (ayp - 2 * a0 + aym) / step ** 2
    app = symbol(pts + e1 + e2)
    apm = symbol(pts + e1 - e2)
    amp = symbol(pts - e1 + e2)
    amm = symbol(pts - e1 - e2)
    hxy = (app - apm - amp + amm) / (4 * step ** 2)
    g = np.hypot(gx, gy)
    hss = np.sqrt(hxx ** 2 + hyy ** 2 + 2 * hxy ** 2)
    return m0, g, hss


def verify_condition_at(symbol: SymbolSpec, points=None, beta: float = None,
                        orders=(0, 1, 2)) -> ConditionReport:
    """Scan of boundary-layer/bulk decay against the declared envelope.

    For each sample xi and each order m the report holds the ratio of the
    finite-difference |D^m a| (step T/100) to the claimed bound
    (T + min(rho,1))^{-m} <1 + (rho/T)^2>^{-beta/2}; for m = 0 the bound
    applies to |a - chi|.  Callers assert that the maximum ratio is finite
    and stable under refinement of T, not any particular constant.
    """
    if not symbol.is_smooth or symbol.T <= 0:
        raise PreconditionError("condition check needs a smooth symbol with T > 0")
    if any(m not in (0, 1, 2) for m in orders):
        raise PreconditionError("derivative orders up to m = 2 only")
    beta = symbol.beta if beta is None else float(beta)
    T = symbol.T
    if points is None:
        points = _default_condition_samples(symbol)
    pts = np.asarray(points, dtype=float)
    rho = symbol.rho(pts)
    env = (1.0 + (rho / T) ** 2) ** (-beta / 2.0)
    rho_t = np.minimum(rho, 1.0)
    m0, g1, g2 = _fd_derivatives(symbol, pts, T / 100.0)
    observed = {0: m0, 1: g1, 2: g2}
    ratios = {}
    for m in orders:
        bound = env * (T + rho_t) ** (-m)
        ratios[m] = observed[m] / bound
    max_ratio = {m: float(np.max(v)) for m, v in ratios.items()}
    return ConditionReport(T, beta, pts, rho, ratios, max_ratio)


def _default_condition_samples(symbol: SymbolSpec) -> np.ndarray:
    """Boundary-layer plus bulk samples along a radial section."""
    T = symbol.T
    bb = symbol.region.bounding_box()
    r_edge = float(np.abs(bb).max())
    offs = np.concatenate([
        np.linspace(-2.0, 2.0, 17) * T,              # layer rho <~ T
        np.linspace(-8.0, 8.0, 9) * T,               # near field
        np.array([-0.5, -0.25, 0.25, 0.5]) * max(r_edge, 1.0),  # bulk
    ])
    r = np.unique(np.clip(r_edge + offs, 1e-6, None))
    if symbol.dimension == 1:
        return r
    return np.stack([r, np.zeros_like(r)], axis=1)
