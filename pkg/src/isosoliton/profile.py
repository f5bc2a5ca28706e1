"""Level-set areas and volumes, the isoperimetric profile xi, and graph functionals.

Volumes are always measured from the inner boundary S(r_lo).  Graphs are
r = rho(p) over the fiber: the full circle for n = 2, an axisymmetric profile
rho(theta) with theta the polar angle in [0, pi] for n >= 3.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .warp_core import DomainError, WarpModel

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


class ProfileRangeError(ValueError):
    """A volume outside the tabulated range [V(r_lo), V(r_hi)]."""


def sphere_area(k: int) -> float:
    """Area of the unit k-sphere S^k in R^{k+1}."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def level_area(model: WarpModel, r):
    phi = model.eval(r)[0]
    a = sphere_area(model.n - 1) * phi ** (model.n - 1)
    return float(a) if np.ndim(a) == 0 else a


def level_volume(model: WarpModel, r) -> float:
    """omega_{n-1} * int_{r_lo}^{r} phi^{n-1}, by adaptive quadrature."""
    r = float(model.check_domain(r))
    if r == model.r_lo:
        return 0.0
    n = model.n
    val, _ = quad(lambda t: float(model.warp(np.array(t))[0]) ** (n - 1), model.r_lo, r,
                  epsabs=0.0, epsrel=1e-12, limit=400)
    return sphere_area(n - 1) * val


class VolumePrimitive:
    """r -> int_{r_lo}^{r} phi^{n-1}, from cumulative 10-point Gauss panels."""

    def __init__(self, model: WarpModel, panels: int = 2048):
        self.model = model
        if model.table is not None:
            inner = model.table.r[(model.table.r > model.r_lo) & (model.table.r < model.r_hi)]
            nodes = np.concatenate([[model.r_lo], inner, [model.r_hi]])
        else:
            nodes = np.linspace(model.r_lo, model.r_hi, panels + 1)
        self.nodes = nodes
        pieces = self._panel(nodes[:-1], nodes[1:])
        self.cumulative = np.concatenate([[0.0], np.cumsum(pieces)])

    def _panel(self, a, b):
        half = 0.5 * (b - a)
        pts = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X[None, :]
        vals = self.model.warp(pts)[0] ** (self.model.n - 1)
        return half * (vals @ _GL_W)

    def __call__(self, r):
        r = self.model.check_domain(r)
        flat = np.atleast_1d(r).astype(float).ravel()
        k = np.clip(np.searchsorted(self.nodes, flat, side="right") - 1, 0, self.nodes.size - 2)
        out = self.cumulative[k] + self._panel(self.nodes[k], flat)
        return float(out[0]) if np.ndim(r) == 0 else out.reshape(np.shape(r))


@functools.lru_cache(maxsize=64)
def volume_primitive(model: WarpModel) -> VolumePrimitive:
    return VolumePrimitive(model)


@dataclass(frozen=True, eq=False)
class IsoProfile:
    """Tables A(r), V(r) on a level-set grid and the map xi = A o V^{-1}.

    For n = 2 the same object is the length/area profile F.
    """

    model: WarpModel
    r_grid: np.ndarray
    A_values: np.ndarray
    V_values: np.ndarray
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "_r_of_v", PchipInterpolator(self.V_values, self.r_grid, extrapolate=True))

    @property
    def model_ref(self) -> str:
        return self.model.name

    @property
    def v_max(self) -> float:
        return float(self.V_values[-1])

    def inverse_volume(self, v):
        """Radius of the level set enclosing volume ``v``.

        Monotone cubic interpolation gives the starting point; a safeguarded
        Newton iteration on V(r) = v (with V' = A) then polishes it to
        rounding level.
        """
        v_arr = np.atleast_1d(np.asarray(v, dtype=float))
        tol = 1e-12 * max(1.0, self.v_max)
        if np.any(~np.isfinite(v_arr)) or np.any(v_arr < -tol) or np.any(v_arr > self.v_max + tol):
            raise ProfileRangeError(
                f"volume outside profile range [0, {self.v_max:.6g}] for model {self.model_ref}"
            )
        v_arr = np.clip(v_arr, 0.0, self.v_max)
        V = self.V_values
        k = np.clip(np.searchsorted(V, v_arr, side="right") - 1, 0, V.size - 2)
        lo, hi = self.r_grid[k].copy(), self.r_grid[k + 1].copy()
        r = np.clip(self._r_of_v(v_arr), lo, hi)
        prim = volume_primitive(self.model)
        n = self.model.n
        for _ in range(60):
            g = self.omega * prim(r) - v_arr
            lo = np.where(g < 0, r, lo)
            hi = np.where(g > 0, r, hi)
            dg = self.omega * self.model.warp(r)[0] ** (n - 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(dg > 0, g / dg, np.inf)
            r_new = r - step
            bad = ~((r_new >= lo) & (r_new <= hi))
            r_new = np.where(bad, 0.5 * (lo + hi), r_new)
            r_new = np.where(g == 0, r, r_new)
            done = np.abs(r_new - r) <= 4e-16 * np.maximum(1.0, np.abs(r))
            r = r_new
            if np.all(done | (g == 0)):
                break
        r = np.where(v_arr <= 0.0, self.r_grid[0], r)
        return float(r[0]) if np.ndim(v) == 0 else r.reshape(np.shape(v))

    def xi(self, v):
        r = self.inverse_volume(v)
        a = self.omega * self.model.warp(np.asarray(r))[0] ** (self.model.n - 1)
        return float(a) if np.ndim(v) == 0 else a

    __call__ = xi
    F = xi


def build_profile(model: WarpModel, grid_size: int = 2048, r_max: float | None = None) -> IsoProfile:
    """Tabulate A and V on a uniform grid over [r_lo, r_max or r_hi]."""
    if int(grid_size) < 16:
        raise ValueError("grid_size must be >= 16")
    r_top = model.r_hi if r_max is None else float(r_max)
    if not model.r_lo < r_top <= model.r_hi:
        raise DomainError(f"profile end {r_top} outside ({model.r_lo}, {model.r_hi}]")
    r = np.linspace(model.r_lo, r_top, int(grid_size))
    omega = sphere_area(model.n - 1)
    A = omega * model.eval(r)[0] ** (model.n - 1)
    V = omega * volume_primitive(model)(r)
    if np.any(np.diff(V) <= 0):
        raise ValueError(f"volume table of {model.name} is not increasing (phi <= 0 somewhere?)")
    return IsoProfile(model, r, A, V, omega)


# -- graphs over the fiber -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiberGrid:
    """Nodes and quadrature weights on the fiber.

    ``weights`` integrate against the round measure of S^{n-1}; for n >= 3 they
    act on axisymmetric functions of the polar angle and are exact for
    cos(m theta), m < size.
    """

    n: int
    theta: np.ndarray
    weights: np.ndarray
    periodic: bool

    @property
    def size(self) -> int:
        return self.theta.size

    @property
    def spacing(self) -> float:
        return float(self.theta[1] - self.theta[0])


def _sine_power_moments(k: int, size: int) -> np.ndarray:
    """int_0^pi cos(m t) sin^k t dt for m < size.

    Odd m vanish by symmetry; even m follow mu_{m+2} = mu_m (m - k) / (m + k + 2).
    """
    mu = np.zeros(size)
    mu[0] = math.sqrt(math.pi) * math.exp(math.lgamma((k + 1) / 2) - math.lgamma(k / 2 + 1))
    for m in range(0, size - 2, 2):
        mu[m + 2] = mu[m] * (m - k) / (m + k + 2)
    return mu


@functools.lru_cache(maxsize=32)
def fiber_grid(n: int, size: int) -> FiberGrid:
    if size < 8:
        raise ValueError("graph grid needs at least 8 nodes")
    if n == 2:
        theta = 2 * np.pi * np.arange(size) / size
        return FiberGrid(2, theta, np.full(size, 2 * np.pi / size), True)
    theta = np.linspace(0.0, np.pi, size)
    m = np.arange(size)
    moments = _sine_power_moments(n - 2, size)
    # integrate the DCT-I cosine interpolant term by term
    c = np.ones(size)
    c[0] = c[-1] = 0.5
    w = (2.0 / (size - 1)) * c * (np.cos(np.outer(theta, m)) @ (c * moments))
    return FiberGrid(n, theta, sphere_area(n - 2) * w, False)


def spectral_derivatives(grid: FiberGrid, rho: np.ndarray):
    """First and second theta-derivatives (Fourier; even extension at the poles)."""
    rho = np.asarray(rho, dtype=float)
    if grid.periodic:
        ext, L = rho, 2 * np.pi
    else:
        ext, L = np.concatenate([rho, rho[-2:0:-1]]), 2 * np.pi
    size = ext.size
    k = np.fft.rfftfreq(size, d=L / size) * 2 * np.pi
    c = np.fft.rfft(ext)
    c1 = 1j * k * c
    if size % 2 == 0:
        c1[-1] = 0.0
    d1 = np.fft.irfft(c1, n=size)
    d2 = np.fft.irfft(-(k**2) * c, n=size)
    if not grid.periodic:
        d1, d2 = d1[: rho.size], d2[: rho.size]
        d1[0] = d1[-1] = 0.0
    return d1, d2


def _graph_check(model: WarpModel, rho) -> tuple[np.ndarray, FiberGrid]:
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1:
        raise ValueError("rho must be a 1-D array of node values")
    grid = fiber_grid(model.n, rho.size)
    model.check_domain(rho)
    return rho, grid


def graph_area(model: WarpModel, rho) -> float:
    """Area of r = rho over the fiber: int phi^{n-2} sqrt(phi^2 + |grad rho|^2)."""
    rho, grid = _graph_check(model, rho)
    phi = model.warp(rho)[0]
    d1, _ = spectral_derivatives(grid, rho)
    dens = phi ** (model.n - 2) * np.sqrt(phi * phi + d1 * d1)
    return float(grid.weights @ dens)


def curve_length(model: WarpModel, rho) -> float:
    """n = 2 only: int_0^{2 pi} sqrt(rho'^2 + phi(rho)^2) dtheta."""
    if model.n != 2:
        raise ValueError("curve_length is the n = 2 specialisation")
    rho, grid = _graph_check(model, rho)
    d1, _ = spectral_derivatives(grid, rho)
    return float(np.sum(np.hypot(d1, model.warp(rho)[0])) * grid.spacing)


def graph_volume(model: WarpModel, rho) -> float:
    """Volume between S(r_lo) and the graph."""
    rho, grid = _graph_check(model, rho)
    if np.any(rho < model.r_lo):
        raise DomainError("graph dips below the inner boundary S(r_lo)")
    return float(grid.weights @ volume_primitive(model)(rho))


@dataclass(frozen=True)
class GraphFunctional:
    area: float
    volume: float
    deficit: float


def graph_functional(model: WarpModel, rho, profile: IsoProfile) -> GraphFunctional:
    area = graph_area(model, rho)
    volume = graph_volume(model, rho)
    return GraphFunctional(area, volume, area - profile.xi(volume))
