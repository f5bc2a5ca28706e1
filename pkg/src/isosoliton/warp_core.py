"""Warped-product models dr^2 + phi(r)^2 g_{S^{n-1}} and their soliton quantities.

A :class:`WarpModel` bundles the dimension, a compact working interval and a
vectorised evaluator ``r -> (phi, phi', phi'')``.  Soliton models also carry
``r -> (f, f', f'')`` for the potential of the steady soliton equation
``Ric + Hess f = 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

EPS_PHI = 1e-8
ROUNDING_SLACK = 4 * np.finfo(float).eps
KINDS = ("cigar", "euclidean", "round_sphere_warp", "bryant_tabulated")

Triple = tuple[np.ndarray, np.ndarray, np.ndarray]
Evaluator = Callable[[np.ndarray], Triple]


class DomainError(ValueError):
    """Raised when a radius lies outside a model's working interval."""


class MissingSolitonData(ValueError):
    pass


@dataclass(frozen=True)
class WarpTable:
    """Node data behind a tabulated model (also the JSON sample list)."""

    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    fprime: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class WarpModel:
    n: int
    r_lo: float
    r_hi: float
    kind: str
    warp: Evaluator = field(repr=False)
    soliton: Optional[Evaluator] = field(default=None, repr=False)
    table: Optional[WarpTable] = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self) -> None:
        if int(self.n) < 2:
            raise ValueError(f"dimension must be >= 2, got {self.n}")
        if not (0.0 <= self.r_lo < self.r_hi):
            raise ValueError(f"need 0 <= r_lo < r_hi, got [{self.r_lo}, {self.r_hi}]")
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def has_soliton(self) -> bool:
        return self.soliton is not None

    def _slack(self) -> float:
        return 1e-12 * max(1.0, abs(self.r_hi))

    def check_domain(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        slack = self._slack()
        if np.any(~np.isfinite(r)) or np.any(r < self.r_lo - slack) or np.any(r > self.r_hi + slack):
            bad = r[(r < self.r_lo - slack) | (r > self.r_hi + slack) | ~np.isfinite(r)]
            raise DomainError(
                f"radius {bad.flat[0]!r} outside [{self.r_lo}, {self.r_hi}] of model {self.name}"
            )
        return r

    def eval(self, r) -> Triple:
        """Return ``(phi, phi', phi'')`` at ``r`` (scalar or array)."""
        return self.warp(self.check_domain(r))

    def potential(self, r) -> Triple:
        """Return ``(f, f', f'')`` at ``r``."""
        if self.soliton is None:
            raise MissingSolitonData(f"model {self.name} carries no soliton potential")
        return self.soliton(self.check_domain(r))

    def grid(self, size: int) -> np.ndarray:
        return np.linspace(self.r_lo, self.r_hi, int(size))


@dataclass(frozen=True)
class ConditionReport:
    K: float
    grid: np.ndarray
    q_values: np.ndarray
    q_min: float
    q_max: float
    admissible: bool
    strict: bool

    def summary(self) -> dict:
        return {
            "K": self.K,
            "grid_size": int(self.grid.size),
            "q_min": self.q_min,
            "q_max": self.q_max,
            "r_at_q_min": float(self.grid[np.argmin(self.q_values)]),
            "r_at_q_max": float(self.grid[np.argmax(self.q_values)]),
            "admissible": self.admissible,
            "strict": self.strict,
        }


@dataclass(frozen=True)
class SolitonResidual:
    grid: np.ndarray
    radial_residual: np.ndarray
    spherical_residual: np.ndarray
    max_abs: float


# -- analytic models ---------------------------------------------------------


def _sech(s):
    e = np.exp(-np.abs(s))
    return 2.0 * e / (1.0 + e * e)


def _cigar_warp(s):
    t, h = np.tanh(s), _sech(s)
    return t, h * h, -2.0 * t * h * h


def _cigar_potential(s):
    # log(cosh s) = |s| + log1p(exp(-2|s|)) - log 2 avoids overflow for large s
    a = np.abs(s)
    logcosh = a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)
    h = _sech(s)
    return -2.0 * logcosh, -2.0 * np.tanh(s), -2.0 * h * h


def make_cigar(s_max: float = 6.0) -> WarpModel:
    """The 2D cigar soliton ds^2 + tanh(s)^2 dtheta^2 with f = -2 log cosh s."""
    return WarpModel(2, 0.0, float(s_max), "cigar", _cigar_warp, _cigar_potential, name="cigar")


def make_euclidean(n: int, r_max: float = 4.0, flat_potential: bool = False) -> WarpModel:
    """Flat R^n in polar form, phi(r) = r.

    With ``flat_potential`` the constant potential f = 0 is attached, which makes
    the flat metric a (trivial) steady soliton.
    """
    if int(n) < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")

    def warp(r):
        r = np.asarray(r, dtype=float)
        return r.copy(), np.ones_like(r), np.zeros_like(r)

    def potential(r):
        z = np.zeros_like(np.asarray(r, dtype=float))
        return z, z.copy(), z.copy()

    return WarpModel(
        int(n), 0.0, float(r_max), "euclidean", warp,
        potential if flat_potential else None, name=f"euclidean{int(n)}",
    )


def make_sphere_warp(n: int = 2, r_max: float = np.pi) -> WarpModel:
    """phi(r) = sin r, the round sphere; Q = 1 identically (boundary case K = 1)."""
    if int(n) < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    if not 0.0 < r_max <= np.pi:
        raise ValueError("sin r is positive only on (0, pi)")

    def warp(r):
        return np.sin(r), np.cos(r), -np.sin(r)

    return WarpModel(int(n), 0.0, float(r_max), "round_sphere_warp", warp, name="sphere-warp")


# -- tabulated models --------------------------------------------------------


def tabulated_model(
    n: int,
    kind: str,
    r,
    phi,
    dphi,
    d2phi,
    fprime=None,
    r_lo: float | None = None,
    r_hi: float | None = None,
    name: str = "",
) -> WarpModel:
    """Build a model from node data.

    phi and phi' are cubic Hermite interpolants (with phi' and phi'' as the
    node slopes), f' is a not-a-knot cubic spline and f'' its derivative.
    When r, phi and phi' are all positive the interpolation runs in log-log
    coordinates, which keeps power-law tails (phi ~ sqrt(r)) accurate.  For
    ``bryant_tabulated`` models phi'' is taken from the spherical soliton
    equation, ``phi'' = (phi phi' f' + (n-2)(1 - phi'^2)) / phi``, instead of
    from the interpolant.
    """
    r = np.asarray(r, dtype=float)
    phi, dphi, d2phi = (np.asarray(a, dtype=float) for a in (phi, dphi, d2phi))
    if r.ndim != 1 or r.size < 4:
        raise ValueError("need at least 4 samples")
    if np.any(np.diff(r) <= 0):
        raise ValueError("sample radii must be strictly increasing")
    if kind == "bryant_tabulated" and fprime is None:
        raise ValueError("bryant_tabulated models need f' samples")
    fp = None if fprime is None else np.asarray(fprime, dtype=float)
    table = WarpTable(r, phi, dphi, d2phi, fp)
    nn = int(n)

    if np.all(r > 0) and np.all(phi > 0) and np.all(dphi > 0):
        # power-law-like tables: interpolate log phi and log phi' against log r
        ell = np.log(r)
        lphi_s = CubicHermiteSpline(ell, np.log(phi), r * dphi / phi)
        ldphi_s = CubicHermiteSpline(ell, np.log(dphi), r * d2phi / dphi)
        dldphi_s = ldphi_s.derivative()

        def base(rr):
            le = np.log(rr)
            ld = ldphi_s(le)
            dp = np.exp(ld)
            # 1 - phi'^2 without cancellation
            return np.exp(lphi_s(le)), dp, dp * dldphi_s(le) / rr, -np.expm1(2.0 * ld)

        if fp is not None:
            fp_l = CubicSpline(ell, fp)
            dfp_l = fp_l.derivative()
            f_l = CubicSpline(ell, fp * r).antiderivative()

            def fprime_eval(rr):
                le = np.log(rr)
                return f_l(le), fp_l(le), dfp_l(le) / rr
    else:
        phi_s = CubicHermiteSpline(r, phi, dphi)
        dphi_s = CubicHermiteSpline(r, dphi, d2phi)
        d2phi_s = dphi_s.derivative()

        def base(rr):
            dp = dphi_s(rr)
            return phi_s(rr), dp, d2phi_s(rr), 1.0 - dp * dp

        if fp is not None:
            fp_s = CubicSpline(r, fp)
            f_s = fp_s.antiderivative()
            fpp_s = fp_s.derivative()

            def fprime_eval(rr):
                return f_s(rr), fp_s(rr), fpp_s(rr)

    if kind == "bryant_tabulated":

        def warp(rr):
            p, dp, _, one_minus = base(rr)
            f1 = fprime_eval(rr)[1]
            return p, dp, (p * dp * f1 + (nn - 2) * one_minus) / p

    else:

        def warp(rr):
            return base(rr)[:3]

    soliton = None
    if fp is not None:
        lo = float(r[0] if r_lo is None else r_lo)
        f0 = float(fprime_eval(np.array(lo))[0])

        def soliton(rr):
            f, f1, f2 = fprime_eval(rr)
            return f - f0, f1, f2

    return WarpModel(
        nn,
        float(r[0] if r_lo is None else r_lo),
        float(r[-1] if r_hi is None else r_hi),
        kind,
        warp,
        soliton,
        table,
        name=name or kind,
    )


# -- curvature and admissibility ---------------------------------------------


def condition_q(model: WarpModel, r):
    """(phi')^2 - phi'' phi at ``r``."""
    phi, dphi, d2phi = model.eval(r)
    q = dphi * dphi - d2phi * phi
    return float(q) if np.ndim(q) == 0 else q


def check_condition(model: WarpModel, K: float = 1.0, grid_size: int = 2048) -> ConditionReport:
    if int(grid_size) < 2:
        raise ValueError("grid_size must be >= 2")
    if K <= 0:
        raise ValueError("K must be positive")
    grid = model.grid(grid_size)
    q = np.asarray(condition_q(model, grid))
    q_min, q_max = float(q.min()), float(q.max())
    # a few ulps of slack: sin^2 + cos^2 need not round to exactly 1
    slack = ROUNDING_SLACK * K
    return ConditionReport(
        K=float(K),
        grid=grid,
        q_values=q,
        q_min=q_min,
        q_max=q_max,
        admissible=bool(-slack <= q_min and q_max <= K + slack),
        strict=bool(q_max < K),
    )


def ricci_components(model: WarpModel, r):
    """Return ``(Ric_rr, Ric_sph)``; the second is the coefficient of g_{S^{n-1}}."""
    phi, dphi, d2phi = model.eval(r)
    if np.any(phi < EPS_PHI):
        raise DomainError(f"phi below {EPS_PHI:g}; Ricci undefined at the coordinate origin")
    n = model.n
    ric_rr = -(n - 1) * d2phi / phi
    ric_sph = (n - 2) * (1.0 - dphi * dphi) - phi * d2phi
    if np.ndim(ric_rr) == 0:
        return float(ric_rr), float(ric_sph)
    return ric_rr, ric_sph


def soliton_residual(model: WarpModel, grid_size: int = 2048) -> SolitonResidual:
    """Residuals of the two scalar equations of Ric + Hess f = 0.

    Nodes where phi < EPS_PHI (the coordinate origin) are dropped.
    """
    if not model.has_soliton:
        raise MissingSolitonData(f"model {model.name} carries no soliton potential")
    grid = model.grid(grid_size)
    phi = model.eval(grid)[0]
    grid = grid[phi >= EPS_PHI]
    phi, dphi, _ = model.eval(grid)
    _, fp, fpp = model.potential(grid)
    ric_rr, ric_sph = ricci_components(model, grid)
    radial = ric_rr + fpp
    spherical = ric_sph + phi * dphi * fp
    max_abs = float(max(np.max(np.abs(radial)), np.max(np.abs(spherical))))
    return SolitonResidual(grid, radial, spherical, max_abs)


# -- serialisation -------------------------------------------------------------


def model_to_dict(model: WarpModel, grid_size: int = 2049) -> dict:
    """JSON document for ``model``: table nodes if tabulated, else a uniform sample."""
    if model.table is not None:
        t = model.table
        r, phi, dphi, d2phi, fp = t.r, t.phi, t.dphi, t.d2phi, t.fprime
    else:
        r = model.grid(grid_size)
        phi, dphi, d2phi = model.eval(r)
        fp = model.potential(r)[1] if model.has_soliton else None
    samples = []
    for i in range(r.size):
        samples.append(
            {
                "r": float(r[i]),
                "phi": float(phi[i]),
                "dphi": float(dphi[i]),
                "d2phi": float(d2phi[i]),
                "fprime": None if fp is None else float(fp[i]),
            }
        )
    return {
        "meta": {"n": model.n, "kind": model.kind, "r_lo": model.r_lo, "r_hi": model.r_hi},
        "samples": samples,
    }


def model_from_dict(doc: dict, name: str = "") -> WarpModel:
    try:
        meta = doc["meta"]
        samples = doc["samples"]
        n, kind = int(meta["n"]), str(meta["kind"])
        r_lo, r_hi = float(meta["r_lo"]), float(meta["r_hi"])
        r = np.array([s["r"] for s in samples], dtype=float)
        phi = np.array([s["phi"] for s in samples], dtype=float)
        dphi = np.array([s["dphi"] for s in samples], dtype=float)
        d2phi = np.array([s["d2phi"] for s in samples], dtype=float)
        fps = [s.get("fprime") for s in samples]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed model document: {exc}") from exc
    if np.any(np.diff(r) <= 0):
        raise ValueError("model samples must have strictly increasing r")
    if any(v is None for v in fps):
        if not all(v is None for v in fps):
            raise ValueError("fprime must be given for all samples or none")
        fp = None
    else:
        fp = np.array(fps, dtype=float)
    return tabulated_model(n, kind, r, phi, dphi, d2phi, fp, r_lo=r_lo, r_hi=r_hi, name=name)


def save_model(model: WarpModel, path: str | Path) -> None:
    from ._io import atomic_write_text

    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path: str | Path) -> WarpModel:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return model_from_dict(json.load(fh), name=path.stem)
