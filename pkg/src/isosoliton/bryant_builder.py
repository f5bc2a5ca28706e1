"""Bryant steady soliton from the phase-plane system

    dx/dt = x (x - y) + (n - 2),    dy/dt = x (y - (n - 1) x),

with x = phi', y = (n-1) phi' - phi f' and dt = dr / phi.  The soliton is the
unstable manifold of the saddle (1, n-1), followed until x drops to ``x_stop``.

Near the saddle the quantities that matter (n-1 - xy in particular) are
second order in the distance to (1, n-1), so that leg is integrated in the
deviations a = 1 - x, b = y - (n-1).  Far out the system is stiff (the fast
eigenvalue is about -y and y grows like t), so the second leg runs on Radau,
in the variables x and Q = xy - (n-2), because Q ~ 2 x^2 is the small
quantity there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .warp_core import WarpModel, tabulated_model

X_STOP = 1e-4
X_SWITCH = 0.5
PHI_FLOOR = 1e-3
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


class IntegrationDiverged(RuntimeError):
    """The trajectory left the quadrant x > 0, y increasing."""


class StepFailure(RuntimeError):
    """The adaptive integrator could not meet its tolerance."""


class TrajectoryTooShort(ValueError):
    pass


class PhasePoint(NamedTuple):
    t: float
    x: float
    y: float


class RescaledPoint(NamedTuple):
    s: float
    X: float
    Y: float
    alpha: float


def vector_field(n: int, x, y):
    """Right-hand side of the phase-plane system."""
    if n < 3:
        raise ValueError("the Bryant system needs n >= 3")
    return x * (x - y) + (n - 2), x * (y - (n - 1) * x)


def _deviation_field(n: int, a, b):
    # same field written in a = 1 - x, b = y - (n - 1); exact polynomial identity
    da = (3 - n) * a + b - a * a - a * b
    db = (1.0 - a) * (b + (n - 1) * a)
    return da, db


def saddle_linearization(n: int):
    """Eigenvalues (descending) of the Jacobian at (1, n-1) and the unit unstable direction.

    The direction is oriented with negative x-component.
    """
    if n < 3:
        raise ValueError("the Bryant system needs n >= 3")
    x, y = 1.0, float(n - 1)
    jac = np.array([[2 * x - y, -x], [y - 2 * (n - 1) * x, x]])
    vals, vecs = np.linalg.eig(jac)
    order = np.argsort(vals.real)[::-1]
    vals, vecs = vals.real[order], vecs.real[:, order]
    direction = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    if direction[0] > 0:
        direction = -direction
    return vals, direction


@dataclass(frozen=True)
class BryantTrajectory:
    n: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    # n-1 - xy and xy - (n-2), each computed in the variables where it is accurate
    gap_upper: np.ndarray
    gap_lower: np.ndarray
    # phi'' phi = dx/dt and f' phi, likewise
    phi_dd_phi: np.ndarray
    fprime_phi: np.ndarray
    s: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    log_phi_unit: np.ndarray
    r_unit: np.ndarray
    eps0: float
    x_stop: float
    integrator_stats: dict = field(default_factory=dict)
    reconstruction: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def alpha(self) -> float:
        return 1.0 / math.sqrt(self.n - 1)

    @property
    def xy(self) -> np.ndarray:
        return (self.n - 2) + self.gap_lower

    @property
    def ratio(self) -> np.ndarray:
        """X / Y^2."""
        return self.X / self.Y**2

    @property
    def reached_stop(self) -> bool:
        return bool(self.x[-1] <= self.x_stop)

    def phase(self) -> list[PhasePoint]:
        return [PhasePoint(*v) for v in zip(self.t.tolist(), self.x.tolist(), self.y.tolist())]

    def rescaled(self) -> list[RescaledPoint]:
        a = self.alpha
        return [RescaledPoint(s, X, Y, a) for s, X, Y in zip(self.s.tolist(), self.X.tolist(), self.Y.tolist())]

    def csv_rows(self):
        """Rows ``t,x,y,s,X,Y,r,phi,dphi,fprime`` for the default gauge."""
        rec = self.reconstruction
        for i in range(self.t.size):
            yield (self.t[i], self.x[i], self.y[i], self.s[i], self.X[i], self.Y[i],
                   rec[0, i], rec[1, i], rec[2, i], rec[3, i])


CSV_HEADER = ("t", "x", "y", "s", "X", "Y", "r", "phi", "dphi", "fprime")


def _check_solution(sol, leg: str) -> None:
    if sol.status == -1:
        raise StepFailure(f"{leg} leg: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationDiverged(f"{leg} leg produced non-finite values")


def _solve_to_event(fun, t_span, z0, **kw):
    """solve_ivp, but with a terminal event point recomputed by a final short solve.

    solve_ivp fills the event point from the dense output, which for Radau is
    far less accurate than the accepted steps.
    """
    sol = solve_ivp(fun, t_span, z0, **kw)
    if sol.status != 1 or sol.t.size < 3:
        return sol, sol.t, sol.y
    t_ev = sol.t[-1]
    t, z = sol.t[:-1], sol.y[:, :-1]
    kw = {k: v for k, v in kw.items() if k != "events"}
    tail = solve_ivp(fun, (t[-1], t_ev), z[:, -1], **kw)
    if tail.status == -1:
        raise StepFailure(tail.message)
    return sol, np.append(t, tail.t[-1]), np.hstack([z, tail.y[:, -1:]])


def integrate_unstable(
    n: int,
    eps0: float = 1e-8,
    t_span: tuple[float, float] = (0.0, 1e7),
    tol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    x_stop: float = X_STOP,
    phi0: float | None = None,
    max_step_near: float = 0.025,
) -> BryantTrajectory:
    """Follow the unstable manifold of (1, n-1) until ``x <= x_stop``.

    The start is (1, n-1) + eps0 * direction.  Alongside (x, y) the unit
    gauge ``log phi`` (d/dt log phi = x, phi(0) = 1) and ``r`` (dr/dt = phi)
    are integrated; :func:`reconstruct_metric` fixes the scale afterwards.
    """
    n = int(n)
    if n < 3:
        raise ValueError("the Bryant system needs n >= 3")
    if not 1e-10 <= eps0 <= 1e-4:
        raise ValueError("eps0 must lie in [1e-10, 1e-4]")
    if tol < 1e-12:
        raise ValueError("tol must be >= 1e-12")
    t0, t1 = map(float, t_span)
    if t1 <= t0:
        raise ValueError("empty t_span")

    _, direction = saddle_linearization(n)
    a0, b0 = -eps0 * direction[0], eps0 * direction[1]

    def rhs_near(_t, z):
        a, b, lphi, _r = z
        da, db = _deviation_field(n, a, b)
        return [da, db, 1.0 - a, math.exp(lphi)]

    def leave_saddle(_t, z):
        return (1.0 - z[0]) - X_SWITCH

    leave_saddle.terminal = True
    leave_saddle.direction = -1

    # absolute tolerances on the deviations scale with the offset
    near, t_near, z_near = _solve_to_event(
        rhs_near, (t0, t1), [a0, b0, 0.0, 0.0], method="DOP853",
        rtol=tol, atol=[atol * eps0, atol * eps0, atol, atol], events=leave_saddle,
        max_step=max_step_near,
    )
    _check_solution(near, "saddle")
    a, b, lphi1, r1 = z_near

    x1, y1 = 1.0 - a, (n - 1) + b
    gap_up1 = (n - 1) * a - b + a * b
    gap_lo1 = 1.0 - gap_up1
    dadt, _ = _deviation_field(n, a, b)
    stats = {
        "rtol": tol,
        "atol": atol,
        "saddle_leg": {"method": "DOP853", "steps": int(t_near.size - 1), "nfev": int(near.nfev)},
    }

    parts_t, parts = [t_near], [(x1, y1, gap_up1, gap_lo1, -dadt, -((n - 1) * a + b), lphi1, r1)]

    if near.status == 1 and t_near[-1] < t1:
        nq = n - 2

        # far leg in (x, Q) with Q = xy - (n-2): Q -> 2 x^2 is tiny and must be
        # a state variable to keep its relative accuracy
        def rhs_far(_t, z):
            x, q, lphi, _r = z
            return [
                x * x - q,
                2 * x * (nq + q) - (nq + q) * q / x - (n - 1) * x**3,
                x,
                math.exp(lphi),
            ]

        def jac_far(_t, z):
            x, q, lphi, _r = z
            return [
                [2 * x, -1.0, 0.0, 0.0],
                [(nq + q) * q / x**2 + 2 * (nq + q) - 3 * (n - 1) * x**2, 2 * x - (nq + 2 * q) / x, 0.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, math.exp(lphi), 0.0],
            ]

        # a hair below x_stop so the re-solved end point satisfies x <= x_stop
        x_event = x_stop * (1.0 - 1e-7)

        def reach_stop(_t, z):
            return z[0] - x_event

        reach_stop.terminal = True
        reach_stop.direction = -1

        def leave_quadrant(_t, z):
            return z[0]

        leave_quadrant.terminal = True

        z1 = [x1[-1], gap_lo1[-1], lphi1[-1], r1[-1]]
        far, t_far, z_far = _solve_to_event(
            rhs_far, (t_near[-1], t1), z1, method="Radau", jac=jac_far,
            rtol=tol, atol=atol, events=[reach_stop, leave_quadrant],
        )
        _check_solution(far, "far-field")
        if far.t_events[1].size:
            raise IntegrationDiverged("x reached 0 before x_stop")
        x2, q2, lphi2, r2 = (c[1:] for c in z_far)
        y2 = (nq + q2) / x2
        parts_t.append(t_far[1:])
        parts.append((x2, y2, 1.0 - q2, q2, x2 * x2 - q2, (n - 1) * x2 - y2, lphi2, r2))
        stats["far_leg"] = {
            "method": "Radau", "variables": "x, xy-(n-2)", "steps": int(t_far.size - 1),
            "nfev": int(far.nfev), "njev": int(far.njev), "nlu": int(far.nlu),
        }

    t = np.concatenate(parts_t)
    cols = [np.concatenate([p[k] for p in parts]) for k in range(8)]
    x, y, gap_up, gap_lo, phidd_phi, fp_phi, lphi, r_unit = cols

    if np.any(x <= 0):
        raise IntegrationDiverged("x left the physical quadrant")
    dy = np.diff(y)
    if np.any(dy < 0):
        raise IntegrationDiverged(f"y decreased at {int(np.sum(dy < 0))} accepted steps")

    s = cumulative_trapezoid(y, t, initial=0.0)
    X = math.sqrt(n - 1) * x / y
    Y = math.sqrt((n - 1) * (n - 2)) / y
    stats["samples"] = int(t.size)

    traj = BryantTrajectory(
        n=n, t=t, x=x, y=y, gap_upper=gap_up, gap_lower=gap_lo, phi_dd_phi=phidd_phi,
        fprime_phi=fp_phi, s=s, X=X, Y=Y, log_phi_unit=lphi, r_unit=r_unit, eps0=float(eps0),
        x_stop=float(x_stop), integrator_stats=stats,
    )
    rec = reconstruction_columns(traj, phi0)
    object.__setattr__(traj, "reconstruction", np.vstack(rec[:4]))
    return traj


def default_gauge(traj: BryantTrajectory) -> float:
    """phi at the first sample such that the sectional curvature at the tip is 1.

    Near a smooth tip phi' = 1 - k r^2 / 2 with k = -phi''/phi(0), so k = 1
    gives r_0 = sqrt(2 (1 - x_0)).
    """
    return math.sqrt(2.0 * (1.0 - traj.x[0]))


def reconstruction_columns(traj: BryantTrajectory, phi0: float | None = None):
    """Return ``(r, phi, phi', f', phi'')`` on the trajectory samples for the gauge ``phi0``."""
    if phi0 is None:
        phi0 = default_gauge(traj)
    if not phi0 > 0:
        raise ValueError("phi0 must be positive")
    phi = phi0 * np.exp(traj.log_phi_unit)
    # back-extrapolate phi linearly to zero and put the origin there
    r = phi0 * traj.r_unit + phi0 / traj.x[0]
    if np.any(np.diff(r) <= 0):
        raise ValueError("reconstructed r is not strictly increasing")
    if np.any(phi <= 0):
        raise ValueError("reconstructed phi is not positive")
    fprime = traj.fprime_phi / phi
    d2phi = traj.phi_dd_phi / phi
    return r, phi, traj.x.copy(), fprime, d2phi


def reconstruct_metric(traj: BryantTrajectory, phi0: float | None = None, phi_floor: float = PHI_FLOOR) -> WarpModel:
    """Tabulated Bryant model; the working interval starts where phi >= phi_floor."""
    r, phi, dphi, fprime, d2phi = reconstruction_columns(traj, phi0)
    idx = int(np.searchsorted(phi, phi_floor))
    if idx >= r.size - 4:
        raise ValueError("trajectory too short to reach phi_floor")
    return tabulated_model(
        traj.n, "bryant_tabulated", r, phi, dphi, d2phi, fprime,
        r_lo=float(r[idx]), r_hi=float(r[-1]), name=f"bryant{traj.n}",
    )


@dataclass(frozen=True)
class RatioReport:
    n: int
    alpha: float
    bound: float
    initial_ratio: float
    tail_ratio: float
    tail_distance: float
    max_ratio: float
    strict_bound_held: bool
    tail_xy_gap: float
    xy_bounds_held: bool
    x_monotone: bool
    y_monotone: bool
    derivative_rel_error: float
    final_x: float
    final_s: float

    def as_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in self.__dict__.items()}


def ratio_derivative_identity(traj: BryantTrajectory):
    """Finite-difference d/ds (X/Y^2) and the closed-form alpha - q (X^2 - 2 alpha X + 1)."""
    q = traj.ratio
    a = traj.alpha
    fd = np.gradient(q, traj.s)
    exact = a - q * (traj.X**2 - 2 * a * traj.X + 1.0)
    return fd, exact


def verify_ratio_limit(traj: BryantTrajectory, x_required: float = 1e-3) -> RatioReport:
    """Check both limit lemmas and the bounds n-2 < xy < n-1 on a trajectory."""
    if traj.x[-1] > x_required:
        raise TrajectoryTooShort(f"trajectory stops at x = {traj.x[-1]:.3g} > {x_required:g}")
    n = traj.n
    alpha = traj.alpha
    bound = 1.0 / ((n - 2) * alpha)
    q = traj.ratio
    interior = traj.s > 0
    fd, exact = ratio_derivative_identity(traj)
    rel = float(np.max(np.abs(fd - exact)) / np.max(np.abs(exact)))
    return RatioReport(
        n=n,
        alpha=alpha,
        bound=bound,
        initial_ratio=float(q[0]),
        tail_ratio=float(q[-1]),
        tail_distance=float(abs(q[-1] - alpha)),
        max_ratio=float(q[interior].max()),
        # X/Y^2 < bound  <=>  xy < n - 1
        strict_bound_held=bool(np.all(traj.gap_upper[interior] > 0)),
        tail_xy_gap=float(traj.gap_lower[-1]),
        xy_bounds_held=bool(np.all(traj.gap_upper[interior] > 0) and np.all(traj.gap_lower[interior] > 0)),
        x_monotone=bool(np.all(np.diff(traj.x) < 0)),
        y_monotone=bool(np.all(np.diff(traj.y) > 0)),
        derivative_rel_error=rel,
        final_x=float(traj.x[-1]),
        final_s=float(traj.s[-1]),
    )
