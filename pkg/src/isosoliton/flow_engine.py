"""Volume-preserving flow of radial graphs: x_t = ((n-1) phi' - u H) nu.

A graph r = rho(theta) moves by rho_t = ((n-1) phi'(rho) - u H) v.  Spatial
derivatives are second-order central differences: periodic for n = 2, and
even reflection through the poles for the axisymmetric n >= 3 case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._io import csv_text
from .profile import FiberGrid, fiber_grid, graph_area, graph_volume
from .warp_core import EPS_PHI, DomainError, WarpModel

MARGIN = 1e-6
DIAG_HEADER = ("time", "area", "volume", "oscillation", "max_speed")


class FlowEscapeError(DomainError):
    """The graph left (r_lo + margin, r_hi - margin)."""


class FlowBlowup(RuntimeError):
    pass


class FlowNotConverged(RuntimeError):
    def __init__(self, message: str, state: "GraphState", diagnostics: list):
        super().__init__(message)
        self.state = state
        self.diagnostics = diagnostics


@dataclass(frozen=True, eq=False)
class GraphState:
    model: WarpModel
    rho: np.ndarray
    time: float = 0.0
    margin: float = MARGIN

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        if rho.ndim != 1:
            raise ValueError("rho must be 1-D")
        check_inside(self.model, rho, self.margin)

    @property
    def model_ref(self) -> str:
        return self.model.name

    @property
    def grid(self) -> FiberGrid:
        return fiber_grid(self.model.n, self.rho.size)

    @property
    def oscillation(self) -> float:
        return float(self.rho.max() - self.rho.min())


def check_inside(model: WarpModel, rho: np.ndarray, margin: float = MARGIN) -> None:
    if not np.all(np.isfinite(rho)):
        raise FlowBlowup("non-finite radius in graph")
    lo, hi = model.r_lo + margin, model.r_hi - margin
    if rho.min() <= lo or rho.max() >= hi:
        raise FlowEscapeError(
            f"graph range [{rho.min():.9g}, {rho.max():.9g}] leaves ({lo:.9g}, {hi:.9g})"
        )


def graph_state(model: WarpModel, fn, nodes: int, margin: float = MARGIN) -> GraphState:
    """Sample ``fn(theta)`` on the fiber grid."""
    return GraphState(model, fn(fiber_grid(model.n, nodes).theta), 0.0, margin)


def _differences(rho: np.ndarray, h: float, periodic: bool):
    if periodic:
        pad = np.concatenate([rho[-1:], rho, rho[:1]])
    else:
        # ghost nodes rho[-1] = rho[1], rho[N] = rho[N-2]
        pad = np.concatenate([rho[1:2], rho, rho[-2:-1]])
    nxt, prv = pad[2:], pad[:-2]
    d1 = (nxt - prv) / (2 * h)
    d2 = (nxt - 2 * rho + prv) / (h * h)
    return d1, d2


def _kernel(model: WarpModel, rho: np.ndarray, h: float, periodic: bool, theta: np.ndarray):
    n = model.n
    phi, dphi, _ = model.warp(rho)
    if phi.min() < EPS_PHI:
        raise DomainError("phi(rho) below epsilon_phi on the graph")
    d1, d2 = _differences(rho, h, periodic)
    g2 = (d1 / phi) ** 2
    v = np.sqrt(1.0 + g2)
    v3 = v**3
    if periodic:
        H = dphi * (1.0 + 2.0 * g2) / (phi * v3) - d2 / (phi * phi * v3)
    else:
        # cot(theta) rho_theta; at the poles its limit is rho_thetatheta
        cot_term = np.empty_like(rho)
        cot_term[1:-1] = d1[1:-1] / np.tan(theta[1:-1])
        cot_term[0], cot_term[-1] = d2[0], d2[-1]
        H = ((n - 1) * dphi / (phi * v) + g2 * dphi / (phi * v3)
             - (d2 / v3 + (n - 2) * cot_term / v) / (phi * phi))
    u = phi / v
    speed = (n - 1) * dphi - u * H
    return v, u, H, speed, phi


def geometric_quantities(state: GraphState):
    """Per-node slope factor v, support function u = phi / v and mean curvature H."""
    g = state.grid
    v, u, H, _, _ = _kernel(state.model, state.rho, g.spacing, g.periodic, g.theta)
    return v, u, H


def flow_speed(state: GraphState) -> np.ndarray:
    """Normal speed (n-1) phi'(rho) - u H."""
    g = state.grid
    return _kernel(state.model, state.rho, g.spacing, g.periodic, g.theta)[3]


def _graph_velocity(model, rho, grid):
    v, _, _, speed, phi = _kernel(model, rho, grid.spacing, grid.periodic, grid.theta)
    return speed * v, speed, phi, v


def stable_dt(state: GraphState, cfl: float = 0.2) -> float:
    """cfl * h^2 / max(1, D), D the largest coefficient of rho_thetatheta in rho_t."""
    g = state.grid
    v, _, _, _, phi = _kernel(state.model, state.rho, g.spacing, g.periodic, g.theta)
    return _dt_bound(state.model.n, phi, v, g.spacing, cfl)


def _dt_bound(n, phi, v, h, cfl):
    coef = (1.0 if n == 2 else float(n - 1)) / (phi * v**3)
    return cfl * h * h / max(1.0, float(coef.max()))


def _advance(state: GraphState, kern, dt, cfl):
    g = state.grid
    model = state.model
    v, _, _, speed, phi = kern
    bound = _dt_bound(model.n, phi, v, g.spacing, cfl)
    if dt is None:
        dt = bound
    elif not 0 < dt <= bound * (1 + 1e-12):
        raise ValueError(f"dt = {dt:.3g} outside (0, {bound:.3g}] (stability bound at cfl = {cfl})")
    half = state.rho + 0.5 * dt * (speed * v)
    check_inside(model, half, state.margin)
    k2 = _graph_velocity(model, half, g)[0]
    new = state.rho + dt * k2
    check_inside(model, new, state.margin)
    return GraphState(model, new, state.time + dt, state.margin)


def _state_kernel(state: GraphState):
    g = state.grid
    return _kernel(state.model, state.rho, g.spacing, g.periodic, g.theta)


def step(state: GraphState, dt: float | None = None, cfl: float = 0.2) -> GraphState:
    """One explicit midpoint step.  ``dt`` defaults to the stability bound."""
    return _advance(state, _state_kernel(state), dt, cfl)


@dataclass(frozen=True)
class FlowParams:
    cfl: float = 0.2
    osc_tol: float = 1e-6
    max_steps: int = 200_000
    max_time: float = math.inf

    def __post_init__(self):
        if not 0 < self.cfl <= 0.5:
            raise ValueError("cfl must lie in (0, 0.5]")
        if self.osc_tol <= 0 or self.max_steps < 0:
            raise ValueError("osc_tol must be positive and max_steps nonnegative")


@dataclass(frozen=True)
class FlowDiagnostics:
    time: float
    area: float
    volume: float
    oscillation: float
    max_speed: float

    def row(self):
        return (self.time, self.area, self.volume, self.oscillation, self.max_speed)


def diagnose(state: GraphState, speed: np.ndarray | None = None) -> FlowDiagnostics:
    if speed is None:
        speed = flow_speed(state)
    return FlowDiagnostics(
        state.time,
        graph_area(state.model, state.rho),
        graph_volume(state.model, state.rho),
        state.oscillation,
        float(np.abs(speed).max()),
    )


def run(state: GraphState, params: FlowParams | None = None):
    """Step until the oscillation drops below ``params.osc_tol``.

    Returns ``(final_state, diagnostics)``; diagnostics[0] is the initial state.
    """
    params = params or FlowParams()
    kern = _state_kernel(state)
    diags = [diagnose(state, kern[3])]
    steps = 0
    while state.oscillation >= params.osc_tol:
        if steps >= params.max_steps or state.time >= params.max_time:
            raise FlowNotConverged(
                f"flow not converged after {steps} steps (t = {state.time:.6g}); "
                f"final oscillation {state.oscillation:.3e} >= {params.osc_tol:.1e}",
                state, diags,
            )
        state = _advance(state, kern, None, params.cfl)
        kern = _state_kernel(state)
        steps += 1
        diags.append(diagnose(state, kern[3]))
    return state, diags


def fit_decay_rate(diags, fraction: float = 0.5) -> float:
    """Slope of log(oscillation) against time over the last ``fraction`` of the run."""
    t = np.array([d.time for d in diags])
    osc = np.array([d.oscillation for d in diags])
    keep = (t >= t[-1] * (1 - fraction)) & (osc > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(t[keep], np.log(osc[keep]), 1)[0])


def diagnostics_csv(diags) -> str:
    return csv_text(DIAG_HEADER, (d.row() for d in diags))


def with_rho(state: GraphState, rho) -> GraphState:
    return replace(state, rho=np.asarray(rho, dtype=float))
