"""Random and curated checks of Area >= xi(Vol) for radial graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow_engine import MARGIN, FlowParams, GraphState, run
from .profile import GraphFunctional, IsoProfile, build_profile, fiber_grid, graph_functional
from .warp_core import WarpModel

DEFICIT_TOL = 1e-9
EQ_TOL = 1e-9
DEFAULT_NODES = 1024
MAX_TRIES = 100


class RejectionExhausted(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GraphSample:
    seed: int | None
    label: str
    coefficients: tuple  # ((k, a_k, b_k), ...) plus the mean radius first as (0, r_bar, 0)
    rho: np.ndarray
    functional: GraphFunctional
    tries: int = 1

    @property
    def oscillation(self) -> float:
        return float(self.rho.max() - self.rho.min())

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "label": self.label,
            "area": self.functional.area,
            "volume": self.functional.volume,
            "deficit": self.functional.deficit,
            "oscillation": self.oscillation,
            "tries": self.tries,
        }


def default_center(model: WarpModel) -> float:
    """Mean radius for sampled graphs: 1 when comfortably inside, else mid-domain."""
    if model.r_lo + 0.5 <= 1.0 <= model.r_hi - 0.5:
        return 1.0
    return 0.5 * (model.r_lo + min(model.r_hi, model.r_lo + 4.0))


def working_profile(model: WarpModel, r_max: float | None = None) -> IsoProfile:
    top = min(model.r_hi, model.r_lo + 10.0) if r_max is None else r_max
    return build_profile(model, 2048, r_max=top)


def _cosine_graph(theta, r_bar, modes):
    rho = np.full_like(theta, r_bar)
    for k, a, b in modes:
        rho += a * np.cos(k * theta + b)
    return rho


def _in_domain(model: WarpModel, rho, margin: float) -> bool:
    return bool(rho.min() >= model.r_lo + margin and rho.max() <= model.r_hi - margin)


def graph_from_modes(model, modes, r_bar=None, nodes=DEFAULT_NODES, profile=None, label="", seed=None):
    r_bar = default_center(model) if r_bar is None else float(r_bar)
    profile = profile or working_profile(model)
    rho = _cosine_graph(fiber_grid(model.n, nodes).theta, r_bar, modes)
    if not _in_domain(model, rho, MARGIN):
        raise ValueError(f"graph {label!r} leaves the domain of {model.name}")
    coeffs = ((0, r_bar, 0.0),) + tuple((int(k), float(a), float(b)) for k, a, b in modes)
    return GraphSample(seed, label, coeffs, rho, graph_functional(model, rho, profile))


def random_graph(
    model: WarpModel,
    seed: int,
    max_mode: int = 4,
    amplitude: float = 0.1,
    r_bar: float | None = None,
    nodes: int = DEFAULT_NODES,
    profile: IsoProfile | None = None,
) -> GraphSample:
    """rho = r_bar + sum_k a_k cos(k theta + b_k) with a_k ~ amplitude * U(-1, 1) / k^2.

    Phases b_k are drawn for n = 2 only; axisymmetric graphs (n >= 3) need pure
    cosines to stay regular at the poles.  Out-of-domain draws are rejected.
    """
    r_bar = default_center(model) if r_bar is None else float(r_bar)
    rng = np.random.default_rng(seed)
    theta = fiber_grid(model.n, nodes).theta
    k = np.arange(1, max_mode + 1)
    for tries in range(1, MAX_TRIES + 1):
        a = amplitude * rng.uniform(-1.0, 1.0, size=max_mode) / k**2
        b = rng.uniform(0.0, 2 * np.pi, size=max_mode) if model.n == 2 else np.zeros(max_mode)
        modes = list(zip(k.tolist(), a.tolist(), b.tolist()))
        rho = _cosine_graph(theta, r_bar, modes)
        if _in_domain(model, rho, MARGIN):
            break
    else:
        raise RejectionExhausted(f"no in-domain graph after {MAX_TRIES} draws (seed {seed})")
    profile = profile or working_profile(model)
    coeffs = ((0, r_bar, 0.0),) + tuple((int(kk), float(aa), float(bb)) for kk, aa, bb in modes)
    return GraphSample(seed, "random", coeffs, rho, graph_functional(model, rho, profile), tries)


def curated_graphs(model: WarpModel, nodes: int = DEFAULT_NODES, profile=None) -> list[GraphSample]:
    """Level sets, single-mode bumps and low-amplitude high-frequency wiggles."""
    profile = profile or working_profile(model)
    c = default_center(model)
    out = []
    for r in (0.5 * c, c, 1.5 * c):
        if model.r_lo + 0.2 < r < model.r_hi - 0.2:
            out.append(graph_from_modes(model, [], r, nodes, profile, f"level r={r:g}"))
    for k in (1, 2, 3, 5):
        for amp in (0.02, 0.1):
            out.append(graph_from_modes(model, [(k, amp, 0.0)], c, nodes, profile, f"mode k={k} a={amp:g}"))
    for k in (16, 40, 96):
        out.append(graph_from_modes(model, [(k, 1e-3, 0.0)], c, nodes, profile, f"wiggle k={k}"))
    return out


@dataclass
class InequalityReport:
    model_ref: str
    samples: int
    min_deficit: float
    violations: int
    tol: float
    equality_cases: list = field(default_factory=list)
    entries: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {
            "model": self.model_ref,
            "samples": self.samples,
            "min_deficit": self.min_deficit,
            "violations": self.violations,
            "tol": self.tol,
            "passed": self.passed,
            "equality_cases": self.equality_cases,
            "entries": self.entries,
        }


def check_inequality(
    model: WarpModel,
    n_samples: int = 100,
    tol: float = DEFICIT_TOL,
    seed: int = 1,
    eq_tol: float = EQ_TOL,
    nodes: int = DEFAULT_NODES,
    max_mode: int = 4,
    amplitude: float = 0.1,
    curated: bool = True,
) -> InequalityReport:
    """Deficits of ``n_samples`` random graphs (seeds seed, seed+1, ...) plus the curated set."""
    profile = working_profile(model)
    samples = [random_graph(model, seed + i, max_mode, amplitude, nodes=nodes, profile=profile)
               for i in range(n_samples)]
    if curated:
        samples += curated_graphs(model, nodes, profile)
    deficits = np.array([s.functional.deficit for s in samples])
    eq = [
        {"label": s.label, "seed": s.seed, "deficit": s.functional.deficit, "oscillation": s.oscillation}
        for s in samples if abs(s.functional.deficit) <= eq_tol
    ]
    return InequalityReport(
        model_ref=model.name,
        samples=len(samples),
        min_deficit=float(deficits.min()),
        violations=int(np.sum(deficits < -tol)),
        tol=tol,
        equality_cases=eq,
        entries=[s.as_dict() for s in samples],
    )


def rigidity_probe(model: WarpModel, sample: GraphSample) -> float | None:
    """deficit / oscillation^2, or None for (numerically) constant graphs."""
    osc = sample.oscillation
    if osc < 1e-12:
        return None
    return sample.functional.deficit / osc**2


def translated_circle(R: float, d: float, nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Polar graph of the Euclidean circle of radius R centred at distance d < R from the origin."""
    if not 0 <= d < R:
        raise ValueError("need 0 <= d < R")
    theta = fiber_grid(2, nodes).theta
    return d * np.cos(theta) + np.sqrt(R * R - (d * np.sin(theta)) ** 2)


def translated_circle_sample(model: WarpModel, R: float = 1.0, d: float = 0.3, nodes: int = DEFAULT_NODES):
    if model.n != 2:
        raise ValueError("translated circles live in two dimensions")
    rho = translated_circle(R, d, nodes)
    profile = working_profile(model)
    return GraphSample(None, f"translated circle R={R:g} d={d:g}", ((0, R, 0.0),), rho,
                       graph_functional(model, rho, profile))


@dataclass(frozen=True)
class FlowComparison:
    seed: int
    initial_volume: float
    final_area: float
    profile_value: float
    rel_error: float
    steps: int


def flow_static_consistency(
    model: WarpModel,
    seeds,
    nodes: int,
    amplitude: float = 0.05,
    max_mode: int = 3,
    params: FlowParams | None = None,
) -> list[FlowComparison]:
    """Flow sampled graphs to a level set and compare the final area with xi(initial volume)."""
    profile = working_profile(model)
    out = []
    for seed in seeds:
        sample = random_graph(model, seed, max_mode, amplitude, nodes=nodes, profile=profile)
        final, diags = run(GraphState(model, sample.rho), params)
        target = profile.xi(diags[0].volume)
        out.append(FlowComparison(seed, diags[0].volume, diags[-1].area, target,
                                  abs(diags[-1].area - target) / target, len(diags) - 1))
    return out

