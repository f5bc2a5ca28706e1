"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line."""

from __future__ import annotations

import hashlib
import time

import numpy as np
import pytest

from isosoliton.bryant_builder import (
    integrate_unstable,
    reconstruct_metric,
    reconstruction_columns,
    saddle_linearization,
    vector_field,
    verify_ratio_limit,
)
from isosoliton.cli import main as cli_main
from isosoliton.experiments import (
    check_inequality,
    curated_graphs,
    flow_static_consistency,
    translated_circle_sample,
)
from isosoliton.flow_engine import fit_decay_rate, graph_state, run
from isosoliton.profile import build_profile
from isosoliton.warp_core import check_condition, condition_q, make_cigar, make_euclidean, soliton_residual

from conftest import bryant_trajectory


def _report(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_01_cigar_soliton_identity(capsys):
    t0 = time.perf_counter()
    model = make_cigar(6.0)
    res = soliton_residual(model, 2048)
    elapsed = time.perf_counter() - t0
    ok = res.max_abs <= 1e-10 and elapsed < 1.0 and res.grid.size >= 2046
    _report(capsys, 1, ok, f"max |Ric + Hess f| = {res.max_abs:.2e} (<= 1e-10), {elapsed * 1e3:.1f} ms (< 1 s)")


def test_criterion_02_cigar_condition(capsys):
    rep = check_condition(make_cigar(), 1.0, 2048)
    q = rep.q_values
    ok = bool(np.all(q > 0) and np.all(q <= 1) and abs(condition_q(make_cigar(), 0.0) - 1) <= 1e-12
              and np.all(np.diff(q) < 0))
    _report(capsys, 2, ok, f"Q in [{q.min():.3e}, {q.max():.15f}], Q(0) - 1 = {q[0] - 1:.1e}, "
                           f"strictly decreasing: {bool(np.all(np.diff(q) < 0))}")


def test_criterion_03_fixed_points_and_saddle(capsys):
    worst, saddles = 0.0, True
    for n in (3, 4, 5, 6):
        for x, y in ((1.0, n - 1.0), (-1.0, -(n - 1.0))):
            worst = max(worst, *map(abs, vector_field(n, x, y)))
        vals, _ = saddle_linearization(n)
        saddles &= bool(np.sum(vals > 0) == 1 and np.sum(vals < 0) == 1)
    ok = worst <= 1e-14 and saddles
    _report(capsys, 3, ok, f"max |F| at fixed points = {worst:.1e} (<= 1e-14), one +/one - eigenvalue: {saddles}")


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_criterion_04_bryant_lemmas(capsys, n):
    t0 = time.perf_counter()
    traj = integrate_unstable(n)
    rep = verify_ratio_limit(traj)
    elapsed = time.perf_counter() - t0
    interior = traj.s > 0
    a = bool(np.all(traj.gap_upper[interior] > 0) and np.all(traj.gap_lower[interior] > 0))
    b = abs(rep.tail_xy_gap) <= 1e-3
    c = rep.tail_distance <= 5e-3
    d = rep.strict_bound_held
    e = rep.derivative_rel_error <= 1e-2
    ok = traj.x[-1] <= 1e-4 and a and b and c and d and e and elapsed < 10
    _report(
        capsys, 4, ok,
        f"n={n}: x_end={traj.x[-1]:.2e} (a) {a} (b) |xy-(n-2)|={abs(rep.tail_xy_gap):.1e} "
        f"(c) |X/Y^2-alpha|={rep.tail_distance:.1e} (d) {d} (e) rel={rep.derivative_rel_error:.1e}; "
        f"{elapsed:.2f} s (< 10 s)",
    )


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_criterion_05_bryant_reconstruction(capsys, n):
    traj = bryant_trajectory(n)
    r, phi, dphi, fprime, d2phi = reconstruction_columns(traj)
    model = reconstruct_metric(traj)
    res = soliton_residual(model)
    q = condition_q(model, r[r >= model.r_lo])
    ok = bool(phi[0] <= 1e-4 and abs(dphi[0] - 1) <= 1e-4 and np.all(d2phi < 0)
              and res.max_abs <= 1e-5 and np.all((q > 0) & (q < 1)))
    _report(capsys, 5, ok,
            f"n={n}: phi(inner)={phi[0]:.1e} |phi'-1|={abs(dphi[0] - 1):.1e} max phi''={d2phi.max():.1e} "
            f"residual={res.max_abs:.1e} (<= 1e-5) Q in ({q.min():.1e}, {q.max():.6f})")


def test_criterion_06_profile_oracles(capsys):
    pe = build_profile(make_euclidean(2))
    v = np.linspace(0, pe.v_max, 2001)
    err_e = float(np.max(np.abs(pe.xi(v) - np.sqrt(4 * np.pi * v))))
    pc = build_profile(make_cigar())
    a = np.linspace(0, pc.v_max, 2001)
    err_c = float(np.max(np.abs(pc.F(a) - 2 * np.pi * np.sqrt(1 - np.exp(-a / np.pi)))))
    ok = err_e <= 1e-6 and err_c <= 1e-6
    _report(capsys, 6, ok, f"Euclidean |xi - sqrt(4 pi v)| = {err_e:.1e}, cigar |F - closed form| = {err_c:.1e} (<= 1e-6)")


def test_criterion_07_flow_conservation(capsys):
    model = make_cigar()
    t0 = time.perf_counter()
    final, diags = run(graph_state(model, lambda t: 1 + 0.1 * np.cos(2 * t), 256))
    elapsed = time.perf_counter() - t0
    vol = np.array([d.volume for d in diags])
    area = np.array([d.area for d in diags])
    drift = float(np.max(np.abs(vol - vol[0])) / vol[0])
    worst_rise = float(np.max(np.diff(area)))
    slope = fit_decay_rate(diags, 0.5)
    ok = drift <= 1e-4 and worst_rise <= 1e-10 and final.oscillation < 1e-6 and slope < 0 and elapsed < 30
    _report(capsys, 7, ok,
            f"{len(diags) - 1} steps: volume drift {drift:.1e} (<= 1e-4), max area rise {worst_rise:.1e} "
            f"(<= 1e-10), final osc {final.oscillation:.1e}, log-osc slope {slope:.2f} (< 0), {elapsed:.1f} s (< 30 s)")


def test_criterion_08_flow_realizes_profile(capsys, bryant3):
    cig = flow_static_consistency(make_cigar(), range(1, 11), nodes=128)
    bry = flow_static_consistency(bryant3, range(1, 11), nodes=65)
    worst_c = max(c.rel_error for c in cig)
    worst_b = max(c.rel_error for c in bry)
    ok = worst_c <= 1e-3 and worst_b <= 1e-3 and len(cig) == len(bry) == 10
    _report(capsys, 8, ok, f"max |A_final - xi(V_0)| / xi: cigar {worst_c:.1e}, bryant3 {worst_b:.1e} (<= 1e-3, 10 runs each)")


def test_criterion_09_isoperimetric_inequality(capsys, bryant3, bryant4):
    lines, ok = [], True
    for model in (make_cigar(), bryant3, bryant4):
        rep = check_inequality(model, 100, tol=1e-9, seed=1)
        levels = [s for s in curated_graphs(model) if s.label.startswith("level")]
        level_ok = all(abs(s.functional.deficit) <= 1e-9 for s in levels)
        ok &= rep.violations == 0 and level_ok
        lines.append(f"{model.name}: min deficit {rep.min_deficit:.1e}, {rep.violations} violations, level sets ok {level_ok}")
    circle = translated_circle_sample(make_euclidean(2), 1.0, 0.3)
    circle_ok = abs(circle.functional.deficit) <= 1e-9 and circle.oscillation > 0.1
    ok &= circle_ok
    lines.append(f"flat translated circle: deficit {circle.functional.deficit:.1e} at oscillation {circle.oscillation:.2f}")
    _report(capsys, 9, ok, "; ".join(lines))


def _run_all(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    commands = [
        ["cigar-verify"],
        ["bryant-build", "--dim", "3"],
        ["bryant-lemmas", "--dim", "3"],
        ["profile", "table", "--model", "bryant3", "--r-max", "6"],
        ["profile", "eval", "--model", "cigar", "--v", "1.5", "--out", "eval.json"],
        ["flow", "--model", "cigar", "--init", "1 + 0.1 cos(2θ)", "--nodes", "48", "--diag-out", "flow.csv"],
        ["isocheck", "--model", "cigar", "--samples", "5", "--seed", "7", "--report", "iso.json"],
    ]
    codes = [cli_main(c) for c in commands]
    digests = {
        str(p.relative_to(workdir)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(workdir.rglob("*")) if p.is_file()
    }
    return codes, digests


def test_criterion_10_determinism(capsys, tmp_path, monkeypatch):
    runs = []
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        runs.append(_run_all(tmp_path / name, monkeypatch))
    (codes_a, a), (codes_b, b) = runs
    same = a == b
    ok = same and codes_a == codes_b == [0] * len(codes_a) and len(a) > 10
    _report(capsys, 10, ok, f"{len(a)} artifacts from {len(codes_a)} commands, byte-identical across runs: {same}")
