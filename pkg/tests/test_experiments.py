from __future__ import annotations

import numpy as np
import pytest

from isosoliton.experiments import (
    RejectionExhausted,
    check_inequality,
    curated_graphs,
    flow_static_consistency,
    graph_from_modes,
    random_graph,
    rigidity_probe,
    translated_circle,
    translated_circle_sample,
)
from isosoliton.profile import build_profile, graph_area, graph_functional, graph_volume
from isosoliton.warp_core import make_euclidean


def test_amplitude_zero_is_level_set(cigar):
    s = random_graph(cigar, 5, amplitude=0.0)
    assert s.oscillation == 0.0
    assert abs(s.functional.deficit) <= 1e-9


def test_cigar_seed1_positive_deficit(cigar):
    s = random_graph(cigar, 1, max_mode=4, amplitude=0.1)
    assert s.functional.deficit > 0
    prof = build_profile(cigar)
    assert s.functional.deficit == pytest.approx(graph_area(cigar, s.rho) - prof.xi(graph_volume(cigar, s.rho)), abs=1e-12)


def test_determinism(cigar):
    a, b = random_graph(cigar, 11), random_graph(cigar, 11)
    assert np.array_equal(a.rho, b.rho) and a.coefficients == b.coefficients
    assert a.functional == b.functional
    assert not np.array_equal(a.rho, random_graph(cigar, 12).rho)


def test_k_squared_decay_and_axisymmetry(cigar, bryant3):
    s = random_graph(cigar, 3, max_mode=6, amplitude=0.1)
    for k, a, _ in s.coefficients[1:]:
        assert abs(a) <= 0.1 / k**2
    s3 = random_graph(bryant3, 3, max_mode=6, amplitude=0.1, nodes=129)
    assert all(b == 0.0 for _, _, b in s3.coefficients[1:])


def test_rejection_exhausted():
    tiny = make_euclidean(2, r_max=1.05)
    with pytest.raises(RejectionExhausted):
        random_graph(tiny, 1, max_mode=1, amplitude=5.0, r_bar=1.0)


def test_rejection_records_tries():
    m = make_euclidean(2, r_max=1.1)
    s = random_graph(m, 4, max_mode=1, amplitude=0.2, r_bar=1.0)
    assert s.tries >= 1 and s.rho.max() < 1.1


def test_check_inequality_cigar(cigar):
    rep = check_inequality(cigar, 100)
    assert rep.violations == 0 and rep.min_deficit >= -1e-9
    assert rep.samples == 100 + len(curated_graphs(cigar))
    assert len(rep.entries) == rep.samples
    assert {"seed", "area", "volume", "deficit"} <= set(rep.entries[0])
    assert [e["seed"] for e in rep.entries[:100]] == list(range(1, 101))


def test_check_inequality_bryant3(bryant3):
    rep = check_inequality(bryant3, 100)
    assert rep.violations == 0 and rep.passed


def test_equality_only_at_level_sets(cigar, bryant3):
    for model in (cigar, bryant3):
        rep = check_inequality(model, 30)
        assert rep.equality_cases
        for case in rep.equality_cases:
            assert case["oscillation"] <= 1e-9
            assert case["label"].startswith("level")


def test_level_sets_flagged_as_equality(cigar):
    levels = [s for s in curated_graphs(cigar) if s.label.startswith("level")]
    assert len(levels) == 3
    for s in levels:
        assert s.oscillation == 0.0 and abs(s.functional.deficit) <= 1e-9


def test_rigidity_probe(cigar):
    s = graph_from_modes(cigar, [(2, 0.1, 0.0)])
    assert rigidity_probe(cigar, s) > 0
    assert rigidity_probe(cigar, graph_from_modes(cigar, [])) is None


def test_rigidity_probe_positive_for_large_oscillation(cigar, bryant3):
    for model in (cigar, bryant3):
        for seed in range(1, 21):
            s = random_graph(model, seed, amplitude=0.2)
            if s.oscillation >= 0.05:
                assert rigidity_probe(model, s) > 0


def test_translated_circle(euclid2):
    rho = translated_circle(1.0, 0.3, 1024)
    # the polar graph really is the shifted circle
    th = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
    x, y = rho * np.cos(th) - 0.3, rho * np.sin(th)
    assert np.allclose(np.hypot(x, y), 1.0, atol=1e-14)
    s = translated_circle_sample(euclid2)
    assert s.oscillation > 0.5
    assert abs(s.functional.deficit) <= 1e-9
    assert abs(rigidity_probe(euclid2, s)) <= 1e-8
    with pytest.raises(ValueError):
        translated_circle(1.0, 1.0)


def test_flat_equality_is_not_rigid_but_cigar_is(euclid2, cigar):
    # the same off-centre circle shape sits strictly above the cigar profile
    rho = translated_circle(1.0, 0.3, 1024)
    assert translated_circle_sample(euclid2).functional.deficit == pytest.approx(0.0, abs=1e-9)
    assert graph_functional(cigar, rho, build_profile(cigar)).deficit > 1e-3


def test_flow_static_consistency_small(cigar):
    out = flow_static_consistency(cigar, [3], nodes=64)
    assert out[0].rel_error <= 1e-3 and out[0].steps > 0
