import math

import numpy as np
import pytest

from cstagnav.cstag import FEATURE_DIM, SLOT, build_frame_graph
from cstagnav.errors import InvariantViolation, LayoutMismatch, NoCandidates
from cstagnav.model import (
    Baseline,
    CostModel,
    Cue,
    argmin_node,
    baseline_predict,
    cue_of,
    node_costs,
    predict,
    spatial_cost,
    temporal_cost,
)

from conftest import cats_for, nodes_of
from oracles import dot_oracle

W, H = 64, 48


def _graph(blocks, ground=None):
    cats = cats_for(amb=tuple(b[0] for b in blocks))
    return build_frame_graph(nodes_of(blocks, cats, W, H, ground), W, H, 0)


def _model(rng, lam=0.3):
    return CostModel(rng.normal(size=FEATURE_DIM), rng.normal(size=FEATURE_DIM), lam)


THREE = [(2, 4, 4, 7, 7, (200, 0, 0)), (3, 28, 20, 7, 7, (0, 200, 0)), (4, 50, 34, 7, 7, (0, 0, 200))]


def test_costs_match_dot_products(rng):
    g = _graph(THREE)
    for _ in range(20):
        m = _model(rng, float(rng.uniform()))
        deltas = {i: rng.normal(size=FEATURE_DIM) for i in (0, 2)}
        costs = node_costs(m, g, deltas)
        for i, (c_sp, c_t, c) in costs.items():
            assert c_sp == pytest.approx(dot_oracle(m.w_sp, g.features[i]), abs=1e-12)
            ref_t = dot_oracle(m.w_T, deltas[i]) if i in deltas else 0.0
            assert c_t == pytest.approx(ref_t, abs=1e-12)
            assert c == pytest.approx(m.lam * c_sp + (1 - m.lam) * c_t, abs=1e-12)


def test_zero_weights_give_zero_cost():
    m = CostModel(np.zeros(16), np.zeros(16))
    assert spatial_cost(m, np.ones(16)) == 0.0
    assert temporal_cost(m, np.ones(16)) == 0.0
    assert temporal_cost(m, None) == 0.0


def test_bias_only_weights():
    w = np.zeros(16)
    w[SLOT["bias"]] = 2.5
    assert spatial_cost(CostModel(w, np.zeros(16)), _graph(THREE).features[1]) == 2.5


def test_lambda_one_ignores_temporal(rng):
    g = _graph(THREE)
    m = _model(rng, 1.0)
    a = predict(m, g, {})
    b = predict(m, g, {i: rng.normal(size=16) * 100 for i in range(3)})
    assert a.chosen_node == b.chosen_node


def test_lambda_zero_ignores_spatial(rng):
    g = _graph(THREE)
    w_T = np.zeros(16)
    w_T[SLOT["cam_dist_n"]] = 1.0
    m = CostModel(rng.normal(size=16) * 100, w_T, 0.0)
    d = {i: np.zeros(16) for i in range(3)}
    d[1][SLOT["cam_dist_n"]] = -0.3
    assert predict(m, g, d).chosen_node == 1


def test_argmin_matches_linear_scan(rng):
    g = _graph(THREE)
    for _ in range(50):
        m = _model(rng, float(rng.uniform()))
        p = predict(m, g, {})
        totals = [m.lam * dot_oracle(m.w_sp, g.features[i]) for i in range(3)]
        assert p.chosen_node == int(np.argmin(totals))


def test_tie_prefers_farther_then_lower_id():
    g = _graph(THREE)
    d = [math.dist(u.centroid, (g.camera.x, g.camera.y)) for u in g.nodes]
    assert argmin_node(g, {0: 1.0, 1: 1.0, 2: 1.0}) == int(np.argmax(d))
    assert argmin_node(g, {0: 1.0, 1: 0.5, 2: 1.0}) == 1


@pytest.mark.parametrize("theta,cue", [
    (10, Cue.RIGHT), (44.9, Cue.RIGHT), (45, Cue.SLIGHT_RIGHT), (74.9, Cue.SLIGHT_RIGHT),
    (75, Cue.STRAIGHT), (90, Cue.STRAIGHT), (105, Cue.STRAIGHT), (105.1, Cue.SLIGHT_LEFT),
    (135, Cue.SLIGHT_LEFT), (135.1, Cue.LEFT), (179, Cue.LEFT),
])
def test_cue_buckets(theta, cue):
    assert cue_of(theta) is cue


def test_prediction_carries_angle_and_cue(rng):
    g = _graph(THREE)
    p = predict(_model(rng), g, {})
    u = g.nodes[p.chosen_node]
    cx, cy = u.centroid
    ref = math.degrees(math.atan2(g.camera.y - cy, cx - g.camera.x))
    assert p.theta == pytest.approx(ref, abs=1e-12)
    assert p.cue is cue_of(ref)
    assert set(p.per_node_costs) == {0, 1, 2}


def test_no_candidates(rng):
    g = build_frame_graph([], W, H, 0)
    with pytest.raises(NoCandidates):
        predict(_model(rng), g, {})
    with pytest.raises(NoCandidates):
        baseline_predict(Baseline.RANDOM, g, {}, rng)


def test_layout_mismatch(rng):
    m = _model(rng)
    m.layout_tag = "other"
    with pytest.raises(LayoutMismatch):
        predict(m, _graph(THREE), {})


def test_model_invariants():
    with pytest.raises(InvariantViolation):
        CostModel(np.zeros(15), np.zeros(16))
    with pytest.raises(InvariantViolation):
        CostModel(np.zeros(16), np.zeros(16), lam=1.5)
    with pytest.raises(InvariantViolation):
        CostModel(np.full(16, np.nan), np.zeros(16))


def test_affine_invariance(rng):
    # scaling both weight vectors by a positive constant, or adding a constant
    # to the bias weight (every node has bias 1, no temporal bias delta), keeps the argmin
    g = _graph(THREE)
    for _ in range(30):
        m = _model(rng, float(rng.uniform()))
        d = {i: rng.normal(size=16) for i in range(3)}
        for v in d.values():
            v[15] = 0.0
        base = predict(m, g, d).chosen_node
        s = float(rng.uniform(0.1, 10))
        assert predict(CostModel(m.w_sp * s, m.w_T * s, m.lam), g, d).chosen_node == base
        w = m.w_sp.copy()
        w[SLOT["bias"]] += float(rng.normal() * 5)
        assert predict(CostModel(w, m.w_T, m.lam), g, d).chosen_node == base


def test_max_distance_baseline(rng):
    g = _graph(THREE)
    d = [math.dist(u.centroid, (g.camera.x, g.camera.y)) for u in g.nodes]
    p = baseline_predict(Baseline.MAX_DISTANCE, g, {}, rng)
    assert p.chosen_node == int(np.argmax(d)) and not p.fallback


def test_max_temporal_skips_approaching(rng):
    g = _graph(THREE)
    d = [math.dist(u.centroid, (g.camera.x, g.camera.y)) for u in g.nodes]
    far = int(np.argmax(d))
    deltas = {i: np.zeros(16) for i in range(3)}
    deltas[far][SLOT["cam_dist_n"]] = -0.1
    p = baseline_predict(Baseline.MAX_TEMPORAL, g, deltas, rng)
    rest = [i for i in range(3) if i != far]
    assert p.chosen_node == max(rest, key=lambda i: d[i])


def test_temporal_baseline_ground_fallback(rng):
    cats = cats_for(amb=(2, 3))
    nodes = nodes_of([(2, 4, 4, 7, 7, (200, 0, 0)), (3, 40, 4, 7, 7, (0, 200, 0))], cats, W, H, ground=30)
    g = build_frame_graph(nodes, W, H, 0)
    ground = [u.node_id for u in g.nodes if u.category.value == "ground"]
    deltas = {u.node_id: np.full(16, -0.1) for u in g.nodes}
    for kind in (Baseline.MAX_TEMPORAL, Baseline.RANDOM_TEMPORAL):
        p = baseline_predict(kind, g, deltas, rng)
        assert p.fallback and p.chosen_node in ground


def test_random_baseline_seeded_and_uniform():
    g = _graph(THREE)
    picks = [baseline_predict(Baseline.RANDOM, g, {}, np.random.default_rng(s)).chosen_node for s in range(600)]
    again = [baseline_predict(Baseline.RANDOM, g, {}, np.random.default_rng(s)).chosen_node for s in range(600)]
    assert picks == again
    counts = np.bincount(picks, minlength=3)
    # each node drawn with p = 1/3: 600 draws, 5 sigma band
    assert np.all(np.abs(counts - 200) < 5 * math.sqrt(600 * (1 / 3) * (2 / 3)))
