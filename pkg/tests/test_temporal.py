import numpy as np
import pytest

from cstagnav.cstag import SLOT, build_frame_graph
from cstagnav.dataset import FrameRaster
from cstagnav.errors import FrameIndexMismatch, InvariantViolation
from cstagnav.pipeline import prepare_frames
from cstagnav.regions import extract_objects
from cstagnav.temporal import (
    EntityRegistry,
    EntityTrack,
    MatchParams,
    delta_features,
    intensity_similarity,
    link_frames,
    map_match,
    similarity_f,
    color_similarity,
    energy_similarity,
)

from conftest import blocks_frame, cats_for, random_walk_frames
from oracles import bhattacharyya_oracle, hungarian_links

CATS = cats_for(amb=(2, 3, 4, 5, 6))


def _graph(blocks, t=0, width=96, height=64):
    rgb, mask = blocks_frame(blocks, width, height)
    return build_frame_graph(extract_objects(rgb, mask, CATS), width, height, t)


def _seq(block_lists, params=MatchParams()):
    reg = EntityRegistry(params)
    graphs = []
    for t, blocks in enumerate(block_lists):
        g = _graph(blocks, t)
        reg.link(g)
        graphs.append(g)
    return reg, graphs


RED = (220, 30, 30)
BLUE = (30, 30, 220)


# ---------------------------------------------------------------------------
# similarity
# ---------------------------------------------------------------------------
def test_self_similarity():
    g = _graph([(2, 10, 10, 9, 7, RED)])
    u = g.nodes[0]
    assert color_similarity(u, u) == 1.0
    assert intensity_similarity(u, u) == pytest.approx(1.0, abs=1e-12)
    assert energy_similarity(u, u) == 1.0
    assert similarity_f(u, u) == pytest.approx(1.0, abs=1e-12)


def test_disjoint_hsv_histograms():
    # black and green differ in every HSV channel bin
    h = _graph([(2, 10, 10, 8, 8, (0, 0, 0)), (3, 40, 10, 8, 8, (0, 255, 0))])
    assert intensity_similarity(h.nodes[0], h.nodes[1]) == 0.0
    # red and black share only the hue bin
    g = _graph([(2, 10, 10, 8, 8, (255, 0, 0)), (3, 40, 10, 8, 8, (0, 0, 0))])
    assert intensity_similarity(g.nodes[0], g.nodes[1]) == pytest.approx(1 / 3)


def test_intensity_matches_direct_sum(rng):
    for _ in range(20):
        blocks = [(2 + i, 5 + 30 * i, 8, 9, 9, tuple(int(c) for c in rng.integers(0, 256, 3))) for i in range(3)]
        rgb, mask = blocks_frame(blocks, 96, 64)
        arr = rgb.to_array().copy()
        arr[mask.to_array() > 0] = rng.integers(0, 256, size=(int((mask.to_array() > 0).sum()), 3))
        nodes = extract_objects(FrameRaster.from_array(arr), mask, CATS)
        for u in nodes:
            for v in nodes:
                ref = bhattacharyya_oracle(u.appearance.hsv_hist, v.appearance.hsv_hist) / 3
                assert intensity_similarity(u, v) == pytest.approx(ref, abs=1e-12)
                assert similarity_f(u, v) == pytest.approx(similarity_f(v, u), abs=1e-12)
                assert 0.0 <= similarity_f(u, v) <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# MAP matching
# ---------------------------------------------------------------------------
def test_single_candidate_probability_one():
    g = _graph([(2, 10, 10, 8, 8, RED), (3, 40, 10, 8, 8, BLUE)])
    res = map_match(g.nodes[0], [g.nodes[1]], sim_floor=0.0)
    assert res.probs.tolist() == [1.0] and res.best == 0


def test_two_candidate_softmax():
    g = _graph([(2, 10, 10, 8, 8, RED), (3, 40, 10, 8, 8, BLUE), (4, 70, 10, 8, 8, RED)])
    res = map_match(g.nodes[0], g.nodes[1:], scores=[0.9, 0.3])
    assert res.probs == pytest.approx([0.6457, 0.3543], abs=1e-4)
    assert res.probs.sum() == pytest.approx(1.0, abs=1e-9)
    assert res.best == 0


def test_sim_floor():
    g = _graph([(2, 10, 10, 8, 8, RED), (3, 40, 10, 8, 8, BLUE)])
    assert map_match(g.nodes[0], [g.nodes[1]], scores=[0.4]).best is None
    assert map_match(g.nodes[0], []).best is None


def test_ties_prefer_nearer_candidate():
    g = _graph([(2, 40, 10, 8, 8, RED), (3, 5, 10, 8, 8, RED), (4, 60, 10, 8, 8, RED)])
    res = map_match(g.nodes[0], g.nodes[1:], scores=[0.8, 0.8])
    assert res.best == 1


def test_match_params_invariants():
    for kw in ({"tau": 0}, {"persist_window": -1}, {"sim_floor": 1.5}):
        with pytest.raises(InvariantViolation):
            MatchParams(**kw)


# ---------------------------------------------------------------------------
# linking
# ---------------------------------------------------------------------------
def test_translation_keeps_entity():
    reg, gs = _seq([[(2, 10, 10, 8, 8, RED)], [(2, 15, 10, 8, 8, RED)]])
    assert gs[0].nodes[0].entity_id == gs[1].nodes[0].entity_id
    assert len(reg.edges) == 1 and reg.edges[0].similarity == pytest.approx(1.0)


def test_teleport_starts_new_entity():
    reg, gs = _seq([[(2, 10, 10, 8, 8, RED)], [(2, 70, 10, 8, 8, RED)]])
    assert gs[0].nodes[0].entity_id != gs[1].nodes[0].entity_id
    assert reg.edges == []


def test_link_frames_api():
    g0 = _graph([(2, 10, 10, 8, 8, RED)], 0)
    g1 = _graph([(2, 12, 10, 8, 8, RED)], 1)
    g3 = _graph([(2, 12, 10, 8, 8, RED)], 3)
    reg = EntityRegistry()
    edges = link_frames(g0, g1, MatchParams(), reg)
    assert [(e.from_frame, e.to_frame) for e in edges] == [(0, 1)]
    with pytest.raises(FrameIndexMismatch):
        link_frames(g1, g3, MatchParams(), reg)


def test_persistence_window():
    present = [(2, 10, 10, 8, 8, RED)]
    other = [(3, 60, 40, 8, 8, BLUE)]
    # gone for 3 frames: the entity persists and re-links
    _, gs = _seq([present, other, other, other, present])
    assert gs[4].nodes[0].entity_id == gs[0].nodes[0].entity_id
    # gone for 7 frames (> persist_window 5): a new entity
    _, gs = _seq([present] + [other] * 7 + [present])
    assert gs[8].nodes[0].entity_id != gs[0].nodes[0].entity_id


def test_greedy_conflict_resolution():
    # two identical red blocks both fit the single previous block; the more similar wins
    reg, gs = _seq([[(2, 30, 10, 8, 8, RED)], [(2, 33, 10, 8, 8, RED), (3, 27, 10, 8, 9, RED)]])
    ids = [u.entity_id for u in gs[1].nodes]
    assert ids.count(gs[0].nodes[0].entity_id) == 1
    assert len(reg.edges) == 1


def _pairs(seed):
    rng = np.random.default_rng(seed)
    frames, cats, _ = random_walk_frames(rng, n_blobs=int(rng.integers(3, 7)), n_frames=2, step=16)
    gs = [build_frame_graph(extract_objects(f, m, cats), 160, 120, t) for t, (f, m) in enumerate(frames)]
    return gs


def test_invariants_on_random_pairs():
    for seed in range(25):
        g0, g1 = _pairs(seed)
        counts = []
        for tau in (40.0, 20.0, 10.0, 5.0, 1.0):
            for u in g0.nodes + g1.nodes:
                u.entity_id = None
            reg = EntityRegistry(MatchParams(tau=tau))
            reg.link(g0)
            edges = reg.link(g1)
            froms = [e.from_node for e in edges]
            tos = [e.to_node for e in edges]
            assert len(set(froms)) == len(froms) and len(set(tos)) == len(tos)
            counts.append(len(edges))
        assert counts == sorted(counts, reverse=True)


def test_linking_deterministic(rng):
    frames, cats, _ = random_walk_frames(rng, 5, 12)
    a = prepare_frames(frames, cats)
    b = prepare_frames(frames, cats)
    assert a.temporal_edges == b.temporal_edges
    assert [[u.entity_id for u in g.nodes] for g in a.graphs] == [[u.entity_id for u in g.nodes] for g in b.graphs]


def test_agrees_with_hungarian_on_random_walk(rng):
    frames, cats, _ = random_walk_frames(rng, 5, 30)
    prep = prepare_frames(frames, cats)
    p = MatchParams()
    agree = total = 0
    for g0, g1 in zip(prep.graphs, prep.graphs[1:]):
        ref = hungarian_links(g0.nodes, g1.nodes, similarity_f, p.tau, p.sim_floor)
        got = {e.to_node: e.from_node for e in prep.temporal_edges if e.to_frame == g1.frame_index}
        for v in g1.nodes:
            total += 1
            agree += got.get(v.node_id) == ref.get(v.node_id)
    assert agree / total >= 0.95


# ---------------------------------------------------------------------------
# deltas
# ---------------------------------------------------------------------------
def test_static_delta_is_zero():
    _, gs = _seq([[(2, 10, 10, 8, 8, RED)]] * 4)
    feats = {g.frame_index: g.features for g in gs}
    tr = EntityTrack(0, gs[0].nodes[0].category, {t: 0 for t in range(4)})
    d = delta_features(tr, 3, 2, feats)
    assert np.array_equal(d, np.zeros(16))


def test_delta_arithmetic():
    tr = EntityTrack(0, cats_for(amb=(2,))[2], {0: 0, 5: 0})
    f0 = np.zeros(16)
    f5 = np.zeros(16)
    f0[SLOT["cam_dist_n"]] = 0.6
    f5[SLOT["cam_dist_n"]] = 0.4
    d = delta_features(tr, 5, 5, {0: {0: f0}, 5: {0: f5}})
    assert d[SLOT["cam_dist_n"]] == pytest.approx(-0.2, abs=1e-15)


def test_delta_span_rule():
    tr = EntityTrack(0, cats_for(amb=(2,))[2], {3: 0, 4: 0})
    feats = {3: {0: np.ones(16)}, 4: {0: np.ones(16)}}
    assert delta_features(tr, 4, 2, feats) is None
    assert delta_features(tr, 4, 1, feats) is not None
    with pytest.raises(InvariantViolation):
        delta_features(tr, 4, 0, feats)


def test_delta_uses_latest_node_before_gap():
    tr = EntityTrack(0, cats_for(amb=(2,))[2], {0: 0, 1: 0, 4: 0})
    feats = {0: {0: np.zeros(16)}, 1: {0: np.full(16, 0.5)}, 4: {0: np.ones(16)}}
    assert np.allclose(delta_features(tr, 4, 2, feats), 0.5)


def test_category_and_bias_deltas_vanish(rng):
    frames, cats, _ = random_walk_frames(rng, 4, 15)
    prep = prepare_frames(frames, cats)
    for frame in prep.deltas(5):
        for d in frame.values():
            if d is not None:
                assert np.all(d[12:] == 0)
