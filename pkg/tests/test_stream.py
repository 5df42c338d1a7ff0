"""Geometric stream: lifting, frames, layers, pooling, probe machinery."""

import numpy as np
import pytest

import spdsheaf as s
from spdsheaf.errors import DomainError, InvalidInputError
from spdsheaf.stream import (
    LayerParams,
    PointCloud,
    canonicalize,
    geometric_graph,
    knn_edges,
    planarity_experiment,
    run_layers,
    trace_row,
    unvectorize_feature,
)
from spdsheaf.verify import random_orthogonal, random_spd


def cloud(seed=0, n=10, radius=0.9):
    rng = np.random.default_rng(seed)
    pts = rng.normal(scale=0.7, size=(n, 3))
    return PointCloud(pts, geometric_graph(pts, radius=radius))


def rotation3(rng):
    M = random_orthogonal(3, rng)
    return M if np.linalg.det(M) > 0 else -M


# ---------------------------------------------------------------------------
# lifting


def test_lift_symmetric_pair():
    pc = PointCloud([[1.0, 2.0, 3.0], [-1.0, -2.0, -3.0]], [(0, 1)])
    sigma = s.lift_coordinates(pc)
    np.testing.assert_allclose(sigma[0], sigma[1], atol=1e-12)
    assert s.erank(sigma[0]) <= 1.05


def test_lift_centroid_point():
    pc = PointCloud([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
                    [(0, 1), (0, 2)])
    sigma = s.lift_coordinates(pc)
    np.testing.assert_allclose(sigma[0], 1e-4 * np.eye(3), atol=1e-12)
    assert s.erank(sigma[0]) >= 2.99


def test_lift_translation_invariant():
    pc = cloud(1)
    sigma = s.lift_coordinates(pc)
    shifted = PointCloud(pc.points + np.array([5.0, -3.0, 11.0]), pc.edges)
    sigma2 = s.lift_coordinates(shifted)
    for v in pc.ids:
        np.testing.assert_allclose(sigma[v], sigma2[v], atol=1e-12)


# ---------------------------------------------------------------------------
# local frames


def test_frames_orthogonal_and_equivariant():
    pc = cloud(2)
    frames, flags = s.local_frame(pc)
    assert not any(flags.values())
    for M in frames.values():
        assert np.linalg.norm(M.T @ M - np.eye(3)) <= 1e-10
    rng = np.random.default_rng(3)
    R = rotation3(rng)
    rotated = PointCloud(pc.points @ R.T, pc.edges)
    frames2, _ = s.local_frame(rotated)
    for v in pc.ids:
        np.testing.assert_allclose(frames2[v], R @ frames[v], atol=1e-8)


def test_canonicalized_lift_rotation_invariant():
    pc = cloud(4)
    rng = np.random.default_rng(5)
    base = canonicalize(s.lift_coordinates(pc), s.local_frame(pc)[0])
    for _ in range(5):
        R = rotation3(rng)
        pc2 = PointCloud(pc.points @ R.T, pc.edges)
        out = canonicalize(s.lift_coordinates(pc2), s.local_frame(pc2)[0])
        for v in pc.ids:
            assert np.max(np.abs(out[v] - base[v])) <= 1e-8


def test_frames_collinear_fallback():
    pts = [[1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]]
    pc = PointCloud(pts, [(0, 1), (1, 2)])
    frames, flags = s.local_frame(pc)
    assert any(flags.values())
    for M in frames.values():
        assert np.linalg.norm(M.T @ M - np.eye(3)) <= 1e-10


# ---------------------------------------------------------------------------
# features


def test_node_features_examples():
    sigma = {0: np.eye(3)}
    np.testing.assert_allclose(s.node_features(sigma)[0], np.zeros(6), atol=1e-14)
    P = random_spd(13, np.random.default_rng(6))
    feats = s.node_features({0: P})
    assert feats[0].shape == (91,)
    np.testing.assert_allclose(unvectorize_feature(feats[0], 13), P, atol=1e-9)


# ---------------------------------------------------------------------------
# parameterizations


def test_learnable_isometry():
    np.testing.assert_allclose(s.learnable_isometry(np.eye(3)), np.eye(3), atol=1e-14)
    W = np.diag([-2.0, 3.0, 1.0])
    Q = s.learnable_isometry(W)
    np.testing.assert_allclose(np.abs(Q), np.eye(3), atol=1e-12)
    # sign-fix convention: the implied triangular factor has nonnegative diagonal
    assert np.all(np.diag(Q.T @ W) >= 0)
    rng = np.random.default_rng(7)
    for _ in range(20):
        W = rng.normal(size=(3, 3))
        Q = s.learnable_isometry(W)
        assert np.linalg.norm(Q.T @ Q - np.eye(3)) <= 1e-10
        assert np.all(np.diag(Q.T @ W) >= -1e-12)
    # rank-deficient seeds are perturbed, not fatal
    Q = s.learnable_isometry(np.zeros((3, 3)))
    assert np.linalg.norm(Q.T @ Q - np.eye(3)) <= 1e-10


def test_sheaf_learner_zero_weights_identity():
    params = LayerParams.identity(3)
    h = np.zeros(6)
    Mt, Mh = s.sheaf_learner(params, h, h)
    np.testing.assert_allclose(Mt, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(Mh, np.eye(3), atol=1e-14)


def test_sheaf_learner_independent_heads():
    rng = np.random.default_rng(8)
    params = LayerParams.random(3, rng=rng)
    h = rng.normal(size=6)
    Mt, Mh = s.sheaf_learner(params, h, h)  # same inputs, two heads
    assert np.linalg.norm(Mt - Mh) > 1e-6
    for M in (Mt, Mh):
        assert np.linalg.norm(M.T @ M - np.eye(3)) <= 1e-10
    with pytest.raises(InvalidInputError):
        s.sheaf_learner(params, np.zeros(5), np.zeros(6))


# ---------------------------------------------------------------------------
# convolution layer


def test_layer_identity_params_global_section():
    pc = cloud(9)
    P = random_spd(3, np.random.default_rng(10))
    sigma = {v: P.copy() for v in pc.ids}
    out, _ = s.spd_sheaf_layer(pc, sigma, LayerParams.identity(3))
    expected = s.tg_re_eig(P)
    for v in pc.ids:
        np.testing.assert_allclose(out[v], expected, atol=1e-9)


def test_layer_raises_erank():
    pc = cloud(11, n=6)
    rng = np.random.default_rng(12)
    sigma = canonicalize(s.lift_coordinates(pc), s.local_frame(pc)[0])
    base = trace_row(sigma, 0).mean_erank
    out, row = s.spd_sheaf_layer(pc, sigma, LayerParams.random(3, rng=rng))
    assert row.mean_erank - base >= 1.2


def test_layer_rotation_invariance():
    pc = cloud(13, n=8)
    rng = np.random.default_rng(14)
    params = [LayerParams.random(3, rng=rng)]
    base = s.geometric_descriptor(pc, params)
    for _ in range(5):
        R = rotation3(rng)
        t = rng.normal(size=3)
        pc2 = PointCloud(pc.points @ R.T + t, pc.edges)
        assert np.max(np.abs(s.geometric_descriptor(pc2, params) - base)) <= 1e-7


# ---------------------------------------------------------------------------
# pooling and traces


def test_pooled_descriptor_examples():
    sigma = {v: np.eye(3) for v in range(4)}
    np.testing.assert_allclose(s.pooled_descriptor(sigma), np.zeros(6), atol=1e-12)
    P = random_spd(3, np.random.default_rng(15))
    sigma = {v: P.copy() for v in range(4)}
    np.testing.assert_allclose(s.pooled_descriptor(sigma),
                               s.sym_to_vec(s.spd_log(P)), atol=1e-10)


def test_pooled_descriptor_permutation_invariant():
    rng = np.random.default_rng(16)
    values = [random_spd(3, rng) for _ in range(5)]
    a = s.pooled_descriptor({i: values[i] for i in range(5)})
    perm = rng.permutation(5)
    b = s.pooled_descriptor({i: values[perm[i]] for i in range(5)})
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_rank_trace_columns():
    pc = cloud(17, n=8)
    sigma0 = s.lift_coordinates(pc)
    row0 = trace_row(sigma0, 0)
    assert row0.mean_erank <= 1.05
    assert abs(row0.mean_lambda2 - 1e-4) <= 1e-6
    rng = np.random.default_rng(18)
    final, trace = run_layers(pc, sigma0, [LayerParams.random(3, rng=rng)] )
    assert [r.layer for r in trace.rows] == [0, 1]
    # per-node eranks recompute from the final cochain
    for v, val in trace.rows[1].node_eranks.items():
        assert abs(val - s.erank(final[v])) <= 1e-12
    csv = trace.to_csv()
    assert csv.splitlines()[0] == "layer,mean_erank,mean_lambda2,min_pairwise_lem"
    assert len(csv.splitlines()) == 3


def test_single_point_trace_is_graceful():
    pc = PointCloud([[0.3, 0.2, 0.1]], [])
    final, trace = s.diffusion_run(pc, layers=2, seed=1)
    assert len(trace.rows) == 3
    assert trace.rows[-1].min_pairwise_lem == 0.0


# ---------------------------------------------------------------------------
# diffusion runs


def test_diffusion_run_deterministic():
    pc = cloud(19)
    a, ta = s.diffusion_run(pc, layers=4, seed=5)
    b, tb = s.diffusion_run(pc, layers=4, seed=5)
    for v in pc.ids:
        np.testing.assert_array_equal(a[v], b[v])
    assert ta.to_csv() == tb.to_csv()


def test_diffusion_run_heterogeneous_vs_identity_control():
    rng = np.random.default_rng(38)
    pts = rng.normal(scale=0.7, size=(10, 3))
    pc = PointCloud(pts, geometric_graph(pts, radius=0.8))
    _, het = s.diffusion_run(pc, layers=32, seed=42)
    _, ctrl = s.diffusion_run(pc, layers=32, seed=42, identity_maps=True,
                              residual=False)
    assert het.rows[-1].min_pairwise_lem >= 0.01
    assert ctrl.rows[-1].min_pairwise_lem < 1e-3


# ---------------------------------------------------------------------------
# probe


def test_linear_probe_separable():
    rng = np.random.default_rng(20)
    X0 = rng.normal(size=(50, 4)) + np.array([3.0, 0, 0, 0])
    X1 = rng.normal(size=(50, 4)) - np.array([3.0, 0, 0, 0])
    X = np.vstack([X0, X1])
    y = np.array([0.0] * 50 + [1.0] * 50)
    res = s.linear_probe(X, y, X, y)
    assert res.train_accuracy == 1.0


def test_linear_probe_shuffled_labels_chance():
    rng = np.random.default_rng(21)
    X = rng.normal(size=(200, 4))
    y = rng.integers(0, 2, size=200).astype(float)
    res = s.linear_probe(X[:100], y[:100], X[100:], y[100:])
    assert abs(res.test_accuracy - 0.5) <= 0.15


def test_linear_probe_single_class_error():
    X = np.zeros((10, 3))
    y = np.zeros(10)
    with pytest.raises(DomainError):
        s.linear_probe(X, y, X, y)


def test_planarity_experiment_smoke():
    res = planarity_experiment(seed=5, n_per_class=25)
    assert res["test_accuracy"] >= 0.8
    ctrl = planarity_experiment(seed=5, n_per_class=25, shuffle_labels=True)
    assert abs(ctrl["test_accuracy"] - 0.5) <= 0.25


# ---------------------------------------------------------------------------
# graph helpers


def test_graph_builders():
    rng = np.random.default_rng(22)
    pts = rng.normal(size=(9, 3))
    edges = knn_edges(pts, k=3)
    degree = np.zeros(9)
    for i, j in edges:
        assert i < j
        degree[i] += 1
        degree[j] += 1
    assert degree.min() >= 3
    edges = geometric_graph(pts, radius=0.1)  # sparse: fallback keeps degrees > 0
    degree = np.zeros(9)
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    assert degree.min() >= 1
