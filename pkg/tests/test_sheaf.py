"""Sheaf operators: hand-computed small cases plus dense-operator oracles."""

import math

import numpy as np
import pytest

import spdsheaf as s
from spdsheaf.errors import InvalidInputError
from spdsheaf.sheaf import (
    cochain0_from_vec,
    connected_components,
    identity_cochain0,
    log_cochain0_vec,
    log_cochain1_vec,
    section_space_summary,
)
from spdsheaf.verify import (
    random_cochain0,
    random_cochain1,
    random_orthogonal,
    random_sheaf,
    random_spd,
)


def rotation2(angle):
    c, si = math.cos(angle), math.sin(angle)
    return np.array([[c, -si], [si, c]])


def path_sheaf(n_stalk, k):
    return s.SheafGraph.identity_maps(n_stalk, range(k), [(i, i + 1) for i in range(k - 1)])


# ---------------------------------------------------------------------------
# construction


def test_construction_validation():
    I = np.eye(2)
    with pytest.raises(InvalidInputError):
        s.SheafGraph(2, [0, 1], [(0, 0)], [(I, I)])  # self-loop
    with pytest.raises(InvalidInputError):
        s.SheafGraph(2, [0, 1], [(0, 2)], [(I, I)])  # unknown vertex
    with pytest.raises(InvalidInputError):
        s.SheafGraph(2, [0, 1], [(0, 1)], [(2 * I, I)])  # not orthogonal
    sheaf = s.SheafGraph(2, [0, 1], [(0, 1)], [(I, I)])
    assert sheaf.incidence_index(0, 0) == 0
    assert sheaf.incidence_index(1, 0) == 1
    assert not sheaf.maps[0][0].flags.writeable


def test_parallel_edges_allowed():
    I = np.eye(1)
    sheaf = s.SheafGraph(1, [0, 1], [(0, 1), (0, 1)], [(I, I), (-I, I)])
    assert sheaf.n_edges == 2


# ---------------------------------------------------------------------------
# coboundary


def test_coboundary_constant_section_identity_maps():
    sheaf = path_sheaf(2, 4)
    P = random_spd(2, np.random.default_rng(0))
    out = s.coboundary(sheaf, {v: P for v in sheaf.vertices})
    for Y in out:
        np.testing.assert_allclose(Y, np.eye(2), atol=1e-12)


def test_coboundary_single_edge_tail_positive():
    sheaf = path_sheaf(2, 2)
    sigma = {0: np.diag([math.e, 1.0]), 1: np.eye(2)}
    (Y,) = s.coboundary(sheaf, sigma)
    np.testing.assert_allclose(Y, np.diag([math.e, 1.0]), atol=1e-12)


def test_coboundary_matches_dense_operator():
    rng = np.random.default_rng(1)
    for _ in range(10):
        sheaf = random_sheaf(3, 7, 3, rng)
        sigma = random_cochain0(sheaf, rng)
        B = s.coboundary_matrix(sheaf)
        lhs = B @ log_cochain0_vec(sheaf, sigma)
        rhs = log_cochain1_vec(sheaf, s.coboundary(sheaf, sigma))
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_coboundary_missing_vertex():
    sheaf = path_sheaf(2, 3)
    with pytest.raises(InvalidInputError):
        s.coboundary(sheaf, {0: np.eye(2), 1: np.eye(2)})


def test_coboundary_group_linearity():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(2, 4))
        sheaf = random_sheaf(n, int(rng.integers(2, 8)), 2, rng)
        sigma, tau = random_cochain0(sheaf, rng), random_cochain0(sheaf, rng)
        combo = {v: s.group_op(sigma[v], tau[v]) for v in sheaf.vertices}
        for L, A, B in zip(s.coboundary(sheaf, combo), s.coboundary(sheaf, sigma),
                           s.coboundary(sheaf, tau)):
            assert s.dist_lem(L, s.group_op(A, B)) <= 1e-9


# ---------------------------------------------------------------------------
# adjoint


def test_adjoint_identity_cochain():
    sheaf = random_sheaf(2, 5, 2, np.random.default_rng(3))
    out = s.adjoint(sheaf, [np.eye(2)] * sheaf.n_edges)
    for Y in out.values():
        np.testing.assert_allclose(Y, np.eye(2), atol=1e-12)


def test_adjoint_isolated_vertex_gets_identity():
    I = np.eye(2)
    sheaf = s.SheafGraph(2, [0, 1, 2], [(0, 1)], [(I, I)])
    out = s.adjoint(sheaf, [np.diag([math.e, 1.0])])
    np.testing.assert_allclose(out[2], np.eye(2), atol=1e-14)
    # tail positive, head negative
    np.testing.assert_allclose(s.spd_log(out[0]), np.diag([1.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(s.spd_log(out[1]), np.diag([-1.0, 0.0]), atol=1e-12)


def test_green_identity_random():
    rng = np.random.default_rng(4)
    for _ in range(20):
        sheaf = random_sheaf(int(rng.integers(2, 4)), int(rng.integers(2, 12)), 3, rng)
        for _ in range(5):
            sigma = random_cochain0(sheaf, rng)
            tau = random_cochain1(sheaf, rng)
            lhs = s.cochain_pairing(s.coboundary(sheaf, sigma), tau)
            rhs = s.cochain_pairing(sigma, s.adjoint(sheaf, tau))
            assert abs(lhs - rhs) <= 1e-8


# ---------------------------------------------------------------------------
# Laplacian


def test_laplacian_is_adjoint_of_coboundary():
    rng = np.random.default_rng(5)
    sheaf = random_sheaf(2, 6, 2, rng)
    sigma = random_cochain0(sheaf, rng)
    expected = s.adjoint(sheaf, s.coboundary(sheaf, sigma))
    out = s.laplacian(sheaf, sigma)
    for v in sheaf.vertices:
        np.testing.assert_array_equal(out[v], expected[v])


def test_laplacian_global_section_maps_to_identity():
    rng = np.random.default_rng(6)
    sheaf = random_sheaf(2, 6, 0, rng)  # tree: transported sections exist
    basis = s.global_sections(sheaf)
    assert basis.shape[1] >= 1
    section = cochain0_from_vec(sheaf, 0.7 * basis[:, 0])
    for Y in s.laplacian(sheaf, section).values():
        assert s.dist_lem(Y, np.eye(2)) <= 1e-7


def test_laplacian_two_node_hand_computation():
    sheaf = path_sheaf(2, 2)
    sigma = {0: np.diag([math.e, 1.0]), 1: np.eye(2)}
    out = s.laplacian(sheaf, sigma)
    np.testing.assert_allclose(s.spd_log(out[0]), np.diag([1.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(s.spd_log(out[1]), np.diag([-1.0, 0.0]), atol=1e-12)


def test_laplacian_matches_gram_operator():
    rng = np.random.default_rng(7)
    for _ in range(5):
        sheaf = random_sheaf(3, 6, 3, rng)
        sigma = random_cochain0(sheaf, rng)
        B = s.coboundary_matrix(sheaf)
        lhs = B.T @ B @ log_cochain0_vec(sheaf, sigma)
        rhs = log_cochain0_vec(sheaf, s.laplacian(sheaf, sigma))
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_identity_maps_reduce_to_graph_laplacian():
    rng = np.random.default_rng(8)
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]
    sheaf = s.SheafGraph.identity_maps(2, range(4), edges)
    B = s.coboundary_matrix(sheaf)
    L_graph = np.zeros((4, 4))
    for t, h in edges:
        L_graph[t, t] += 1
        L_graph[h, h] += 1
        L_graph[t, h] -= 1
        L_graph[h, t] -= 1
    np.testing.assert_allclose(B.T @ B, np.kron(L_graph, np.eye(s.sym_dim(2))),
                               atol=1e-12)


# ---------------------------------------------------------------------------
# pairing


def test_cochain_pairing_examples():
    rng = np.random.default_rng(9)
    sheaf = random_sheaf(2, 4, 1, rng)
    sigma = random_cochain0(sheaf, rng)
    assert abs(s.cochain_pairing(sigma, identity_cochain0(sheaf))) <= 1e-12
    total = sum(np.linalg.norm(s.spd_log(X)) ** 2 for X in sigma.values())
    assert abs(s.cochain_pairing(sigma, sigma) - total) <= 1e-9
    tau = random_cochain0(sheaf, rng)
    rho = random_cochain0(sheaf, rng)
    combo = {v: s.group_op(tau[v], rho[v]) for v in sheaf.vertices}
    assert abs(s.cochain_pairing(sigma, combo)
               - s.cochain_pairing(sigma, tau) - s.cochain_pairing(sigma, rho)) <= 1e-9


def test_cochain_pairing_mismatch():
    sheaf = path_sheaf(2, 3)
    sigma = random_cochain0(sheaf, np.random.default_rng(10))
    with pytest.raises(InvalidInputError):
        s.cochain_pairing(sigma, {0: np.eye(2)})
    with pytest.raises(InvalidInputError):
        s.cochain_pairing(sigma, [np.eye(2)])


# ---------------------------------------------------------------------------
# dense operator structure


def test_coboundary_matrix_identity_sheaf_blocks():
    sheaf = path_sheaf(2, 3)
    B = s.coboundary_matrix(sheaf)
    m = s.sym_dim(2)
    incidence = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
    np.testing.assert_allclose(B, np.kron(incidence, np.eye(m)), atol=1e-14)


def test_coboundary_matrix_conjugation_block():
    R = rotation2(0.81)
    sheaf = s.SheafGraph(2, [0, 1], [(0, 1)], [(np.eye(2), R)])
    B = s.coboundary_matrix(sheaf)
    m = s.sym_dim(2)
    np.testing.assert_allclose(B[:, :m], np.eye(m), atol=1e-14)
    np.testing.assert_allclose(B[:, m:], -s.conj_operator(R), atol=1e-14)


def test_coboundary_matrix_no_edges():
    sheaf = s.SheafGraph(2, [0, 1], [], [])
    assert s.coboundary_matrix(sheaf).shape == (0, 2 * s.sym_dim(2))


# ---------------------------------------------------------------------------
# global sections


def test_sections_single_vertex():
    sheaf = s.SheafGraph(3, [0], [], [])
    assert s.global_sections(sheaf).shape[1] == s.sym_dim(3)


def test_sections_identity_tree_dimension():
    for n in (2, 3):
        sheaf = path_sheaf(n, 5)
        basis = s.global_sections(sheaf)
        assert basis.shape[1] == s.sym_dim(n)
        # orthonormal columns
        np.testing.assert_allclose(basis.T @ basis, np.eye(basis.shape[1]), atol=1e-10)
        section = cochain0_from_vec(sheaf, basis @ np.arange(1.0, basis.shape[1] + 1))
        for Y in s.coboundary(sheaf, section):
            assert s.dist_lem(Y, np.eye(n)) <= 1e-7


def test_sections_three_cycle_quarter_turn():
    R = rotation2(math.pi / 2)
    I = np.eye(2)
    sheaf = s.SheafGraph(2, [0, 1, 2], [(0, 1), (1, 2), (2, 0)],
                         [(I, I), (I, I), (R, I)])
    basis = s.global_sections(sheaf)
    # brute force: symmetric A with R A R^T = A for the quarter turn
    fixed = s.holonomy_fixed_space([R], 2)
    assert basis.shape[1] == fixed.shape[1] == 1


# ---------------------------------------------------------------------------
# index


def test_index_examples():
    assert s.sheaf_index(path_sheaf(3, 2)) == 6
    tri = s.SheafGraph.identity_maps(2, range(3), [(0, 1), (1, 2), (2, 0)])
    assert s.sheaf_index(tri) == 0


def test_index_formula_random():
    rng = np.random.default_rng(11)
    for i in range(50):
        n = int(rng.integers(2, 4))
        sheaf = random_sheaf(n, int(rng.integers(2, 9)), int(rng.integers(0, 4)), rng,
                             connected=(i % 2 == 0))
        expected = (sheaf.n_vertices - sheaf.n_edges) * s.sym_dim(n)
        assert s.sheaf_index(sheaf) == expected


# ---------------------------------------------------------------------------
# holonomy


def test_holonomy_tree_empty():
    assert s.holonomy_reps(path_sheaf(2, 4)) == []


def test_holonomy_identity_cycle():
    sheaf = s.SheafGraph.identity_maps(2, range(4), [(0, 1), (1, 2), (2, 3), (3, 0)])
    (rep,) = s.holonomy_reps(sheaf)
    np.testing.assert_allclose(rep, np.eye(2), atol=1e-12)


def test_holonomy_single_rotation_conjugate():
    R = rotation2(0.4)
    I = np.eye(2)
    sheaf = s.SheafGraph(2, [0, 1, 2], [(0, 1), (1, 2), (2, 0)],
                         [(I, I), (I, I), (R, I)])
    (rep,) = s.holonomy_reps(sheaf)
    # conjugate to R: same rotation angle
    assert abs(np.trace(rep) - np.trace(R)) <= 1e-10
    assert np.linalg.norm(rep.T @ rep - np.eye(2)) <= 1e-10


def test_holonomy_requires_connected():
    I = np.eye(2)
    sheaf = s.SheafGraph(2, [0, 1, 2, 3], [(0, 1), (2, 3)], [(I, I), (I, I)])
    with pytest.raises(InvalidInputError):
        s.holonomy_reps(sheaf)
    assert len(connected_components(sheaf)) == 2


def test_holonomy_fixed_space_examples():
    assert s.holonomy_fixed_space([], 2).shape[1] == s.sym_dim(2)
    # reflection: diagonal matrices are fixed
    assert s.holonomy_fixed_space([np.diag([1.0, -1.0])]).shape[1] == 2
    # generic rotations in n=3: only multiples of the identity survive
    rng = np.random.default_rng(12)
    reps = [random_orthogonal(3, rng) for _ in range(3)]
    fixed = s.holonomy_fixed_space(reps, 3)
    assert fixed.shape[1] == 1
    S = s.vec_to_sym(fixed[:, 0], 3)
    np.testing.assert_allclose(S, S[0, 0] * np.eye(3), atol=1e-8)


def test_kernel_dim_equals_fixed_space_dim():
    rng = np.random.default_rng(13)
    for _ in range(25):
        n = int(rng.integers(2, 4))
        sheaf = random_sheaf(n, int(rng.integers(2, 8)), int(rng.integers(0, 3)), rng)
        dim_kernel = s.global_sections(sheaf).shape[1]
        reps = s.holonomy_reps(sheaf)
        assert dim_kernel == s.holonomy_fixed_space(reps, n).shape[1]


def test_section_space_summary_disconnected():
    I = np.eye(2)
    sheaf = s.SheafGraph(2, [0, 1, 2, 3], [(0, 1), (2, 3)], [(I, I), (I, I)])
    summary = section_space_summary(sheaf)
    assert summary["components"] == 2
    assert summary["kernel_dim"] == summary["holonomy_fixed_total"] == 2 * s.sym_dim(2)
    assert summary["index"] == 2 * s.sym_dim(2)


# ---------------------------------------------------------------------------
# diffusion


def test_diffusion_global_section_is_fixed_point():
    rng = np.random.default_rng(14)
    sheaf = random_sheaf(2, 5, 0, rng)
    basis = s.global_sections(sheaf)
    section = cochain0_from_vec(sheaf, 0.5 * basis[:, 0])
    out = s.diffusion_step(sheaf, section, normalize=False)
    for v in sheaf.vertices:
        np.testing.assert_allclose(out[v], section[v], atol=1e-11)


def test_diffusion_two_node_shift():
    sheaf = path_sheaf(2, 2)
    sigma = {0: np.diag([math.e, 1.0]), 1: np.eye(2)}
    out = s.diffusion_step(sheaf, sigma, normalize=False)
    np.testing.assert_allclose(s.spd_log(out[0]), np.diag([2.0, 0.0]), atol=1e-11)
    np.testing.assert_allclose(s.spd_log(out[1]), np.diag([-1.0, 0.0]), atol=1e-11)


def test_diffusion_normalization_caps_update():
    rng = np.random.default_rng(15)
    sheaf = random_sheaf(3, 6, 3, rng)
    sigma = random_cochain0(sheaf, rng, spread=100.0)
    from spdsheaf.sheaf import _check_cochain0, _laplacian_logs
    from spdsheaf.spd import _logm_stack

    logs = _logm_stack(_check_cochain0(sheaf, sigma))
    delta = _laplacian_logs(sheaf, logs)
    radii = np.max(np.abs(np.linalg.eigvalsh(delta)), axis=-1)
    delta /= np.maximum(1.0, radii)[:, None, None]
    assert np.max(np.abs(np.linalg.eigvalsh(delta))) <= 1.0 + 1e-12
    out = s.diffusion_step(sheaf, sigma, normalize=True)
    for Y in out.values():
        assert np.linalg.eigvalsh(Y).min() > 0
