import numpy as np
import pytest

from graphfl.graph import (
    DeviceId,
    EigenSolverError,
    Graph,
    GraphError,
    build_adjacency_from_positions,
    connected_components,
    eigendecompose,
    gft,
    graph_from_adjacency,
    igft,
    jacobi_eigh,
    laplacian,
    load_adjacency_file,
    load_positions_file,
    sample_room_layout,
    write_adjacency_file,
)
from graphfl.verify import charpoly_eigenvalues, random_graph

COMPLETE3 = np.ones((3, 3)) - np.eye(3)


def test_adjacency_below_threshold():
    g = build_adjacency_from_positions([[0, 0, 0], [5, 0, 0]], 10.0)
    assert g.adjacency.tolist() == [[0, 1], [1, 0]]


def test_adjacency_threshold_is_strict():
    g = build_adjacency_from_positions([[0, 0, 0], [10, 0, 0]], 10.0)
    assert g.adjacency.tolist() == [[0, 0], [0, 0]]


def test_adjacency_collinear_path():
    g = build_adjacency_from_positions([[0, 0, 0], [6, 0, 0], [12, 0, 0]], 10.0)
    assert g.adjacency.tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]


def test_adjacency_rejects_bad_input():
    with pytest.raises(GraphError):
        build_adjacency_from_positions([[0, 0, np.nan], [1, 0, 0]], 10.0)
    with pytest.raises(GraphError):
        build_adjacency_from_positions([[0, 0, 0]], 0.0)


def test_graph_invariants_checked():
    with pytest.raises(GraphError):
        Graph(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(GraphError):
        Graph(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(GraphError):
        Graph(np.array([[0.0, -1.0], [-1.0, 0.0]]))


def test_laplacian_examples():
    assert laplacian(np.array([[0, 1], [1, 0]])).tolist() == [[1, -1], [-1, 1]]
    assert not laplacian(np.zeros((3, 3))).any()
    assert laplacian(COMPLETE3).tolist() == [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]]


def test_laplacian_rejects_asymmetric():
    with pytest.raises(GraphError):
        laplacian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_eig_two_node():
    s = eigendecompose(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    np.testing.assert_allclose(s.eigenvalues, [0, 2], atol=1e-12)
    r = 1 / np.sqrt(2)
    # sign convention: largest-magnitude entry positive, first on ties
    np.testing.assert_allclose(s.eigenvectors, [[r, r], [r, -r]], atol=1e-12)


def test_eig_zero_matrix_gives_identity():
    s = eigendecompose(np.zeros((3, 3)))
    assert s.eigenvalues.tolist() == [0, 0, 0]
    np.testing.assert_array_equal(s.eigenvectors, np.eye(3))


def test_eig_complete3():
    s = eigendecompose(laplacian(COMPLETE3))
    np.testing.assert_allclose(s.eigenvalues, [0, 3, 3], atol=1e-12)


def test_eig_matches_charpoly_small():
    rng = np.random.default_rng(7)
    for _ in range(30):
        k = int(rng.integers(1, 4))
        lap = laplacian(random_graph(rng, k, 0.6))
        np.testing.assert_allclose(eigendecompose(lap).eigenvalues, charpoly_eigenvalues(lap),
                                   atol=1e-8)


@pytest.mark.parametrize("k", [5, 17, 32, 64])
def test_eig_reconstruction(k):
    rng = np.random.default_rng(k)
    lap = laplacian(random_graph(rng, k, 0.3))
    s = eigendecompose(lap)
    v, lam = s.eigenvectors, s.eigenvalues
    assert np.all(np.diff(lam) >= 0)
    assert np.abs(v.T @ v - np.eye(k)).max() < 1e-8
    assert np.abs(lap @ v - v * lam).max() < 1e-8
    assert np.abs((v * lam) @ v.T - lap).max() < 1e-8


def test_eig_zero_multiplicity_is_component_count():
    rng = np.random.default_rng(3)
    for _ in range(20):
        adj = random_graph(rng, 12, 0.15)
        s = eigendecompose(laplacian(adj))
        assert np.sum(np.abs(s.eigenvalues) < 1e-8) == len(connected_components(adj))


def test_dc_eigenvector_constant_on_connected_graph():
    s = eigendecompose(laplacian(COMPLETE3))
    assert s.eigenvalues[0] == 0.0
    np.testing.assert_allclose(s.eigenvectors[:, 0], np.full(3, 1 / np.sqrt(3)), atol=1e-12)


def test_jacobi_budget_exhaustion_reports_residual():
    m = np.array([[2.0, 1.0, 0.5], [1.0, 3.0, 0.3], [0.5, 0.3, 1.0]])
    with pytest.raises(EigenSolverError) as err:
        jacobi_eigh(m, max_sweeps=0)
    assert err.value.residual > 0


def test_jacobi_rejects_asymmetric():
    with pytest.raises(GraphError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_gft_examples():
    s = eigendecompose(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    np.testing.assert_allclose(gft(s, [[1.0], [1.0]]), [[np.sqrt(2)], [0.0]], atol=1e-12)
    assert not gft(s, np.zeros((2, 3))).any()
    assert not igft(s, np.zeros((2, 3))).any()


def test_igft_dc_indicator_gives_ones():
    k = 5
    s = eigendecompose(laplacian(np.ones((k, k)) - np.eye(k)))
    gf = np.zeros((k, 4))
    gf[0] = np.sqrt(k)
    np.testing.assert_allclose(igft(s, gf), np.ones((k, 4)), atol=1e-12)


def test_gft_round_trip():
    rng = np.random.default_rng(0)
    s = eigendecompose(laplacian(random_graph(rng, 4, 0.5)))
    g = rng.standard_normal((4, 6))
    np.testing.assert_allclose(igft(s, gft(s, g)), g, atol=1e-10)
    np.testing.assert_allclose(gft(s, igft(s, g)), g, atol=1e-10)


def test_gft_dimension_mismatch():
    s = eigendecompose(laplacian(COMPLETE3))
    with pytest.raises(GraphError):
        gft(s, np.zeros((2, 3)))
    with pytest.raises(GraphError):
        igft(s, np.zeros((4, 3)))


def test_connected_components_examples():
    assert connected_components(np.zeros((3, 3))) == [{0}, {1}, {2}]
    assert connected_components(COMPLETE3) == [{0, 1, 2}]
    two = np.zeros((4, 4))
    two[0, 1] = two[1, 0] = two[2, 3] = two[3, 2] = 1
    assert connected_components(two) == [{0, 1}, {2, 3}]


def test_room_layout_shape_and_ids():
    rng = np.random.default_rng(1)
    pos, ids = sample_room_layout(rng)
    assert pos.shape == (20, 3)
    rooms = [i.cluster_index for i in ids]
    assert sorted(set(rooms)) == [0, 1, 2, 3]
    for c in range(4):
        count = rooms.count(c)
        assert 4 <= count <= 7
        inside = pos[np.array(rooms) == c]
        assert np.all((inside[:, 0] >= 10 * c) & (inside[:, 0] <= 10 * (c + 1)))
    assert len({(i.cluster_index, i.local_index) for i in ids}) == 20


def test_adjacency_file_round_trip(tmp_path):
    adj = random_graph(np.random.default_rng(2), 6, 0.4)
    path = tmp_path / "a.txt"
    write_adjacency_file(graph_from_adjacency(adj), path)
    np.testing.assert_array_equal(load_adjacency_file(path).adjacency, adj)


def test_adjacency_file_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2\n0 1\n")
    with pytest.raises(GraphError):
        load_adjacency_file(path)
    path.write_text("2\n0 1\n0 0\n")
    with pytest.raises(GraphError):
        load_adjacency_file(path)


def test_positions_file(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("0 0 0 0\n0 5 0 0\n1 20 0 0\n")
    g = load_positions_file(path, 10.0)
    assert g.adjacency.tolist() == [[0, 1, 0], [1, 0, 0], [0, 0, 0]]
    assert g.device_ids[2] == DeviceId(1, 0)
    assert g.clusters.tolist() == [0, 0, 1]
