import numpy as np
import pytest
from scipy.cluster.hierarchy import linkage as scipy_linkage
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import squareform
from sklearn.metrics import adjusted_rand_score

from rtbust.exceptions import ConfigurationError, IncompatibleArtifactError
from rtbust.rtbust_cluster.models import NOISE, ClusterLabeling, ClusterParams
from rtbust.rtbust_cluster.utils import (
    core_distances,
    hdbscan,
    load_labeling,
    mreach_mst,
    mutual_reachability,
    save_labeling,
    single_linkage,
)


def _two_blobs(seed: int = 0):
    rng = np.random.default_rng(seed)
    blob_a = rng.normal(loc=(0.0, 0.0), scale=0.1, size=(50, 2))
    blob_b = rng.normal(loc=(10.0, 0.0), scale=0.1, size=(50, 2))
    background = np.column_stack([rng.uniform(-45.0, 55.0, 10), rng.uniform(-50.0, 50.0, 10)])
    points = np.vstack([blob_a, blob_b, background])
    truth = np.array([0] * 50 + [1] * 50 + [NOISE] * 10)
    return points, truth


def test_four_points_worked_example():
    points = np.array([0.0, 1.0, 5.0, 6.0])
    cores = core_distances(points, 1)
    assert np.allclose(cores, [1.0, 1.0, 1.0, 1.0])
    edges = mreach_mst(points, cores)
    assert sorted(e.weight for e in edges) == [1.0, 1.0, 4.0]

    labeling = hdbscan(points, ClusterParams(min_cluster_size=2, min_samples=1))
    assert labeling.labels == [0, 0, 1, 1]
    assert labeling.stabilities == pytest.approx([1.5, 1.5])
    assert labeling.cluster_sizes() == {0: 2, 1: 2}


def test_identical_points_form_one_cluster():
    labeling = hdbscan(np.ones((20, 3)), ClusterParams(min_cluster_size=5, min_samples=3))
    assert labeling.labels == [0] * 20


def test_two_blobs_in_background_noise():
    points, truth = _two_blobs()
    labeling = hdbscan(points, ClusterParams())
    assert labeling.n_clusters == 2
    assert adjusted_rand_score(truth, labeling.labels) >= 0.95


@pytest.mark.parametrize("seed", range(20))
def test_mst_weight_matches_reference(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    points = rng.normal(size=(n, 2))
    cores = core_distances(points, 1)
    edges = mreach_mst(points, cores)
    assert len(edges) == n - 1
    assert all(e.i < e.j for e in edges)

    reference = minimum_spanning_tree(mutual_reachability(points, cores)).toarray()
    assert sorted(e.weight for e in edges) == pytest.approx(sorted(reference[reference > 0].tolist()))


def test_single_linkage_matches_scipy():
    rng = np.random.default_rng(1)
    points = rng.normal(size=(30, 3))
    cores = core_distances(points, 4)
    mreach = mutual_reachability(points, cores)
    ours = single_linkage(mreach_mst(points, cores), 30)
    reference = scipy_linkage(squareform(mreach, checks=False), method="single")
    assert np.allclose(ours[:, 2], reference[:, 2])
    assert np.array_equal(ours[:, 3], reference[:, 3])


def test_labels_are_invariant_to_permutation_and_translation():
    points, _ = _two_blobs(seed=2)
    params = ClusterParams()
    base = np.array(hdbscan(points, params).labels)

    shifted = np.array(hdbscan(points + np.array([3.0, -7.0]), params).labels)
    assert adjusted_rand_score(base, shifted) == 1.0

    order = np.random.default_rng(3).permutation(len(points))
    permuted = np.array(hdbscan(points[order], params).labels)
    assert adjusted_rand_score(base[order], permuted) == 1.0
    assert np.array_equal(base[order] == NOISE, permuted == NOISE)


def test_dense_ids_follow_smallest_member():
    points = np.array([10.0, 11.0, 0.0, 1.0])
    labeling = hdbscan(points, ClusterParams(min_cluster_size=2, min_samples=1))
    assert labeling.labels == [0, 0, 1, 1]


def test_small_inputs_are_noise():
    empty = hdbscan(np.zeros((0, 2)))
    assert empty.labels == []
    assert empty.n_clusters == 0

    labeling = hdbscan(np.random.default_rng(0).normal(size=(10, 2)), ClusterParams())
    assert labeling.labels == [NOISE] * 10


def test_min_samples_is_clamped():
    points = np.vstack([np.zeros((6, 2)), np.full((6, 2), 50.0)]) + np.random.default_rng(4).normal(size=(12, 2))
    labeling = hdbscan(points, ClusterParams(min_cluster_size=11, min_samples=30))
    assert len(labeling.labels) == 12


def test_core_distances_rejects_small_inputs():
    with pytest.raises(ConfigurationError):
        core_distances(np.zeros((3, 2)), 3)


def test_labeling_rejects_sparse_ids():
    with pytest.raises(ValueError):
        ClusterLabeling(user_ids=["a", "b"], labels=[0, 2])


def test_clusters_file_round_trip(tmp_path):
    points, _ = _two_blobs(seed=5)
    user_ids = [f"u{i:03d}" for i in range(len(points))]
    labeling = hdbscan(points, ClusterParams(), user_ids)
    path = tmp_path / "clusters.csv"
    save_labeling(labeling, path)
    loaded = load_labeling(path)
    assert loaded == labeling
    assert path.read_text(encoding="utf-8").splitlines()[0] == "user_id,cluster_id,stability"


def test_load_labeling_rejects_bad_header(tmp_path):
    path = tmp_path / "clusters.csv"
    path.write_text("user,cluster\nu1,0\n", encoding="utf-8")
    with pytest.raises(IncompatibleArtifactError):
        load_labeling(path)
