"""
HDBSCAN in plain numpy: core distances, the mutual-reachability minimum
spanning tree, the single-linkage hierarchy, the condensed tree and
excess-of-mass cluster selection.
"""
import csv
import logging
from collections import deque
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from rtbust.exceptions import (
    ConfigurationError,
    IncompatibleArtifactError,
    InputNotFoundError,
    NumericalFailureError,
)
from rtbust.rtbust_cluster.models import (
    LAMBDA_CAP,
    NOISE,
    ClusterLabeling,
    ClusterParams,
    CondensedRecord,
    MstEdge,
)

logger = logging.getLogger(__name__)

CLUSTERS_HEADER = ["user_id", "cluster_id", "stability"]


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise ConfigurationError(f"points must be a 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericalFailureError("points hold non-finite coordinates")
    return x


def core_distances(points, k: int) -> np.ndarray:
    """
    Distance from each point to its k-th nearest neighbour, itself excluded.

    Raises:
        ConfigurationError: If k < 1 or n <= k.
    """
    x = _as_points(points)
    n = x.shape[0]
    if k < 1:
        raise ConfigurationError(f"min_samples must be at least 1, got {k}")
    if n <= k:
        raise ConfigurationError(f"core distances need more than k={k} points, got {n}")
    distances = cdist(x, x)
    np.fill_diagonal(distances, np.inf)
    return np.partition(distances, k - 1, axis=1)[:, k - 1]


def mutual_reachability(points, cores: np.ndarray) -> np.ndarray:
    """max(core(a), core(b), d(a, b)) for every pair; the diagonal is 0."""
    x = _as_points(points)
    distances = cdist(x, x)
    mreach = np.maximum(distances, np.maximum.outer(cores, cores))
    np.fill_diagonal(mreach, 0.0)
    return mreach


def mreach_mst(points, cores: np.ndarray) -> list[MstEdge]:
    """
    Prim's algorithm over the dense mutual-reachability graph, O(n^2).

    Among equal-weight candidates the edge with the smaller (min index,
    max index) pair wins, so the tree is deterministic.

    Returns:
        list[MstEdge]: n - 1 edges with i < j, in the order Prim adds them.
    """
    mreach = mutual_reachability(points, np.asarray(cores, dtype=np.float64))
    n = mreach.shape[0]
    if n < 2:
        return []
    indices = np.arange(n)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = mreach[0].copy()
    source = np.zeros(n, dtype=np.int64)

    edges: list[MstEdge] = []
    for _ in range(n - 1):
        candidates = np.flatnonzero(~in_tree)
        weights = best[candidates]
        tied = candidates[weights == weights.min()]
        lo = np.minimum(source[tied], tied)
        hi = np.maximum(source[tied], tied)
        v = int(tied[np.lexsort((hi, lo))[0]])
        edges.append(MstEdge(int(min(source[v], v)), int(max(source[v], v)), float(best[v])))
        in_tree[v] = True

        new_weights = mreach[v]
        new_lo, new_hi = np.minimum(v, indices), np.maximum(v, indices)
        old_lo, old_hi = np.minimum(source, indices), np.maximum(source, indices)
        better = (new_weights < best) | (
            (new_weights == best) & ((new_lo < old_lo) | ((new_lo == old_lo) & (new_hi < old_hi))))
        better &= ~in_tree
        best[better] = new_weights[better]
        source[better] = v
    return edges


def single_linkage(edges: list[MstEdge], n: int) -> np.ndarray:
    """
    Merges components along MST edges sorted by (weight, i, j).

    Returns:
        np.ndarray: (n - 1, 4) rows ``[left, right, distance, size]`` in the
        scipy linkage layout; node n + r is created by row r.
    """
    ordered = sorted(edges, key=lambda e: (e.weight, e.i, e.j))
    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(node: int) -> int:
        root = node
        while parent[root] != root:
            root = parent[root]
        while parent[node] != root:
            parent[node], node = root, parent[node]
        return root

    linkage = np.zeros((max(n - 1, 0), 4))
    for row, edge in enumerate(ordered):
        a, b = find(edge.i), find(edge.j)
        new = n + row
        parent[a] = parent[b] = new
        size[new] = size[a] + size[b]
        linkage[row] = (min(a, b), max(a, b), edge.weight, size[new])
    return linkage


def _to_lambda(distance: float) -> float:
    return LAMBDA_CAP if distance <= 0.0 else min(1.0 / distance, LAMBDA_CAP)


def condense_tree(linkage: np.ndarray, n: int, min_cluster_size: int) -> list[CondensedRecord]:
    """
    Walks the hierarchy from the root. A split where both sides hold at least
    ``min_cluster_size`` points creates two clusters; smaller sides fall out
    of the current cluster point by point. The root cluster is labelled n.
    """
    if n < 2:
        return []
    root = 2 * n - 2

    def children(node: int) -> tuple[int, int]:
        left, right = linkage[node - n, :2]
        return int(left), int(right)

    def node_size(node: int) -> int:
        return 1 if node < n else int(linkage[node - n, 3])

    def leaves(node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            current = stack.pop()
            if current < n:
                out.append(current)
            else:
                stack.extend(children(current))
        return sorted(out)

    records: list[CondensedRecord] = []
    relabel = {root: n}
    next_label = n + 1
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node < n:
            continue
        label = relabel[node]
        lam = _to_lambda(float(linkage[node - n, 2]))
        left, right = children(node)
        left_big = node_size(left) >= min_cluster_size
        right_big = node_size(right) >= min_cluster_size

        if left_big and right_big:
            for child in (left, right):
                relabel[child] = next_label
                records.append(CondensedRecord(label, next_label, lam, node_size(child)))
                next_label += 1
                queue.append(child)
            continue
        for child, big in ((left, left_big), (right, right_big)):
            if big:
                relabel[child] = label
                queue.append(child)
            else:
                records.extend(CondensedRecord(label, point, lam, 1) for point in leaves(child))
    return records


def cluster_stabilities(records: list[CondensedRecord], n: int) -> dict[int, float]:
    """Sum over each cluster's rows of (lambda - lambda_birth) * size; the root is born at lambda 0."""
    birth = {n: 0.0}
    for record in records:
        if record.child >= n:
            birth[record.child] = record.lambda_val
    stability = {label: 0.0 for label in birth}
    for record in records:
        stability[record.parent] += (record.lambda_val - birth[record.parent]) * record.size
    return stability


def select_clusters(records: list[CondensedRecord], n: int) -> tuple[list[int], dict[int, float]]:
    """
    Excess-of-mass selection, bottom-up: a cluster is kept when its own
    stability is at least the summed stability of its selected descendants.
    The root is a candidate only when it never splits.

    Returns:
        tuple: selected cluster labels and the stability of every cluster.
    """
    stability = cluster_stabilities(records, n)
    child_clusters: dict[int, list[int]] = {label: [] for label in stability}
    for record in records:
        if record.child >= n:
            child_clusters[record.parent].append(record.child)

    if not child_clusters.get(n):
        return ([n] if n in stability and records else []), stability

    selected = {label: True for label in stability}
    subtree = dict(stability)
    for label in sorted(stability, reverse=True):
        if label == n:
            continue
        kids = child_clusters[label]
        if not kids:
            continue
        kid_total = sum(subtree[k] for k in kids)
        if kid_total > stability[label]:
            selected[label] = False
            subtree[label] = kid_total
        else:
            stack = list(kids)
            while stack:
                descendant = stack.pop()
                selected[descendant] = False
                stack.extend(child_clusters[descendant])
    return sorted(label for label, keep in selected.items() if keep and label != n), stability


def extract_clusters(mst_edges: list[MstEdge], n: int, params: ClusterParams) -> tuple[np.ndarray, list[float]]:
    """
    Builds the hierarchy from the MST and labels points by the selected clusters.

    Points falling out of a selected cluster, or of any cluster below it, are
    its members; everything else is NOISE. Cluster ids are dense from 0,
    numbered by each cluster's smallest member index.

    Returns:
        tuple: labels per point index and stabilities per cluster id.
    """
    labels = np.full(n, NOISE, dtype=np.int64)
    if n < params.min_cluster_size or n < 2:
        return labels, []
    records = condense_tree(single_linkage(mst_edges, n), n, params.min_cluster_size)
    selected, stability = select_clusters(records, n)

    parent_of = {record.child: record.parent for record in records if record.child >= n}
    selected_set = set(selected)
    owner: dict[int, int] = {}

    def selected_ancestor(label: int) -> int:
        if label in owner:
            return owner[label]
        chain = []
        current = label
        result = NOISE
        while True:
            if current in owner:
                result = owner[current]
                break
            chain.append(current)
            if current in selected_set:
                result = current
                break
            if current not in parent_of:
                break
            current = parent_of[current]
        for visited in chain:
            owner[visited] = result
        return result

    raw = np.full(n, NOISE, dtype=np.int64)
    for record in records:
        if record.child < n:
            raw[record.child] = selected_ancestor(record.parent)

    # Dense ids ordered by smallest member index.
    first_member: dict[int, int] = {}
    for point in range(n):
        label = int(raw[point])
        if label != NOISE and label not in first_member:
            first_member[label] = point
    ordering = sorted(first_member, key=first_member.get)
    dense = {label: cluster_id for cluster_id, label in enumerate(ordering)}
    for point in range(n):
        if raw[point] != NOISE:
            labels[point] = dense[int(raw[point])]
    return labels, [stability[label] for label in ordering]


def hdbscan(points, params: ClusterParams | None = None, user_ids: list[str] | None = None) -> ClusterLabeling:
    """
    Clusters the rows of ``points``.

    ``min_samples`` is clamped to n - 1 with a warning on small inputs; fewer
    than ``min_cluster_size`` points are all NOISE.
    """
    params = params or ClusterParams()
    x = _as_points(points) if len(points) else np.zeros((0, 1))
    n = x.shape[0]
    user_ids = user_ids if user_ids is not None else [str(i) for i in range(n)]
    if len(user_ids) != n:
        raise ConfigurationError(f"{len(user_ids)} user ids for {n} points")
    if n < params.min_cluster_size:
        if n:
            logger.warning(f"{n} points are fewer than min_cluster_size {params.min_cluster_size}, all noise")
        return ClusterLabeling(user_ids=list(user_ids), labels=[NOISE] * n)

    k = params.min_samples
    if k > n - 1:
        logger.warning(f"min_samples {k} clamped to {n - 1} for {n} points")
        k = n - 1
    cores = core_distances(x, k)
    edges = mreach_mst(x, cores)
    labels, stabilities = extract_clusters(edges, n, params)
    labeling = ClusterLabeling(user_ids=list(user_ids), labels=[int(v) for v in labels], stabilities=stabilities)
    logger.info(f"HDBSCAN found {labeling.n_clusters} clusters and {labeling.n_noise} noise points "
                f"among {n} (min_cluster_size={params.min_cluster_size}, min_samples={k})")
    logger.debug(f"Cluster sizes: {labeling.cluster_sizes()}")
    return labeling


def save_labeling(labeling: ClusterLabeling, path: str | Path) -> None:
    """Writes ``user_id,cluster_id,stability`` rows; noise rows carry -1 and stability 0."""
    with Path(path).open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CLUSTERS_HEADER)
        for user_id, label in zip(labeling.user_ids, labeling.labels):
            writer.writerow([user_id, label, repr(float(labeling.stability_of(label)))])


def load_labeling(path: str | Path) -> ClusterLabeling:
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(f"No such clusters file: '{path}'")
    with path.open("r", encoding="utf-8", newline="") as stream:
        rows = [row for row in csv.reader(stream) if row]
    if not rows or rows[0] != CLUSTERS_HEADER:
        raise IncompatibleArtifactError(f"{path}: expected header {','.join(CLUSTERS_HEADER)}")
    user_ids: list[str] = []
    labels: list[int] = []
    stabilities: dict[int, float] = {}
    for line_no, row in enumerate(rows[1:], start=2):
        try:
            user_id, label_text, stability_text = row
            label = int(label_text)
            stability = float(stability_text)
        except ValueError as e:
            raise IncompatibleArtifactError(f"{path}:{line_no}: {e}") from e
        user_ids.append(user_id)
        labels.append(label)
        if label != NOISE:
            stabilities[label] = stability
    try:
        return ClusterLabeling(user_ids=user_ids, labels=labels,
                               stabilities=[stabilities[i] for i in range(len(stabilities))])
    except (ValueError, KeyError) as e:
        raise IncompatibleArtifactError(f"{path}: {e}") from e
