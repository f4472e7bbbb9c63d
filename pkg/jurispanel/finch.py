import numpy as np
import torch
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

# similarities are compared after rounding so that exact duplicates tie reliably
SIMILARITY_DECIMALS = 12


def similarity_matrix(vectors):
    """
    This function returns the rounded pairwise cosine similarities of a list of unit vectors.

    Args:
        - vectors (``list`` of ``torch.tensor``): unit vectors of equal dimension

    Returns:
        - ``numpy.ndarray``: (n x n) matrix
    """
    V = torch.stack(list(vectors)).numpy()
    return np.round(V @ V.T, SIMILARITY_DECIMALS)


def _components(n, rows, cols):
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False, return_labels=True)
    # renumber so that components are ordered by their smallest member
    renumber = {}
    for label in labels:
        if label not in renumber:
            renumber[label] = len(renumber)
    return [renumber[label] for label in labels]


def first_neighbors(vectors):
    """
    This function returns, for every vector, the index of its nearest neighbour by cosine
    similarity. Ties go to the lowest index.

    Args:
        - vectors (``list`` of ``torch.tensor``): unit vectors (at least two)

    Returns:
        - ``numpy.ndarray``: neighbour indices
    """
    S = similarity_matrix(vectors)
    np.fill_diagonal(S, -np.inf)
    return np.argmax(S, axis=1)


def first_neighbor_clusters(ids, vectors):
    """
    One-pass first-neighbour clustering. Nodes i and j are adjacent when j is the first
    neighbour of i, i is the first neighbour of j, or both share the same first neighbour;
    clusters are the connected components of that adjacency, numbered by their smallest id.

    Args:
        - ids (``list`` of ``int``): node ids
        - vectors (``list`` of ``torch.tensor``): node vectors, aligned with ``ids``

    Returns:
        - ``dict``: node id -> cluster id
    """
    if len(ids) != len(vectors):
        raise ValueError('ids and vectors must have the same length')
    if not ids:
        return {}
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    ids = [ids[i] for i in order]
    vectors = [vectors[i] for i in order]
    n = len(ids)
    if n == 1:
        return {ids[0]: 0}
    kappa = first_neighbors(vectors)
    # i-kappa(i) edges already connect every pair sharing a first neighbour
    labels = _components(n, np.arange(n), kappa)
    return {node_id: label for node_id, label in zip(ids, labels)}


def single_linkage_groups(vectors, threshold):
    """
    This function groups vectors whose pairwise cosine similarity chains above a threshold.

    Args:
        - vectors (``list`` of ``torch.tensor``): unit vectors
        - threshold (``float``): minimum similarity of a link

    Returns:
        - ``list``: groups of indices, each sorted, ordered by their smallest index
    """
    n = len(vectors)
    if n == 0:
        return []
    if n == 1:
        return [[0]]
    S = similarity_matrix(vectors)
    rows, cols = np.nonzero(S >= threshold)
    labels = _components(n, rows, cols)
    groups = {}
    for i, label in enumerate(labels):
        groups.setdefault(label, []).append(i)
    return [groups[label] for label in sorted(groups)]
