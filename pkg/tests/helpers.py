import numpy as np

from gprgae.graph import SparseAdjacency


def random_graph(n, p=0.3, seed=0, weighted=False):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    w = rng.uniform(0.5, 2.0, keep.sum()) if weighted else None
    return SparseAdjacency.from_edges(n, iu[keep], ju[keep], w)
