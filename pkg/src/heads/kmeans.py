"""k-means tokenizer over chunk vectors"""

from dataclasses import dataclass

import numpy as np

from ..config.config import KMEANS_MAX_ITERS
from ..nkernel.rng import make_stream
from ..utils.errors import TokenizerFitError


@dataclass
class ActionCodebook:
    centroids: np.ndarray    # (K, D) float32
    inertia: float           # sum of squared distances to the assigned centroid
    iterations: int = 0

    @property
    def num_clusters(self):
        return self.centroids.shape[0]


def _sq_dist(points, centroids):
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)


def _kmeans_plus_plus(points, k, rng):
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = ((points - points[chosen[0]]) ** 2).sum(axis=-1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            raise TokenizerFitError("k-means++ ran out of distinct points")
        idx = int(rng.choice(n, p=closest / total))
        chosen.append(idx)
        closest = np.minimum(closest, ((points - points[idx]) ** 2).sum(axis=-1))
    return points[chosen].copy()


def kmeans_fit(chunks, num_clusters, seed=0, max_iters=KMEANS_MAX_ITERS):
    """Cluster chunk vectors with k-means++ seeding and Lloyd iterations.

    Stops at an assignment fixed point or after max_iters. An empty cluster is
    re-seeded from the point farthest from its current centroid.

    Args:
        chunks: (N, D) array of chunk vectors
        num_clusters: K <= N
        seed: Seed of the initialisation stream

    Returns:
        ActionCodebook
    """
    points = np.asarray(chunks, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if num_clusters < 1:
        raise TokenizerFitError(f"Need at least one cluster, got {num_clusters}")
    if n < num_clusters:
        raise TokenizerFitError(f"Cannot fit {num_clusters} clusters to {n} chunks")
    if not np.isfinite(points).all():
        raise TokenizerFitError("Chunks contain non-finite values")
    if len(np.unique(points, axis=0)) < num_clusters:
        raise TokenizerFitError(f"Fewer than {num_clusters} distinct chunks; centroids would repeat")

    rng = make_stream(seed, "kmeans")
    centroids = _kmeans_plus_plus(points, num_clusters, rng)
    assign = None
    iterations = 0
    for iterations in range(1, max_iters + 1):
        dist = _sq_dist(points, centroids)
        new_assign = dist.argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for k in range(num_clusters):
            members = assign == k
            if members.any():
                centroids[k] = points[members].mean(axis=0)
            else:
                far = int(dist[np.arange(n), assign].argmax())
                centroids[k] = points[far]
                assign[far] = k
                dist[far] = 0.0

    inertia = float(_sq_dist(points, centroids).min(axis=1).sum())
    return ActionCodebook(centroids.astype(np.float32), inertia, iterations)