"""Multi-prototype pool: confident-feature collection, K-means offline
initialization, online moving-average iteration and frame-to-class
similarity queries.

Prototypes are unit-norm vectors in the projection space, C per class;
similarity of a frame to a class is the max cosine over that class's
prototypes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_BUFFER_CAPACITY = 4096


class PrototypeError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# K-means (Lloyd with k-means++ seeding and restarts)

def _kmeanspp_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = points[rng.integers(n)]
        else:
            centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int, tol: float):
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(centers.shape[0]):
            members = points[labels == j]
            if members.shape[0] == 0:
                # re-seed an empty cluster on the point farthest from its center
                far = np.argmax(d2[np.arange(points.shape[0]), labels])
                new_centers[j] = points[far]
            else:
                new_centers[j] = members.mean(axis=0)
        shift = np.max(np.sum((new_centers - centers) ** 2, axis=1))
        centers = new_centers
        if shift <= tol**2:
            break
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    wcss = float(d2[np.arange(points.shape[0]), labels].sum())
    return centers, labels, wcss


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
           n_init: int = 10, max_iter: int = 100, tol: float = 1e-6):
    """Best-of-n_init Lloyd's algorithm with k-means++ seeding.

    Returns (centers (k, d), labels (n,), wcss).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < k:
        raise ValueError("need at least k points")
    best = None
    for _ in range(n_init):
        centers = _kmeanspp_seed(points, k, rng)
        centers, labels, wcss = _lloyd(points, centers, max_iter, tol)
        if best is None or wcss < best[2]:
            best = (centers, labels, wcss)
    return best


# ---------------------------------------------------------------------------
# Confident-feature buffers

@dataclass
class FeatureBuffer:
    """Per-class lists of confident teacher projections, capacity-bounded
    by reservoir sampling."""

    n_classes: int
    capacity: int = DEFAULT_BUFFER_CAPACITY
    rows: list = field(default_factory=list)      # list of lists of vectors
    seen: np.ndarray = field(default=None)        # per-class running count

    def __post_init__(self):
        if not self.rows:
            self.rows = [[] for _ in range(self.n_classes)]
        if self.seen is None:
            self.seen = np.zeros(self.n_classes, dtype=np.int64)

    def add(self, class_id: int, v: np.ndarray, rng: np.random.Generator) -> None:
        self.seen[class_id] += 1
        bucket = self.rows[class_id]
        if len(bucket) < self.capacity:
            bucket.append(np.asarray(v, dtype=np.float64))
        else:
            j = int(rng.integers(self.seen[class_id]))
            if j < self.capacity:
                bucket[j] = np.asarray(v, dtype=np.float64)

    def as_matrix(self, class_id: int) -> np.ndarray:
        bucket = self.rows[class_id]
        if not bucket:
            return np.zeros((0, 0))
        return np.stack(bucket)

    def counts(self) -> list:
        return [len(b) for b in self.rows]


def collect(p_teacher: np.ndarray, v_teacher: np.ndarray, tau_plus: float,
            buffer: FeatureBuffer, rng: np.random.Generator) -> FeatureBuffer:
    """Append v_k to Q_i for every (frame k, class i) with p_{k,i} > tau_plus.

    A frame may enter several class buffers.  Inputs are flat (K, M) and
    (K, D') arrays over however many clips the caller pooled.
    """
    p_teacher = np.asarray(p_teacher)
    v_teacher = np.asarray(v_teacher)
    frames, classes = np.nonzero(p_teacher > tau_plus)
    for k, i in zip(frames, classes):
        buffer.add(int(i), v_teacher[k], rng)
    return buffer


# ---------------------------------------------------------------------------
# Pool

def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.maximum(norms, 1e-12)


@dataclass
class PrototypePool:
    n_classes: int
    clusters_per_class: int = 3
    momentum: float = 0.99
    prototypes: np.ndarray = None   # (M, C, D') once initialized
    initialized: bool = False

    def init_offline(self, buffer: FeatureBuffer, rng: np.random.Generator,
                     projection_dim: int | None = None,
                     n_init: int = 10) -> None:
        """Per-class K-means over collected features; centroids become the
        initial unit-norm prototypes.

        Classes with fewer than C rows fall back to duplicated rows with
        small Gaussian jitter (sigma 1e-3); empty classes get random unit
        vectors.  Both cases log a warning.
        """
        c = self.clusters_per_class
        dims = [b[0].shape[0] for b in buffer.rows if b]
        if not dims and projection_dim is None:
            raise PrototypeError("all buffers empty and projection_dim not given")
        dim = dims[0] if dims else projection_dim
        protos = np.zeros((self.n_classes, c, dim))
        for i in range(self.n_classes):
            pts = buffer.as_matrix(i)
            if pts.size == 0:
                log.warning("class %d has no confident features; random prototypes", i)
                pts = rng.standard_normal((c, dim))
            elif pts.shape[0] < c:
                log.warning("class %d has %d < C=%d features; jitter fallback",
                            i, pts.shape[0], c)
                reps = pts[np.arange(c) % pts.shape[0]]
                pts = reps + 1e-3 * rng.standard_normal(reps.shape)
            centers, _, _ = kmeans(pts, c, rng, n_init=n_init)
            protos[i] = _normalize_rows(centers)
        self.prototypes = protos
        self.initialized = True

    def similarity(self, v: np.ndarray) -> np.ndarray:
        """Frame-to-class scores: s_i = max_j <v, c_{i,j}> for a unit vector v."""
        if not self.initialized:
            raise PrototypeError("prototype pool not initialized")
        return (self.prototypes @ np.asarray(v, dtype=np.float64)).max(axis=1)

    def assign_and_centroid(self, rows: np.ndarray, class_id: int) -> dict:
        """Cosine-argmax assignment of buffered rows to this class's
        prototypes; returns {j: mean of assigned rows} for nonempty j."""
        if not self.initialized:
            raise PrototypeError("prototype pool not initialized")
        rows = np.asarray(rows, dtype=np.float64)
        if rows.size == 0:
            return {}
        unit = _normalize_rows(rows)
        sims = unit @ self.prototypes[class_id].T  # (K, C)
        assign = np.argmax(sims, axis=1)
        out = {}
        for j in range(self.clusters_per_class):
            members = rows[assign == j]
            if members.shape[0]:
                out[j] = members.mean(axis=0)
        return out

    def update_online(self, class_id: int, centroids: dict,
                      momentum: float | None = None) -> None:
        """c <- Normalize(beta c + (1 - beta) c_hat) for prototypes that
        received a centroid; others stay untouched."""
        if not self.initialized:
            raise PrototypeError("prototype pool not initialized")
        beta = self.momentum if momentum is None else momentum
        for j, c_hat in centroids.items():
            mixed = beta * self.prototypes[class_id, j] + (1.0 - beta) * c_hat
            self.prototypes[class_id, j] = _normalize_rows(mixed)

    def step(self, p_teacher: np.ndarray, v_teacher: np.ndarray, tau_plus: float,
             rng: np.random.Generator, capacity: int = DEFAULT_BUFFER_CAPACITY) -> None:
        """One online iteration: fresh buffers -> collect -> assign -> update."""
        buf = FeatureBuffer(self.n_classes, capacity=capacity)
        collect(p_teacher, v_teacher, tau_plus, buf, rng)
        for i in range(self.n_classes):
            centroids = self.assign_and_centroid(buf.as_matrix(i), i)
            self.update_online(i, centroids)

    def state_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "clusters_per_class": self.clusters_per_class,
            "momentum": self.momentum,
            "prototypes": None if self.prototypes is None else self.prototypes.copy(),
            "initialized": self.initialized,
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> "PrototypePool":
        pool = cls(
            n_classes=int(state["n_classes"]),
            clusters_per_class=int(state["clusters_per_class"]),
            momentum=float(state["momentum"]),
        )
        if state["prototypes"] is not None:
            pool.prototypes = np.asarray(state["prototypes"], dtype=np.float64)
        pool.initialized = bool(state["initialized"])
        return pool

    def export_rows(self, path) -> None:
        """Line-delimited prototype dump: class, cluster, then the vector."""
        if not self.initialized:
            raise PrototypeError("prototype pool not initialized")
        with open(path, "w") as fh:
            for i in range(self.n_classes):
                for j in range(self.clusters_per_class):
                    vec = " ".join(f"{x:.17g}" for x in self.prototypes[i, j])
                    fh.write(f"{i} {j} {vec}\n")
