"""From pose maps to a dependency matrix.

The pose Jacobian of a sensor is squashed to a 4xN matrix of column norms
(one row each for the three rotation axes and the translation).  That matrix
is invariant to any constant change of reference frame, so its zero columns
identify joints the sensor does not depend on regardless of where the pose
map anchors itself.  Aggregating the squashed Jacobian over many sampled
configurations, max-filtering, normalizing and thresholding yields one
binary dependency row per sensor; clustering merges near-duplicate rows and
a separation objective helps pick the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .errors import DegenerateSensorError
from .topology import DependencyMatrix

DEFAULT_DELTA_GRID = np.linspace(0.02, 0.98, 50)


def tij(jac_fn, theta) -> np.ndarray:
    """Transform-invariant squash of a 12xN pose Jacobian: entry (r, j) is
    the Euclidean norm of the j-th column of the r-th 3-row block."""
    jac = np.asarray(jac_fn(theta), dtype=float)
    if jac.ndim != 2 or jac.shape[0] != 12:
        raise ValueError(f"expected a 12xN Jacobian, got shape {jac.shape}")
    blocks = jac.reshape(4, 3, -1)
    return np.linalg.norm(blocks, axis=1)


def tij_variance(jac_fn, thetas) -> np.ndarray:
    """Elementwise population variance of the squashed Jacobian over a
    sample of configurations.  A joint the sensor never depends on keeps an
    exactly zero column."""
    return tij_aggregate(jac_fn, thetas, method="variance")


def tij_aggregate(jac_fn, thetas, method: str = "second_moment") -> np.ndarray:
    """Aggregate the squashed Jacobian over sampled configurations.

    ``variance`` misses a column whose norm is nonzero but constant in
    theta -- which is exactly what an ideal pose map produces for a sensor's
    own terminal joint, since that column's norm reduces to
    |hat(axis) @ mount| regardless of configuration.  ``second_moment``
    (variance plus squared mean) is zero precisely when the column is
    identically zero, so it is the default for the recovery pipeline;
    ``mean`` behaves the same way on the non-negative entries.
    """
    thetas = list(thetas)
    if len(thetas) < 2:
        raise ValueError("need at least two configurations")
    stack = np.stack([tij(jac_fn, th) for th in thetas])
    if method == "variance":
        return stack.var(axis=0)
    if method == "mean":
        return stack.mean(axis=0)
    if method == "second_moment":
        return (stack**2).mean(axis=0)
    if method == "rms":
        return np.sqrt((stack**2).mean(axis=0))
    raise ValueError(f"unknown aggregation method {method!r}")


def feature_raw(jbar: np.ndarray) -> np.ndarray:
    """Column-wise max of the aggregated 4xN matrix, normalized to unit
    Euclidean length.  All-zero input means the sensor never moved."""
    jbar = np.asarray(jbar, dtype=float)
    m = jbar.max(axis=0)
    norm = float(np.linalg.norm(m))
    if norm == 0.0:
        raise DegenerateSensorError("sensor shows no joint dependence at all")
    return m / norm


def threshold(dprime: np.ndarray, delta: float) -> np.ndarray:
    """Binarize a normalized feature: 1 where the entry exceeds delta."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie strictly between 0 and 1")
    return (np.asarray(dprime, dtype=float) > delta).astype(np.int8)


# ---------------------------------------------------------------------------
# Row clustering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterResult:
    assignments: np.ndarray  # (n,) cluster index per row
    means: np.ndarray  # (k, d) cluster means (empirical, hard assignment)
    counts: np.ndarray  # (k,)

    @property
    def n_clusters(self) -> int:
        return len(self.counts)


def _finalize_clusters(x: np.ndarray, labels: np.ndarray) -> ClusterResult:
    uniq = np.unique(labels)
    remap = {old: new for new, old in enumerate(uniq)}
    labels = np.array([remap[v] for v in labels])
    means = np.stack([x[labels == k].mean(axis=0) for k in range(len(uniq))])
    counts = np.array([int((labels == k).sum()) for k in range(len(uniq))])
    return ClusterResult(labels, means, counts)


def _dp_means(x: np.ndarray, penalty: float, max_iter: int = 100) -> np.ndarray:
    """Deterministic hard-assignment clustering: a row farther than the
    penalty (squared distance) from every center spawns a new one."""
    centers = [x[0]]
    labels = np.zeros(len(x), dtype=int)
    for _ in range(max_iter):
        changed = False
        for i, row in enumerate(x):
            d2 = np.array([float(((row - c) ** 2).sum()) for c in centers])
            j = int(np.argmin(d2))
            if d2[j] > penalty:
                centers.append(row.copy())
                j = len(centers) - 1
            if labels[i] != j:
                labels[i] = j
                changed = True
        centers = [
            x[labels == k].mean(axis=0) for k in range(len(centers))
            if (labels == k).any()
        ]
        labels = _compact_labels(labels)
        if not changed:
            break
    return labels


def _compact_labels(labels: np.ndarray) -> np.ndarray:
    uniq = sorted(set(int(v) for v in labels))
    remap = {old: new for new, old in enumerate(uniq)}
    return np.array([remap[int(v)] for v in labels])


def _vb_dpgmm(
    x: np.ndarray, alpha: float, seed: int, max_iter: int = 200, tol: float = 1e-6
) -> np.ndarray:
    """Truncated stick-breaking Gaussian mixture with diagonal covariance,
    fit by standard variational updates; hard assignments by argmax
    responsibility."""
    n, d = x.shape
    t = n  # truncation at the row count
    rng = np.random.default_rng(seed)
    resp = rng.dirichlet(np.ones(t), size=n)

    m0 = x.mean(axis=0)
    beta0 = 1e-3
    a0 = 1.0
    b0 = 0.05

    prev = resp
    for _ in range(max_iter):
        nk = resp.sum(axis=0) + 1e-12
        xbar = (resp.T @ x) / nk[:, None]
        diff2 = np.zeros((t, d))
        for k in range(t):
            diff2[k] = (resp[:, k][:, None] * (x - xbar[k]) ** 2).sum(axis=0) / nk[k]

        # stick-breaking weights
        g1 = 1.0 + nk
        g2 = alpha + np.concatenate([np.cumsum(nk[::-1])[-2::-1], [0.0]])
        e_ln_v = digamma(g1) - digamma(g1 + g2)
        e_ln_1mv = digamma(g2) - digamma(g1 + g2)
        e_ln_pi = e_ln_v + np.concatenate([[0.0], np.cumsum(e_ln_1mv)[:-1]])

        # Gaussian-gamma posteriors (diagonal)
        beta = beta0 + nk
        m = (beta0 * m0 + nk[:, None] * xbar) / beta[:, None]
        a = a0 + nk / 2.0
        b = b0 + 0.5 * (
            nk[:, None] * diff2
            + (beta0 * nk / beta)[:, None] * (xbar - m0) ** 2
        )

        e_ln_prec = digamma(a)[:, None] - np.log(b)
        e_prec = a[:, None] / b
        quad = (
            ((x[:, None, :] - m[None, :, :]) ** 2 * e_prec[None, :, :]).sum(axis=2)
            + (d / beta)[None, :]
        )
        ln_rho = e_ln_pi[None, :] + 0.5 * e_ln_prec.sum(axis=1)[None, :] - 0.5 * quad
        ln_rho -= ln_rho.max(axis=1, keepdims=True)
        resp = np.exp(ln_rho)
        resp /= resp.sum(axis=1, keepdims=True)
        if np.abs(resp - prev).max() < tol:
            break
        prev = resp
    return _compact_labels(resp.argmax(axis=1))


def cluster_rows(
    features,
    alpha: float = 1.0,
    seed: int = 0,
    method: str = "vb",
) -> ClusterResult:
    """Cluster dependency rows; returns per-cluster means and sizes.

    ``vb`` is the stick-breaking mixture; ``dpmeans`` is a deterministic
    hard-assignment fallback whose spawn penalty shrinks as the
    concentration alpha grows.
    """
    x = np.asarray([np.asarray(f, dtype=float) for f in features])
    if x.ndim != 2 or len(x) < 1:
        raise ValueError("need at least one feature row")
    if len(x) == 1:
        return ClusterResult(np.zeros(1, dtype=int), x.copy(), np.array([1]))
    if method == "dpmeans":
        labels = _dp_means(x, penalty=1.0 / (1.0 + alpha))
    elif method == "vb":
        labels = _vb_dpgmm(x, alpha, seed)
    else:
        raise ValueError(f"unknown clustering method {method!r}")
    return _finalize_clusters(x, labels)


def reduce_rows(clusters: ClusterResult, max_rows: int) -> list[np.ndarray]:
    """Keep at most ``max_rows`` cluster means, largest clusters first,
    binarize each at 0.5 and drop duplicates."""
    if max_rows < 1:
        raise ValueError("max_rows must be positive")
    order = sorted(
        range(clusters.n_clusters),
        key=lambda k: (-int(clusters.counts[k]), clusters.means[k].tolist()),
    )
    out: list[np.ndarray] = []
    seen = set()
    for k in order[:max_rows]:
        row = (clusters.means[k] > 0.5).astype(np.int8)
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(row)
    return out


def separation_score(rows, clusters: ClusterResult, lam: float) -> float:
    """Separation objective for one candidate threshold: |det| of the
    pairwise cluster-mean distance matrix over the within-cluster squared
    dispersion, plus lam times the cluster-size entropy.  The distance
    matrix is not sign-definite, so the absolute determinant is used."""
    mu = clusters.means
    s = np.linalg.norm(mu[:, None, :] - mu[None, :, :], axis=2)
    x = np.asarray(rows, dtype=float)
    m = 0.0
    for c in range(clusters.n_clusters):
        member = x[clusters.assignments == c]
        m += float(((member - mu[c]) ** 2).sum())
    p = clusters.counts / clusters.counts.sum()
    return abs(float(np.linalg.det(s))) / max(m, 1e-12) - lam * float(
        np.sum(p * np.log(p))
    )


def optimize_delta(
    features_raw,
    delta_grid=None,
    lam: float = 1.0,
    alpha: float = 1.0,
    seed: int = 0,
    method: str = "vb",
) -> float:
    """Pick the threshold that best separates the binarized rows into tight,
    balanced clusters.  Grid values that leave a single cluster are skipped;
    ties go to the smaller threshold."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    grid = DEFAULT_DELTA_GRID if delta_grid is None else np.asarray(delta_grid, float)
    if grid.size == 0:
        raise ValueError("empty delta grid")
    feats = [np.asarray(f, dtype=float) for f in features_raw]
    best_delta = None
    best_score = -np.inf
    for delta in grid:
        rows = [threshold(f, float(delta)) for f in feats]
        clusters = cluster_rows(rows, alpha=alpha, seed=seed, method=method)
        if clusters.n_clusters < 2:
            continue
        score = separation_score(rows, clusters, lam)
        if score > best_score:
            best_score = score
            best_delta = float(delta)
    if best_delta is None:
        raise ValueError("no threshold in the grid produced more than one cluster")
    return best_delta


def build_matrix(features, labels, col_labels) -> DependencyMatrix:
    """Stack binary rows into a labelled matrix, merging duplicate rows and
    dropping all-zero ones (a sensor rigidly attached to the root).  The
    merged groups record which input labels collapsed into each kept row."""
    feats = [np.asarray(f, dtype=np.int8) for f in features]
    if len(feats) != len(labels):
        raise ValueError("one label per feature required")
    kept_rows: list[np.ndarray] = []
    kept_labels: list[str] = []
    groups: dict[str, list[str]] = {}
    index_of: dict[bytes, int] = {}
    for row, label in zip(feats, labels):
        if row.sum() == 0:
            continue
        key = row.tobytes()
        if key in index_of:
            groups[kept_labels[index_of[key]]].append(label)
        else:
            index_of[key] = len(kept_rows)
            kept_rows.append(row)
            kept_labels.append(label)
            groups[label] = [label]
    if not kept_rows:
        raise DegenerateSensorError("every row was all-zero")
    return DependencyMatrix(
        tuple(kept_labels),
        tuple(col_labels),
        np.stack(kept_rows),
        {k: tuple(v) for k, v in groups.items()},
    )
