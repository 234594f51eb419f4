"""Unsupervised grouping of encoded feature rows.

Fixed-k family: k-means (Lloyd with k-means++ seeding and restarts), Ward
agglomerative merging, Gaussian mixtures with diagonal covariance. Unfixed-k
family: affinity propagation and flat-kernel mean shift, which discover the
cluster count themselves.

Everything is seeded and tie-breaks by lowest index, so a fixed spec and
input always yield the same partition. Cluster ids are relabeled densely in
order of first appearance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .encode import EncodedMatrix, pca_reduce
from .errors import KExceedsSamplesError

FIXED_K_ALGOS = ("kmeans", "agglomerative", "gmm")
UNFIXED_K_ALGOS = ("affinity", "meanshift")
ALGOS = FIXED_K_ALGOS + UNFIXED_K_ALGOS

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "kmeans": {"max_iter": 300, "n_restarts": 10},
    "agglomerative": {},
    "gmm": {"max_iter": 200, "tol": 1e-4, "cov_floor": 1e-6},
    "affinity": {"damping": 0.5, "max_iter": 200, "stable_iters": 15},
    "meanshift": {"quantile": 0.3, "max_iter": 300},
}


@dataclass(frozen=True)
class ClustererSpec:
    algo: str
    k: int | None = None
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    pca_dims: int | None = None

    def __post_init__(self) -> None:
        if self.algo not in ALGOS:
            raise ValueError(f"unknown clusterer algo {self.algo!r}")
        if self.algo in FIXED_K_ALGOS:
            if self.k is None:
                raise ValueError(f"{self.algo} requires k")
            if self.k < 1:
                raise ValueError("k must be >= 1")
        elif self.k is not None:
            raise ValueError(f"{self.algo} does not take k")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.algo])
        if unknown:
            raise ValueError(f"unknown {self.algo} params: {sorted(unknown)}")
        object.__setattr__(self, "params", {**DEFAULT_PARAMS[self.algo], **self.params})
        if self.pca_dims is not None and self.pca_dims < 1:
            raise ValueError("pca_dims must be >= 1")


@dataclass
class ClusterAssignment:
    sample_ids: list[str]
    cluster_ids: list[int]
    n_clusters: int
    spec: ClustererSpec
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.sample_ids) != len(self.cluster_ids):
            raise ValueError("sample_ids and cluster_ids lengths differ")
        if set(self.cluster_ids) != set(range(self.n_clusters)):
            raise ValueError("cluster ids must be dense 0..n_clusters-1")


def _dense_relabel(raw: np.ndarray) -> tuple[list[int], int]:
    """Map arbitrary cluster labels to 0..K-1 in order of first appearance."""
    mapping: dict[int, int] = {}
    out = []
    for r in raw:
        r = int(r)
        if r not in mapping:
            mapping[r] = len(mapping)
        out.append(mapping[r])
    return out, len(mapping)


def _sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at 0."""
    d2 = (X * X).sum(axis=1)[:, None] + (Y * Y).sum(axis=1)[None, :] - 2.0 * X @ Y.T
    return np.clip(d2, 0.0, None)


# --- k-means ----------------------------------------------------------------


def _kmeans_pp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = _sq_dists(X, centers[:1]).ravel()
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[c] = X[rng.integers(n)]
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            centers[c] = X[min(idx, n - 1)]
        d2 = np.minimum(d2, _sq_dists(X, centers[c : c + 1]).ravel())
    return centers


def _lloyd(
    X: np.ndarray, centers: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, list[float], int]:
    k = centers.shape[0]
    assign = np.full(X.shape[0], -1, dtype=np.intp)
    history: list[float] = []
    for it in range(max_iter):
        d2 = _sq_dists(X, centers)
        new_assign = np.argmin(d2, axis=1)
        # Empty clusters grab the point currently worst-served, lowest
        # cluster index first.
        for c in range(k):
            if not np.any(new_assign == c):
                point_d2 = d2[np.arange(len(new_assign)), new_assign]
                worst = int(np.argmax(point_d2))
                new_assign[worst] = c
                d2[worst, :] = 0.0
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = assign == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
        history.append(
            float(_sq_dists(X, centers)[np.arange(X.shape[0]), assign].sum())
        )
    return assign, centers, history, it + 1


def _fit_kmeans(
    X: np.ndarray, k: int, params: dict[str, Any], seed: int
) -> tuple[np.ndarray, dict[str, Any]]:
    best: tuple[np.ndarray, np.ndarray, list[float], int] | None = None
    for ss in np.random.SeedSequence(seed).spawn(params["n_restarts"]):
        rng = np.random.default_rng(ss)
        centers = _kmeans_pp_centers(X, k, rng)
        assign, centers, history, iters = _lloyd(X, centers.copy(), params["max_iter"])
        if best is None or history[-1] < best[2][-1]:
            best = (assign, centers, history, iters)
    assign, centers, history, iters = best
    return assign, {
        "inertia": history[-1],
        "inertia_history": history,
        "iterations": iters,
        "centers": centers,
    }


# --- Ward agglomerative -------------------------------------------------------


def _fit_agglomerative(X: np.ndarray, k: int) -> np.ndarray:
    """Bottom-up Ward merging via the Lance-Williams recurrence.

    Merge cost between singletons is the squared Euclidean distance; ties
    pick the lexicographically smallest active index pair.
    """
    n = X.shape[0]
    D = _sq_dists(X, X)
    np.fill_diagonal(D, math.inf)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    labels = np.arange(n)
    for _ in range(n - k):
        M = np.where(active[:, None] & active[None, :], D, math.inf)
        M[np.tril_indices(n)] = math.inf
        flat = int(np.argmin(M))
        i, j = divmod(flat, n)
        # Lance-Williams update of every remaining cluster's cost to i∪j.
        others = active.copy()
        others[i] = others[j] = False
        ni, nj, nk = sizes[i], sizes[j], sizes[others]
        new_d = ((ni + nk) * D[i, others] + (nj + nk) * D[j, others] - nk * D[i, j]) / (
            ni + nj + nk
        )
        D[i, others] = new_d
        D[others, i] = new_d
        sizes[i] += sizes[j]
        active[j] = False
        labels[labels == j] = i
    return labels


# --- Gaussian mixture ---------------------------------------------------------


def _log_gauss_diag(X: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """Per-sample, per-component diagonal Gaussian log density (n x k)."""
    n, d = X.shape
    out = np.empty((n, means.shape[0]))
    for c in range(means.shape[0]):
        diff2 = (X - means[c]) ** 2
        out[:, c] = -0.5 * (np.log(2.0 * np.pi * variances[c]).sum() + (diff2 / variances[c]).sum(axis=1))
    return out


def gmm_loglik(state: dict[str, Any], X: np.ndarray | EncodedMatrix) -> float:
    """Total log-likelihood of X under a fitted diagonal mixture."""
    if isinstance(X, EncodedMatrix):
        X = X.features
    X = np.asarray(X, dtype=np.float64)
    log_p = _log_gauss_diag(X, np.asarray(state["means"]), np.asarray(state["variances"]))
    weighted = log_p + np.log(np.asarray(state["weights"]))
    m = weighted.max(axis=1, keepdims=True)
    return float((m.ravel() + np.log(np.exp(weighted - m).sum(axis=1))).sum())


def _fit_gmm(
    X: np.ndarray, k: int, params: dict[str, Any], seed: int
) -> tuple[np.ndarray, dict[str, Any]]:
    n, d = X.shape
    floor = params["cov_floor"]
    km_assign, km_diag = _fit_kmeans(X, k, DEFAULT_PARAMS["kmeans"], seed)
    means = km_diag["centers"].copy()
    weights = np.array([(km_assign == c).sum() / n for c in range(k)])
    variances = np.empty((k, d))
    for c in range(k):
        variances[c] = np.clip(X[km_assign == c].var(axis=0), floor, None)

    state = {"weights": weights, "means": means, "variances": variances}
    history = [gmm_loglik(state, X)]
    for _ in range(params["max_iter"]):
        # E step: responsibilities via logsumexp.
        weighted = _log_gauss_diag(X, means, variances) + np.log(weights)
        m = weighted.max(axis=1, keepdims=True)
        log_norm = m + np.log(np.exp(weighted - m).sum(axis=1, keepdims=True))
        resp = np.exp(weighted - log_norm)
        # M step.
        nk = resp.sum(axis=0)
        nk = np.clip(nk, 1e-12, None)
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for c in range(k):
            diff2 = (X - means[c]) ** 2
            variances[c] = np.clip((resp[:, c] @ diff2) / nk[c], floor, None)
        state = {"weights": weights, "means": means, "variances": variances}
        history.append(gmm_loglik(state, X))
        if abs(history[-1] - history[-2]) < params["tol"]:
            break
    weighted = _log_gauss_diag(X, means, variances) + np.log(weights)
    assign = np.argmax(weighted, axis=1)
    diag = {"loglik_history": history, "converged": len(history) - 1 < params["max_iter"]}
    return assign, {**diag, **{k_: v for k_, v in state.items()}}


# --- affinity propagation ------------------------------------------------------


def _fit_affinity(
    X: np.ndarray, params: dict[str, Any], seed: int
) -> tuple[np.ndarray, dict[str, Any]]:
    n = X.shape[0]
    S = -_sq_dists(X, X)
    off_diag = S[~np.eye(n, dtype=bool)]
    preference = float(np.median(off_diag)) if n > 1 else 0.0
    np.fill_diagonal(S, preference)
    # Tiny seeded jitter breaks exact symmetry so oscillation cannot lock in.
    rng = np.random.default_rng(seed)
    S = S + 1e-12 * (np.abs(S).max() + 1.0) * rng.standard_normal((n, n))

    damping = params["damping"]
    R = np.zeros((n, n))
    A = np.zeros((n, n))
    idx = np.arange(n)
    stable = 0
    exemplars = np.zeros(n, dtype=bool)
    converged = False
    iterations = 0
    for iterations in range(1, params["max_iter"] + 1):
        # Responsibility update.
        AS = A + S
        first = AS.argmax(axis=1)
        first_val = AS[idx, first]
        AS[idx, first] = -math.inf
        second_val = AS.max(axis=1)
        new_R = S - first_val[:, None]
        new_R[idx, first] = S[idx, first] - second_val
        R = damping * R + (1.0 - damping) * new_R
        # Availability update.
        Rp = np.clip(R, 0.0, None)
        np.fill_diagonal(Rp, R.diagonal())
        col_sums = Rp.sum(axis=0)
        new_A = np.minimum(0.0, col_sums[None, :] - Rp)
        new_A[idx, idx] = col_sums - Rp.diagonal()
        A = damping * A + (1.0 - damping) * new_A
        new_exemplars = (A + R).diagonal() > 0
        if np.array_equal(new_exemplars, exemplars) and new_exemplars.any():
            stable += 1
            if stable >= params["stable_iters"]:
                converged = True
                exemplars = new_exemplars
                break
        else:
            stable = 0
        exemplars = new_exemplars

    ex_idx = np.flatnonzero(exemplars)
    if len(ex_idx) == 0:
        # Nothing declared itself an exemplar; fall back to the best-scoring
        # point so downstream code still gets a partition.
        ex_idx = np.array([int(np.argmax((A + R).diagonal()))])
    crit = (A + R)[:, ex_idx]
    assign = ex_idx[np.argmax(crit, axis=1)]
    assign[ex_idx] = ex_idx
    diag = {
        "converged": converged,
        "iterations": iterations,
        "exemplars": ex_idx.tolist(),
        "preference": preference,
    }
    return assign, diag


# --- mean shift -----------------------------------------------------------------


def estimate_bandwidth(X: np.ndarray, quantile: float = 0.3) -> float:
    """Mean over samples of the distance to their ceil(quantile*n)-th neighbor."""
    n = X.shape[0]
    if n < 2:
        return 0.0
    k = min(max(1, math.ceil(quantile * n)), n - 1)
    d = np.sqrt(_sq_dists(X, X))
    np.fill_diagonal(d, math.inf)
    d.sort(axis=1)
    return float(d[:, k - 1].mean())


def _fit_meanshift(X: np.ndarray, params: dict[str, Any]) -> tuple[np.ndarray, dict[str, Any]]:
    n = X.shape[0]
    bandwidth = estimate_bandwidth(X, params["quantile"])
    if bandwidth <= 0.0:
        return np.zeros(n, dtype=np.intp), {"bandwidth": 0.0, "modes": 1}
    shifted = X.copy()
    for i in range(n):
        x = shifted[i]
        for _ in range(params["max_iter"]):
            within = _sq_dists(X, x[None, :]).ravel() <= bandwidth**2
            new_x = X[within].mean(axis=0)
            if np.linalg.norm(new_x - x) < 1e-3 * bandwidth:
                x = new_x
                break
            x = new_x
        shifted[i] = x
    intensity = (_sq_dists(X, shifted) <= bandwidth**2).sum(axis=0)
    # Strongest modes first; merge anything within half a bandwidth of an
    # already accepted mode.
    order = np.lexsort((np.arange(n), -intensity))
    accepted: list[int] = []
    for i in order:
        if all(
            np.linalg.norm(shifted[i] - shifted[j]) > bandwidth / 2.0 for j in accepted
        ):
            accepted.append(int(i))
    modes = shifted[accepted]
    assign = np.argmin(_sq_dists(X, modes), axis=1)
    return assign, {"bandwidth": bandwidth, "modes": len(accepted)}


# --- entry point -------------------------------------------------------------------


def fit_predict_clusterer(spec: ClustererSpec, X: EncodedMatrix) -> ClusterAssignment:
    features = X.features
    if spec.pca_dims is not None:
        features = pca_reduce(X, min(spec.pca_dims, X.n_samples - 1, X.n_features)).features
    n = features.shape[0]
    if spec.k is not None and spec.k > n:
        raise KExceedsSamplesError(f"k={spec.k} exceeds {n} samples")

    if spec.algo == "kmeans":
        raw, diag = _fit_kmeans(features, spec.k, spec.params, spec.seed)
        diag = {
            "inertia": diag["inertia"],
            "inertia_history": diag["inertia_history"],
            "iterations": diag["iterations"],
        }
    elif spec.algo == "agglomerative":
        raw = _fit_agglomerative(features, spec.k)
        diag = {}
    elif spec.algo == "gmm":
        raw, state = _fit_gmm(features, spec.k, spec.params, spec.seed)
        diag = {
            "converged": state["converged"],
            "final_loglik": state["loglik_history"][-1],
            "loglik_history": state["loglik_history"],
        }
    elif spec.algo == "affinity":
        raw, diag = _fit_affinity(features, spec.params, spec.seed)
    else:
        raw, diag = _fit_meanshift(features, spec.params)

    cluster_ids, n_clusters = _dense_relabel(np.asarray(raw))
    return ClusterAssignment(
        sample_ids=list(X.sample_ids),
        cluster_ids=cluster_ids,
        n_clusters=n_clusters,
        spec=spec,
        diagnostics=diag,
    )


def fit_gmm_state(
    X: EncodedMatrix | np.ndarray, k: int, seed: int = 0, params: dict[str, Any] | None = None
) -> tuple[np.ndarray, dict[str, Any]]:
    """Fitted mixture state with its log-likelihood history, for inspection."""
    features = X.features if isinstance(X, EncodedMatrix) else np.asarray(X, dtype=np.float64)
    merged = {**DEFAULT_PARAMS["gmm"], **(params or {})}
    return _fit_gmm(features, k, merged, seed)


def dump_assignment(assignment: ClusterAssignment, path: str | Path) -> None:
    """CSV `sample_id,cluster_id` plus a JSON sidecar with spec + diagnostics."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("sample_id,cluster_id\n")
        for sid, cid in zip(assignment.sample_ids, assignment.cluster_ids):
            fh.write(f"{sid},{cid}\n")
    sidecar = {
        "spec": {
            "algo": assignment.spec.algo,
            "k": assignment.spec.k,
            "params": assignment.spec.params,
            "seed": assignment.spec.seed,
            "pca_dims": assignment.spec.pca_dims,
        },
        "n_clusters": assignment.n_clusters,
        "diagnostics": {
            k: (v if not isinstance(v, np.ndarray) else v.tolist())
            for k, v in assignment.diagnostics.items()
        },
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, ensure_ascii=False, indent=2, default=float) + "\n", "utf-8"
    )
