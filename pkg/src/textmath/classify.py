"""Supervised subject-class prediction over encoded feature rows.

Six algorithms, all implemented directly on numpy: one-vs-rest logistic
regression, one-vs-rest linear SVM (hinge loss), k-nearest neighbors, a
one-hidden-layer MLP, a CART decision tree, and a random forest. Every fit
is deterministic for a fixed seed, and every algorithm exposes per-class
scores so ranked top-k prediction works uniformly.

Tie policy: equal scores resolve by label_set order, equal distances by
lower sample index, equal split gains by lower feature index then lower
threshold.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .encode import EncodedMatrix
from .errors import (
    DimensionMismatchError,
    KTooLargeError,
    SingleClassTrainingError,
)

ALGOS = ("logreg", "linear_svc", "knn", "mlp", "dectree", "randforest")

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "logreg": {"C": 1.0, "max_epochs": 1000, "tol": 1e-4},
    "linear_svc": {"C": 1.0, "max_epochs": 1000},
    "knn": {"k": 5},
    "mlp": {
        "hidden": 500,
        "step": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "batch_size": 32,
        "max_epochs": 200,
        "tol": 1e-5,
        "patience": 10,
    },
    "dectree": {},
    "randforest": {"n_trees": 100, "bootstrap": True, "max_features": "sqrt"},
}


@dataclass(frozen=True)
class ClassifierSpec:
    algo: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.algo not in ALGOS:
            raise ValueError(f"unknown classifier algo {self.algo!r}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.algo])
        if unknown:
            raise ValueError(f"unknown {self.algo} params: {sorted(unknown)}")
        merged = {**DEFAULT_PARAMS[self.algo], **self.params}
        if self.algo == "knn" and merged["k"] < 1:
            raise ValueError("knn.k must be >= 1")
        if self.algo == "mlp" and merged["hidden"] < 1:
            raise ValueError("mlp.hidden must be >= 1")
        object.__setattr__(self, "params", merged)


@dataclass
class ClassifierModel:
    spec: ClassifierSpec
    label_set: list[str]
    state: dict[str, Any]
    n_features: int


def _as_features(X: EncodedMatrix | np.ndarray) -> np.ndarray:
    if isinstance(X, EncodedMatrix):
        return X.features
    return np.asarray(X, dtype=np.float64)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


# --- logistic regression ----------------------------------------------------


def logreg_objective(
    wb: np.ndarray, X: np.ndarray, T: np.ndarray, lam: float
) -> tuple[float, np.ndarray]:
    """Mean one-vs-rest log loss + (lam/2)·‖W‖²; bias unregularized.

    ``wb`` is the flat [W (C×d), b (C)] parameter vector; T is 0/1 with one
    column per class. Returns (objective, flat gradient).
    """
    n, d = X.shape
    c = T.shape[1]
    W = wb[: c * d].reshape(c, d)
    b = wb[c * d :]
    Z = X @ W.T + b
    # log(1+exp(-s z)) with s = ±1 written via logaddexp for stability
    S = 2.0 * T - 1.0
    loss = np.logaddexp(0.0, -S * Z).sum() / n + 0.5 * lam * (W * W).sum()
    P = _sigmoid(Z)
    R = (P - T) / n
    grad_W = R.T @ X + lam * W
    grad_b = R.sum(axis=0)
    return float(loss), np.concatenate([grad_W.ravel(), grad_b])


def _fit_logreg(X: np.ndarray, T: np.ndarray, params: dict[str, Any]) -> dict[str, Any]:
    n, d = X.shape
    c = T.shape[1]
    lam = 1.0 / (params["C"] * n)
    # Gradient-descent step from a Lipschitz bound of the logistic data term.
    lip = 0.25 * ((X * X).sum() + n) / n + lam
    lr = 1.0 / lip
    wb = np.zeros(c * d + c)
    for _ in range(params["max_epochs"]):
        _, grad = logreg_objective(wb, X, T, lam)
        wb -= lr * grad
        if np.max(np.abs(grad)) < params["tol"]:
            break
    return {"W": wb[: c * d].reshape(c, d), "b": wb[c * d :]}


def _scores_logreg(state: dict[str, Any], X: np.ndarray) -> np.ndarray:
    return _sigmoid(X @ np.asarray(state["W"]).T + np.asarray(state["b"]))


# --- linear SVM -------------------------------------------------------------


def svc_objective(w: np.ndarray, b: float, X: np.ndarray, s: np.ndarray, C: float) -> float:
    """Primal hinge objective 0.5·‖w‖² + C·Σ max(0, 1 − s·(Xw+b))."""
    margins = 1.0 - s * (X @ w + b)
    return float(0.5 * w @ w + C * np.clip(margins, 0.0, None).sum())


def _fit_linear_svc(X: np.ndarray, T: np.ndarray, params: dict[str, Any]) -> dict[str, Any]:
    n, d = X.shape
    C = params["C"]
    W = np.zeros((T.shape[1], d))
    b = np.zeros(T.shape[1])
    histories = []
    for ci in range(T.shape[1]):
        s = 2.0 * T[:, ci] - 1.0
        w = np.zeros(d)
        bc = 0.0
        obj = svc_objective(w, bc, X, s, C)
        history = [obj]
        lr = 1.0 / (C * ((X * X).sum() + n) / n + 1.0)
        for _ in range(params["max_epochs"]):
            active = (1.0 - s * (X @ w + bc)) > 0
            grad_w = w - C * (s[active] @ X[active])
            grad_b = -C * s[active].sum()
            # Backtracking keeps the objective non-increasing even though
            # the hinge is only subdifferentiable.
            trial_obj = svc_objective(w - lr * grad_w, bc - lr * grad_b, X, s, C)
            if trial_obj <= obj:
                w -= lr * grad_w
                bc -= lr * grad_b
                improved = obj - trial_obj
                obj = trial_obj
                lr *= 1.1
                if improved < 1e-8 * (1.0 + abs(obj)):
                    history.append(obj)
                    break
            else:
                lr *= 0.5
                if lr < 1e-14:
                    history.append(obj)
                    break
            history.append(obj)
        W[ci] = w
        b[ci] = bc
        histories.append(history)
    return {"W": W, "b": b, "objective_histories": histories}


def _scores_linear_svc(state: dict[str, Any], X: np.ndarray) -> np.ndarray:
    return X @ np.asarray(state["W"]).T + np.asarray(state["b"])


# --- k nearest neighbors ----------------------------------------------------


def _scores_knn(state: dict[str, Any], X: np.ndarray, n_classes: int) -> np.ndarray:
    train = np.asarray(state["X"])
    y_idx = np.asarray(state["y_idx"], dtype=np.intp)
    k = state["k"]
    scores = np.zeros((X.shape[0], n_classes))
    sample_idx = np.arange(train.shape[0])
    for row, x in enumerate(X):
        dist = np.sqrt(((train - x) ** 2).sum(axis=1))
        nearest = np.lexsort((sample_idx, dist))[:k]
        votes = np.bincount(y_idx[nearest], minlength=n_classes)
        scores[row] = votes / k
    return scores


# --- MLP --------------------------------------------------------------------


def _unpack_mlp(theta: np.ndarray, d: int, h: int, c: int):
    i = 0
    W1 = theta[i : i + d * h].reshape(h, d)
    i += d * h
    b1 = theta[i : i + h]
    i += h
    W2 = theta[i : i + h * c].reshape(c, h)
    i += h * c
    b2 = theta[i : i + c]
    return W1, b1, W2, b2


def _mlp_forward(theta: np.ndarray, X: np.ndarray, h: int, c: int):
    W1, b1, W2, b2 = _unpack_mlp(theta, X.shape[1], h, c)
    A = np.maximum(X @ W1.T + b1, 0.0)
    Z = A @ W2.T + b2
    Z -= Z.max(axis=1, keepdims=True)
    expz = np.exp(Z)
    P = expz / expz.sum(axis=1, keepdims=True)
    return A, P


def mlp_objective(
    theta: np.ndarray, X: np.ndarray, T: np.ndarray, hidden: int
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy of a d→hidden(ReLU)→classes net."""
    n = X.shape[0]
    c = T.shape[1]
    W1, b1, W2, b2 = _unpack_mlp(theta, X.shape[1], hidden, c)
    A, P = _mlp_forward(theta, X, hidden, c)
    loss = float(-(T * np.log(np.clip(P, 1e-12, None))).sum() / n)
    dZ = (P - T) / n
    grad_W2 = dZ.T @ A
    grad_b2 = dZ.sum(axis=0)
    dA = dZ @ W2
    dA[A <= 0.0] = 0.0
    grad_W1 = dA.T @ X
    grad_b1 = dA.sum(axis=0)
    grad = np.concatenate([grad_W1.ravel(), grad_b1, grad_W2.ravel(), grad_b2])
    return loss, grad


def _init_mlp(rng: np.random.Generator, d: int, h: int, c: int) -> np.ndarray:
    lim1 = math.sqrt(6.0 / (d + h))
    lim2 = math.sqrt(6.0 / (h + c))
    return np.concatenate(
        [
            rng.uniform(-lim1, lim1, d * h),
            np.zeros(h),
            rng.uniform(-lim2, lim2, h * c),
            np.zeros(c),
        ]
    )


def _fit_mlp(
    X: np.ndarray, T: np.ndarray, params: dict[str, Any], seed: int
) -> dict[str, Any]:
    n, d = X.shape
    h, c = params["hidden"], T.shape[1]
    rng = np.random.default_rng(seed)
    theta = _init_mlp(rng, d, h, c)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    step, b1, b2 = params["step"], params["beta1"], params["beta2"]
    t = 0
    best_loss = math.inf
    stall = 0
    for _ in range(params["max_epochs"]):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, params["batch_size"]):
            batch = order[start : start + params["batch_size"]]
            loss, grad = mlp_objective(theta, X[batch], T[batch], h)
            epoch_loss += loss * len(batch)
            t += 1
            m = b1 * m + (1 - b1) * grad
            v = b2 * v + (1 - b2) * grad * grad
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            theta -= step * m_hat / (np.sqrt(v_hat) + 1e-8)
        epoch_loss /= n
        if best_loss - epoch_loss < params["tol"]:
            stall += 1
            if stall >= params["patience"]:
                break
        else:
            stall = 0
        best_loss = min(best_loss, epoch_loss)
    return {"theta": theta, "hidden": h}


def _scores_mlp(state: dict[str, Any], X: np.ndarray, n_classes: int) -> np.ndarray:
    _, P = _mlp_forward(np.asarray(state["theta"]), X, state["hidden"], n_classes)
    return P


# --- CART decision tree -----------------------------------------------------


def _best_split(
    X: np.ndarray, y_idx: np.ndarray, rows: np.ndarray, n_classes: int, features: np.ndarray
) -> tuple[int, float] | None:
    """Lowest-weighted-Gini (feature, threshold); ties favor the earliest."""
    n = len(rows)
    best = None
    best_score = math.inf
    for f in features:
        vals = X[rows, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        if sv[0] == sv[-1]:
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y_idx[rows][order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]  # counts left of each boundary
        total = left[-1] + onehot[-1]
        right = total - left
        nl = np.arange(1, n)
        nr = n - nl
        gini_l = 1.0 - (left**2).sum(axis=1) / nl**2
        gini_r = 1.0 - (right**2).sum(axis=1) / nr**2
        weighted = (nl * gini_l + nr * gini_r) / n
        valid = sv[:-1] < sv[1:]
        weighted[~valid] = math.inf
        pos = int(np.argmin(weighted))
        if weighted[pos] < best_score:
            best_score = weighted[pos]
            best = (int(f), float((sv[pos] + sv[pos + 1]) / 2.0))
    return best


def _grow_tree(
    X: np.ndarray,
    y_idx: np.ndarray,
    rows: np.ndarray,
    n_classes: int,
    rng: np.random.Generator | None,
    max_features: int | None,
) -> list[dict[str, Any]]:
    """Depth-first node list; leaves carry class-fraction distributions."""
    nodes: list[dict[str, Any]] = []

    def leaf(rows_: np.ndarray) -> int:
        counts = np.bincount(y_idx[rows_], minlength=n_classes)
        nodes.append({"dist": (counts / counts.sum()).tolist()})
        return len(nodes) - 1

    def grow(rows_: np.ndarray) -> int:
        if len(np.unique(y_idx[rows_])) == 1:
            return leaf(rows_)
        d = X.shape[1]
        if max_features is None or max_features >= d:
            features = np.arange(d)
        else:
            features = np.sort(rng.choice(d, size=max_features, replace=False))
        split = _best_split(X, y_idx, rows_, n_classes, features)
        if split is None and max_features is not None and max_features < d:
            # Subsampled features were all constant; retry over every feature.
            split = _best_split(X, y_idx, rows_, n_classes, np.arange(d))
        if split is None:
            return leaf(rows_)
        f, threshold = split
        node_id = len(nodes)
        nodes.append({"feature": f, "threshold": threshold, "left": -1, "right": -1})
        go_left = X[rows_, f] <= threshold
        nodes[node_id]["left"] = grow(rows_[go_left])
        nodes[node_id]["right"] = grow(rows_[~go_left])
        return node_id

    grow(rows)
    return nodes


def _tree_scores(nodes: list[dict[str, Any]], X: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((X.shape[0], n_classes))
    for i, x in enumerate(X):
        node = nodes[0]
        while "feature" in node:
            node = nodes[node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]]
        out[i] = node["dist"]
    return out


def _fit_dectree(X: np.ndarray, y_idx: np.ndarray, n_classes: int) -> dict[str, Any]:
    nodes = _grow_tree(X, y_idx, np.arange(X.shape[0]), n_classes, None, None)
    return {"nodes": nodes}


def _fit_randforest(
    X: np.ndarray, y_idx: np.ndarray, n_classes: int, params: dict[str, Any], seed: int
) -> dict[str, Any]:
    n, d = X.shape
    if params["max_features"] == "sqrt":
        max_features = max(1, int(math.sqrt(d)))
    else:
        max_features = params["max_features"]
    trees = []
    for ss in np.random.SeedSequence(seed).spawn(params["n_trees"]):
        rng = np.random.default_rng(ss)
        rows = rng.integers(n, size=n) if params["bootstrap"] else np.arange(n)
        trees.append(_grow_tree(X, y_idx, rows, n_classes, rng, max_features))
    return {"trees": trees}


# --- shared entry points -----------------------------------------------------


def fit_classifier(
    spec: ClassifierSpec,
    X: EncodedMatrix | np.ndarray,
    y: list[str],
    label_set: list[str] | None = None,
) -> ClassifierModel:
    features = _as_features(X)
    if features.shape[0] != len(y):
        raise DimensionMismatchError(f"{features.shape[0]} rows but {len(y)} labels")
    if label_set is None:
        label_set = sorted(set(y))
    extra = set(y) - set(label_set)
    if extra:
        raise ValueError(f"labels outside label_set: {sorted(extra)}")
    if len(set(y)) < 2:
        raise SingleClassTrainingError("training data has fewer than 2 distinct labels")
    label_to_idx = {lab: i for i, lab in enumerate(label_set)}
    y_idx = np.array([label_to_idx[lab] for lab in y], dtype=np.intp)
    T = np.zeros((len(y), len(label_set)))
    T[np.arange(len(y)), y_idx] = 1.0

    algo, params = spec.algo, spec.params
    if algo == "logreg":
        state = _fit_logreg(features, T, params)
    elif algo == "linear_svc":
        state = _fit_linear_svc(features, T, params)
    elif algo == "knn":
        state = {"X": features.copy(), "y_idx": y_idx.copy(), "k": min(params["k"], len(y))}
    elif algo == "mlp":
        state = _fit_mlp(features, T, params, spec.seed)
    elif algo == "dectree":
        state = _fit_dectree(features, y_idx, len(label_set))
    else:
        state = _fit_randforest(features, y_idx, len(label_set), params, spec.seed)
    return ClassifierModel(
        spec=spec, label_set=list(label_set), state=state, n_features=features.shape[1]
    )


def class_scores(model: ClassifierModel, X: EncodedMatrix | np.ndarray) -> np.ndarray:
    """Per-class scores (probabilities, margins, vote or leaf fractions)."""
    features = _as_features(X)
    if features.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"model fitted on {model.n_features} features, got {features.shape[1]}"
        )
    algo = model.spec.algo
    n_classes = len(model.label_set)
    if algo == "logreg":
        return _scores_logreg(model.state, features)
    if algo == "linear_svc":
        return _scores_linear_svc(model.state, features)
    if algo == "knn":
        return _scores_knn(model.state, features, n_classes)
    if algo == "mlp":
        return _scores_mlp(model.state, features, n_classes)
    if algo == "dectree":
        return _tree_scores(model.state["nodes"], features, n_classes)
    per_tree = [_tree_scores(nodes, features, n_classes) for nodes in model.state["trees"]]
    return np.mean(per_tree, axis=0)


def predict(model: ClassifierModel, X: EncodedMatrix | np.ndarray) -> list[str]:
    scores = class_scores(model, X)
    return [model.label_set[i] for i in np.argmax(scores, axis=1)]


def predict_ranked(
    model: ClassifierModel, X: EncodedMatrix | np.ndarray, k: int
) -> list[list[str]]:
    if not 1 <= k <= len(model.label_set):
        raise KTooLargeError(f"k={k} outside [1, {len(model.label_set)}]")
    scores = class_scores(model, X)
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return [[model.label_set[i] for i in row] for row in order]


# --- persistence --------------------------------------------------------------


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _unjsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"])
        return {k: _unjsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unjsonable(v) for v in obj]
    return obj


FORMAT_VERSION = 1


def save_model(model: ClassifierModel, path: str | Path) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "spec": {"algo": model.spec.algo, "params": model.spec.params, "seed": model.spec.seed},
        "label_set": model.label_set,
        "n_features": model.n_features,
        "state": _jsonable(model.state),
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False) + "\n", "utf-8")


def load_model(path: str | Path) -> ClassifierModel:
    payload = json.loads(Path(path).read_text("utf-8"))
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {payload.get('format_version')!r}")
    spec = ClassifierSpec(
        algo=payload["spec"]["algo"],
        params=payload["spec"]["params"],
        seed=payload["spec"]["seed"],
    )
    return ClassifierModel(
        spec=spec,
        label_set=payload["label_set"],
        state=_unjsonable(payload["state"]),
        n_features=payload["n_features"],
    )
