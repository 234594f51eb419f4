"""Measurement layer: cross-validated accuracy, cluster purity, confusion
matrices, text-math similarity correlation, relative runtimes, and report
tables.

Encoders are refitted on each training fold before the held-out fold is
transformed, so no vocabulary or embedding information leaks across the
split. Purity comes in two flavors: the macro mean over clusters (headline)
and the sample-weighted variant, which differ exactly when cluster sizes are
uneven.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from .classify import ClassifierSpec, fit_classifier, predict
from .cluster import ClusterAssignment
from .corpus import Corpus
from .encode import EncodedMatrix, EncodingSpec, fit_encoder
from .errors import (
    LengthMismatchError,
    RaggedGridError,
    TooFewSamplesError,
    ZeroVarianceError,
)


# --- fold plans ---------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    n_samples: int
    n_folds: int
    assignments: tuple[int, ...]
    seed: int

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) == fold)


def make_folds(n: int, n_folds: int = 10, seed: int = 0) -> FoldPlan:
    """Seeded shuffle, then contiguous split; first n % n_folds folds get
    one extra sample."""
    if n_folds < 2 or n_folds > n:
        raise TooFewSamplesError(f"need 2 <= n_folds <= n, got n_folds={n_folds}, n={n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    base, extra = divmod(n, n_folds)
    assignments = np.empty(n, dtype=np.intp)
    start = 0
    for fold in range(n_folds):
        size = base + (1 if fold < extra else 0)
        assignments[order[start : start + size]] = fold
        start += size
    return FoldPlan(n_samples=n, n_folds=n_folds, assignments=tuple(int(a) for a in assignments), seed=seed)


# --- confusion and accuracy -----------------------------------------------------


@dataclass
class ConfusionMatrix:
    label_set: list[str]
    counts: np.ndarray  # rows = true, columns = predicted

    @classmethod
    def empty(cls, label_set: Sequence[str]) -> "ConfusionMatrix":
        n = len(label_set)
        return cls(label_set=list(label_set), counts=np.zeros((n, n), dtype=np.int64))

    def add(self, y_true: Sequence[str], y_pred: Sequence[str]) -> None:
        idx = {lab: i for i, lab in enumerate(self.label_set)}
        for t, p in zip(y_true, y_pred):
            self.counts[idx[t], idx[p]] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def percentages(self) -> np.ndarray:
        """Row-normalized percentages; all-zero rows stay zero."""
        sums = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = np.where(sums > 0, 100.0 * self.counts / sums, 0.0)
        return pct

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        pct = self.percentages()
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("true\\pred," + ",".join(self.label_set) + "\n")
            for i, lab in enumerate(self.label_set):
                fh.write(lab + "," + ",".join(str(c) for c in self.counts[i]) + "\n")
            fh.write("percent\n")
            for i, lab in enumerate(self.label_set):
                fh.write(lab + "," + ",".join(f"{v:.2f}" for v in pct[i]) + "\n")


def accuracy_score(y_true: Sequence[str], y_pred: Sequence[str]) -> float:
    if len(y_true) != len(y_pred):
        raise LengthMismatchError(f"{len(y_true)} true vs {len(y_pred)} predicted")
    return sum(t == p for t, p in zip(y_true, y_pred)) / len(y_true)


# --- cross-validation --------------------------------------------------------------


class CrossValidationResult(NamedTuple):
    mean_accuracy: float
    fold_accuracies: list[float]
    confusion: ConfusionMatrix


def cross_validate(
    spec: ClassifierSpec,
    encoding: EncodingSpec,
    corpus: Corpus,
    plan: FoldPlan,
) -> CrossValidationResult:
    """Per fold: fit encoder and classifier on the training side, score the
    held-out side; accuracies averaged unweighted over folds."""
    docs = corpus.documents
    if plan.n_samples != len(docs):
        raise LengthMismatchError(f"plan covers {plan.n_samples} samples, corpus has {len(docs)}")
    labels = corpus.labels
    confusion = ConfusionMatrix.empty(corpus.label_set)
    fold_accuracies = []
    for fold in range(plan.n_folds):
        test_idx = plan.fold_indices(fold)
        train_idx = np.setdiff1d(np.arange(len(docs)), test_idx)
        train_docs = [docs[i] for i in train_idx]
        test_docs = [docs[i] for i in test_idx]
        y_train = [labels[i] for i in train_idx]
        y_test = [labels[i] for i in test_idx]
        encoder, X_train = fit_encoder(encoding, train_docs, stopwords=corpus.stopwords)
        X_test = encoder.transform(test_docs)
        model = fit_classifier(spec, X_train, y_train, label_set=corpus.label_set)
        y_pred = predict(model, X_test)
        fold_accuracies.append(accuracy_score(y_test, y_pred))
        confusion.add(y_test, y_pred)
    return CrossValidationResult(
        mean_accuracy=float(np.mean(fold_accuracies)),
        fold_accuracies=fold_accuracies,
        confusion=confusion,
    )


def cross_validate_bags(
    spec: ClassifierSpec,
    bags: list[list[str]],
    labels: list[str],
    label_set: list[str],
    plan: FoldPlan,
) -> CrossValidationResult:
    """Cross-validate tf-idf over pre-built token bags (e.g. enriched
    streams), refitting the vocabulary per training fold."""
    from .encode import fit_tfidf, transform_tfidf

    if len(bags) != len(labels):
        raise LengthMismatchError(f"{len(bags)} bags vs {len(labels)} labels")
    confusion = ConfusionMatrix.empty(label_set)
    fold_accuracies = []
    for fold in range(plan.n_folds):
        test_idx = plan.fold_indices(fold)
        train_idx = np.setdiff1d(np.arange(len(bags)), test_idx)
        tfidf = fit_tfidf([bags[i] for i in train_idx])
        X_train = transform_tfidf(tfidf, [bags[i] for i in train_idx])
        X_test = transform_tfidf(tfidf, [bags[i] for i in test_idx])
        y_train = [labels[i] for i in train_idx]
        y_test = [labels[i] for i in test_idx]
        model = fit_classifier(spec, X_train, y_train, label_set=label_set)
        y_pred = predict(model, X_test)
        fold_accuracies.append(accuracy_score(y_test, y_pred))
        confusion.add(y_test, y_pred)
    return CrossValidationResult(
        mean_accuracy=float(np.mean(fold_accuracies)),
        fold_accuracies=fold_accuracies,
        confusion=confusion,
    )


# --- purity ---------------------------------------------------------------------


def _cluster_ids(assignment: ClusterAssignment | Sequence[int]) -> list[int]:
    if isinstance(assignment, ClusterAssignment):
        return list(assignment.cluster_ids)
    return [int(c) for c in assignment]


def purity(assignment: ClusterAssignment | Sequence[int], labels: Sequence[str]) -> float:
    """Macro purity: unweighted mean over clusters of the majority-class
    fraction within each cluster."""
    cids = _cluster_ids(assignment)
    if len(cids) != len(labels):
        raise LengthMismatchError(f"{len(cids)} cluster ids vs {len(labels)} labels")
    per_cluster: dict[int, dict[str, int]] = {}
    for c, lab in zip(cids, labels):
        per_cluster.setdefault(c, {}).setdefault(lab, 0)
        per_cluster[c][lab] += 1
    fractions = [max(counts.values()) / sum(counts.values()) for counts in per_cluster.values()]
    return float(np.mean(fractions))


def weighted_purity(assignment: ClusterAssignment | Sequence[int], labels: Sequence[str]) -> float:
    """Sample-weighted purity: correct-by-majority samples over all samples."""
    cids = _cluster_ids(assignment)
    if len(cids) != len(labels):
        raise LengthMismatchError(f"{len(cids)} cluster ids vs {len(labels)} labels")
    per_cluster: dict[int, dict[str, int]] = {}
    for c, lab in zip(cids, labels):
        per_cluster.setdefault(c, {}).setdefault(lab, 0)
        per_cluster[c][lab] += 1
    majority_total = sum(max(counts.values()) for counts in per_cluster.values())
    return majority_total / len(labels)


# --- similarity correlation -------------------------------------------------------


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise LengthMismatchError(f"vector shapes differ: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v / (nu * nv))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise LengthMismatchError(f"{xs.shape} vs {ys.shape}")
    if len(xs) < 2:
        raise ValueError("need at least 2 points")
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    sx = np.sqrt((xc * xc).sum())
    sy = np.sqrt((yc * yc).sum())
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("one series is constant, correlation undefined")
    return float((xc * yc).sum() / (sx * sy))


def _pair_cosines(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    normalized = X / safe[:, None]
    sims = normalized @ normalized.T
    iu = np.triu_indices(X.shape[0], k=1)
    return sims[iu]


def text_math_correlation(X_text: EncodedMatrix, X_math: EncodedMatrix) -> float:
    """Pearson correlation between the two spaces' pairwise cosine
    similarities, over all unordered sample pairs."""
    if X_text.sample_ids != X_math.sample_ids:
        raise ValueError("matrices must cover the same samples in the same order")
    if X_text.n_samples < 3:
        raise ValueError("need at least 3 samples for a pair-similarity correlation")
    return pearson(_pair_cosines(X_text.features), _pair_cosines(X_math.features))


# --- runtimes ----------------------------------------------------------------------


def measure_runtime(tasks: Sequence[tuple[str, Callable[[], Any]]]) -> dict[str, float]:
    """Wall-clock each task, then scale so the slowest is exactly 100.0."""
    if not tasks:
        raise ValueError("need at least one task")
    raw: dict[str, float] = {}
    for name, fn in tasks:
        start = time.perf_counter()
        fn()
        raw[name] = time.perf_counter() - start
    return normalize_runtimes(raw)


def normalize_runtimes(raw: dict[str, float]) -> dict[str, float]:
    slowest = max(raw.values())
    if slowest <= 0.0:
        return {name: 100.0 for name in raw}
    out = {name: 100.0 * t / slowest for name, t in raw.items()}
    for name, t in raw.items():
        if t == slowest:
            out[name] = 100.0  # exact, no float division residue
    return out


# --- report tables ------------------------------------------------------------------


@dataclass
class EvaluationReport:
    """Grid of scores with Mean/Max margins, shaped like the result tables."""

    row_names: list[str]
    col_names: list[str]
    cells: dict[tuple[str, str], float | None]
    runtimes_percent: dict[str, float] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)
    row_means: dict[str, float | None] = field(init=False)
    row_maxes: dict[str, float | None] = field(init=False)
    col_means: dict[str, float | None] = field(init=False)
    col_maxes: dict[str, float | None] = field(init=False)

    def __post_init__(self) -> None:
        for r in self.row_names:
            missing = [c for c in self.col_names if (r, c) not in self.cells]
            if missing:
                raise RaggedGridError(f"row {r!r} lacks columns {missing}")
        extra = set(self.cells) - {(r, c) for r in self.row_names for c in self.col_names}
        if extra:
            raise RaggedGridError(f"cells outside the declared grid: {sorted(extra)}")
        self.row_means = {}
        self.row_maxes = {}
        for r in self.row_names:
            vals = [self.cells[(r, c)] for c in self.col_names if self.cells[(r, c)] is not None]
            self.row_means[r] = float(np.mean(vals)) if vals else None
            self.row_maxes[r] = float(np.max(vals)) if vals else None
        self.col_means = {}
        self.col_maxes = {}
        for c in self.col_names:
            vals = [self.cells[(r, c)] for r in self.row_names if self.cells[(r, c)] is not None]
            self.col_means[c] = float(np.mean(vals)) if vals else None
            self.col_maxes[c] = float(np.max(vals)) if vals else None

    def best_cell(self) -> tuple[str, str] | None:
        best = None
        for r in self.row_names:
            for c in self.col_names:
                v = self.cells[(r, c)]
                if v is not None and (best is None or v > self.cells[best]):
                    best = (r, c)
        return best

    def fastest_algo(self) -> str | None:
        if not self.runtimes_percent:
            return None
        return min(self.runtimes_percent, key=lambda k: (self.runtimes_percent[k], k))

    @staticmethod
    def _fmt(v: float | None) -> str:
        return "" if v is None else f"{v:.6f}"

    def to_csv(self, path: str | Path) -> None:
        """Deterministic score grid; runtimes are kept out of the CSV so two
        identically seeded runs stay byte-identical."""
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("encoding," + ",".join(self.col_names) + ",Mean,Max\n")
            for r in self.row_names:
                vals = [self._fmt(self.cells[(r, c)]) for c in self.col_names]
                fh.write(
                    f"{r},"
                    + ",".join(vals)
                    + f",{self._fmt(self.row_means[r])},{self._fmt(self.row_maxes[r])}\n"
                )
            fh.write(
                "Mean," + ",".join(self._fmt(self.col_means[c]) for c in self.col_names) + ",,\n"
            )
            fh.write(
                "Max," + ",".join(self._fmt(self.col_maxes[c]) for c in self.col_names) + ",,\n"
            )

    def to_markdown(self, path: str | Path, title: str | None = None) -> None:
        path = Path(path)
        best = self.best_cell()
        fastest = self.fastest_algo()
        lines = []
        if title:
            lines.append(f"# {title}")
            lines.append("")
        lines.append("| Encoding | " + " | ".join(self.col_names) + " | Mean | Max |")
        lines.append("|" + "---|" * (len(self.col_names) + 3))
        for r in self.row_names:
            cells = []
            for c in self.col_names:
                v = self.cells[(r, c)]
                text = "" if v is None else f"{v:.1f}"
                if best == (r, c):
                    text = f"**{text}**"
                cells.append(text)
            mean = "" if self.row_means[r] is None else f"{self.row_means[r]:.1f}"
            mx = "" if self.row_maxes[r] is None else f"{self.row_maxes[r]:.1f}"
            lines.append(f"| {r} | " + " | ".join(cells) + f" | {mean} | {mx} |")
        lines.append(
            "| Mean | "
            + " | ".join(
                "" if self.col_means[c] is None else f"{self.col_means[c]:.1f}"
                for c in self.col_names
            )
            + " |  |  |"
        )
        lines.append(
            "| Max | "
            + " | ".join(
                "" if self.col_maxes[c] is None else f"{self.col_maxes[c]:.1f}"
                for c in self.col_names
            )
            + " |  |  |"
        )
        if self.runtimes_percent:
            cells = []
            for c in self.col_names:
                v = self.runtimes_percent.get(c)
                text = "" if v is None else f"{v:.1f}"
                if c == fastest:
                    text = f"**{text}**"
                cells.append(text)
            lines.append("| Runtime [%] | " + " | ".join(cells) + " |  |  |")
        path.write_text("\n".join(lines) + "\n", "utf-8")


def build_report(
    cells: dict[tuple[str, str], float | None],
    runtimes: dict[str, float] | None = None,
    metadata: dict[str, Any] | None = None,
) -> EvaluationReport:
    """Assemble a report from grid cells keyed (row, column); row and column
    order follow first appearance in the cell mapping."""
    if not cells:
        raise RaggedGridError("no cells")
    row_names: list[str] = []
    col_names: list[str] = []
    for r, c in cells:
        if r not in row_names:
            row_names.append(r)
        if c not in col_names:
            col_names.append(c)
    return EvaluationReport(
        row_names=row_names,
        col_names=col_names,
        cells=dict(cells),
        runtimes_percent=dict(runtimes or {}),
        metadata=dict(metadata or {}),
    )
