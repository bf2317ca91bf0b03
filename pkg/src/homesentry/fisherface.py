"""Fisherface training and nearest-neighbor recognition with unknown rejection.

The pipeline is the classic one: flatten face crops, center on the global
mean, reduce with PCA to N - C dimensions (Gram-matrix trick when the
pixel dimension exceeds the sample count), build between/within-class
scatter matrices there, solve the generalized eigenproblem for the
discriminant directions, and project everything into that space.
Recognition is nearest neighbor over the projected training samples with a
distance threshold for rejecting unknowns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg

from .imaging import load_gray, resize_nearest


class TrainingError(ValueError):
    pass


@dataclass
class TrainingSet:
    """Labelled face vectors: one entry per class, samples stacked row-wise."""

    labels: list[str]
    samples: list[np.ndarray]  # samples[k] has shape (N_k, D)

    def __post_init__(self):
        if len(self.labels) != len(self.samples):
            raise TrainingError("labels and sample groups must align")
        if len(self.labels) < 2:
            raise TrainingError(f"need at least 2 classes, got {len(self.labels)}")
        if len(set(self.labels)) != len(self.labels):
            raise TrainingError("class labels must be unique")
        dims = {s.shape[1] for s in self.samples}
        if len(dims) != 1:
            raise TrainingError(f"inconsistent sample dimensions: {sorted(dims)}")
        if any(s.shape[0] < 1 for s in self.samples):
            raise TrainingError("every class needs at least 1 sample")

    @property
    def class_count(self) -> int:
        return len(self.labels)

    @property
    def total_count(self) -> int:
        return sum(s.shape[0] for s in self.samples)

    @property
    def dim(self) -> int:
        return self.samples[0].shape[1]

    def stacked(self) -> tuple[np.ndarray, list[str]]:
        """All samples as an (N, D) matrix plus the per-row label list."""
        X = np.vstack(self.samples)
        y = [lab for lab, s in zip(self.labels, self.samples) for _ in range(s.shape[0])]
        return X, y


@dataclass
class TrainConfig:
    face_width: int = 16
    face_height: int = 16
    pca_dim: Optional[int] = None       # default N - C
    reject_threshold: Optional[float] = None  # default: margin * max same-class NN distance
    reject_margin: float = 1.5
    regularization: float = 1e-6        # epsilon scale for S_W + eps*I


@dataclass
class FisherModel:
    face_width: int
    face_height: int
    global_mean: np.ndarray      # (D,)
    pca_basis: np.ndarray        # (D, P), orthonormal columns
    lda_matrix: np.ndarray       # (P, L), unit-norm columns
    eigenvalues: np.ndarray      # (L,), descending
    projected_labels: list[str]
    projected_training: np.ndarray  # (N, L)
    reject_threshold: float


@dataclass
class RecognitionResult:
    label: Optional[str]         # None means unknown
    distance: float              # distance to nearest projected training sample
    class_distances: dict[str, float]

    @property
    def known(self) -> bool:
        return self.label is not None


def flatten(face_crop: np.ndarray) -> np.ndarray:
    """Row-major flattening of a face crop into a float vector."""
    arr = np.asarray(face_crop)
    if arr.ndim != 2:
        raise ValueError(f"face crop must be 2-D, got shape {arr.shape}")
    return arr.astype(np.float64).reshape(-1)


def class_means(ts: TrainingSet) -> list[np.ndarray]:
    """Per-class arithmetic means (1/N_k sum over the class samples)."""
    return [s.mean(axis=0) for s in ts.samples]


def global_mean(ts: TrainingSet) -> np.ndarray:
    """Mean over all N samples regardless of class."""
    X, _ = ts.stacked()
    return X.mean(axis=0)


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: largest-magnitude entry of each column positive."""
    out = basis.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        k = int(np.argmax(np.abs(col)))
        if col[k] < 0:
            out[:, j] = -col
    return out


def pca_reduce(ts: TrainingSet, target_dim: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Top-variance orthonormal basis of the centered samples.

    Returns (basis (D, P), projections (N, P)). Uses the N x N Gram matrix
    when D > N. Raises when target_dim exceeds the achievable rank.
    """
    X, _ = ts.stacked()
    n, d = X.shape
    mu = X.mean(axis=0)
    Xc = X - mu
    use_gram = d > n
    mat = Xc @ Xc.T if use_gram else Xc.T @ Xc
    evals, evecs = np.linalg.eigh(mat)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    tol = max(n, d) * np.finfo(float).eps * max(evals.max(initial=0.0), 0.0)
    rank = int(np.sum(evals > max(tol, 1e-12)))
    if target_dim is None:
        # default N - C, clamped to the achievable rank of the centered data
        p = min(n - ts.class_count, rank)
    else:
        p = target_dim
    if p < 1 or p > rank:
        raise TrainingError(f"requested {p} components but achievable rank is {rank}")
    if use_gram:
        basis = Xc.T @ evecs[:, :p]
        basis /= np.sqrt(evals[:p])
    else:
        basis = evecs[:, :p]
    basis = _fix_signs(basis)
    return basis, Xc @ basis


def scatter_matrices(projections: np.ndarray, row_labels: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Between-class and within-class scatter of PCA-space samples.

    S_B = sum_k N_k (mu_k - mu)(mu_k - mu)^T
    S_W = sum_k sum_{x in class k} (x - mu_k)(x - mu_k)^T
    """
    mu = projections.mean(axis=0)
    p = projections.shape[1]
    s_b = np.zeros((p, p))
    s_w = np.zeros((p, p))
    for lab in dict.fromkeys(row_labels):
        rows = projections[[i for i, l in enumerate(row_labels) if l == lab]]
        mu_k = rows.mean(axis=0)
        diff = (mu_k - mu)[:, None]
        s_b += rows.shape[0] * (diff @ diff.T)
        centered = rows - mu_k
        s_w += centered.T @ centered
    return s_b, s_w


def lda_solve(
    s_b: np.ndarray, s_w: np.ndarray, target_dim: int, regularization: float = 1e-6
) -> tuple[np.ndarray, np.ndarray]:
    """Top generalized eigenvectors of S_B u = lambda S_W u.

    S_W is regularized with eps*I, eps = regularization * trace(S_W)/P,
    before solving. Columns are unit-norm with a deterministic sign.
    Returns (U (P, L), eigenvalues (L,) descending).
    """
    p = s_b.shape[0]
    # scale eps to S_W; fall back to the S_B scale when within-class scatter
    # vanishes (identical samples per class) so the solve stays well posed
    scale = np.trace(s_w) if np.trace(s_w) > 0 else max(np.trace(s_b), 1.0)
    eps = regularization * scale / p
    s_w_reg = s_w + eps * np.eye(p)
    evals, evecs = scipy.linalg.eigh(s_b, s_w_reg)
    if not np.all(np.isfinite(evals)):
        raise TrainingError(
            f"non-finite generalized eigenvalues (trace S_W={np.trace(s_w):.3g}, eps={eps:.3g})"
        )
    order = np.argsort(evals)[::-1][:target_dim]
    u = evecs[:, order]
    u = u / np.linalg.norm(u, axis=0)
    return _fix_signs(u), evals[order]


def _default_reject_threshold(
    projected: np.ndarray, labels: list[str], margin: float
) -> float:
    """margin x the max over samples of the distance to the nearest
    same-class neighbor (excluding self). Infinite when no class has 2 samples."""
    worst = 0.0
    found = False
    for i in range(len(labels)):
        best = None
        for j in range(len(labels)):
            if i == j or labels[j] != labels[i]:
                continue
            d = float(np.linalg.norm(projected[i] - projected[j]))
            best = d if best is None else min(best, d)
        if best is not None:
            found = True
            worst = max(worst, best)
    return margin * worst if found else float("inf")


def train(ts: TrainingSet, config: TrainConfig = TrainConfig()) -> FisherModel:
    """Full Fisherface pipeline; deterministic given the training set and config."""
    X, row_labels = ts.stacked()
    if X.shape[1] != config.face_width * config.face_height:
        raise TrainingError(
            f"sample dimension {X.shape[1]} does not match "
            f"{config.face_width}x{config.face_height} crop geometry"
        )
    mu = X.mean(axis=0)
    basis, projections = pca_reduce(ts, config.pca_dim)
    s_b, s_w = scatter_matrices(projections, row_labels)
    l_dim = min(ts.class_count - 1, basis.shape[1])
    u_opt, evals = lda_solve(s_b, s_w, l_dim, config.regularization)
    projected = projections @ u_opt
    threshold = (
        config.reject_threshold
        if config.reject_threshold is not None
        else _default_reject_threshold(projected, row_labels, config.reject_margin)
    )
    return FisherModel(
        face_width=config.face_width,
        face_height=config.face_height,
        global_mean=mu,
        pca_basis=basis,
        lda_matrix=u_opt,
        eigenvalues=evals,
        projected_labels=row_labels,
        projected_training=projected,
        reject_threshold=threshold,
    )


def project(model: FisherModel, face: np.ndarray) -> np.ndarray:
    """y = U_opt^T . pca_basis^T . (face - global_mean)"""
    vec = np.asarray(face, dtype=np.float64).reshape(-1)
    if vec.shape[0] != model.global_mean.shape[0]:
        raise ValueError(
            f"face vector has dimension {vec.shape[0]}, model expects {model.global_mean.shape[0]}"
        )
    return model.lda_matrix.T @ (model.pca_basis.T @ (vec - model.global_mean))


def recognize(model: FisherModel, face: np.ndarray) -> RecognitionResult:
    """Nearest neighbor in LDA space; unknown when the minimum distance
    exceeds the model's rejection threshold. Ties break to the
    lexicographically smallest label."""
    y = project(model, face)
    dists = np.linalg.norm(model.projected_training - y, axis=1)
    class_distances: dict[str, float] = {}
    for lab, d in zip(model.projected_labels, dists):
        d = float(d)
        if lab not in class_distances or d < class_distances[lab]:
            class_distances[lab] = d
    best_label, best_dist = min(class_distances.items(), key=lambda kv: (kv[1], kv[0]))
    if best_dist <= model.reject_threshold:
        return RecognitionResult(best_label, best_dist, class_distances)
    return RecognitionResult(None, best_dist, class_distances)


# ---------------------------------------------------------------------------
# Corpus loading and model serialization

def load_corpus(
    corpus_dir: str | Path, face_width: int, face_height: int
) -> TrainingSet:
    """Directory-per-class layout; images resized (nearest neighbor) and flattened."""
    root = Path(corpus_dir)
    labels, groups = [], []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        vecs = []
        for img_path in sorted(class_dir.iterdir()):
            if img_path.is_file():
                img = load_gray(img_path)
                crop = resize_nearest(img, face_width, face_height)
                vecs.append(flatten(crop))
        if vecs:
            labels.append(class_dir.name)
            groups.append(np.vstack(vecs))
    if len(labels) < 2:
        raise TrainingError(f"corpus at {root} holds {len(labels)} classes; need at least 2")
    return TrainingSet(labels, groups)


_MODEL_FORMAT_VERSION = 1


def save_model(model: FisherModel, path: str | Path) -> None:
    """Structured-text serialization; floats survive the round trip bit-exactly."""
    doc = {
        "format_version": _MODEL_FORMAT_VERSION,
        "face_width": model.face_width,
        "face_height": model.face_height,
        "global_mean": model.global_mean.tolist(),
        "pca_basis": model.pca_basis.tolist(),
        "lda_matrix": model.lda_matrix.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "projected_labels": model.projected_labels,
        "projected_training": model.projected_training.tolist(),
        "reject_threshold": model.reject_threshold,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path: str | Path) -> FisherModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version != _MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    return FisherModel(
        face_width=doc["face_width"],
        face_height=doc["face_height"],
        global_mean=np.array(doc["global_mean"]),
        pca_basis=np.array(doc["pca_basis"]),
        lda_matrix=np.array(doc["lda_matrix"]),
        eigenvalues=np.array(doc["eigenvalues"]),
        projected_labels=list(doc["projected_labels"]),
        projected_training=np.array(doc["projected_training"]),
        reject_threshold=float(doc["reject_threshold"]),
    )
