"""SVD embeddings of a recovered parameter matrix.

The thin SVD B = U diag(sigma) V^T yields one embedding per sequence: the
columns of coordinates = diag(sigma) V^T. U is a shared orthobasis, so
U @ coordinates reconstructs B, and Euclidean geometry on the coordinate
columns matches Euclidean geometry on the parameter columns.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from lowrank_ar.model import ParameterMatrix

_RANK_MODES = ("relative", "additive")


@dataclass(frozen=True)
class EmbeddingResult:
    """Truncated SVD factors with per-sequence coordinate columns."""

    basis: np.ndarray  # (m, r), orthonormal columns
    singular_values: np.ndarray  # (r,), non-increasing, positive
    coordinates: np.ndarray  # (r, N), column i embeds sequence i
    ids: list
    approx_rank: int

    @property
    def r(self) -> int:
        return int(self.singular_values.shape[0])

    @property
    def n_sequences(self) -> int:
        return int(self.coordinates.shape[1])


def approx_rank(singular_values, threshold: float = 1e-2, mode: str = "relative") -> int:
    """Count of singular values within threshold of the principal one.

    relative (default): sigma_i >= threshold * sigma_1.
    additive: sigma_1 - sigma_i <= threshold.
    Empty input or an all-zero spectrum counts as rank 0.
    """
    if mode not in _RANK_MODES:
        raise ValueError(f"mode must be one of {_RANK_MODES}, got {mode!r}")
    s = np.asarray(singular_values, dtype=float).ravel()
    if s.size == 0 or s[0] <= 0:
        return 0
    if mode == "relative":
        return int(np.count_nonzero(s >= threshold * s[0]))
    return int(np.count_nonzero(s[0] - s <= threshold))


def factorize(
    params: ParameterMatrix,
    truncation_tol: float = 1e-10,
    ids: list | None = None,
    rank_threshold: float = 1e-2,
    rank_mode: str = "relative",
) -> EmbeddingResult:
    """Thin SVD of the parameter matrix, keeping sigma_i > truncation_tol * sigma_1.

    A zero matrix produces an empty (r=0) embedding and a warning.
    """
    data = params.data
    if ids is None:
        ids = [f"col_{i}" for i in range(data.shape[1])]
    if len(ids) != data.shape[1]:
        raise ValueError(f"{len(ids)} ids for {data.shape[1]} columns")
    u, sigma, vt = np.linalg.svd(data, full_matrices=False)
    if sigma.size == 0 or sigma[0] <= 0.0:
        warnings.warn("zero parameter matrix yields an empty embedding")
        keep = np.zeros(sigma.shape, dtype=bool)
    else:
        keep = sigma > truncation_tol * sigma[0]
    u = u[:, keep]
    sigma = sigma[keep]
    vt = vt[keep]
    return EmbeddingResult(
        basis=u,
        singular_values=sigma,
        coordinates=sigma[:, None] * vt,
        ids=list(ids),
        approx_rank=approx_rank(sigma, threshold=rank_threshold, mode=rank_mode),
    )


def pca_project(coordinates, k: int):
    """Center coordinate columns and project onto the top-k principal axes.

    Returns (projected, explained) where projected is k x N and explained
    holds the top-k explained-variance ratios. Identical columns have zero
    variance; the ratios are then zero and a warning is raised.
    """
    coords = np.atleast_2d(np.asarray(coordinates, dtype=float))
    r, n = coords.shape
    if not 1 <= k <= r:
        raise ValueError(f"k={k} out of range [1, {r}]")
    centered = coords - coords.mean(axis=1, keepdims=True)
    u, sigma, _ = np.linalg.svd(centered, full_matrices=False)
    total = float(np.sum(sigma**2))
    if total <= 0.0:
        warnings.warn("coordinates have zero variance; projection is degenerate")
        return np.zeros((k, n)), np.zeros(k)
    projected = u[:, :k].T @ centered
    explained = sigma[:k] ** 2 / total
    return projected, explained


def write_embedding_csv(result: EmbeddingResult, path, labels: list | None = None) -> None:
    """CSV with header id[,label],dim_1..dim_r; one row per sequence."""
    if labels is not None and len(labels) != result.n_sequences:
        raise ValueError("labels length must match the number of sequences")
    header = ["id"]
    if labels is not None:
        header.append("label")
    header += [f"dim_{j + 1}" for j in range(result.r)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, seq_id in enumerate(result.ids):
            row = [seq_id]
            if labels is not None:
                row.append(labels[i])
            row += [f"{v:.17g}" for v in result.coordinates[:, i]]
            writer.writerow(row)


def read_embedding_csv(path):
    """Inverse of write_embedding_csv: returns (ids, labels_or_None, coordinates)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        has_labels = len(header) > 1 and header[1] == "label"
        start = 2 if has_labels else 1
        ids, labels, rows = [], [], []
        for row in reader:
            ids.append(row[0])
            if has_labels:
                labels.append(int(row[1]))
            rows.append([float(v) for v in row[start:]])
    coords = np.array(rows, dtype=float).T if rows else np.zeros((0, 0))
    return ids, (labels if has_labels else None), coords
