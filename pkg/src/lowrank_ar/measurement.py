"""Measurement operator over time slices, its adjoint, and slice sampling.

A slice fixes one time index t and packages the regressor window of every
sequence together with the stacked observation vector at t. The forward map

    A_t(B) = weight * vec([R_i @ xi_{i,t}]_{i=1..N})

is linear in B, and adjoint() is its exact transpose, so the pair satisfies
<A_t(B), y> = <B, A_t*(y)> for all B, y. The default weight is 1/N.

Scaling convention: a slice's target is stored on the operator scale, i.e.
already multiplied by the slice weight. forward() output and target are then
directly comparable, and the residual pipeline in the field module never has
to undo the weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lowrank_ar.model import ParameterMatrix, SequenceCollection


@dataclass(frozen=True)
class MeasurementSlice:
    """Regressors and target for one time index.

    regressors: (N, C*d+1) array, row i the window of sequence i (first
    column all ones). target: stacked observations at t, length C*N and
    pre-scaled by weight. The operator itself is deterministic; observation
    noise lives only in how targets were generated.
    """

    regressors: np.ndarray
    target: np.ndarray
    weight: float
    channel_count: int
    order: int

    def __post_init__(self):
        reg = np.atleast_2d(np.asarray(self.regressors, dtype=float))
        tgt = np.asarray(self.target, dtype=float).ravel()
        if self.weight <= 0:
            raise ValueError(f"weight must be positive, got {self.weight}")
        c, d = self.channel_count, self.order
        if reg.shape[1] != c * d + 1:
            raise ValueError(f"regressor width {reg.shape[1]} != C*d+1 = {c * d + 1}")
        if not np.allclose(reg[:, 0], 1.0):
            raise ValueError("first regressor column must be all ones")
        if tgt.shape[0] != c * reg.shape[0]:
            raise ValueError(f"target length {tgt.shape[0]} != C*N = {c * reg.shape[0]}")
        reg = reg.copy()
        tgt = tgt.copy()
        reg.flags.writeable = False
        tgt.flags.writeable = False
        object.__setattr__(self, "regressors", reg)
        object.__setattr__(self, "target", tgt)

    @property
    def n_sequences(self) -> int:
        return self.regressors.shape[0]

    @classmethod
    def from_observations(cls, regressors, observations, weight, channel_count, order):
        """Build a slice from raw (unweighted) observations, shape (N, C)."""
        obs = np.atleast_2d(np.asarray(observations, dtype=float))
        return cls(
            regressors=regressors,
            target=weight * obs.reshape(-1),
            weight=weight,
            channel_count=channel_count,
            order=order,
        )


def _check_params(slice_: MeasurementSlice, params: ParameterMatrix) -> None:
    if params.channel_count != slice_.channel_count or params.order != slice_.order:
        raise ValueError(
            f"shape mismatch: slice (C={slice_.channel_count}, d={slice_.order}) vs "
            f"params (C={params.channel_count}, d={params.order})"
        )
    if params.n_sequences != slice_.n_sequences:
        raise ValueError(
            f"sequence-count mismatch: slice N={slice_.n_sequences}, "
            f"params N={params.n_sequences}"
        )


def raw_predictions(slice_: MeasurementSlice, data: np.ndarray, channel_count: int) -> np.ndarray:
    """Unweighted per-sequence predictions R_i @ xi_i as an (N, C) array."""
    n, k = slice_.regressors.shape
    r = data.T.reshape(n, channel_count, k)
    return np.einsum("nck,nk->nc", r, slice_.regressors)


def forward(slice_: MeasurementSlice, params: ParameterMatrix) -> np.ndarray:
    """weight * vec([R_i @ xi_i]_i), length C*N."""
    _check_params(slice_, params)
    z = raw_predictions(slice_, params.data, params.channel_count)
    return slice_.weight * z.reshape(-1)


def adjoint_data(slice_: MeasurementSlice, y: np.ndarray, channel_count: int) -> np.ndarray:
    """Adjoint applied to a stacked vector, returned as a raw (m, N) array."""
    yv = np.asarray(y, dtype=float).ravel()
    n = slice_.n_sequences
    if yv.shape[0] != channel_count * n:
        raise ValueError(f"y length {yv.shape[0]} != C*N = {channel_count * n}")
    blocks = yv.reshape(n, channel_count)
    outer = np.einsum("nc,nk->nck", blocks, slice_.regressors)
    return slice_.weight * outer.reshape(n, -1).T


def adjoint(slice_: MeasurementSlice, y) -> np.ndarray:
    """Transpose of forward: column i is weight * vec(y_i @ xi_i^T).

    Entry (c, k) of the outer product lands in the row of vec(R_i) holding
    R_i[c, k], matching the row-major vectorization of ParameterMatrix.
    """
    return adjoint_data(slice_, y, slice_.channel_count)


# --------------------------------------------------------------------------
# slice construction


def _regressor_rows(collection: SequenceCollection, t: int, d: int) -> np.ndarray:
    """Regressor windows of all sequences at 1-indexed t, one per row."""
    rows = np.empty((collection.n_sequences, collection.channel_count * d + 1))
    rows[:, 0] = 1.0
    for i, seq in enumerate(collection.sequences):
        window = seq[:, t - 1 - d : t - 1][:, ::-1]
        rows[i, 1:] = window.T.reshape(-1)
    return rows


def _observation_rows(collection: SequenceCollection, t: int) -> np.ndarray:
    obs = np.empty((collection.n_sequences, collection.channel_count))
    for i, seq in enumerate(collection.sequences):
        obs[i] = seq[:, t - 1]
    return obs


def enumerate_slices(
    collection: SequenceCollection, d: int, weight: float | None = None
) -> list[MeasurementSlice]:
    """One slice per t = d+1 .. T_min, targets from the observed values at t."""
    if d < 1:
        raise ValueError(f"order d must be >= 1, got {d}")
    t_min = collection.min_length
    if t_min < d + 1:
        raise ValueError(f"shortest sequence length {t_min} < d+1 = {d + 1}")
    w = 1.0 / collection.n_sequences if weight is None else float(weight)
    c = collection.channel_count
    return [
        MeasurementSlice.from_observations(
            regressors=_regressor_rows(collection, t, d),
            observations=_observation_rows(collection, t),
            weight=w,
            channel_count=c,
            order=d,
        )
        for t in range(d + 1, t_min + 1)
    ]


def sample_subwindow_slices(
    collection: SequenceCollection,
    d: int,
    window: int,
    rng: np.random.Generator,
    weight: float | None = None,
) -> list[MeasurementSlice]:
    """Slices from one uniformly random length-G window per sequence.

    Each sequence independently contributes a contiguous window of length G;
    windows are aligned positionally, giving G-d slices. Deterministic given
    the generator state, so a fixed seed reproduces the slice set.
    """
    if d < 1:
        raise ValueError(f"order d must be >= 1, got {d}")
    if window < d + 1:
        raise ValueError(f"window G={window} must be at least d+1 = {d + 1}")
    if window > collection.min_length:
        raise ValueError(
            f"window G={window} exceeds shortest sequence length {collection.min_length}"
        )
    starts = [
        int(rng.integers(0, seq.shape[1] - window + 1)) for seq in collection.sequences
    ]
    windowed = SequenceCollection(
        sequences=[
            seq[:, s : s + window] for seq, s in zip(collection.sequences, starts)
        ],
        ids=collection.ids,
        labels=collection.labels,
        kind=collection.kind,
    )
    return enumerate_slices(windowed, d, weight=weight)
