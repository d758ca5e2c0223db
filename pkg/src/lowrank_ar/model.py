"""Autoregressive observation model: sequence containers, regressors, links.

Every sequence i carries C channels. The model predicts the observation at
time t (1-indexed) from the d preceding observations through a per-sequence
weight matrix R_i of shape C x (C*d+1) and a monotone link eta:

    E[x_{i,t} | past] = eta(R_i @ xi_{i,t})

where xi_{i,t} = (1, x_{t-1}, ..., x_{t-d}) stacks a bias entry and the d
most recent observations, most recent step first, with the C channels of one
time step kept contiguous. Columns of a ParameterMatrix are the row-major
vectorizations vec(R_i), so the stacked matrix has C^2*d + C rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Inputs to exp/logistic are clamped here; softmax uses max-subtraction instead.
LINK_CLAMP = 500.0

_LINK_VARIANTS = ("identity", "softmax", "exponential", "logistic")
_COLLECTION_KINDS = ("real", "probability-simplex")


def _as_channel_matrix(seq) -> np.ndarray:
    """Coerce a sequence to a (C, T) float array; 1-D input is treated as C=1."""
    arr = np.asarray(seq, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"sequence must be 1-D or 2-D, got ndim={arr.ndim}")
    return arr


def _lock(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


# --------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class SequenceCollection:
    """N multichannel sequences with ids and optional integer class labels.

    kind marks whether every time-step column must lie on the probability
    simplex (one-hot or soft symbol encodings) or is unrestricted real data.
    Sequences may have unequal lengths.
    """

    sequences: list
    ids: list
    labels: list | None = None
    kind: str = "real"

    def __post_init__(self):
        if not self.sequences:
            raise ValueError("collection needs at least one sequence")
        seqs = [_lock(_as_channel_matrix(s)) for s in self.sequences]
        channels = {s.shape[0] for s in seqs}
        if len(channels) != 1:
            raise ValueError(f"inconsistent channel counts: {sorted(channels)}")
        for s in seqs:
            if s.shape[1] < 1:
                raise ValueError("empty sequence")
            if not np.all(np.isfinite(s)):
                raise ValueError("sequences must be finite-valued")
        ids = [str(i) for i in self.ids]
        if len(ids) != len(seqs):
            raise ValueError(f"{len(ids)} ids for {len(seqs)} sequences")
        if len(set(ids)) != len(ids):
            raise ValueError("ids must be unique")
        if self.labels is not None:
            labels = [int(l) for l in self.labels]
            if len(labels) != len(seqs):
                raise ValueError("labels length must match sequence count")
            object.__setattr__(self, "labels", labels)
        if self.kind not in _COLLECTION_KINDS:
            raise ValueError(f"kind must be one of {_COLLECTION_KINDS}, got {self.kind!r}")
        if self.kind == "probability-simplex":
            for s in seqs:
                if np.any(s < -1e-9):
                    raise ValueError("simplex sequences must be nonnegative")
                sums = s.sum(axis=0)
                if np.any(np.abs(sums - 1.0) > 1e-9):
                    raise ValueError("simplex columns must sum to 1 within 1e-9")
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "ids", ids)

    @property
    def channel_count(self) -> int:
        return self.sequences[0].shape[0]

    @property
    def n_sequences(self) -> int:
        return len(self.sequences)

    @property
    def min_length(self) -> int:
        return min(s.shape[1] for s in self.sequences)

    @property
    def equal_length(self) -> bool:
        return len({s.shape[1] for s in self.sequences}) == 1


@dataclass(frozen=True)
class RegressorWindow:
    """Regressor vector xi = (1, x_{t-1}, ..., x_{t-d}) for one sequence."""

    values: np.ndarray
    order: int
    channel_count: int

    def __post_init__(self):
        vals = _lock(np.asarray(self.values, dtype=float).ravel())
        if vals.shape[0] != self.channel_count * self.order + 1:
            raise ValueError(
                f"regressor length {vals.shape[0]} != C*d+1 = "
                f"{self.channel_count * self.order + 1}"
            )
        if vals[0] != 1.0:
            raise ValueError("first regressor entry must be exactly 1")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class ParameterMatrix:
    """Stacked per-sequence weights: column i is vec(R_i), row-major.

    data has shape (C^2*d + C) x N. weights_for(i) undoes the vectorization.
    """

    data: np.ndarray
    channel_count: int
    order: int

    def __post_init__(self):
        data = _lock(np.atleast_2d(np.asarray(self.data, dtype=float)))
        c, d = self.channel_count, self.order
        if c < 1 or d < 1:
            raise ValueError("channel_count and order must be positive")
        m = c * c * d + c
        if data.shape[0] != m:
            raise ValueError(f"expected {m} rows for C={c}, d={d}, got {data.shape[0]}")
        if not np.all(np.isfinite(data)):
            raise ValueError("parameter entries must be finite")
        object.__setattr__(self, "data", data)

    @property
    def n_sequences(self) -> int:
        return self.data.shape[1]

    def weights_for(self, i: int) -> np.ndarray:
        """R_i as a (C, C*d+1) matrix."""
        c, d = self.channel_count, self.order
        return self.data[:, i].reshape(c, c * d + 1)

    @classmethod
    def from_weights(cls, weights: list, channel_count: int, order: int) -> "ParameterMatrix":
        cols = [np.asarray(w, dtype=float).reshape(-1) for w in weights]
        return cls(np.column_stack(cols), channel_count, order)

    @classmethod
    def zeros(cls, channel_count: int, order: int, n_sequences: int) -> "ParameterMatrix":
        m = channel_count * channel_count * order + channel_count
        return cls(np.zeros((m, n_sequences)), channel_count, order)


# --------------------------------------------------------------------------
# link functions


@dataclass(frozen=True)
class LinkFunction:
    """A named monotone map eta applied blockwise per sequence (block size C)."""

    variant: str = "identity"

    def __post_init__(self):
        if self.variant not in _LINK_VARIANTS:
            raise ValueError(f"variant must be one of {_LINK_VARIANTS}, got {self.variant!r}")


def _link_rows(link: LinkFunction, z: np.ndarray) -> np.ndarray:
    """Apply the link along the last axis of z (one block per row)."""
    if link.variant == "identity":
        return z
    if link.variant == "exponential":
        return np.exp(np.clip(z, -LINK_CLAMP, LINK_CLAMP))
    if link.variant == "logistic":
        return 1.0 / (1.0 + np.exp(-np.clip(z, -LINK_CLAMP, LINK_CLAMP)))
    # softmax with max-subtraction per block
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def apply_link(link: LinkFunction, z, block_size: int = 1) -> np.ndarray:
    """Apply eta to a stacked vector; softmax acts on contiguous blocks.

    block_size is the channel count C. Identity returns the values unchanged,
    exponential and logistic act elementwise (inputs clamped to +-LINK_CLAMP),
    softmax normalizes each length-C block to the simplex.
    """
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("link input must be finite")
    if block_size < 1:
        raise ValueError("block_size must be positive")
    if link.variant != "softmax":
        return _link_rows(link, arr.copy())
    flat = arr.reshape(-1)
    if flat.shape[0] % block_size:
        raise ValueError(f"length {flat.shape[0]} not divisible by block_size {block_size}")
    out = _link_rows(link, flat.reshape(-1, block_size))
    return out.reshape(arr.shape)


# --------------------------------------------------------------------------
# regressors and prediction


def build_regressor(seq, t: int, d: int) -> RegressorWindow:
    """Regressor window at 1-indexed time t: (1, x_{t-1}, ..., x_{t-d}).

    Channels of one time step stay contiguous, most recent step first. Valid
    for d+1 <= t <= T.
    """
    if d < 1:
        raise ValueError(f"order d must be >= 1, got {d}")
    arr = _as_channel_matrix(seq)
    T = arr.shape[1]
    if t <= d or t > T:
        raise IndexError(f"t={t} out of range [{d + 1}, {T}] for order {d}")
    # columns t-2 .. t-1-d (0-based), newest first, then step-major flatten
    window = arr[:, t - 1 - d : t - 1][:, ::-1]
    values = np.concatenate(([1.0], window.T.reshape(-1)))
    return RegressorWindow(values=values, order=d, channel_count=arr.shape[0])


def predict(
    params: ParameterMatrix,
    collection: SequenceCollection,
    t: int,
    link: LinkFunction = LinkFunction("identity"),
) -> np.ndarray:
    """Stacked eta(R_i @ xi_{i,t}) over i = 1..N, length C*N."""
    c = params.channel_count
    if c != collection.channel_count:
        raise ValueError(
            f"channel mismatch: params C={c}, collection C={collection.channel_count}"
        )
    if params.n_sequences != collection.n_sequences:
        raise ValueError(
            f"sequence-count mismatch: params N={params.n_sequences}, "
            f"collection N={collection.n_sequences}"
        )
    z = np.empty((collection.n_sequences, c))
    for i, seq in enumerate(collection.sequences):
        xi = build_regressor(seq, t, params.order).values
        z[i] = params.weights_for(i) @ xi
    return apply_link(link, z.reshape(-1), block_size=c)
