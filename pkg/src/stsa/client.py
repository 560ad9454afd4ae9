"""Client-side payload extraction: full and communication-efficient uploads.

A client holds one raw-feature shard per task. In full mode it uploads one
second-order record {G, C, n}; in efficient mode it splits the shard into
dummy clients and uploads first-order records {C, n} only. Gram matrices are
never formed on the efficient path, so the byte accounting reflects what is
actually transmitted.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import RandomMap, SpatialStatistics, apply_map, local_statistics
from .errors import ConfigurationError, DomainError
from .metrics import DEFAULT_ELEM_BYTES, comm_bytes
from .prng import ChaChaStream

MODE_FULL = "full"
MODE_EFFICIENT = "efficient"


@dataclass(frozen=True)
class ClientShard:
    """One client's private raw-feature data for one task."""

    client_id: int
    task_id: int
    features: np.ndarray  # (n, d) raw features
    labels: np.ndarray  # (n,) global class ids

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise DomainError(
                f"shard features {self.features.shape} and labels "
                f"{self.labels.shape} are inconsistent"
            )

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class UploadPayload:
    """What one client transmits for one task.

    Full mode: exactly one record, gram present. Efficient mode: one record
    per dummy client, gram absent everywhere, records disjointly covering
    the shard.
    """

    mode: str
    records: tuple[SpatialStatistics, ...]
    byte_size: int


def _partition_indices(
    n: int, k_d: int, stream: ChaChaStream, labels: np.ndarray, stratified: bool
) -> list[np.ndarray]:
    """Seeded shuffle + round-robin split of range(n) into k_d cells."""
    cells: list[list[int]] = [[] for _ in range(k_d)]
    slot = 0
    if stratified:
        # Shuffle within each class; the round-robin counter runs across
        # classes so cell sizes still differ by at most one.
        for cls in np.unique(labels):
            idx = np.flatnonzero(labels == cls)
            for i in stream.permutation(idx.size):
                cells[slot % k_d].append(int(idx[i]))
                slot += 1
    else:
        for i in stream.permutation(n):
            cells[slot % k_d].append(int(i))
            slot += 1
    return [np.sort(np.asarray(cell, dtype=np.int64)) for cell in cells]


def split_dummy(
    shard: ClientShard, k_d: int, seed: int, stratified: bool = False
) -> list[ClientShard]:
    """Split a shard into k_d dummy-client sub-shards.

    Deterministic seeded shuffle followed by round-robin assignment: sizes
    differ by at most one, the union is the shard, cells are disjoint.
    """
    if k_d < 1:
        raise ConfigurationError(f"dummy client count must be >= 1, got {k_d}")
    if shard.size >= 1 and k_d > shard.size:
        raise ConfigurationError(
            f"cannot split {shard.size} samples into {k_d} dummy clients"
        )
    if k_d == 1:
        return [shard]
    cells = _partition_indices(shard.size, k_d, ChaChaStream(seed), shard.labels, stratified)
    return [
        ClientShard(
            client_id=shard.client_id,
            task_id=shard.task_id,
            features=shard.features[cell],
            labels=shard.labels[cell],
        )
        for cell in cells
    ]


def extract_payload(
    shard: ClientShard,
    rmap: RandomMap,
    task_classes: Sequence[int],
    mode: str = MODE_FULL,
    k_d: int = 1,
    seed: int = 0,
    stratified: bool = False,
    elem_bytes: int = DEFAULT_ELEM_BYTES,
) -> UploadPayload:
    """Map the shard and compute its upload records.

    Efficient mode splits into at most min(k_d, shard size) dummy clients
    (an empty shard yields a single all-zero record), computes first-order
    statistics per sub-shard, and never materializes a gram matrix.
    """
    c_t = len(task_classes)
    if mode == MODE_FULL:
        feat = apply_map(rmap, shard.features)
        stats = local_statistics(
            feat,
            shard.labels,
            task_classes,
            task_id=shard.task_id,
            client_id=shard.client_id,
        )
        size = comm_bytes(rmap.output_dim, c_t, 1, MODE_FULL, elem_bytes)
        return UploadPayload(mode=MODE_FULL, records=(stats,), byte_size=size)

    if mode != MODE_EFFICIENT:
        raise ConfigurationError(f"unknown payload mode {mode!r}")
    if k_d < 1:
        raise ConfigurationError(f"dummy client count must be >= 1, got {k_d}")
    # A shard smaller than k_d caps the split at one sample per dummy client.
    effective = min(k_d, shard.size) if shard.size >= 1 else 1
    feat = apply_map(rmap, shard.features)
    if effective == 1:
        cells = [np.arange(shard.size, dtype=np.int64)]
    else:
        cells = _partition_indices(
            shard.size, effective, ChaChaStream(seed), shard.labels, stratified
        )
    records = tuple(
        local_statistics(
            feat[cell],
            shard.labels[cell],
            task_classes,
            task_id=shard.task_id,
            client_id=shard.client_id,
            dummy_index=j,
            include_gram=False,
        )
        for j, cell in enumerate(cells)
    )
    size = comm_bytes(rmap.output_dim, c_t, len(records), MODE_EFFICIENT, elem_bytes)
    return UploadPayload(mode=MODE_EFFICIENT, records=records, byte_size=size)


def add_noise(payload: UploadPayload, q: float, s: float, seed: int) -> UploadPayload:
    """Perturb every transmitted array entrywise by q * N(0, s^2).

    Full mode noises G and C; efficient mode noises C and a real-valued copy
    of the label frequencies. q = 0 or s = 0 returns the payload unchanged.
    """
    if q < 0.0 or s < 0.0:
        raise DomainError(f"noise parameters must be non-negative, got q={q}, s={s}")
    if q == 0.0 or s == 0.0:
        return payload
    stream = ChaChaStream(seed)

    def perturb(arr: np.ndarray) -> np.ndarray:
        flat = q * s * stream.standard_normal(arr.size)
        return arr.astype(np.float64) + flat.reshape(arr.shape)

    noised = []
    for rec in payload.records:
        if payload.mode == MODE_FULL:
            noised.append(replace(rec, gram=perturb(rec.gram), corr=perturb(rec.corr)))
        else:
            noised.append(
                replace(rec, corr=perturb(rec.corr), label_freq=perturb(rec.label_freq))
            )
    return UploadPayload(mode=payload.mode, records=tuple(noised), byte_size=payload.byte_size)
