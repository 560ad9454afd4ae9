"""Server-side aggregation: spatial, temporal, gram estimation, classifier.

Spatial aggregation sums client statistics within a task; temporal
aggregation accumulates the gram across tasks and concatenates correlation
columns. When clients upload first-order records only, the server
reconstructs an unbiased estimate of the task gram from the per-record
correlation columns and label frequencies before accumulating it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import ClassifierWeights, RandomMap, SpatialStatistics, ridge_solve
from .errors import EstimationError, ProtocolError

#: Contributing noised label frequencies are floored here before division.
MIN_COUNT = 1e-6


@dataclass(frozen=True)
class StageAggregate:
    """Spatially aggregated statistics for one task.

    ``gram`` is the exact summed G in full mode and None in efficient mode;
    ``records`` keeps the canonically ordered per-record uploads so that the
    gram estimator can run on them.
    """

    gram: np.ndarray | None
    corr: np.ndarray
    records: tuple[SpatialStatistics, ...]


@dataclass(frozen=True)
class TemporalState:
    """Accumulated statistics over stages 1..stage.

    ``gram_acc`` is the summed (exact or estimated) gram, ``corr_acc`` the
    column-concatenated correlations, ``class_ids`` the concatenated task
    class lists in arrival order.
    """

    gram_acc: np.ndarray
    corr_acc: np.ndarray
    class_ids: tuple[int, ...]
    stage: int
    estimated: bool

    @classmethod
    def initial(cls, m: int, estimated: bool = False) -> "TemporalState":
        return cls(
            gram_acc=np.zeros((m, m)),
            corr_acc=np.zeros((m, 0)),
            class_ids=(),
            stage=0,
            estimated=estimated,
        )


@dataclass(frozen=True)
class GlobalModel:
    """Distributable model: random-map descriptor plus classifier weights."""

    random_map: RandomMap | None
    weights: ClassifierWeights
    stage: int


def spatial_aggregate(payloads: Iterable, task_classes: Sequence[int]) -> StageAggregate:
    """Sum uploads across clients for one task.

    Records are folded in canonical (client_id, dummy_index) order so that
    any arrival order of payloads gives bit-identical sums. All payloads
    must share one mode, one task and one mapped dimension.
    """
    payloads = list(payloads)
    if not payloads:
        raise ProtocolError("spatial aggregation needs at least one payload")
    mode = payloads[0].mode
    records: list[SpatialStatistics] = []
    for p in payloads:
        if p.mode != mode:
            raise ProtocolError(f"mixed payload modes {mode!r} and {p.mode!r}")
        records.extend(p.records)
    if not records:
        raise ProtocolError("payloads contain no statistics records")

    task_id = records[0].task_id
    m = records[0].feature_dim
    c_t = len(task_classes)
    for rec in records:
        if rec.task_id != task_id:
            raise ProtocolError(f"mixed task ids {task_id} and {rec.task_id}")
        if rec.feature_dim != m:
            raise ProtocolError(f"mixed mapped dimensions {m} and {rec.feature_dim}")
        if rec.corr.shape[1] != c_t:
            raise ProtocolError(
                f"record has {rec.corr.shape[1]} class columns, task has {c_t}"
            )
        if mode == "full" and rec.gram is None:
            raise ProtocolError("full-mode record is missing its gram matrix")
        if mode == "efficient" and rec.gram is not None:
            raise ProtocolError("efficient-mode record carries a gram matrix")

    records.sort(key=lambda r: (r.client_id, r.dummy_index))
    corr = np.zeros((m, c_t))
    for rec in records:
        corr += rec.corr
    gram = None
    if mode == "full":
        gram = np.zeros((m, m))
        for rec in records:
            gram += rec.gram
        # Entrywise privacy noise breaks exact symmetry; averaging the
        # triangles is the unbiased symmetric projection and keeps the SPD
        # solve path uniform. A no-op up to rounding for clean uploads.
        gram = (gram + gram.T) / 2.0
    return StageAggregate(gram=gram, corr=corr, records=tuple(records))


def estimate_gram(
    records: Sequence[SpatialStatistics], task_classes: Sequence[int]
) -> np.ndarray:
    """Unbiased plug-in estimate of the task gram from first-order records.

    Per class i with contributing records (label_freq[i] > 0) indexed by k:

        G_i = (n_i - 1)/(K_i - 1) * sum_k c_k c_k^T / n_k
            - (n_i - K_i)/(n_i (K_i - 1)) * (sum_k c_k)(sum_k c_k)^T

    where n_i = sum_k n_k and K_i counts the contributing records. Classes
    absent everywhere contribute nothing; a class held by a single record
    cannot be estimated and raises. The result is exactly symmetrized.
    """
    records = list(records)
    if not records:
        raise ProtocolError("gram estimation needs at least one record")
    m = records[0].feature_dim
    for rec in records:
        if rec.feature_dim != m or rec.corr.shape[1] != len(task_classes):
            raise ProtocolError(
                f"record shape {rec.corr.shape} does not match "
                f"({m}, {len(task_classes)})"
            )
    g_hat = np.zeros((m, m))
    for i, cls in enumerate(task_classes):
        counts = np.array([float(rec.label_freq[i]) for rec in records])
        contributing = counts > 0.0
        k_i = int(contributing.sum())
        if k_i == 0:
            continue
        if k_i < 2:
            raise EstimationError(
                f"class {cls} is held by a single record; gram estimation "
                f"needs at least 2 (use dummy clients)"
            )
        cols = np.stack([rec.corr[:, i] for rec, keep in zip(records, contributing) if keep])
        n_k = np.maximum(counts[contributing], MIN_COUNT)
        n_i = float(n_k.sum())
        first = (cols.T / n_k) @ cols
        total = cols.sum(axis=0)
        g_hat += (n_i - 1.0) / (k_i - 1.0) * first
        g_hat -= (n_i - k_i) / (n_i * (k_i - 1.0)) * np.outer(total, total)
    return (g_hat + g_hat.T) / 2.0


def temporal_aggregate(
    state: TemporalState,
    gram_new: np.ndarray,
    corr_new: np.ndarray,
    task_classes: Sequence[int],
) -> TemporalState:
    """Fold one task's aggregated statistics into the running state.

    The gram is summed, correlation columns are appended, class ids extend
    in task order. Classes must be disjoint across stages.
    """
    gram_new = np.asarray(gram_new, dtype=np.float64)
    corr_new = np.asarray(corr_new, dtype=np.float64)
    m = state.gram_acc.shape[0]
    if gram_new.shape != (m, m):
        raise ProtocolError(f"stage gram shape {gram_new.shape} does not match ({m}, {m})")
    if corr_new.shape != (m, len(task_classes)):
        raise ProtocolError(
            f"stage corr shape {corr_new.shape} does not match "
            f"({m}, {len(task_classes)})"
        )
    overlap = set(task_classes) & set(state.class_ids)
    if overlap:
        raise ProtocolError(f"classes {sorted(overlap)} already seen in earlier stages")
    if len(set(task_classes)) != len(task_classes):
        raise ProtocolError(f"task class list has duplicates: {list(task_classes)}")
    return TemporalState(
        gram_acc=state.gram_acc + gram_new,
        corr_acc=np.hstack([state.corr_acc, corr_new]),
        class_ids=state.class_ids + tuple(int(c) for c in task_classes),
        stage=state.stage + 1,
        estimated=state.estimated,
    )


def update_classifier(
    state: TemporalState, gamma: float, random_map: RandomMap | None = None
) -> GlobalModel:
    """Closed-form classifier update W = (G_acc + gamma I)^-1 C_acc."""
    if state.stage < 1 or not state.class_ids:
        raise ProtocolError("cannot update the classifier from an empty state")
    weights = ridge_solve(state.gram_acc, state.corr_acc, gamma, class_ids=state.class_ids)
    return GlobalModel(random_map=random_map, weights=weights, stage=state.stage)
