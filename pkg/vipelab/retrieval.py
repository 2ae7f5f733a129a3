# -*- coding: utf-8 -*-
"""
Cross-view retrieval.

An :class:`EmbeddingIndex` stores one embedding per (pose id, camera id)
with the canonical 3D pose behind it. Queries are exact linear scans. A
query counts as a hit at k when any of its k nearest gallery entries has a
Procrustes-aligned MPJPE below the threshold to the query's own 3D pose.
"""

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import tablib

from .camera import normalize_2d_array
from .errors import ConfigError, DimensionError, EmptyIndexError
from .log import RecordWriter
from .pose.metrics import aligned_mpjpe_array, mpjpe_array

logger = logging.getLogger(__name__)

QUERY_CHUNK = 256


@dataclass(frozen=True)
class HitConfig:
    ks: Tuple[int, ...] = (1, 10, 20)
    threshold: float = 0.1
    exclude_self: bool = False

    def __post_init__(self):
        if not self.ks or min(self.ks) < 1:
            raise ConfigError(f"Hit@k values must be >= 1, got {self.ks}")
        if self.threshold < 0:
            raise ConfigError(f"Hit threshold must be >= 0, got {self.threshold}")
        object.__setattr__(self, 'ks', tuple(sorted(int(k) for k in self.ks)))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'HitConfig':
        data = dict(data)
        if 'ks' in data:
            data['ks'] = tuple(data['ks'])
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['ks'] = list(self.ks)
        return data


@dataclass(frozen=True, eq=False)
class EmbeddingIndex:
    """Immutable retrieval gallery."""

    pose_ids: np.ndarray
    camera_ids: np.ndarray
    embeddings: np.ndarray
    poses3d: np.ndarray

    def __post_init__(self):
        pose_ids = np.asarray(self.pose_ids, dtype=np.int64)
        camera_ids = np.asarray(self.camera_ids, dtype=np.int64)
        embeddings = np.atleast_2d(np.asarray(self.embeddings, dtype=np.float64))
        poses3d = np.asarray(self.poses3d, dtype=np.float64)
        if not (len(pose_ids) == len(camera_ids) == len(embeddings) == len(poses3d)):
            raise DimensionError("Index columns must have equal length")
        if len(pose_ids) and len(set(zip(pose_ids.tolist(), camera_ids.tolist()))) != len(pose_ids):
            raise ConfigError("Index entries must have unique (pose_id, camera_id) pairs")
        for name, arr in (('pose_ids', pose_ids), ('camera_ids', camera_ids),
                          ('embeddings', embeddings), ('poses3d', poses3d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.pose_ids)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def cameras(self) -> List[int]:
        return sorted(int(c) for c in np.unique(self.camera_ids))

    def for_camera(self, camera_id: int) -> 'EmbeddingIndex':
        mask = self.camera_ids == camera_id
        return EmbeddingIndex(self.pose_ids[mask], self.camera_ids[mask], self.embeddings[mask], self.poses3d[mask])


@dataclass
class KnnResult:
    """Gallery rows ordered by distance; ``truncated`` when k exceeded the index size."""

    rows: np.ndarray
    distances: np.ndarray
    pose_ids: np.ndarray
    camera_ids: np.ndarray
    truncated: bool = False


def knn_query(index: EmbeddingIndex, query: np.ndarray, k: int) -> KnnResult:
    """
    Exact k nearest neighbours of one embedding by Euclidean distance.

    Args:
        index: Gallery
        query: n-vector
        k: Number of neighbours

    Returns:
        KnnResult: At most ``len(index)`` entries, ``truncated`` set when k was larger

    Raises:
        EmptyIndexError: If the index is empty
    """
    if len(index) == 0:
        raise EmptyIndexError("Cannot query an empty index")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}", k=k)
    query = np.asarray(query, dtype=np.float64).reshape(1, -1)
    if query.shape[1] != index.dim:
        raise DimensionError(f"Query has {query.shape[1]} dimensions, index has {index.dim}")
    take = min(k, len(index))
    d = np.linalg.norm(index.embeddings - query[0], axis=1)
    order = np.lexsort((index.camera_ids, index.pose_ids, d))[:take]
    return KnnResult(order, d[order], index.pose_ids[order], index.camera_ids[order], truncated=k > len(index))


def _hits_for_chunk(queries: EmbeddingIndex, gallery: EmbeddingIndex, start: int, stop: int,
                    cfg: HitConfig, kmax: int, root_idx: int) -> np.ndarray:
    """(stop - start, len(ks)) boolean hit matrix."""
    q_emb = queries.embeddings[start:stop]
    hits = np.zeros((stop - start, len(cfg.ks)), dtype=bool)
    for offset, emb in enumerate(q_emb):
        q = start + offset
        d = np.linalg.norm(gallery.embeddings - emb, axis=1)
        if cfg.exclude_self:
            same = (gallery.pose_ids == queries.pose_ids[q]) & (gallery.camera_ids == queries.camera_ids[q])
            d = np.where(same, np.inf, d)
        order = np.lexsort((gallery.camera_ids, gallery.pose_ids, d))[:kmax]
        order = order[np.isfinite(d[order])]
        if order.size == 0:
            continue
        reference = np.broadcast_to(queries.poses3d[q], gallery.poses3d[order].shape)
        good = aligned_mpjpe_array(reference, gallery.poses3d[order], root_idx) < cfg.threshold
        first = np.argmax(good) if good.any() else None
        if first is None:
            continue
        for col, k in enumerate(cfg.ks):
            hits[offset, col] = first < k
    return hits


def hit_at_k(queries: EmbeddingIndex, gallery: EmbeddingIndex, cfg: HitConfig = HitConfig(),
             workers: int = 1, root_idx: int = 0) -> Dict[int, float]:
    """
    Fraction of queries with a matching pose among their top-k gallery neighbours.

    Args:
        queries: Index of query embeddings (e.g. one camera)
        gallery: Index searched (e.g. another camera)
        cfg: k values, MPJPE threshold and self-exclusion flag
        workers: Query threads
        root_idx: Root joint index for the Procrustes alignment

    Returns:
        dict: ``{k: hit rate}`` for each configured k

    Raises:
        EmptyIndexError: If either index is empty
    """
    if len(queries) == 0 or len(gallery) == 0:
        raise EmptyIndexError("Hit@k needs non-empty query and gallery indexes",
                              queries=len(queries), gallery=len(gallery))
    if queries.dim != gallery.dim:
        raise DimensionError(f"Query embeddings have {queries.dim} dimensions, gallery has {gallery.dim}")
    kmax = min(max(cfg.ks), len(gallery))
    spans = [(s, min(s + QUERY_CHUNK, len(queries))) for s in range(0, len(queries), QUERY_CHUNK)]
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda span: _hits_for_chunk(queries, gallery, span[0], span[1],
                                                               cfg, kmax, root_idx), spans))
    else:
        parts = [_hits_for_chunk(queries, gallery, s, e, cfg, kmax, root_idx) for s, e in spans]
    hits = np.concatenate(parts)
    return {k: float(hits[:, col].mean()) for col, k in enumerate(cfg.ks)}


@dataclass
class RigHitResult:
    """Per ordered camera pair Hit@k rows plus the average over pairs."""

    pairs: List[Dict[str, Any]] = field(default_factory=list)
    average: Dict[int, float] = field(default_factory=dict)

    def rows(self, label: str = '') -> List[Dict[str, Any]]:
        out = [dict(row, label=label) for row in self.pairs]
        out.append({'label': label, 'query_camera': 'all', 'gallery_camera': 'all',
                    **{f'hit@{k}': v for k, v in self.average.items()}})
        return out


def rig_hit_at_k(index: EmbeddingIndex, cfg: HitConfig = HitConfig(), cameras: Optional[Sequence[int]] = None,
                 query_cameras: Optional[Sequence[int]] = None, workers: int = 1,
                 root_idx: int = 0) -> RigHitResult:
    """
    Hit@k over every ordered pair of distinct cameras, then averaged.

    Args:
        index: Index holding embeddings for several cameras
        cfg: Hit settings
        cameras: Cameras to include (all in the index when None)
        query_cameras: Restrict query cameras, e.g. to held-out ones; galleries
            still range over ``cameras``
        workers: Query threads per pair

    Returns:
        RigHitResult
    """
    cameras = list(cameras) if cameras is not None else index.cameras()
    query_cameras = list(query_cameras) if query_cameras is not None else cameras
    per_camera = {c: index.for_camera(c) for c in set(cameras) | set(query_cameras)}
    result = RigHitResult()
    for c1, c2 in itertools.product(query_cameras, cameras):
        if c1 == c2:
            continue
        rates = hit_at_k(per_camera[c1], per_camera[c2], cfg, workers, root_idx)
        logger.debug(f"Hit@k camera {c1} -> {c2}: {rates}")
        result.pairs.append({'query_camera': c1, 'gallery_camera': c2, **{f'hit@{k}': v for k, v in rates.items()}})
    if not result.pairs:
        raise EmptyIndexError("Rig Hit@k needs at least two cameras", cameras=len(cameras))
    result.average = {k: float(np.mean([row[f'hit@{k}'] for row in result.pairs])) for k in cfg.ks}
    return result


def keypoint_index(pose_ids: np.ndarray, camera_ids: np.ndarray, joints2d: np.ndarray,
                   poses3d: np.ndarray, root_idx: int = 0) -> EmbeddingIndex:
    """Index whose embeddings are flattened normalized 2D keypoints."""
    flat = normalize_2d_array(joints2d, root_idx).reshape(len(joints2d), -1)
    return EmbeddingIndex(pose_ids, camera_ids, flat, poses3d)


def baseline_2d_retrieval(queries2d: np.ndarray, gallery2d: np.ndarray, queries3d: np.ndarray,
                          gallery3d: np.ndarray, cfg: HitConfig = HitConfig(),
                          query_ids: Optional[np.ndarray] = None, gallery_ids: Optional[np.ndarray] = None,
                          workers: int = 1, root_idx: int = 0) -> Dict[int, float]:
    """
    Hit@k using normalized 2D keypoints directly as embeddings.

    The 3D arrays are the canonical poses behind each 2D entry and only feed
    the hit rule.
    """
    q_ids = np.arange(len(queries2d)) if query_ids is None else query_ids
    g_ids = np.arange(len(gallery2d)) if gallery_ids is None else gallery_ids
    q = keypoint_index(q_ids, np.zeros(len(q_ids), dtype=np.int64), queries2d, queries3d, root_idx)
    g = keypoint_index(g_ids, np.ones(len(g_ids), dtype=np.int64), gallery2d, gallery3d, root_idx)
    return hit_at_k(q, g, cfg, workers, root_idx)


def mpjpe_eval(pred: np.ndarray, gt: np.ndarray, aligned: bool = False, root_idx: int = 0) -> float:
    """
    Mean MPJPE over paired pose sets, optionally after per-pair Procrustes alignment.

    Raises:
        DimensionError: If the sets differ in size or joint count
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DimensionError(f"Prediction set {pred.shape} does not match ground truth {gt.shape}")
    if len(pred) == 0:
        raise DimensionError("MPJPE evaluation needs at least one pose pair")
    errors = aligned_mpjpe_array(gt, pred, root_idx) if aligned else mpjpe_array(gt, pred)
    return float(np.mean(errors))


def chance_mpjpe(poses: np.ndarray, rng: np.random.Generator, n_pairs: int = 1000,
                 aligned: bool = True, root_idx: int = 0) -> float:
    """Mean MPJPE between random pairs of distinct entries, the retrieval floor."""
    poses = np.asarray(poses, dtype=np.float64)
    if len(poses) < 2:
        raise DimensionError("Chance MPJPE needs at least two poses")
    a = rng.integers(0, len(poses), size=n_pairs)
    b = (a + rng.integers(1, len(poses), size=n_pairs)) % len(poses)
    if aligned:
        return float(np.mean(aligned_mpjpe_array(poses[a], poses[b], root_idx)))
    return float(np.mean(mpjpe_array(poses[a], poses[b])))


def retrieve_3d(query_embeddings: np.ndarray, gallery: EmbeddingIndex, k: int) -> List[KnnResult]:
    """k-NN for each row of ``query_embeddings`` (e.g. VAE means of canonical 3D poses)."""
    return [knn_query(gallery, q, k) for q in np.atleast_2d(query_embeddings)]


def results_table(rows: Iterable[Dict[str, Any]], headers: Optional[Sequence[str]] = None) -> tablib.Dataset:
    rows = list(rows)
    if headers is None:
        headers = []
        for row in rows:
            headers.extend(h for h in row if h not in headers)
    data = tablib.Dataset(headers=list(headers))
    for row in rows:
        data.append([_cell(row.get(h, '')) for h in headers])
    return data


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return round(value, 6) if math.isfinite(value) else str(value)
    return value


def write_results(rows: Sequence[Dict[str, Any]], out_base: str) -> Tuple[str, str]:
    """
    Write ``<out_base>.csv`` and ``<out_base>.jsonl``.

    Returns:
        Tuple of (csv path, jsonl path)
    """
    csv_path, jsonl_path = out_base + '.csv', out_base + '.jsonl'
    os.makedirs(os.path.dirname(os.path.abspath(csv_path)), exist_ok=True)
    with open(csv_path, 'w', encoding='utf-8', newline='') as f:
        f.write(results_table(rows).export('csv'))
    with RecordWriter(jsonl_path) as writer:
        writer.write_all(rows)
    return csv_path, jsonl_path


def format_table(rows: Sequence[Dict[str, Any]]) -> str:
    """Human-readable table of result rows."""
    return results_table(rows).export('cli', tablefmt='github')
