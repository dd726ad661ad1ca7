"""Failure-driven sampling and pool matching in projection space.

Weights turn per-image failure scores into a categorical distribution.
Two modes exist: "failure" (the default) weights images toward HIGH
failure, w_i proportional to C_i, so the hardest validation images are
drawn most often; "success" weights toward LOW failure, w_i proportional
to 1 - C_i. Both are kept so the run summary can record which one
actually remediates; see the loop module.

Sampling is inverse-CDF with replacement over the ordered weights.
Matching finds, for each sampled validation image, the m nearest
augmentation-pool images by Euclidean distance in the 2-D projection
space, then deduplicates the union preserving first-seen order.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .saliency import FailureScores
from .seeding import make_rng

WEIGHT_MODES = ("failure", "success")


@dataclass
class SampleWeights:
    ids: list[str]
    weights: np.ndarray  # aligned with ids, sums to 1
    mode: str


@dataclass
class MatchSet:
    """Audit record of one sampling round.

    matches holds one (val_id, pool_id, distance) triple per neighbor
    before deduplication; matched_pool_ids is the deduplicated union in
    first-seen order.
    """

    sampled_val_ids: list[str]
    matched_pool_ids: list[str]
    matches: list[tuple[str, str, float]] = field(default_factory=list)
    mode: str = "failure"
    seed: int = 0


def make_weights(failures: FailureScores, mode: str = "failure") -> SampleWeights:
    """Normalize failure scores into a categorical distribution.

    When the normalizer is zero (all scores 0 in failure mode, all scores
    1 in success mode) the distribution falls back to uniform and a
    RuntimeWarning is emitted.
    """
    if mode not in WEIGHT_MODES:
        raise DataError(f"unknown weight mode '{mode}' (expected one of {WEIGHT_MODES})")
    ids, scores = failures.ordered()
    if not ids:
        raise DataError("cannot build sample weights from an empty score set")
    raw = scores if mode == "failure" else 1.0 - scores
    total = float(raw.sum())
    if total <= 0.0:
        warnings.warn(
            f"all {mode}-mode weights are zero; falling back to uniform sampling",
            RuntimeWarning,
            stacklevel=2,
        )
        weights = np.full(len(ids), 1.0 / len(ids))
    else:
        weights = raw / total
    return SampleWeights(ids=ids, weights=weights, mode=mode)


def sample(weights: SampleWeights, k: int, seed: int) -> list[str]:
    """Draw k ids with replacement by inverse-CDF over the ordered weights."""
    if k < 1:
        raise DataError("k must be at least 1")
    cdf = np.cumsum(weights.weights)
    cdf[-1] = 1.0  # guard against accumulated round-off at the top
    u = make_rng(seed).random(k)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, len(weights.ids) - 1)
    return [weights.ids[i] for i in idx]


def match_pool(
    sampled_ids: Sequence[str],
    val_ids: Sequence[str],
    val_coords: np.ndarray,
    pool_ids: Sequence[str],
    pool_coords: np.ndarray,
    m: int,
) -> MatchSet:
    """For each sampled validation image, the m nearest pool images.

    Distances are Euclidean in the shared projection space; ties go to the
    lower pool index. The returned matched_pool_ids are deduplicated
    preserving the order in which they were first selected.
    """
    if m < 1:
        raise DataError("m must be at least 1")
    pool_coords = np.asarray(pool_coords, dtype=np.float64)
    val_coords = np.asarray(val_coords, dtype=np.float64)
    if pool_coords.shape[0] == 0:
        raise DataError("cannot match against an empty pool")
    if pool_coords.shape[0] != len(pool_ids) or val_coords.shape[0] != len(val_ids):
        raise DataError("coordinate rows must align with their id lists")
    row_of = {rec_id: i for i, rec_id in enumerate(val_ids)}
    n_take = min(m, pool_coords.shape[0])

    matches: list[tuple[str, str, float]] = []
    matched: list[str] = []
    seen: set[str] = set()
    for rec_id in sampled_ids:
        if rec_id not in row_of:
            raise DataError(f"sampled id '{rec_id}' has no validation coordinate")
        q = val_coords[row_of[rec_id]]
        d = np.sqrt(np.sum((pool_coords - q) ** 2, axis=1))
        order = np.argsort(d, kind="stable")[:n_take]
        for j in order:
            pool_id = pool_ids[int(j)]
            matches.append((rec_id, pool_id, float(d[j])))
            if pool_id not in seen:
                seen.add(pool_id)
                matched.append(pool_id)
    return MatchSet(
        sampled_val_ids=list(sampled_ids),
        matched_pool_ids=matched,
        matches=matches,
    )


def save_matchset(ms: MatchSet, path) -> None:
    obj = {
        "format": "matchset",
        "version": 1,
        "mode": ms.mode,
        "seed": ms.seed,
        "sampled_val_ids": ms.sampled_val_ids,
        "matched_pool_ids": ms.matched_pool_ids,
        "matches": [[v, p, d] for v, p, d in ms.matches],
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_matchset(path) -> MatchSet:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read matchset {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid matchset file: {exc.msg}") from exc
    if obj.get("format") != "matchset" or obj.get("version") != 1:
        raise DataError(f"{path}: not a version-1 matchset file")
    return MatchSet(
        sampled_val_ids=[str(v) for v in obj["sampled_val_ids"]],
        matched_pool_ids=[str(v) for v in obj["matched_pool_ids"]],
        matches=[(str(v), str(p), float(d)) for v, p, d in obj["matches"]],
        mode=str(obj["mode"]),
        seed=int(obj["seed"]),
    )
