"""Homogeneous Poisson samplers and independent thinning."""

from __future__ import annotations

import json
import logging
from typing import Tuple

import numpy as np

from tpng.core.errors import DomainError
from tpng.model.schemas import Box

logger = logging.getLogger("tpng.sampling")

_MAX_REDRAWS = 16


def _check_rate(rate: float) -> None:
    if not np.isfinite(rate) or rate < 0:
        raise DomainError(f"rate must be finite and non-negative, got {rate}")


def sample_poisson_1d(rate: float, length: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted points of a rate-``rate`` Poisson process on (0, length); empty when length is 0."""
    _check_rate(rate)
    if not np.isfinite(length) or length < 0:
        raise DomainError(f"length must be finite and non-negative, got {length}")
    if length == 0:
        return np.empty(0)
    n = rng.poisson(rate * length)
    for _ in range(_MAX_REDRAWS):
        pts = np.sort(rng.uniform(0.0, length, n))
        if n == 0 or (pts[0] > 0.0 and np.all(np.diff(pts) > 0)):
            return pts
        logger.info(json.dumps({"event": "coincident_points_redrawn", "n": int(n)}))
    raise DomainError("could not draw distinct points")


def sample_poisson_2d(intensity: float, box: Box, rng: np.random.Generator) -> np.ndarray:
    """Points of a rate-``intensity`` Poisson process in the box, shape (n, 2), sorted by ordinate.

    Ordinates and abscissas are pairwise distinct.
    """
    _check_rate(intensity)
    n = rng.poisson(intensity * box.width * box.height)
    for _ in range(_MAX_REDRAWS):
        xs = rng.uniform(0.0, box.width, n)
        ys = rng.uniform(0.0, box.height, n)
        order = np.argsort(ys, kind="stable")
        pts = np.column_stack([xs[order], ys[order]]) if n else np.empty((0, 2))
        if n == 0:
            return pts
        distinct = np.all(np.diff(pts[:, 1]) > 0) and len(np.unique(xs)) == n
        if distinct and pts[:, 0].min() > 0.0 and pts[0, 1] > 0.0:
            return pts
        logger.info(json.dumps({"event": "coincident_points_redrawn", "n": int(n)}))
    raise DomainError("could not draw distinct points")


def thin(points: np.ndarray, keep_prob: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Split ``points`` into independently kept and dropped parts, preserving order."""
    if not 0.0 <= keep_prob <= 1.0:
        raise DomainError(f"keep probability must lie in [0, 1], got {keep_prob}")
    points = np.asarray(points)
    marks = rng.random(len(points)) < keep_prob
    return points[marks], points[~marks]


def thinning_marks(n: int, keep_prob: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= keep_prob <= 1.0:
        raise DomainError(f"keep probability must lie in [0, 1], got {keep_prob}")
    return rng.random(n) < keep_prob
