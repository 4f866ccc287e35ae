"""Longest up-right chain among planar points, the t = 0 height oracle."""

from __future__ import annotations

from bisect import bisect_left
from typing import List, Sequence, Tuple

Pt = Tuple[float, float]


def longest_chain(points: Sequence[Pt]) -> int:
    """Length of the longest chain under the strict coordinatewise order.

    Patience sorting over the ordinates once points are sorted by abscissa;
    ties in abscissa are ordered by decreasing ordinate so they never chain.
    """
    ordered = sorted(points, key=lambda p: (p[0], -p[1]))
    piles: List[float] = []
    for _, y in ordered:
        i = bisect_left(piles, y)
        if i == len(piles):
            piles.append(y)
        else:
            piles[i] = y
    return len(piles)


def longest_chain_dp(points: Sequence[Pt]) -> int:
    """Quadratic reference for ``longest_chain``."""
    ordered = sorted(points)
    best = [1] * len(ordered)
    for i, (xi, yi) in enumerate(ordered):
        for j in range(i):
            xj, yj = ordered[j]
            if xj < xi and yj < yi and best[j] + 1 > best[i]:
                best[i] = best[j] + 1
    return max(best, default=0)


def chain_below(points: Sequence[Pt], x: float, y: float) -> int:
    return longest_chain([p for p in points if p[0] <= x and p[1] <= y])
