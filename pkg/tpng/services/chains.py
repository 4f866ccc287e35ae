"""
Indicator chains on a finite window of integer labels.

``V`` marks which lower-layer particles currently carry an upper-layer
particle; ``U`` is the same dynamics started from the product blocking
measure. One step acts on the pair of positions (m, m+1):

- equal bits stay put;
- bits (0, 1) become (1, 0), a left jump, always;
- bits (1, 0) become (0, 1), a right jump, with probability t.

Only the last case consumes a coin. In the coupled step, U and V share that coin.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from tpng.core.errors import DomainError, InvariantViolation, WindowOverflow

logger = logging.getLogger("tpng.chains")

STAY = "stay"
LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True)
class IndicatorChain:
    j_min: int
    bits: Tuple[int, ...]
    step: int = 0

    @property
    def j_max(self) -> int:
        return self.j_min + len(self.bits) - 1

    @property
    def window(self) -> Tuple[int, int]:
        return self.j_min, self.j_max

    def __getitem__(self, j: int) -> int:
        if j < self.j_min or j > self.j_max:
            raise WindowOverflow(j, self.window)
        return self.bits[j - self.j_min]

    def pair(self, m: int) -> Tuple[int, int]:
        if m < self.j_min or m + 1 > self.j_max:
            raise WindowOverflow(m, self.window)
        i = m - self.j_min
        return self.bits[i], self.bits[i + 1]

    def with_pair(self, m: int, pair: Tuple[int, int]) -> "IndicatorChain":
        i = m - self.j_min
        return IndicatorChain(self.j_min, self.bits[:i] + pair + self.bits[i + 2:], self.step + 1)

    def ones(self) -> list:
        return [self.j_min + i for i, b in enumerate(self.bits) if b]

    def dominates(self, other: "IndicatorChain") -> bool:
        if self.window != other.window:
            raise DomainError("chains live on different windows")
        return all(a >= b for a, b in zip(self.bits, other.bits))


@dataclass(frozen=True)
class BlockingParams:
    t: float
    c: float

    def __post_init__(self):
        if not 0.0 < self.t < 1.0:
            raise DomainError(f"blocking measure needs t in (0, 1), got {self.t}")
        if not math.isfinite(self.c):
            raise DomainError("c must be finite")

    @classmethod
    def from_rates(cls, t: float, lam: float, eps: float) -> "BlockingParams":
        """c = log_t(lam/eps), so that the marginal at j = 0 equals lam/(lam+eps)."""
        if lam <= 0 or eps <= 0:
            raise DomainError("lam and eps must be positive")
        if not 0.0 < t < 1.0:
            raise DomainError(f"blocking measure needs t in (0, 1), got {t}")
        return cls(t=t, c=math.log(lam / eps) / math.log(t))

    def marginal(self, j) -> np.ndarray:
        """q_j = t^(j+c) / (1 + t^(j+c)), evaluated without overflow."""
        return expit((np.asarray(j, dtype=float) + self.c) * math.log(self.t))


def classify(pair: Tuple[int, int]) -> str:
    if pair == (0, 1):
        return LEFT
    if pair == (1, 0):
        return RIGHT
    return STAY


def _apply(pair: Tuple[int, int], coin: Optional[float], t: float) -> Tuple[Tuple[int, int], bool]:
    kind = classify(pair)
    if kind == LEFT:
        return (1, 0), True
    if kind == RIGHT and coin is not None and coin < t:
        return (0, 1), True
    return pair, False


def v_init(marks, n_bottom: int) -> IndicatorChain:
    """Bits for labels 1-len(marks)..0 come from the marks (index 0 is label 0); labels 1..n_bottom start empty."""
    marks = [int(bool(b)) for b in marks]
    left = tuple(reversed(marks))  # label -(k-1) first
    return IndicatorChain(j_min=1 - len(marks), bits=left + (0,) * max(n_bottom, 0))


def v_step(chain: IndicatorChain, m: int, rng: np.random.Generator, t: float) -> IndicatorChain:
    """One meeting between labels m and m+1."""
    pair = chain.pair(m)
    coin = float(rng.random()) if classify(pair) == RIGHT else None
    new, _ = _apply(pair, coin, t)
    return chain.with_pair(m, new)


def u_init(params: BlockingParams, window: Tuple[int, int], rng: np.random.Generator) -> IndicatorChain:
    j_min, j_max = window
    if j_max < j_min:
        raise DomainError("empty window")
    q = params.marginal(np.arange(j_min, j_max + 1))
    bits = tuple(int(b) for b in (rng.random(len(q)) < q))
    return IndicatorChain(j_min=j_min, bits=bits)


def u_init_above(v: IndicatorChain, params: BlockingParams, keep_prob: float, rng: np.random.Generator) -> IndicatorChain:
    """Blocking-measure chain coupled to dominate ``v``.

    ``v`` must carry independent Ber(keep_prob) bits at j <= 0 and zeros above.
    Each U_j keeps the marginal q_j; where V_j = 1, U_j = 1.
    """
    js = np.arange(v.j_min, v.j_max + 1)
    q = params.marginal(js)
    u = rng.random(len(js))
    bits = []
    for j, qj, uj, vj in zip(js, q, u, v.bits):
        if vj:
            bits.append(1)
        elif j <= 0:
            if qj + 1e-12 < keep_prob:
                raise DomainError(f"blocking marginal {qj} below keep probability {keep_prob} at j={j}")
            bits.append(int(uj < (qj - keep_prob) / (1.0 - keep_prob)) if keep_prob < 1.0 else 1)
        else:
            bits.append(int(uj < qj))
    return IndicatorChain(j_min=v.j_min, bits=tuple(bits))


@dataclass(frozen=True)
class CoupledStep:
    u: IndicatorChain
    v: IndicatorChain
    row: str  # e.g. "V10/U11"
    coin: Optional[float]
    u_jump: bool
    v_jump: bool


def coupled_step(u: IndicatorChain, v: IndicatorChain, m: int, rng: np.random.Generator, t: float) -> CoupledStep:
    """Advance both chains at (m, m+1) with one shared coin."""
    pu, pv = u.pair(m), v.pair(m)
    if pu[0] < pv[0] or pu[1] < pv[1]:
        raise InvariantViolation(f"U does not dominate V at m={m}: U{pu} V{pv}")
    need_coin = classify(pu) == RIGHT or classify(pv) == RIGHT
    coin = float(rng.random()) if need_coin else None
    nu, ju = _apply(pu, coin, t)
    nv, jv = _apply(pv, coin, t)
    if nu[0] < nv[0] or nu[1] < nv[1]:
        raise InvariantViolation(f"coupled step broke U >= V at m={m}")
    row = f"V{pv[0]}{pv[1]}/U{pu[0]}{pu[1]}"
    return CoupledStep(u.with_pair(m, nu), v.with_pair(m, nv), row, coin, ju, jv)


def reversibility_check(params: BlockingParams, m: int) -> float:
    """Detailed-balance residual of the blocking measure across the pair (m, m+1)."""
    q_m, q_n = (float(x) for x in params.marginal([m, m + 1]))
    return abs(params.t * q_m * (1.0 - q_n) - (1.0 - q_m) * q_n)


def rightmost_one(chain: IndicatorChain) -> Optional[int]:
    for i in range(len(chain.bits) - 1, -1, -1):
        if chain.bits[i]:
            return chain.j_min + i
    return None


def log_overflow(m: int, window: Tuple[int, int], context: str) -> None:
    logger.warning(json.dumps({"event": "window_overflow", "m": m, "window": list(window), "context": context}))
