"""Named random streams and the coin sources the sweeps consume.

Key derivation (stable across releases):

    master seed S
      geometry seed    = SeedSequence(S, spawn_key=(GEOMETRY_KEY,)).generate_state(1, uint64)
      interaction seed = SeedSequence(S, spawn_key=(INTERACTION_KEY,)).generate_state(1, uint64)
      layer seed       = SeedSequence(S, spawn_key=(LAYER_KEY,)).generate_state(1, uint64)
      chain seed       = SeedSequence(S, spawn_key=(CHAIN_KEY,)).generate_state(1, uint64)

Geometry families (sources, sinks, bulk, thinning marks) each get their own
generator, ``default_rng(SeedSequence(geometry_seed, spawn_key=(FAMILY_KEYS[name],)))``,
so changing one rate never moves another family's points. Replica ``k`` of a
master seed uses ``SeedSequence(S, spawn_key=(REPLICA_KEY, k))``.

The interaction coin for contact ``j`` (0-based) of the horizontal ray with
origin id ``i`` is entry ``i * COIN_BLOCK + j`` of the uniform stream seeded
by the interaction seed when ``j < COIN_BLOCK``, and draw ``j - COIN_BLOCK`` of
``default_rng(SeedSequence(interaction_seed, spawn_key=(i,)))`` otherwise.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Protocol, Tuple

import numpy as np

from tpng.core.errors import DomainError

logger = logging.getLogger("tpng.sampling")

GEOMETRY_KEY = 1
INTERACTION_KEY = 2
LAYER_KEY = 3
CHAIN_KEY = 4
REPLICA_KEY = 5

FAMILY_KEYS: Dict[str, int] = {
    "sources": 0,
    "sinks": 1,
    "bulk": 2,
    "source-thinning": 3,
    "sink-thinning": 4,
    "eta-sinks": 5,
    "chain-coupling": 6,
    "upper-sources": 7,
    "lower-sinks": 8,
    "queries": 9,
}

COIN_BLOCK = 16
SEED_MAX = 2**64


def _derive(master: int, *key: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=key).generate_state(1, np.uint64)[0])


def parse_seed(text: str) -> int:
    """Accept decimal or 0x-prefixed hex; reject anything outside [0, 2^64)."""
    try:
        value = int(str(text).strip(), 0)
    except ValueError as exc:
        raise DomainError(f"seed {text!r} is not an integer") from exc
    if not 0 <= value < SEED_MAX:
        raise DomainError(f"seed {value} outside [0, 2^64)")
    return value


@dataclass(frozen=True)
class RngStreams:
    master_seed: int
    geometry_seed: int
    interaction_seed: int
    layer_seed: int
    chain_seed: int

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        if not 0 <= seed < SEED_MAX:
            raise DomainError(f"seed {seed} outside [0, 2^64)")
        return cls(
            master_seed=seed,
            geometry_seed=_derive(seed, GEOMETRY_KEY),
            interaction_seed=_derive(seed, INTERACTION_KEY),
            layer_seed=_derive(seed, LAYER_KEY),
            chain_seed=_derive(seed, CHAIN_KEY),
        )

    def replica(self, k: int) -> "RngStreams":
        if k < 0:
            raise DomainError("replica index must be non-negative")
        return RngStreams.from_seed(_derive(self.master_seed, REPLICA_KEY, k))

    def geometry(self, family: str) -> np.random.Generator:
        try:
            key = FAMILY_KEYS[family]
        except KeyError as exc:
            raise DomainError(f"unknown geometry family {family!r}") from exc
        return np.random.default_rng(np.random.SeedSequence(self.geometry_seed, spawn_key=(key,)))

    def layer(self, index: int = 0) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.layer_seed, spawn_key=(index,)))

    def chain(self) -> np.random.Generator:
        return np.random.default_rng(self.chain_seed)

    def describe(self) -> dict:
        return {
            "master": self.master_seed,
            "geometry": self.geometry_seed,
            "interaction": self.interaction_seed,
            "layer": self.layer_seed,
            "chain": self.chain_seed,
        }


class CoinSource(Protocol):
    """Decides one contact between a moving horizontal and a vertical.

    Returns True for a corner (both rays annihilate), which happens with
    probability ``1 - t``; False for a crossing.
    """

    def corner(self, ray_id: int, ordinal: int, at: Tuple[float, float], t: float) -> bool: ...

    @property
    def drawn(self) -> int: ...


class StreamCoins:
    """Counter-indexed interaction coins: the same (ray, ordinal) always sees the same uniform."""

    def __init__(self, interaction_seed: int, n_rays: int):
        self.seed = interaction_seed
        self._table = np.random.default_rng(interaction_seed).random((max(n_rays, 0), COIN_BLOCK))
        self._overflow: Dict[int, np.random.Generator] = {}
        self._overflow_next: Dict[int, int] = {}
        self._drawn = 0

    @property
    def drawn(self) -> int:
        return self._drawn

    def uniform(self, ray_id: int, ordinal: int) -> float:
        if ordinal < COIN_BLOCK:
            return float(self._table[ray_id, ordinal])
        gen = self._overflow.get(ray_id)
        if gen is None:
            gen = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(ray_id,)))
            self._overflow[ray_id] = gen
            self._overflow_next[ray_id] = COIN_BLOCK
        # overflow draws are consumed strictly in ordinal order per ray
        while self._overflow_next[ray_id] < ordinal:
            gen.random()
            self._overflow_next[ray_id] += 1
        self._overflow_next[ray_id] += 1
        return float(gen.random())

    def corner(self, ray_id: int, ordinal: int, at, t: float) -> bool:
        self._drawn += 1
        return self.uniform(ray_id, ordinal) < 1.0 - t


class SequentialCoins:
    """Coins taken in call order from one generator (used by the coupling layer)."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._drawn = 0

    @property
    def drawn(self) -> int:
        return self._drawn

    def corner(self, ray_id: int, ordinal: int, at, t: float) -> bool:
        self._drawn += 1
        return bool(self._rng.random() < 1.0 - t)


@dataclass
class ScriptedCoins:
    """Coins keyed by contact location, for hand-built fixtures.

    ``corners`` lists the contact points that resolve as corners; every other
    contact resolves as ``default`` (False = crossing).
    """

    corners: Iterable[Tuple[float, float]] = ()
    default: bool = False
    ndigits: int = 9
    _keys: frozenset = field(init=False, repr=False)
    _drawn: int = field(default=0, init=False, repr=False)
    log: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        self._keys = frozenset(self._key(p) for p in self.corners)

    def _key(self, p) -> Tuple[float, float]:
        return (round(float(p[0]), self.ndigits), round(float(p[1]), self.ndigits))

    @property
    def drawn(self) -> int:
        return self._drawn

    def corner(self, ray_id: int, ordinal: int, at, t: float) -> bool:
        self._drawn += 1
        key = self._key(at)
        decision = True if key in self._keys else self.default
        self.log.append((key, decision))
        return decision


def log_streams(streams: RngStreams, context: Optional[str] = None) -> None:
    logger.debug(json.dumps({"event": "streams_derived", "context": context, **streams.describe()}))
