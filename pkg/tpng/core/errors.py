"""Exception hierarchy.

Audits return violations as data; these are raised only for precondition
failures and structural breakage.
"""

from __future__ import annotations


class TpngError(Exception):
    """Base class for all package errors."""


class DomainError(TpngError, ValueError):
    """An argument lies outside the operation's domain."""


class ParticleExited(DomainError):
    """A tagged second-class particle was queried after leaving the box."""


class SamplingError(TpngError):
    """Two sampled events share an ordinate (probability zero); resample."""


class StructuralError(TpngError):
    """A diagram is internally inconsistent."""

    def __init__(self, message: str, segment=None):
        super().__init__(message if segment is None else f"{message}: {segment!r}")
        self.segment = segment


class WindowOverflow(TpngError):
    """An indicator-chain step touched the edge of the simulated window."""

    def __init__(self, m: int, window: tuple[int, int]):
        super().__init__(f"step at m={m} leaves window [{window[0]}, {window[1]}]")
        self.m = m
        self.window = window


class InvariantViolation(TpngError, AssertionError):
    """A coupling invariant (e.g. U >= V) was broken."""


class InsufficientSamples(TpngError, ValueError):
    """A statistic was requested on too few samples."""


class SchemaMismatch(TpngError, ValueError):
    """A serialized document carries an unexpected schema tag or digest."""


class ConfigError(TpngError):
    """A run configuration failed validation; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
