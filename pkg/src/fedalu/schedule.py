"""Round arithmetic for accumulating local updates.

Rounds are 0-indexed and round 0 always exchanges, so every round has a
well-defined most recent exchange round.
"""

from __future__ import annotations

from dataclasses import dataclass


def _check(t: int, s: int) -> None:
    if t < 0:
        raise ValueError(f"round index must be >= 0, got {t}")
    if s < 1:
        raise ValueError(f"accumulation period s must be >= 1, got {s}")


def should_exchange(t: int, s: int) -> bool:
    """True when knowledge is uploaded and downloaded in round ``t``."""
    _check(t, s)
    return t % s == 0


def effective_knowledge_round(t: int, s: int) -> int:
    """Round whose global knowledge is distilled against in round ``t``."""
    _check(t, s)
    return t - t % s


def exchange_count(total_rounds: int, s: int) -> int:
    """Number of exchange rounds in ``range(total_rounds)``."""
    if total_rounds < 1:
        raise ValueError(f"total rounds must be >= 1, got {total_rounds}")
    _check(0, s)
    return -(-total_rounds // s)


@dataclass(frozen=True)
class ScheduleConfig:
    s: int
    total_rounds: int

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if self.total_rounds < 1:
            raise ValueError(f"total_rounds must be >= 1, got {self.total_rounds}")

    def rounds(self):
        for t in range(self.total_rounds):
            yield RoundState(t, effective_knowledge_round(t, self.s))

    @property
    def exchanges(self) -> int:
        return exchange_count(self.total_rounds, self.s)


@dataclass(frozen=True)
class RoundState:
    t: int
    last_exchange_round: int

    @property
    def staleness(self) -> int:
        return self.t - self.last_exchange_round
