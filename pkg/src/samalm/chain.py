"""Nearest-neighbor message chain that carries team data to the leader."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Generic, Mapping, TypeVar

from samalm.sim.geometry import Vec2, dist

T = TypeVar("T")


@dataclass(frozen=True)
class ChainTopology:
    order: tuple[int, ...]

    @property
    def leader(self) -> int:
        return self.order[0]

    def neighbors(self, robot_id: int) -> tuple[int, ...]:
        k = self.order.index(robot_id)
        return tuple(self.order[j] for j in (k - 1, k + 1) if 0 <= j < len(self.order))


def build_chain(positions: Mapping[int, Vec2]) -> ChainTopology:
    """Greedy nearest-neighbor chain from the lowest id; ties go to the lower id."""
    if not positions:
        raise ValueError("need at least one robot")
    remaining = set(positions)
    current = min(remaining)
    order = [current]
    remaining.discard(current)
    while remaining:
        here = positions[current]
        current = min(remaining, key=lambda i: (dist(here, positions[i]), i))
        order.append(current)
        remaining.discard(current)
    return ChainTopology(tuple(order))


@dataclass(frozen=True)
class Relay(Generic[T]):
    """What the leader holds after aggregation."""

    packets: dict[int, T]
    hops: dict[int, int]
    messages: int


def relay_to_leader(chain: ChainTopology, packets: Mapping[int, T]) -> Relay[T]:
    """Pass bundles hop by hop from the tail of the chain to its head.

    Each robot only ever talks to its chain predecessor; the leader ends up
    with every packet.
    """
    bundle: dict[int, T] = {}
    hops: dict[int, int] = {}
    messages = 0
    for pos in range(len(chain.order) - 1, -1, -1):
        rid = chain.order[pos]
        bundle[rid] = packets[rid]
        hops[rid] = pos
        if pos > 0:
            messages += 1  # forward the whole bundle to order[pos - 1]
    return Relay(dict(sorted(bundle.items())), hops, messages)
