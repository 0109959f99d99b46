"""Entropy-weighted fusion of local and global critic scores."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class FusionParams:
    kappa: float = 1.0
    z_th: float = 80.0
    eps_clamp: float = 1.0
    max_requery: int = 3

    def __post_init__(self) -> None:
        if self.eps_clamp <= 0:
            raise ValueError("eps_clamp must be positive")
        if not 0 < self.z_th <= 100:
            raise ValueError("z_th must lie in (0, 100]")
        if self.max_requery < 0:
            raise ValueError("max_requery must be >= 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


@dataclass(frozen=True)
class FusionResult:
    C: tuple[float, ...]
    H: float
    omega: float
    Z: float
    requery_targets: frozenset[int]
    # True when nobody scored strictly below Z and the lowest scorers were picked instead.
    fallback_targets: bool = False


def confidence(Q: Sequence[float], params: FusionParams = FusionParams()) -> tuple[float, ...]:
    """Scores clamped to [eps, 100] and normalized to sum to one."""
    if not Q:
        raise ValueError("need at least one local score")
    clamped = [min(100.0, max(params.eps_clamp, float(q))) for q in Q]
    total = math.fsum(clamped)
    return tuple(c / total for c in clamped)


def select_requery_targets(Q: Sequence[float], Z: float) -> frozenset[int]:
    return frozenset(i for i, q in enumerate(Q) if q < Z)


def fuse(Q: Sequence[float], Q_global: float, params: FusionParams = FusionParams()) -> FusionResult:
    C = confidence(Q, params)
    n = len(Q)
    H = -params.kappa * math.fsum(c * math.log(c) for c in C)
    clamped = [min(100.0, max(params.eps_clamp, float(q))) for q in Q]
    if n == 1 or all(c == clamped[0] for c in clamped):
        omega = 1.0
    else:
        omega = min(1.0, max(0.0, H / (params.kappa * math.log(n))))
    mean_q = math.fsum(Q) / n
    Z = omega * mean_q + (1.0 - omega) * Q_global

    targets: frozenset[int] = frozenset()
    fallback = False
    if Z < params.z_th:
        targets = select_requery_targets(Q, Z)
        if not targets:
            # Equal local scores (always the case for one robot) leave nobody
            # strictly below Z; re-query the lowest scorers instead.
            low = min(Q)
            targets = frozenset(i for i, q in enumerate(Q) if q == low)
            fallback = True
    return FusionResult(C, H, omega, Z, targets, fallback)
