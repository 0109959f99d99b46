"""Small 2D vector helpers shared by the simulator and the critics."""
from __future__ import annotations

import math
from typing import NamedTuple


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other[0], self.y - other[1])

    def __mul__(self, k: float) -> "Vec2":  # type: ignore[override]
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other[0] + self.y * other[1]

    def det(self, other: "Vec2") -> float:
        return self.x * other[1] - self.y * other[0]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def norm_sq(self) -> float:
        return self.x * self.x + self.y * self.y

    def angle(self) -> float:
        return math.atan2(self.y, self.x)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)

    def unit(self) -> "Vec2":
        n = self.norm()
        if n == 0.0:
            return Vec2(0.0, 0.0)
        return Vec2(self.x / n, self.y / n)

    @classmethod
    def polar(cls, r: float, theta: float) -> "Vec2":
        return cls(r * math.cos(theta), r * math.sin(theta))


ZERO = Vec2(0.0, 0.0)


def dist(a: Vec2, b: Vec2) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def wrap_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def clamp_speed(v: Vec2, vmax: float) -> Vec2:
    """Rescale ``v`` to magnitude ``vmax`` if it is longer, keeping direction."""
    n = v.norm()
    if n > vmax and n > 0.0:
        return Vec2(v.x * vmax / n, v.y * vmax / n)
    return Vec2(float(v.x), float(v.y))
