"""Planar intercept geometry.

Everything here works in a flat x/y frame measured in kilometres, with times
in seconds. Angles are mathematical (counter-clockwise from +x, radians).
Functions are pure and never mutate their inputs.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

TWO_PI = 2.0 * math.pi

# |discriminant| below this (km^2) is treated as a tangent line.
TANGENT_TOL = 1e-12
UNIT_TOL = 1e-12


class NonClosingTarget(ArithmeticError):
    """The target never reaches the point (non-positive closing speed)."""


class InvalidHistory(ValueError):
    """Track samples cannot produce a velocity estimate."""


class Point2(NamedTuple):
    x: float
    y: float


class Sample(NamedTuple):
    """A timestamped position report."""

    t: float
    pos: Point2


class Circle(NamedTuple):
    center: Point2
    radius: float

    def contains(self, p: Point2, tol: float = 0.0) -> bool:
        dx = p.x - self.center.x
        dy = p.y - self.center.y
        return dx * dx + dy * dy <= (self.radius + tol) ** 2


class Ray(NamedTuple):
    origin: Point2
    direction: Point2

    @classmethod
    def from_velocity(cls, origin: Point2, velocity: Point2) -> "Ray":
        speed = math.hypot(velocity.x, velocity.y)
        if speed == 0.0:
            raise ValueError("cannot build a ray from a zero velocity")
        return cls(origin, Point2(velocity.x / speed, velocity.y / speed))

    def at(self, t: float) -> Point2:
        return Point2(self.origin.x + t * self.direction.x, self.origin.y + t * self.direction.y)

    def slope_intercept(self) -> tuple[float, float] | None:
        """Return ``(m, c)`` of ``y = m*x + c``, or None for a vertical ray."""
        dx, dy = self.direction
        if dx == 0.0:
            return None
        m = dy / dx
        return m, self.origin.y - m * self.origin.x


class Sector(NamedTuple):
    """A circular field of fire.

    ``start_angle`` is where the arc begins and ``sweep_angle`` how far it
    extends counter-clockwise. A sweep of 2*pi is a full circle.
    """

    circle: Circle
    start_angle: float
    sweep_angle: float

    def contains_bearing(self, bearing: float) -> bool:
        if self.sweep_angle >= TWO_PI:
            return True
        return (bearing - self.start_angle) % TWO_PI <= self.sweep_angle + 1e-12

    def contains(self, p: Point2) -> bool:
        if not self.circle.contains(p):
            return False
        return self.contains_bearing(bearing(self.circle.center, p))


class Poi(NamedTuple):
    """Point of intersection; ``t`` is the signed distance along the ray."""

    point: Point2
    t: float


class SectorCrossing(NamedTuple):
    entry: Point2
    exit: Point2
    entry_time: float
    exit_time: float


class InterceptSolution(NamedTuple):
    time_of_flight: float
    launch_point: Point2
    impact_point: Point2


def validate_circle(circle: Circle) -> Circle:
    if not circle.radius > 0.0 or not math.isfinite(circle.radius):
        raise ValueError(f"circle radius must be positive, got {circle.radius}")
    return circle


def validate_ray(ray: Ray) -> Ray:
    norm = math.hypot(*ray.direction)
    if abs(norm - 1.0) > UNIT_TOL:
        raise ValueError(f"ray direction must be a unit vector (norm={norm})")
    return ray


def validate_sector(sector: Sector) -> Sector:
    validate_circle(sector.circle)
    if not 0.0 <= sector.start_angle < TWO_PI:
        raise ValueError("start_angle must lie in [0, 2*pi)")
    if not 0.0 < sector.sweep_angle <= TWO_PI:
        raise ValueError("sweep_angle must lie in (0, 2*pi]")
    return sector


def bearing(origin: Point2, p: Point2) -> float:
    """Angle of ``p`` seen from ``origin``, in [0, 2*pi)."""
    return math.atan2(p.y - origin.y, p.x - origin.x) % TWO_PI


def euclidean_distance(a: Point2, b: Point2) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def time_to_point(distance: float, speed: float) -> float:
    if distance < 0.0:
        raise ValueError("distance must be non-negative")
    if speed <= 0.0:
        raise NonClosingTarget(f"speed {speed} never covers distance {distance}")
    return distance / speed


def estimate_velocity(history: Sequence[Sample]) -> tuple[Point2, float]:
    """Finite-difference velocity from the last two samples.

    Returns the per-axis velocity (km/s) and its norm.
    """
    if len(history) < 2:
        raise InvalidHistory("need at least two samples")
    prev, last = history[-2], history[-1]
    dt = last.t - prev.t
    if not dt > 0.0:
        raise InvalidHistory(f"timestamps must increase (dt={dt})")
    v = Point2((last.pos.x - prev.pos.x) / dt, (last.pos.y - prev.pos.y) / dt)
    return v, math.hypot(v.x, v.y)


def circle_line_poi(circle: Circle, ray: Ray) -> list[Poi]:
    """Intersect the full line carrying ``ray`` with ``circle``.

    Points behind the ray origin are kept and carry a negative ``t``.
    The result is sorted by ``t`` and holds 0, 1 (tangent) or 2 points.
    """
    ox = ray.origin.x - circle.center.x
    oy = ray.origin.y - circle.center.y
    dx, dy = ray.direction
    # t^2 + 2*half_b*t + c = 0 for a unit direction
    half_b = dx * ox + dy * oy
    c = ox * ox + oy * oy - circle.radius * circle.radius
    disc = half_b * half_b - c
    if abs(disc) < TANGENT_TOL:
        return [Poi(ray.at(-half_b), -half_b)]
    if disc < 0.0:
        return []
    root = math.sqrt(disc)
    q = -(half_b + math.copysign(root, half_b))
    t1 = q
    t2 = c / q
    lo, hi = (t1, t2) if t1 <= t2 else (t2, t1)
    return [Poi(ray.at(lo), lo), Poi(ray.at(hi), hi)]


def slope_line_poi(m: float, c: float, circle: Circle) -> list[Point2]:
    """Intersect ``y = m*x + c`` with ``circle`` by the explicit x-quadratic.

    Kept alongside :func:`circle_line_poi` for the slope/intercept form of the
    threat line. The linear coefficient is ``2*(m*c - x0 - m*y0)``.
    """
    x0, y0 = circle.center
    r = circle.radius
    qa = 1.0 + m * m
    qb = 2.0 * (m * c - x0 - m * y0)
    qc = x0 * x0 + y0 * y0 + c * c - r * r - 2.0 * y0 * c
    disc = qb * qb - 4.0 * qa * qc
    if abs(disc) < TANGENT_TOL * qa:
        xs = [-qb / (2.0 * qa)]
    elif disc < 0.0:
        return []
    else:
        root = math.sqrt(disc)
        xs = sorted(((-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)))
    return [Point2(x, m * x + c) for x in xs]


def _boundary_crossing(center: Point2, angle: float, ray: Ray) -> float | None:
    """Ray parameter where the line meets the sector edge at ``angle``."""
    ux, uy = math.cos(angle), math.sin(angle)
    dx, dy = ray.direction
    denom = dx * uy - dy * ux
    if abs(denom) < 1e-15:
        return None
    wx = center.x - ray.origin.x
    wy = center.y - ray.origin.y
    t = (wx * uy - wy * ux) / denom
    s = (wx * dy - wy * dx) / denom
    if s < 0.0:
        return None
    return t


def sector_intercept(sector: Sector, ray: Ray, target_speed: float) -> SectorCrossing | None:
    """First stretch of the ray, at or after its origin, inside ``sector``.

    The in-circle chord is split at the sector edges (and at the center,
    where bearing flips) and the first contiguous in-sector run is returned.
    A sector wider than pi can leave two runs on one chord; only the first
    counts, since that is where the engagement window opens.
    """
    if not target_speed > 0.0:
        raise ValueError("target_speed must be positive")
    pois = circle_line_poi(sector.circle, ray)
    if not pois:
        return None
    ta, tb = pois[0].t, pois[-1].t
    if tb < 0.0:
        return None
    center = sector.circle.center

    if ta == tb:
        if sector.contains_bearing(bearing(center, pois[0].point)):
            p = pois[0].point
            return SectorCrossing(p, p, ta / target_speed, ta / target_speed)
        return None

    if sector.sweep_angle >= TWO_PI:
        runs = [(ta, tb)]
    else:
        cuts = {ta, tb}
        for angle in (sector.start_angle, sector.start_angle + sector.sweep_angle):
            t = _boundary_crossing(center, angle, ray)
            if t is not None and ta < t < tb:
                cuts.add(t)
        tc = (center.x - ray.origin.x) * ray.direction[0] + (center.y - ray.origin.y) * ray.direction[1]
        if euclidean_distance(ray.at(tc), center) < 1e-12 and ta < tc < tb:
            cuts.add(tc)
        if ta < 0.0 < tb:
            cuts.add(0.0)
        ordered = sorted(cuts)
        runs = []
        for lo, hi in zip(ordered, ordered[1:]):
            mid = ray.at(0.5 * (lo + hi))
            if not sector.contains_bearing(bearing(center, mid)):
                continue
            if runs and runs[-1][1] == lo:
                runs[-1] = (runs[-1][0], hi)
            else:
                runs.append((lo, hi))

    for lo, hi in runs:
        if hi < 0.0:
            continue
        lo = max(lo, 0.0)
        return SectorCrossing(ray.at(lo), ray.at(hi), lo / target_speed, hi / target_speed)
    return None


def solve_intercept(
    target_pos: Point2, target_vel: Point2, shooter: Point2, projectile_speed: float
) -> InterceptSolution | None:
    """Earliest constant-velocity intercept.

    Solves ``(|v|^2 - s^2) t^2 + 2 (d.v) t + |d|^2 = 0`` with
    ``d = target_pos - shooter`` and keeps the smallest positive root.
    """
    if not projectile_speed > 0.0:
        raise ValueError("projectile_speed must be positive")
    dx = target_pos.x - shooter.x
    dy = target_pos.y - shooter.y
    vx, vy = target_vel
    a = vx * vx + vy * vy - projectile_speed * projectile_speed
    b = 2.0 * (dx * vx + dy * vy)
    c = dx * dx + dy * dy
    if c == 0.0:
        return None

    if abs(a) < 1e-12 * projectile_speed * projectile_speed:
        roots = [-c / b] if b < 0.0 else []
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return None
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        roots = [q / a]
        if q != 0.0:
            roots.append(c / q)
    positive = [t for t in roots if t > 0.0]
    if not positive:
        return None
    t = min(positive)
    impact = Point2(target_pos.x + vx * t, target_pos.y + vy * t)
    return InterceptSolution(t, shooter, impact)


def required_elevation(altitude: float, ground_distance: float) -> float:
    return math.atan2(altitude, ground_distance)
