"""Gauss-Markov ground-user mobility and initial UAV placement."""

from __future__ import annotations

import math

import numpy as np

from .params import MobilityParams


def gauss_markov_step(
    speed: float,
    heading: float,
    params: MobilityParams,
    rng: np.random.Generator,
    mean_heading: float | None = None,
) -> tuple[float, float]:
    """One autoregressive update of (speed, heading).

    new = alpha*old + (1-alpha)*mean + sigma*sqrt(1-alpha^2)*N(0,1); speed is
    clamped at zero. `mean_heading` is the user's preferred direction and
    defaults to the current heading (drifting walk). Draws exactly two
    normals per call so stream position is call-count deterministic.
    """
    a = params.memory_alpha
    noise_scale = math.sqrt(max(0.0, 1.0 - a * a))
    gs = rng.standard_normal()
    gh = rng.standard_normal()
    if mean_heading is None:
        mean_heading = heading
    new_speed = a * speed + (1.0 - a) * params.mean_speed_mps + params.speed_sigma * noise_scale * gs
    new_heading = a * heading + (1.0 - a) * mean_heading + params.heading_sigma * noise_scale * gh
    return max(0.0, new_speed), new_heading


def advance_position(
    x: float,
    y: float,
    speed: float,
    heading: float,
    dt: float,
    area_side_m: float,
) -> tuple[float, float]:
    """Move along the heading and reflect off the area boundary."""
    nx = x + speed * math.cos(heading) * dt
    ny = y + speed * math.sin(heading) * dt
    # reflect rather than clamp so users do not pile up on walls
    if nx < 0:
        nx = -nx
    if nx > area_side_m:
        nx = 2 * area_side_m - nx
    if ny < 0:
        ny = -ny
    if ny > area_side_m:
        ny = 2 * area_side_m - ny
    return min(max(nx, 0.0), area_side_m), min(max(ny, 0.0), area_side_m)


def kmeans_placement(
    user_xy: np.ndarray,
    k: int,
    area_side_m: float,
    rng: np.random.Generator,
    n_iter: int = 25,
) -> np.ndarray:
    """Plain Lloyd k-means over user positions for initial UAV siting.

    Falls back to a uniform grid when there are no users. Returns (k, 2).
    """
    if len(user_xy) == 0:
        side = int(math.ceil(math.sqrt(k)))
        pts = []
        for i in range(k):
            gx, gy = i % side, i // side
            pts.append(
                (
                    (gx + 0.5) * area_side_m / side,
                    (gy + 0.5) * area_side_m / side,
                )
            )
        return np.array(pts)
    idx = rng.choice(len(user_xy), size=min(k, len(user_xy)), replace=False)
    centers = np.array(user_xy[idx], dtype=float)
    while len(centers) < k:
        centers = np.vstack([centers, rng.uniform(0, area_side_m, size=2)])
    for _ in range(n_iter):
        d2 = ((user_xy[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for j in range(k):
            members = user_xy[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    return centers
