"""Pedestrian crowd motion: goal attraction plus exponential repulsion.

Agents relax toward their goal velocity and are pushed apart by neighbors
(and by the robot, when cooperative).  Speeds are capped, agents hold still
until their departure time, and an agent that reaches its goal eases to a
stop.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

HEADING_SPEED_FLOOR = 0.05   # m/s, below this the ellipse keeps its orientation


@dataclass(frozen=True)
class SocialForcesParams:
    relaxation: float = 0.5        # s
    repulsion_gain: float = 2.0    # m/s^2
    repulsion_range: float = 0.4   # m
    speed_cap: float = 1.4         # m/s
    goal_tolerance: float = 0.25   # m
    cooperative: bool = True       # repelled by the robot as well


@dataclass(frozen=True)
class Pedestrian:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    goal: np.ndarray
    desired_speed: float
    a: float = 0.3                 # semi-major, m
    b: float = 0.2                 # semi-minor, m
    orientation: float = 0.0       # rad, ellipse rotation
    depart_time: float = 0.0       # s, stands still before this

    def __post_init__(self):
        for name in ("position", "velocity", "goal"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


def _repulsion(p, radius, other_p, other_radius, gain, rng):
    d = p - other_p
    dist = float(np.hypot(d[0], d[1]))
    if dist < 1e-9:
        return np.zeros(2)
    return gain * np.exp((radius + other_radius - dist) / rng) * d / dist


def social_forces_step(pedestrians, robot_position, robot_radius, dt: float,
                       params: SocialForcesParams, now: float = 0.0,
                       alignment: str = "minor"):
    """Advance every pedestrian by dt; returns a new list."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    out = []
    for ped in pedestrians:
        if now < ped.depart_time:
            out.append(ped)
            continue
        to_goal = ped.goal - ped.position
        dist_goal = float(np.hypot(to_goal[0], to_goal[1]))
        if dist_goal > params.goal_tolerance:
            v_des = ped.desired_speed * to_goal / dist_goal
        else:
            v_des = np.zeros(2)
        acc = (v_des - ped.velocity) / params.relaxation
        for other in pedestrians:
            if other.id == ped.id or now < other.depart_time:
                continue
            acc += _repulsion(ped.position, ped.a, other.position, other.a,
                              params.repulsion_gain, params.repulsion_range)
        if params.cooperative and robot_position is not None:
            acc += _repulsion(ped.position, ped.a, np.asarray(robot_position, float),
                              robot_radius, params.repulsion_gain,
                              params.repulsion_range)
        vel = ped.velocity + acc * dt
        speed = float(np.hypot(vel[0], vel[1]))
        if speed > params.speed_cap:
            vel = vel * (params.speed_cap / speed)
            speed = params.speed_cap
        pos = ped.position + vel * dt
        if speed >= HEADING_SPEED_FLOOR:
            heading = float(np.arctan2(vel[1], vel[0]))
            psi = heading + (np.pi / 2.0 if alignment == "minor" else 0.0)
        else:
            psi = ped.orientation
        out.append(replace(ped, position=pos, velocity=vel, orientation=psi))
    return out
