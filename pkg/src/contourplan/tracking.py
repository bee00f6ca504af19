"""Moving-obstacle tracking: constant-velocity Kalman filter and horizon forecasts.

Tracks fuse noisy position detections, forecasts extrapolate the velocity
estimate over the planning horizon, and each forecast carries the enlarged
ellipse semi-axes that make the disc-vs-ellipse constraint collision-safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bounds import EllipseShape, minimal_enlargement

DEFAULT_ACCEL_STD = 0.5    # m/s^2, process noise on acceleration
DEFAULT_MEAS_STD = 0.05    # m, detection noise
HEADING_SPEED_FLOOR = 0.05  # m/s, below this the last orientation is kept


@dataclass(frozen=True)
class EllipseObstacle:
    id: int
    position: np.ndarray     # (2,)
    velocity: np.ndarray     # (2,)
    a: float                 # semi-major, m
    b: float                 # semi-minor, m
    orientation: float       # rad

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, float))
        if not self.a >= self.b > 0.0:
            raise ValueError("require a >= b > 0")


@dataclass(frozen=True)
class KalmanTrack:
    state: np.ndarray        # (4,) px, py, vx, vy
    covariance: np.ndarray   # (4, 4)
    accel_std: float = DEFAULT_ACCEL_STD
    meas_std: float = DEFAULT_MEAS_STD

    @property
    def position(self):
        return self.state[:2]

    @property
    def velocity(self):
        return self.state[2:]


def start_track(position, accel_std: float = DEFAULT_ACCEL_STD,
                meas_std: float = DEFAULT_MEAS_STD) -> KalmanTrack:
    """Fresh track at a detection: zero velocity with a broad velocity prior."""
    state = np.array([position[0], position[1], 0.0, 0.0], dtype=float)
    cov = np.diag([meas_std ** 2, meas_std ** 2, 1.0, 1.0])
    return KalmanTrack(state, cov, accel_std, meas_std)


def _check_psd(cov):
    if not np.allclose(cov, cov.T, atol=1e-9):
        raise ValueError("covariance must be symmetric")
    if np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T))) < -1e-9:
        raise ValueError("covariance must be positive semidefinite")


def kalman_update(track: KalmanTrack, measurement, dt: float) -> KalmanTrack:
    """One predict-update step of the constant-velocity filter."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    _check_psd(track.covariance)
    f = np.array([[1.0, 0.0, dt, 0.0],
                  [0.0, 1.0, 0.0, dt],
                  [0.0, 0.0, 1.0, 0.0],
                  [0.0, 0.0, 0.0, 1.0]])
    q = track.accel_std ** 2
    g2, g3, g4 = dt * dt, dt ** 3 / 2.0, dt ** 4 / 4.0
    qmat = q * np.array([[g4, 0.0, g3, 0.0],
                         [0.0, g4, 0.0, g3],
                         [g3, 0.0, g2, 0.0],
                         [0.0, g3, 0.0, g2]])
    x = f @ track.state
    p = f @ track.covariance @ f.T + qmat

    h = np.array([[1.0, 0.0, 0.0, 0.0],
                  [0.0, 1.0, 0.0, 0.0]])
    rmat = track.meas_std ** 2 * np.eye(2)
    z = np.asarray(measurement, dtype=float)
    innov = z - h @ x
    s_mat = h @ p @ h.T + rmat
    k = p @ h.T @ np.linalg.inv(s_mat)
    x = x + k @ innov
    ikh = np.eye(4) - k @ h
    p = ikh @ p @ ikh.T + k @ rmat @ k.T    # Joseph form keeps P PSD
    p = 0.5 * (p + p.T)
    return KalmanTrack(x, p, track.accel_std, track.meas_std)


@dataclass(frozen=True)
class ObstaclePrediction:
    id: int
    positions: np.ndarray    # (N+1, 2)
    psis: np.ndarray         # (N+1,), ellipse orientation per step
    alpha: float             # enlarged semi-major
    beta: float              # enlarged semi-minor

    @property
    def horizon(self) -> int:
        return self.positions.shape[0] - 1


@lru_cache(maxsize=512)
def enlarged_axes(a: float, b: float, r_disc: float):
    """Collision-safe semi-axes (alpha, beta) for the disc-vs-ellipse bound."""
    res = minimal_enlargement(EllipseShape(a, b), r_disc, method="closed_root")
    return res.alpha, res.beta


def predict_horizon(track: KalmanTrack, obstacle: EllipseObstacle, n_steps: int,
                    tau: float, r_disc: float,
                    alignment: str = "minor") -> ObstaclePrediction:
    """Constant-velocity forecast with the ellipse oriented to the motion.

    `alignment` picks which semi-axis follows the walking direction: "minor"
    (the default, matching how people occupy space side-to-side) or "major".
    The semi-axes are enlarged so that keeping every robot disc outside the
    forecast ellipse guarantees the true shapes stay disjoint.
    """
    if alignment not in ("minor", "major"):
        raise ValueError("alignment must be 'minor' or 'major'")
    ks = np.arange(n_steps + 1)[:, None]
    positions = track.position[None, :] + ks * tau * track.velocity[None, :]
    speed = float(np.hypot(*track.velocity))
    if speed >= HEADING_SPEED_FLOOR:
        heading = float(np.arctan2(track.velocity[1], track.velocity[0]))
        psi = heading + (np.pi / 2.0 if alignment == "minor" else 0.0)
    else:
        psi = obstacle.orientation
    alpha, beta = enlarged_axes(obstacle.a, obstacle.b, r_disc)
    return ObstaclePrediction(obstacle.id, positions,
                              np.full(n_steps + 1, psi), alpha, beta)


def dynamic_constraint_residual(position, heading, disc_offset,
                                obstacle_position, psi, alpha, beta):
    """Scaled squared distance of one robot disc from the forecast ellipse.

    The disc center sits at p + R(heading) offset; values above 1 mean the
    disc center lies outside the enlarged ellipse.
    """
    p = np.asarray(position, dtype=float)
    off = np.asarray(disc_offset, dtype=float)
    c, s = np.cos(heading), np.sin(heading)
    center = p + np.array([c * off[0] - s * off[1], s * off[0] + c * off[1]])
    d = center - np.asarray(obstacle_position, dtype=float)
    cp, sp = np.cos(psi), np.sin(psi)
    ux = cp * d[0] + sp * d[1]
    uy = -sp * d[0] + cp * d[1]
    return float((ux / alpha) ** 2 + (uy / beta) ** 2)


def select_nearest(obstacles, position, limit: int = 6):
    """Closest obstacles by current Euclidean distance, ties broken by id."""
    p = np.asarray(position, dtype=float)
    ranked = sorted(obstacles,
                    key=lambda o: (float(np.hypot(*(o.position - p))), o.id))
    return ranked[:limit]
