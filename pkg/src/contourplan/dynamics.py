"""Vehicle models and their discrete-time integration.

Unicycle (x, y, psi; inputs v, omega) and kinematic bicycle (x, y, psi, v;
inputs accel, steer) are discretized with a two-stage Gauss-Legendre
collocation step (4th order).  The step's exact Jacobians come from
differentiating the converged collocation equations, so solver gradients
match finite differences to machine-level accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT3 = np.sqrt(3.0)
GL_A = np.array([[0.25, 0.25 - SQRT3 / 6.0],
                 [0.25 + SQRT3 / 6.0, 0.25]])
GL_B = np.array([0.5, 0.5])
FIXED_POINT_TOL = 1e-13
FIXED_POINT_MAX = 60


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    out = np.remainder(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    psi: float
    v: float = None   # bicycle only

    def __post_init__(self):
        object.__setattr__(self, "psi", float(wrap_angle(self.psi)))

    @property
    def position(self):
        return np.array([self.x, self.y])

    def as_array(self, model):
        if model.nz == 3:
            return np.array([self.x, self.y, self.psi])
        return np.array([self.x, self.y, self.psi, 0.0 if self.v is None else self.v])


@dataclass(frozen=True)
class ControlInput:
    """Unicycle: (v, omega); bicycle: (accel, steer)."""
    first: float
    second: float

    def as_array(self):
        return np.array([self.first, self.second])


@dataclass(frozen=True)
class Footprint:
    """Disc approximation of the vehicle body."""

    offsets: np.ndarray       # (n_c, 2) disc centers in the body frame
    r_disc: float
    rect_length: float = None  # covered vehicle rectangle, for validation
    rect_width: float = None

    def __post_init__(self):
        object.__setattr__(self, "offsets",
                           np.atleast_2d(np.asarray(self.offsets, dtype=float)))
        if self.offsets.shape[0] < 1:
            raise ValueError("need at least one disc")
        if self.r_disc <= 0.0:
            raise ValueError("disc radius must be > 0")
        if self.rect_length is not None and self.rect_width is not None:
            if not self.covers_rectangle(self.rect_length, self.rect_width):
                raise ValueError("disc union does not cover the vehicle rectangle")

    @property
    def n_c(self) -> int:
        return self.offsets.shape[0]

    def covers_rectangle(self, length: float, width: float, step: float = 0.01) -> bool:
        xs = np.arange(-length / 2, length / 2 + step / 2, step)
        ys = np.arange(-width / 2, width / 2 + step / 2, step)
        gx, gy = np.meshgrid(xs, ys)
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        d = np.linalg.norm(pts[:, None, :] - self.offsets[None, :, :], axis=2)
        return bool(np.all(d.min(axis=1) <= self.r_disc + 1e-12))

    def disc_centers(self, position, heading):
        c, s = np.cos(heading), np.sin(heading)
        rot = np.array([[c, -s], [s, c]])
        return np.asarray(position, float)[None, :] + self.offsets @ rot.T


class UnicycleModel:
    """xdot = v cos psi, ydot = v sin psi, psidot = omega."""

    nz = 3
    nu = 2
    name = "unicycle"

    def ode(self, z, u):
        psi = z[..., 2]
        v = np.broadcast_to(u[..., 0], psi.shape)
        om = np.broadcast_to(u[..., 1], psi.shape)
        return np.stack([v * np.cos(psi), v * np.sin(psi), om], axis=-1)

    def ode_jacobians(self, z, u):
        psi = z[..., 2]
        v = u[..., 0]
        shape = np.broadcast_shapes(z.shape[:-1], u.shape[:-1])
        fz = np.zeros(shape + (3, 3))
        fu = np.zeros(shape + (3, 2))
        fz[..., 0, 2] = -v * np.sin(psi)
        fz[..., 1, 2] = v * np.cos(psi)
        fu[..., 0, 0] = np.cos(psi)
        fu[..., 1, 0] = np.sin(psi)
        fu[..., 2, 1] = 1.0
        return fz, fu

    def forward_speed(self, z, u):
        return u[..., 0]

    def speed_jacobian(self, nw):
        """(d speed / d state-part, d speed / d input) index helpers."""
        return None, 0       # speed is input channel 0


class BicycleModel:
    """Kinematic bicycle; steer acts through the wheelbase, accel drives v."""

    nz = 4
    nu = 2
    name = "bicycle"

    def __init__(self, wheelbase: float = 2.7):
        if wheelbase <= 0.0:
            raise ValueError("wheelbase must be > 0")
        self.wheelbase = wheelbase

    def ode(self, z, u):
        psi, v = z[..., 2], z[..., 3]
        accel = np.broadcast_to(u[..., 0], psi.shape)
        steer = np.broadcast_to(u[..., 1], psi.shape)
        return np.stack([v * np.cos(psi), v * np.sin(psi),
                         v * np.tan(steer) / self.wheelbase,
                         accel], axis=-1)

    def ode_jacobians(self, z, u):
        psi, v = z[..., 2], z[..., 3]
        steer = u[..., 1]
        shape = np.broadcast_shapes(z.shape[:-1], u.shape[:-1])
        fz = np.zeros(shape + (4, 4))
        fu = np.zeros(shape + (4, 2))
        fz[..., 0, 2] = -v * np.sin(psi)
        fz[..., 0, 3] = np.cos(psi)
        fz[..., 1, 2] = v * np.cos(psi)
        fz[..., 1, 3] = np.sin(psi)
        fz[..., 2, 3] = np.tan(steer) / self.wheelbase
        fu[..., 2, 1] = v / (self.wheelbase * np.cos(steer) ** 2)
        fu[..., 3, 0] = 1.0
        return fz, fu

    def forward_speed(self, z, u):
        return z[..., 3]

    def speed_jacobian(self, nw):
        return 3, None       # speed is state channel 3


def make_model(name: str, wheelbase: float = 2.7):
    if name == "unicycle":
        return UnicycleModel()
    if name == "bicycle":
        return BicycleModel(wheelbase)
    raise ValueError(f"unknown model {name!r}")


def _collocation_stages(model, z, u, tau):
    """Solve the two-stage collocation equations by fixed-point iteration."""
    k = np.stack([model.ode(z, u), model.ode(z, u)], axis=-2)   # (..., 2, nz)
    for _ in range(FIXED_POINT_MAX):
        s = z[..., None, :] + tau * np.einsum("ij,...jn->...in", GL_A, k)
        k_new = model.ode(s, u[..., None, :])
        delta = float(np.max(np.abs(k_new - k))) if k.size else 0.0
        k = k_new
        if delta < FIXED_POINT_TOL:
            break
    return k


def step_dynamics(model, z, u, tau: float):
    """One Gauss-Legendre step; broadcasts over leading axes."""
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    k = _collocation_stages(model, z, u, tau)
    return z + tau * np.einsum("i,...in->...n", GL_B, k)


def step_with_jacobians(model, z, u, tau: float):
    """Step plus exact d z' / d z and d z' / d u of the implicit scheme."""
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    k = _collocation_stages(model, z, u, tau)
    s = z[..., None, :] + tau * np.einsum("ij,...jn->...in", GL_A, k)
    fz, fu = model.ode_jacobians(s, u[..., None, :])   # (..., 2, nz, nz), (..., 2, nz, nu)
    nz, nu = model.nz, model.nu
    lead = k.shape[:-2]
    # block system (I - tau * A (x) J) dK = [J dz + B du]
    m = np.zeros(lead + (2 * nz, 2 * nz))
    rhs_z = np.zeros(lead + (2 * nz, nz))
    rhs_u = np.zeros(lead + (2 * nz, nu))
    eye = np.eye(2 * nz)
    for i in range(2):
        for j in range(2):
            m[..., i * nz:(i + 1) * nz, j * nz:(j + 1) * nz] = -tau * GL_A[i, j] * fz[..., i, :, :]
        rhs_z[..., i * nz:(i + 1) * nz, :] = fz[..., i, :, :]
        rhs_u[..., i * nz:(i + 1) * nz, :] = fu[..., i, :, :]
    m += eye
    dk_z = np.linalg.solve(m, rhs_z)
    dk_u = np.linalg.solve(m, rhs_u)
    a_step = np.eye(nz) + tau * (GL_B[0] * dk_z[..., :nz, :] + GL_B[1] * dk_z[..., nz:, :])
    b_step = tau * (GL_B[0] * dk_u[..., :nz, :] + GL_B[1] * dk_u[..., nz:, :])
    z_next = z + tau * np.einsum("i,...in->...n", GL_B, k)
    return z_next, a_step, b_step
