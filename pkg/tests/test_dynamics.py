"""Vehicle integration accuracy and exact step Jacobians."""

import numpy as np
import pytest

from contourplan.dynamics import (
    BicycleModel,
    ControlInput,
    Footprint,
    RobotState,
    UnicycleModel,
    make_model,
    step_dynamics,
    step_with_jacobians,
    wrap_angle,
)


def test_straight_motion_exact():
    z = step_dynamics(UnicycleModel(), np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.0]), 0.2)
    assert z == pytest.approx([0.2, 0.0, 0.0], abs=1e-15)


def test_turning_lands_on_circle():
    # constant (v, omega) traces a circle of radius v / omega
    model = UnicycleModel()
    v, om = 1.0, 0.8
    z = np.array([0.0, 0.0, 0.0])
    u = np.array([v, om])
    for _ in range(40):
        z = step_dynamics(model, z, u, 0.05)
    radius = v / om
    center = np.array([0.0, radius])
    assert np.hypot(z[0] - center[0], z[1] - center[1]) == pytest.approx(radius, abs=1e-8)
    t = 40 * 0.05
    exact = np.array([radius * np.sin(om * t), radius * (1 - np.cos(om * t)), om * t])
    assert z == pytest.approx(exact, abs=1e-8)


def test_fourth_order_convergence():
    model = UnicycleModel()
    u = np.array([1.2, 0.9])
    z0 = np.array([0.3, -0.1, 0.4])

    def err(tau):
        z = step_dynamics(model, z0, u, tau)
        r = u[0] / u[1]
        psi1 = z0[2] + u[1] * tau
        exact = np.array([z0[0] + r * (np.sin(psi1) - np.sin(z0[2])),
                          z0[1] - r * (np.cos(psi1) - np.cos(z0[2])),
                          psi1])
        return np.max(np.abs(z - exact))

    e1, e2 = err(0.2), err(0.1)
    assert e1 / e2 > 12.0   # ~16 for order 4


def test_bicycle_straight_with_accel():
    model = BicycleModel(wheelbase=2.0)
    z = np.array([0.0, 0.0, 0.0, 1.0])
    u = np.array([0.5, 0.0])
    z1 = step_dynamics(model, z, u, 0.2)
    # compare against a fine-step reference integration
    zf = z.copy()
    for _ in range(2000):
        zf = step_dynamics(model, zf, u, 0.2 / 2000)
    assert z1 == pytest.approx(zf, abs=1e-10)
    assert z1[0] == pytest.approx(1.0 * 0.2 + 0.5 * 0.5 * 0.2 ** 2, abs=1e-12)


def test_step_jacobians_match_finite_differences():
    rng = np.random.default_rng(17)
    for model in (UnicycleModel(), BicycleModel(1.9)):
        nz, nu = model.nz, model.nu
        for _ in range(50):
            z = rng.uniform(-1.0, 1.0, nz)
            u = rng.uniform(-1.0, 1.0, nu)
            _, a, b = step_with_jacobians(model, z, u, 0.2)
            h = 1e-6
            for i in range(nz):
                dz = np.zeros(nz)
                dz[i] = h
                num = (step_dynamics(model, z + dz, u, 0.2)
                       - step_dynamics(model, z - dz, u, 0.2)) / (2 * h)
                assert np.allclose(a[:, i], num, rtol=1e-5, atol=1e-8)
            for i in range(nu):
                du = np.zeros(nu)
                du[i] = h
                num = (step_dynamics(model, z, u + du, 0.2)
                       - step_dynamics(model, z, u - du, 0.2)) / (2 * h)
                assert np.allclose(b[:, i], num, rtol=1e-5, atol=1e-8)


def test_step_broadcasts_over_stages():
    model = UnicycleModel()
    z = np.tile([0.0, 0.0, 0.0], (5, 1))
    u = np.stack([np.linspace(0.5, 1.5, 5), np.zeros(5)], axis=1)
    out = step_dynamics(model, z, u, 0.1)
    assert out.shape == (5, 3)
    assert np.allclose(out[:, 0], u[:, 0] * 0.1)
    z2, a, b = step_with_jacobians(model, z, u, 0.1)
    assert a.shape == (5, 3, 3) and b.shape == (5, 3, 2)
    assert np.allclose(z2, out)


def test_state_wraps_heading():
    s = RobotState(0.0, 0.0, 3.5 * np.pi)
    assert -np.pi < s.psi <= np.pi
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert ControlInput(1.0, 0.2).as_array() == pytest.approx([1.0, 0.2])


def test_footprint_coverage_validation():
    fp = Footprint([(0.0, 0.0)], r_disc=0.33, rect_length=0.5, rect_width=0.43)
    assert fp.n_c == 1
    with pytest.raises(ValueError):
        Footprint([(0.0, 0.0)], r_disc=0.2, rect_length=0.8, rect_width=0.4)
    two = Footprint([(-0.2, 0.0), (0.2, 0.0)], r_disc=0.25,
                    rect_length=0.8, rect_width=0.3)
    centers = two.disc_centers((1.0, 2.0), np.pi / 2)
    assert centers[0] == pytest.approx([1.0, 1.8])
    assert centers[1] == pytest.approx([1.0, 2.2])


def test_invalid_inputs():
    with pytest.raises(ValueError):
        make_model("hovercraft")
    with pytest.raises(ValueError):
        step_dynamics(UnicycleModel(), np.zeros(3), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        BicycleModel(0.0)
    with pytest.raises(ValueError):
        Footprint(np.empty((0, 2)), 0.3)
