import dataclasses

import numpy as np
import pytest

from gaussflow import flow, geometry
from gaussflow.flow import FlowConfig
from gaussflow.orlicz import PowerLaw, UnsupportedOrliczError
from gaussflow.sphere_grid import GridS1, GridS2


def ellipse(grid, a=1.5, b=0.8):
    return np.sqrt((a * np.cos(grid.theta)) ** 2 + (b * np.sin(grid.theta)) ** 2)


@pytest.fixture(scope="module")
def s1():
    return GridS1(256)


@pytest.fixture(scope="module")
def s2():
    return GridS2(12, 24)


class TestEta:
    def test_unit_circle(self, s1):
        one = np.ones(256)
        assert flow.eta(s1, one, one, PowerLaw(1)) == pytest.approx(1.0, abs=1e-14)

    def test_circle_p2(self, s1):
        one = np.ones(256)
        assert flow.eta(s1, 2 * one, one, PowerLaw(2)) == pytest.approx(1.0, abs=1e-14)

    def test_s2(self, s2):
        one = np.ones(s2.shape)
        assert flow.eta(s2, one, one, PowerLaw(1)) == pytest.approx(1.0, abs=1e-12)


class TestVelocity:
    @pytest.mark.parametrize("r", [0.5, 1.0, 3.0])
    def test_round_p1(self, s1, r):
        one = np.ones(256)
        # eta rescales: with eta the round circle of any radius is a fixed point
        v = flow.velocity(s1, r * one, one, PowerLaw(1))
        assert np.max(np.abs(v)) <= 1e-12
        v = flow.velocity(s1, r * one, one, PowerLaw(1), eta_value=1.0)
        assert np.allclose(v, r - 1.0, atol=1e-12)

    @pytest.mark.parametrize("r", [0.5, 1.0, 3.0])
    def test_round_p2_scale_invariant(self, s1, r):
        one = np.ones(256)
        assert np.max(np.abs(flow.velocity(s1, r * one, one, PowerLaw(2), eta_value=1.0))) <= 1e-12

    def test_s2_fixed_point(self, s2):
        one = np.ones(s2.shape)
        assert np.max(np.abs(flow.velocity(s2, one, one, PowerLaw(1)))) <= 1e-12

    def test_jacobian_matches_finite_difference(self):
        g = GridS1(32)
        h = ellipse(g, 1.3, 0.9)
        f = 1 + 0.2 * np.cos(2 * g.theta)
        spec = PowerLaw(2.5)
        curv = geometry.curvature_matrix(g, h)
        eta_value = flow.eta(g, h, f, spec, curv)
        J = flow.velocity_jacobian(g, h, f, spec, curv, eta_value).toarray()
        eps = 1e-6
        for j in (0, 7, 20):
            e = np.zeros(32)
            e[j] = eps
            fd = (
                flow.velocity(g, h + e, f, spec, eta_value=eta_value)
                - flow.velocity(g, h - e, f, spec, eta_value=eta_value)
            ) / (2 * eps)
            assert np.max(np.abs(J[:, j] - fd)) <= 1e-7 * np.max(np.abs(fd))

    def test_radial_rate(self, s1):
        h = ellipse(s1)
        one = np.ones(256)
        rho, rate = flow.radial_rate(s1, h, one, PowerLaw(2))
        v = flow.velocity(s1, h, one, PowerLaw(2))
        assert np.allclose(rho, geometry.radial_norm(s1, h))
        assert np.allclose(rate / rho, v / h, atol=1e-14)


class TestFunctional:
    def test_p2(self, s1):
        one = np.ones(256)
        assert flow.functional_J(s1, one, one, PowerLaw(2)) == pytest.approx(np.pi, abs=1e-13)

    def test_class_b(self, s1):
        one = np.ones(256)
        assert flow.functional_J(s1, 2 * one, one, PowerLaw(-1, n=2)) == pytest.approx(np.pi, abs=1e-13)

    def test_s2(self, s2):
        one = np.ones(s2.shape)
        assert flow.functional_J(s2, one, one, PowerLaw(2, n=3)) == pytest.approx(2 * np.pi, abs=1e-12)

    def test_neither(self, s1):
        one = np.ones(256)
        with pytest.raises(UnsupportedOrliczError):
            flow.functional_J(s1, one, one, PowerLaw(0))


class TestFitAndResidual:
    def test_unit(self, s1):
        one = np.ones(256)
        assert flow.fit_constant_c(s1, one, one, PowerLaw(1)) == pytest.approx(1.0, abs=1e-14)
        assert flow.residual(s1, one, one, PowerLaw(1)).sup_rel <= 1e-14

    @pytest.mark.parametrize("r", [0.5, 2.0])
    def test_round_radius(self, s1, r):
        one = np.ones(256)
        assert flow.fit_constant_c(s1, r * one, one, PowerLaw(1)) == pytest.approx(1 / r, rel=1e-13)

    def test_s2_round(self, s2):
        one = np.ones(s2.shape)
        assert flow.fit_constant_c(s2, 1.5 * one, one, PowerLaw(1, n=3)) == pytest.approx(1 / 1.5**2, rel=1e-12)

    def test_ellipse_far_from_solution(self, s1):
        res = flow.residual(s1, ellipse(s1, 2.0, 1.0), np.ones(256), PowerLaw(1))
        assert res.sup_rel > 0.5
        assert res.field.shape == (256,)

    def test_mean_residual_vanishes(self, s1):
        h = ellipse(s1)
        f = 1 + 0.3 * np.cos(2 * s1.theta)
        res = flow.residual(s1, h, f, PowerLaw(2))
        assert abs(s1.integrate(res.field)) <= 1e-12


class TestStep:
    def _state(self, grid, h, f, spec, **kw):
        cfg = FlowConfig(**kw)
        return flow.initial_state(grid, h, f, spec, cfg), cfg

    def test_stationary_input(self, s1):
        one = np.ones(256)
        for dt in (1e-3, 1e-2):
            state, cfg = self._state(s1, one, one, PowerLaw(1), dt0=dt)
            new = flow.step(state, one, PowerLaw(1), cfg)
            assert np.max(np.abs(new.h - 1.0)) <= 1e-14

    @pytest.mark.parametrize("scheme", ["linearly_implicit", "explicit"])
    def test_ellipse_volume(self, s1, scheme):
        one = np.ones(256)
        state, cfg = self._state(s1, ellipse(s1), one, PowerLaw(2), scheme=scheme)
        new = flow.step(state, one, PowerLaw(2), cfg)
        assert new.t == pytest.approx(1e-3)
        assert abs(geometry.volume(s1, new.h) - state.V0) / state.V0 <= 1e-12

    @pytest.mark.parametrize("scheme", ["linearly_implicit", "explicit"])
    def test_huge_dt_rejected_and_halved(self, s1, scheme):
        one = np.ones(256)
        state, cfg = self._state(s1, ellipse(s1), one, PowerLaw(2), scheme=scheme, dt0=10.0, dt_max=10.0)
        new = flow.step(state, one, PowerLaw(2), cfg)
        assert new.t < 10.0
        assert new.dt < 10.0
        assert new.t in [10.0 * 0.5**k for k in range(1, 40)]

    def test_evenness_preserved(self, s1):
        f = 1 + 0.5 * np.cos(2 * s1.theta)
        state, cfg = self._state(s1, ellipse(s1), f, PowerLaw(2))
        for _ in range(5):
            state = flow.step(state, f, PowerLaw(2), cfg)
            assert np.max(np.abs(state.h - np.roll(state.h, -128))) <= 1e-12
        assert state.step_count == 5

    def test_growth_after_ten_accepts(self, s1):
        one = np.ones(256)
        state, cfg = self._state(s1, ellipse(s1), one, PowerLaw(2))
        for _ in range(10):
            state = flow.step(state, one, PowerLaw(2), cfg)
        assert state.dt == pytest.approx(1.2e-3)

    def test_dt_underflow(self, s1):
        one = np.ones(256)
        state, cfg = self._state(
            s1, ellipse(s1), one, PowerLaw(2), scheme="explicit", dt0=10.0, dt_max=10.0, dt_min=1.0
        )
        with pytest.raises(flow.FlowBreakdown) as info:
            flow.step(state, one, PowerLaw(2), cfg)
        assert info.value.reason in ("convexity_lost", "h_nonpositive")

    def test_s2_step_even(self, s2):
        x = s2.points
        h = np.sqrt((1.2 * x[..., 0]) ** 2 + x[..., 1] ** 2 + (0.9 * x[..., 2]) ** 2)
        f = 1 + 0.3 * (x[..., 2] ** 2 - 1 / 3)
        spec = PowerLaw(2, n=3)
        state, cfg = self._state(s2, h, f, spec)
        state = flow.step(state, f, spec, cfg)
        assert np.max(np.abs(state.h - s2.antipodal_symmetrize(state.h))) <= 1e-12
        assert abs(geometry.volume(s2, state.h) / state.V0 - 1) <= 1e-12


class TestRun:
    def test_round_stationary(self, s1):
        one = np.ones(256)
        res = flow.run(s1, one, one, PowerLaw(1))
        assert res.reason == "stationary"
        assert res.steps == 0
        assert res.residual <= 1e-10
        assert len(res.diagnostics) == 1

    def test_neither_rejected(self, s1):
        one = np.ones(256)
        with pytest.raises(UnsupportedOrliczError, match=r"assumption \(A\) or \(B\)"):
            flow.run(s1, one, one, PowerLaw(0))

    def test_invalid_inputs(self, s1):
        one = np.ones(256)
        with pytest.raises(ValueError):
            flow.run(s1, -one, one, PowerLaw(2))
        with pytest.raises(ValueError):
            flow.run(s1, one, 1 + 0.1 * np.cos(s1.theta), PowerLaw(2))
        with pytest.raises(ValueError):
            flow.run(s1, 1 + 0.9 * np.cos(2 * s1.theta), one, PowerLaw(2))
        with pytest.raises(ValueError):
            flow.run(s1, one, np.zeros(256), PowerLaw(2))

    def test_max_steps_and_diagnostics_cadence(self, s1):
        one = np.ones(256)
        res = flow.run(s1, ellipse(s1), one, PowerLaw(2), FlowConfig(max_steps=25, diagnostics_every=10))
        assert res.reason == "max_steps"
        assert res.steps == 25
        assert len(res.diagnostics) == 4
        assert [dataclasses.astuple(r)[0] for r in res.diagnostics][0] == 0.0
        assert len(res.volume_corrections) == 25

    def test_time_limit(self, s1):
        one = np.ones(256)
        res = flow.run(s1, ellipse(s1), one, PowerLaw(2), FlowConfig(t_max=0.05, tol_residual=1e-300))
        assert res.reason == "time_limit"
        assert res.t == pytest.approx(0.05, abs=1e-12)

    def test_callback_sees_every_step(self, s1):
        one = np.ones(256)
        seen = []
        flow.run(s1, ellipse(s1), one, PowerLaw(2), FlowConfig(max_steps=7), callback=lambda s: seen.append(s.step_count))
        assert seen == list(range(1, 8))


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"dt0": 0.0},
            {"dt_min": 1.0, "dt0": 1e-3},
            {"scheme": "rk4"},
            {"diagnostics_every": 0},
            {"max_rel_change": -1.0},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            FlowConfig(**kw)

    def test_columns(self):
        assert flow.DIAGNOSTIC_COLUMNS == (
            "t", "J", "volume", "min_h", "max_h", "max_K", "min_eig_b", "eta", "sup_rate", "residual", "dt",
        )
