import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remest.errors import NonConvergence
from remest.lti import (SensorSteadyState, SystemModel, dare_residual,
                        lyapunov_residual, sensor_filter_step, solve_dare)

# Frozen oracle values for the benchmark model (a=0.95, c=1, sw2=0.25,
# sv2=0.01), computed by fixed-point iteration of the DARE/Lyapunov
# equations at 1e-15 tolerance.
PS = 0.258689109945
KF = 0.962782265340
KS = 0.914643152073
SIGMA_S = 2.305413454149
INNOV_COV = 0.249061287291
FILT_COV = 2.554474741440


class TestSteadyState:
    def test_paper_values(self, paper_ss):
        assert paper_ss.P_s[0, 0] == pytest.approx(PS, abs=1e-9)
        assert paper_ss.K_f[0, 0] == pytest.approx(KF, abs=1e-9)
        assert paper_ss.K_s[0, 0] == pytest.approx(KS, abs=1e-9)
        assert paper_ss.Sigma_s[0, 0] == pytest.approx(SIGMA_S, abs=1e-9)
        assert paper_ss.innov_cov[0, 0] == pytest.approx(INNOV_COV, abs=1e-9)
        assert paper_ss.filt_est_cov[0, 0] == pytest.approx(FILT_COV, abs=1e-9)

    def test_residuals_vanish(self, paper_model, paper_ss):
        assert np.abs(dare_residual(paper_ss.P_s, paper_model)).max() < 1e-11
        assert np.abs(lyapunov_residual(paper_ss.Sigma_s, paper_model,
                                        paper_ss)).max() < 1e-11

    def test_filter_identities(self, paper_ss, paper_model):
        # K_f = P_s C' (C P_s C' + Sigma_v)^{-1}, K_s = A K_f
        Ps = paper_ss.P_s
        D = paper_model.C @ Ps @ paper_model.C.T + paper_model.Sigma_v
        assert np.allclose(paper_ss.K_f, Ps @ paper_model.C.T @ np.linalg.inv(D))
        assert np.allclose(paper_ss.K_s, paper_model.A @ paper_ss.K_f)

    def test_vector_model(self):
        model = SystemModel(A=[[0.9, 0.1], [0.0, 0.8]], C=[[1.0, 0.0]],
                            Sigma_w=[[0.2, 0.0], [0.0, 0.3]], Sigma_v=[[0.05]])
        ss = solve_dare(model)
        assert np.abs(dare_residual(ss.P_s, model)).max() < 1e-10
        assert np.abs(lyapunov_residual(ss.Sigma_s, model, ss)).max() < 1e-10
        eig = np.linalg.eigvals(model.A - ss.K_s @ model.C)
        assert np.all(np.abs(eig) < 1.0)

    @given(a=st.floats(0.0, 0.995), c=st.floats(0.2, 3.0),
           sw2=st.floats(0.01, 2.0), sv2=st.floats(1e-4, 0.5))
    @settings(max_examples=60, deadline=None)
    def test_scalar_dare_property(self, a, c, sw2, sv2):
        model = SystemModel.scalar(a=a, c=c, sigma_w2=sw2, sigma_v2=sv2)
        ss = solve_dare(model)
        Ps = ss.P_s[0, 0]
        assert Ps >= sw2 - 1e-9  # prediction variance at least process noise
        assert abs(dare_residual(ss.P_s, model)[0, 0]) < 1e-9
        # closed-loop prediction dynamics stable
        assert abs(a * (1.0 - ss.K_f[0, 0] * c)) < 1.0


class TestValidation:
    def test_unstable_rejected(self):
        with pytest.raises(ValueError, match="Schur"):
            SystemModel.scalar(a=1.01, c=1.0, sigma_w2=0.1, sigma_v2=0.1)

    def test_singular_measurement_noise_rejected(self):
        with pytest.raises(ValueError):
            SystemModel.scalar(a=0.9, c=1.0, sigma_w2=0.1, sigma_v2=0.0)

    def test_nonconvergence_raised(self, paper_model):
        with pytest.raises(NonConvergence):
            solve_dare(paper_model, tol=1e-30, max_iter=5)


class TestFilterStep:
    def test_innovation_definition(self, paper_model, paper_ss):
        rng = np.random.default_rng(3)
        xp = rng.standard_normal(1)
        y = rng.standard_normal(1)
        xf, xp_next, innov = sensor_filter_step(xp, y, paper_ss, paper_model)
        assert np.allclose(innov, xf - xp)
        assert np.allclose(xp_next, paper_model.A @ xf)

    def test_steady_state_container(self, paper_ss):
        assert isinstance(paper_ss, SensorSteadyState)
        assert paper_ss.filt_est_cov[0, 0] == pytest.approx(
            paper_ss.Sigma_s[0, 0] + paper_ss.innov_cov[0, 0])
