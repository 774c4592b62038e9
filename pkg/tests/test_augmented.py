import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remest.augmented import (AugmentedModel, StructuredCov, expected_riccati,
                              lift, project, receiver_gain, riccati_step)
from remest.errors import StructureViolation
from remest.lti import SystemModel, solve_dare
from remest.quantizer import Family, QuantizerSpec, select_rates


def build_aug(a=0.95, c=1.0, sw2=0.25, sv2=0.01, target=0.01):
    model = SystemModel.scalar(a=a, c=c, sigma_w2=sw2, sigma_v2=sv2)
    ss = solve_dare(model)
    plan = select_rates(QuantizerSpec(family=Family.LLOYD_MAX), ss, target)
    return model, ss, plan, AugmentedModel.build(model, ss, plan)


class TestConstruction:
    def test_block_layout(self, paper_model, paper_ss, paper_aug):
        a = paper_model.A[0, 0]
        Ks = paper_ss.K_s[0, 0]
        Kf = paper_ss.K_f[0, 0]
        assert np.allclose(paper_aug.Acal, [[a, 0], [Ks, a - Ks]])
        assert np.allclose(paper_aug.Ccal0, [[Kf, -Kf]])
        assert np.allclose(paper_aug.Ccal1, [[Kf, 1 - Kf]])
        assert np.allclose(paper_aug.S, [[0], [Ks * 0.01 * Kf]])
        assert paper_aug.Q[0, 0] == pytest.approx(0.25)
        assert paper_aug.Q[1, 1] == pytest.approx(Ks ** 2 * 0.01)

    def test_per_stream_R(self, paper_aug, paper_plan, paper_ss):
        Kf = paper_ss.K_f[0, 0]
        assert paper_aug.R0[0, 0] == pytest.approx(
            Kf ** 2 * 0.01 + paper_plan.Sigma_q_eps[0, 0])
        assert paper_aug.R1[0, 0] == pytest.approx(
            Kf ** 2 * 0.01 + paper_plan.Sigma_q_x[0, 0])

    def test_scalar_kernel_attached(self, paper_aug):
        assert paper_aug.scalar is not None
        assert paper_aug.scalar.Rbase == pytest.approx(
            paper_aug.scalar.Kf ** 2 * 0.01)


class TestStructuredClass:
    def test_lift_project_roundtrip(self, paper_aug):
        sc = lift([[0.9]], paper_aug.Ps)
        assert project(sc.full(), paper_aug.Ps) == pytest.approx(0.9)

    def test_lift_rejects_below_steady_state(self, paper_aug):
        with pytest.raises(StructureViolation):
            lift([[0.1]], paper_aug.Ps)

    def test_project_rejects_unstructured(self, paper_aug):
        bad = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(StructureViolation) as exc:
            project(bad, paper_aug.Ps)
        assert exc.value.max_deviation > 0

    @given(P11=st.floats(0.26, 5.0), gamma=st.integers(0, 1),
           nu=st.integers(0, 1))
    @settings(max_examples=100, deadline=None)
    def test_closure_one_step(self, paper_aug, P11, gamma, nu):
        # the recursion never leaves the structured class
        P = StructuredCov(P11=[[P11]], Ps=paper_aug.Ps).full()
        nxt = riccati_step(P, gamma, nu, paper_aug)
        project(nxt, paper_aug.Ps, tol=1e-10)


class TestScalarKernel:
    @given(P11=st.floats(0.26, 10.0), gamma=st.integers(0, 1),
           nu=st.integers(0, 1))
    @settings(max_examples=150, deadline=None)
    def test_matches_matrix_path(self, paper_aug, P11, gamma, nu):
        P = StructuredCov(P11=[[P11]], Ps=paper_aug.Ps).full()
        full = riccati_step(P, gamma, nu, paper_aug)
        fast = paper_aug.scalar.step(P11, gamma, nu)
        assert fast == pytest.approx(full[0, 0], abs=1e-12)

    @given(seed=st.integers(0, 500), gamma=st.integers(0, 1),
           nu=st.integers(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_matches_matrix_path_random_models(self, seed, gamma, nu):
        rng = np.random.default_rng(seed)
        _, ss, _, aug = build_aug(a=rng.uniform(0.3, 0.99),
                                  c=rng.uniform(0.5, 2.0),
                                  sw2=rng.uniform(0.05, 1.0),
                                  sv2=rng.uniform(1e-3, 0.2))
        P11 = float(np.trace(ss.P_s)) + rng.uniform(0.0, 3.0)
        P = StructuredCov(P11=[[P11]], Ps=aug.Ps).full()
        full = riccati_step(P, gamma, nu, aug)
        assert aug.scalar.step(P11, gamma, nu) == pytest.approx(
            full[0, 0], abs=1e-11)

    def test_expected_is_mixture(self, paper_aug):
        sc = StructuredCov(P11=[[1.0]], Ps=paper_aug.Ps)
        for nu in (0, 1):
            mix = expected_riccati(sc, nu, 0.3, paper_aug).trace
            manual = (0.7 * paper_aug.scalar.step(1.0, 1, nu)
                      + 0.3 * paper_aug.scalar.step(1.0, 0, nu))
            assert mix == pytest.approx(manual, abs=1e-12)

    def test_dropout_is_open_loop(self, paper_aug):
        k = paper_aug.scalar
        assert k.step(1.3, 0, 0) == k.step(1.3, 0, 1)
        assert k.step(1.3, 0, 0) == pytest.approx(0.95 ** 2 * 1.3 + 0.25)

    def test_update_reduces_variance(self, paper_aug):
        k = paper_aug.scalar
        for nu in (0, 1):
            assert k.step(1.0, 1, nu) < k.step(1.0, 0, nu)
        # sending the estimate is at least as informative as the innovation
        # once the receiver has fallen behind (P11 > P_s)
        ks = paper_aug.scalar
        assert ks.step(1.5, 1, 1) < ks.step(1.5, 1, 0)


class TestReceiverGain:
    def test_gain_rows_equal_in_structured_class(self, paper_aug):
        for P11 in (0.3, 0.8, 1.7):
            P = StructuredCov(P11=[[P11]], Ps=paper_aug.Ps).full()
            for nu in (0, 1):
                K = receiver_gain(P, nu, paper_aug)
                assert K[0, 0] == pytest.approx(K[1, 0], abs=1e-12)
