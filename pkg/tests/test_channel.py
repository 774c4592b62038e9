import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from remest.channel import (FeedbackChannel, ForwardChannel,
                            bit_error_from_energy, bit_error_from_packet_loss,
                            energy_from_bit_error, feedback_draw,
                            forward_draw, packet_energy, packet_loss_from_bit_error,
                            q_function)
from remest.errors import DomainError

# Frozen oracles at p=0.2, n0=3, n1=5, N0=0.01
PB0 = 0.071682233277
PB1 = 0.043647500210
EB0 = 0.0107073495589
EB1 = 0.0146178069829


class TestBitErrorInversion:
    def test_paper_values(self, paper_fwd):
        assert paper_fwd.p_b0 == pytest.approx(PB0, abs=1e-10)
        assert paper_fwd.p_b1 == pytest.approx(PB1, abs=1e-10)
        # headline two-digit values
        assert paper_fwd.p_b0 == pytest.approx(0.07, abs=0.005)
        assert paper_fwd.p_b1 == pytest.approx(0.04, abs=0.005)

    def test_energy_ratio(self, paper_fwd):
        ratio = paper_fwd.E_b1 / paper_fwd.E_b0
        assert 1.31 <= ratio <= 1.45
        assert paper_fwd.E_b0 == pytest.approx(EB0, rel=1e-9)
        assert paper_fwd.E_b1 == pytest.approx(EB1, rel=1e-9)

    def test_q_function_matches_normal_tail(self):
        xs = np.linspace(-3, 6, 25)
        assert np.allclose([q_function(x) for x in xs], norm.sf(xs),
                           rtol=1e-12, atol=1e-300)

    @given(p=st.floats(1e-4, 1 - 1e-4), n=st.integers(1, 16))
    @settings(max_examples=80, deadline=None)
    def test_loss_roundtrip(self, p, n):
        pb = bit_error_from_packet_loss(p, n)
        assert packet_loss_from_bit_error(pb, n) == pytest.approx(p, abs=1e-12)

    @given(pb=st.floats(1e-6, 0.499))
    @settings(max_examples=80, deadline=None)
    def test_energy_roundtrip(self, pb):
        E = energy_from_bit_error(pb, N0=0.01)
        assert bit_error_from_energy(E, N0=0.01) == pytest.approx(pb, abs=1e-9)

    def test_energy_monotone_in_reliability(self):
        Es = [energy_from_bit_error(pb, 0.01) for pb in (0.3, 0.1, 0.05, 0.01)]
        assert all(e2 > e1 for e1, e2 in zip(Es, Es[1:]))

    @pytest.mark.parametrize("pb", [0.0, 0.5, 0.7, -0.1])
    def test_inversion_domain(self, pb):
        with pytest.raises(DomainError):
            energy_from_bit_error(pb, 0.01)

    def test_loss_prob_domain(self):
        with pytest.raises(DomainError):
            ForwardChannel.from_loss_prob(1.0, 3, 5, 0.01)

    def test_from_energies_consistency(self, paper_fwd):
        rebuilt = ForwardChannel.from_energies(paper_fwd.E_b0, paper_fwd.E_b1,
                                               3, 5, 0.01)
        assert rebuilt.p == pytest.approx(0.2, abs=1e-10)
        with pytest.raises(DomainError):
            ForwardChannel.from_energies(paper_fwd.E_b0, 2 * paper_fwd.E_b1,
                                         3, 5, 0.01)


class TestFeedback:
    def test_transition_rows(self, noisy_fb):
        expect = np.array([[0.54, 0.06, 0.4], [0.06, 0.54, 0.4]])
        assert np.allclose(noisy_fb.Amat, expect)
        assert np.allclose(noisy_fb.Amat.sum(axis=1), 1.0)

    def test_perfect_feedback_identity(self, perfect_fb):
        assert np.allclose(perfect_fb.Amat, [[1, 0, 0], [0, 1, 0]])

    @given(eta=st.floats(0, 1), delta=st.floats(0, 1))
    @settings(max_examples=50, deadline=None)
    def test_rows_are_distributions(self, eta, delta):
        fb = FeedbackChannel(eta=eta, delta=delta)
        assert np.all(fb.Amat >= -1e-15)
        assert np.allclose(fb.Amat.sum(axis=1), 1.0)

    def test_draw_frequencies(self, noisy_fb):
        rng = np.random.default_rng(5)
        draws = np.array([feedback_draw(noisy_fb, 1, rng) for _ in range(40_000)])
        freq = np.bincount(draws, minlength=3) / draws.size
        assert np.allclose(freq, noisy_fb.Amat[1], atol=0.01)


class TestEnergy:
    def test_packet_energy(self, paper_plan, paper_fwd):
        assert packet_energy(paper_plan, paper_fwd, 0) == pytest.approx(3 * EB0, rel=1e-9)
        assert packet_energy(paper_plan, paper_fwd, 1) == pytest.approx(5 * EB1, rel=1e-9)
        # the estimate packet always costs more than the innovation packet
        assert packet_energy(paper_plan, paper_fwd, 1) > packet_energy(
            paper_plan, paper_fwd, 0)

    def test_forward_draw_rate(self, paper_fwd):
        rng = np.random.default_rng(6)
        hits = sum(forward_draw(paper_fwd, rng) for _ in range(50_000))
        assert hits / 50_000 == pytest.approx(0.8, abs=0.01)
