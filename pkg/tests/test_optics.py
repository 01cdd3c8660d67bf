import numpy as np
import pytest

from rspsim import optics, qstate
from rspsim.errors import StateError
from rspsim.optics import FilterMixture, PartialPolarizer, WavePlate
from rspsim.qstate import I2, PureQubit

from conftest import random_filter, random_unitary

PHI_PLUS = qstate.ket_to_dm((qstate.ket("HH") + qstate.ket("VV")) / np.sqrt(2))


def up_to_phase(a, b):
    """True when vectors/matrices a and b agree up to a global phase."""
    a, b = np.ravel(a), np.ravel(b)
    k = np.argmax(np.abs(b))
    return np.allclose(a * (b[k] / a[k]), b, atol=1e-12) and np.isclose(abs(b[k] / a[k]), 1)


def bob_conditional(m):
    return qstate.normalize(qstate.partial_trace_A(qstate.apply_alice(PHI_PLUS, m)))


class TestWavePlate:
    def test_hwp_axis_aligned_is_sigma_z(self):
        np.testing.assert_allclose(WavePlate.hwp(0).jones(), np.diag([-1j, 1j]), atol=1e-15)

    def test_hwp_22_5_turns_h_into_d(self):
        out = WavePlate.hwp(np.pi / 8).jones() @ qstate.ket("H")
        assert up_to_phase(out, qstate.ket("D"))

    def test_qwp_45_makes_h_circular(self):
        out = WavePlate.qwp(np.pi / 4).jones() @ qstate.ket("H")
        s = qstate.bloch_from_state(qstate.ket_to_dm(out))
        assert abs(abs(s[1]) - 1) < 1e-12

    def test_unitary_everywhere(self, rng):
        for _ in range(500):
            w = WavePlate(rng.uniform(-np.pi, np.pi), rng.uniform(0.01, 2 * np.pi - 0.01)).jones()
            np.testing.assert_allclose(w.conj().T @ w, I2, atol=1e-12)

    def test_retardance_range(self):
        with pytest.raises(ValueError):
            WavePlate(0, 0)

    def test_from_wavelengths(self):
        w = WavePlate.from_wavelengths(0.1, np.pi, 702, 670)
        assert w.retardance == pytest.approx(3.291638869880649)


class TestRetardance:
    def test_design(self):
        assert optics.retardance_at(np.pi, 702, 702) == np.pi

    def test_670(self):
        assert optics.retardance_at(np.pi, 702, 670) == pytest.approx(3.2916, abs=1e-4)

    def test_737(self):
        assert optics.retardance_at(np.pi / 2, 702, 737) == pytest.approx(1.4962, abs=1e-4)

    def test_bad_wavelength(self):
        with pytest.raises(ValueError):
            optics.retardance_at(np.pi, 0, 702)


class TestPartialPolarizer:
    def test_ideal_limit(self):
        bob = bob_conditional(PartialPolarizer(1, 0).kraus())
        np.testing.assert_allclose(bob, qstate.ket_to_dm(qstate.ket("D")), atol=1e-15)

    def test_equal_transmissions_no_polarizer(self):
        for t in (0.2, 0.5, 1.0):
            np.testing.assert_allclose(bob_conditional(PartialPolarizer(t, t).kraus()), I2 / 2, atol=1e-15)

    def test_three_to_one(self):
        bob = bob_conditional(PartialPolarizer(0.75, 0.25).kraus())
        assert bob[0, 1].real == pytest.approx(0.25)
        assert np.linalg.norm(qstate.bloch_from_state(bob)) == pytest.approx(0.5)

    def test_unit_transmission_is_identity(self):
        np.testing.assert_allclose(PartialPolarizer(1, 1).kraus(PureQubit(0.7, 0.3)), I2, atol=1e-15)

    def test_closed_form_on_grid(self):
        for t_d in np.linspace(0, 1, 21):
            for t_a in np.linspace(0, 1, 21):
                if t_d == t_a == 0:
                    continue
                n = 1 / (t_d + t_a)
                expected = np.array([[1, n * (t_d - t_a)], [n * (t_d - t_a), 1]]) / 2
                np.testing.assert_allclose(bob_conditional(PartialPolarizer(t_d, t_a).kraus()), expected, atol=1e-12)

    def test_all_blocked(self):
        with pytest.raises(ValueError):
            PartialPolarizer(0, 0)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            PartialPolarizer(1.2, 0)


class TestFilterSvd:
    def test_identity(self):
        v, d, u = optics.filter_svd(I2)
        np.testing.assert_allclose(d, I2)
        np.testing.assert_allclose(v.conj().T @ u, I2, atol=1e-15)

    def test_diagonal_sorted(self):
        v, d, u = optics.filter_svd(optics.procrustean(0.3, 0.9))
        np.testing.assert_allclose(np.diag(d).real, [0.9, 0.3])
        assert np.allclose(np.abs(u), [[0, 1], [1, 0]])

    def test_reconstruction_random(self, rng):
        worst = 0
        for _ in range(1000):
            m = random_filter(rng)
            v, d, u = optics.filter_svd(m)
            worst = max(worst, np.max(np.abs(v.conj().T @ d @ u - m)))
            sv = np.diag(d).real
            assert sv[0] >= sv[1] >= 0 and sv[0] <= 1 + 1e-12
        assert worst < 1e-12

    def test_singular_values_unitarily_invariant(self, rng):
        for _ in range(1000):
            m = random_filter(rng)
            a, b = random_unitary(rng), random_unitary(rng)
            d1 = np.diag(optics.filter_svd(m)[1]).real
            d2 = np.diag(optics.filter_svd(a @ m @ b)[1]).real
            np.testing.assert_allclose(d1, d2, atol=1e-12)

    def test_dropping_v_leaves_bob_unchanged(self, rng):
        rho = qstate.ket_to_dm(np.array([0.6, 0.2j, -0.3, 0.7]) / np.linalg.norm([0.6, 0.2, 0.3, 0.7]))
        for _ in range(50):
            m = random_filter(rng)
            v, d, u = optics.filter_svd(m)
            full = qstate.partial_trace_A(qstate.apply_alice(rho, m))
            np.testing.assert_allclose(qstate.partial_trace_A(qstate.apply_alice(rho, d @ u)), full, atol=1e-12)


class TestProcrustean:
    def test_identity(self):
        np.testing.assert_allclose(optics.procrustean(1, 1), I2)

    def test_v_projector(self):
        np.testing.assert_allclose(optics.procrustean(0, 1), qstate.ket_to_dm(qstate.ket("V")))

    def test_distillation_filter(self):
        p = 0.75
        np.testing.assert_allclose(optics.procrustean(np.sqrt((1 - p) / p), 1), np.diag([1 / np.sqrt(3), 1]))

    def test_range(self):
        with pytest.raises(ValueError):
            optics.procrustean(1.1, 0)


class TestCompose:
    def test_identities(self):
        np.testing.assert_allclose(optics.compose([I2, I2]), I2)

    def test_hwp_then_polarizer_passes_h(self):
        m = optics.compose([WavePlate.hwp(np.pi / 8), PartialPolarizer(1, 0)])
        assert np.linalg.norm(m @ qstate.ket("H")) == pytest.approx(1)

    def test_propagation_order(self):
        # polarizer first then HWP: |H> is half blocked before the plate
        m = optics.compose([PartialPolarizer(1, 0), WavePlate.hwp(np.pi / 8)])
        assert np.linalg.norm(m @ qstate.ket("H")) ** 2 == pytest.approx(0.5)

    def test_empty(self):
        with pytest.raises(ValueError):
            optics.compose([])

    def test_unphysical(self):
        with pytest.raises(StateError):
            optics.compose([2 * I2])


class TestFilterMixture:
    def test_valid(self):
        d, a = (qstate.ket_to_dm(qstate.ket(x)) for x in "DA")
        FilterMixture(((0.5, d), (0.5, a)))

    def test_too_many_terms(self):
        with pytest.raises(ValueError):
            FilterMixture(tuple((0.2, 0.1 * I2) for _ in range(5)))

    def test_over_complete(self):
        with pytest.raises(StateError):
            FilterMixture(((0.8, I2), (0.8, I2)))
