import numpy as np
import pytest

from rspsim import qstate, tomo
from rspsim.errors import ConvergenceError
from rspsim.qstate import I2
from rspsim.rsp import ResourceSpec, TargetState
from rspsim.tomo import PROJECTORS_1Q, PROJECTORS_2Q, CountRecord, ProjectorSet

from conftest import random_dm, random_pure, random_unitary

H = qstate.ket_to_dm(qstate.ket("H"))


def counts_from(mapping):
    return CountRecord(PROJECTORS_1Q.labels, [mapping[lab] for lab in PROJECTORS_1Q.labels], 100)


class TestProjectors:
    def test_sizes(self):
        assert len(PROJECTORS_1Q.labels) == 6
        assert len(PROJECTORS_2Q.labels) == 36

    @pytest.mark.parametrize("ps", [PROJECTORS_1Q, PROJECTORS_2Q], ids=["1q", "2q"])
    def test_each_basis_is_complete(self, ps):
        for group in ps.groups:
            np.testing.assert_allclose(ps.ops[list(group)].sum(axis=0), np.eye(ps.dim), atol=1e-15)

    def test_rank_one_products(self):
        for op in PROJECTORS_2Q.ops:
            assert np.linalg.matrix_rank(op) == 1
            np.testing.assert_allclose(op @ op, op, atol=1e-15)

    def test_unknown_labels(self):
        with pytest.raises(ValueError):
            tomo.projectors_for(("H", "V"))


class TestCounts:
    def test_h_state(self):
        rec = tomo.simulate_counts(H, PROJECTORS_1Q, 1e4, seed=1)
        c = dict(zip(rec.labels, rec.counts))
        assert c["V"] == 0
        assert abs(c["H"] - 1e4) < 5 * 100

    def test_maximally_mixed_means(self):
        np.testing.assert_allclose(tomo.expected_counts(I2 / 2, PROJECTORS_1Q, 1e4), 5e3)

    def test_deterministic(self):
        a = tomo.simulate_counts(I2 / 2, PROJECTORS_1Q, 1e4, seed=7)
        b = tomo.simulate_counts(I2 / 2, PROJECTORS_1Q, 1e4, seed=7)
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_seeds_differ(self):
        a = tomo.simulate_counts(I2 / 2, PROJECTORS_1Q, 1e4, seed=7)
        b = tomo.simulate_counts(I2 / 2, PROJECTORS_1Q, 1e4, seed=8)
        assert not np.array_equal(a.counts, b.counts)

    def test_poisson_statistics(self):
        samples = np.array([tomo.simulate_counts(H, PROJECTORS_1Q, 400, seed=s).counts[0] for s in range(2000)])
        assert samples.mean() == pytest.approx(400, rel=0.01)
        assert samples.var() == pytest.approx(400, rel=0.1)

    def test_efficiency_and_background(self):
        mean = tomo.expected_counts(H, PROJECTORS_1Q, 1000, efficiency=0.5, background=0.01)
        np.testing.assert_allclose(mean, 1000 * (0.5 * np.array([1, 0, 0.5, 0.5, 0.5, 0.5]) + 0.01))

    def test_counts_non_negative(self, rng):
        rec = tomo.simulate_counts(random_dm(rng, 4), PROJECTORS_2Q, 50, seed=3)
        assert np.all(rec.counts >= 0)

    def test_json_round_trip(self):
        rec = tomo.simulate_counts(H, PROJECTORS_1Q, 100, seed=3)
        back = CountRecord.from_json(rec.to_json())
        np.testing.assert_array_equal(back.counts, rec.counts)
        assert (back.labels, back.n0, back.seed) == (rec.labels, rec.n0, rec.seed)

    @pytest.mark.parametrize(
        "data",
        [
            [],
            {"labels": list("HVDALR"), "counts": [1] * 6},
            {"labels": list("HVDALR"), "counts": [1] * 5, "n0": 1},
            {"labels": list("HVDALR"), "counts": [1, 1, 1, 1, 1, "x"], "n0": 1},
            {"labels": list("HVDALR"), "counts": [1] * 6, "n0": 1, "extra": 0},
            {"labels": list("HVXALR"), "counts": [1] * 6, "n0": 1},
            {"labels": list("HVDALR"), "counts": [1, -1, 1, 1, 1, 1], "n0": 1},
        ],
    )
    def test_schema_errors(self, data):
        with pytest.raises(ValueError):
            CountRecord.from_json(data)


class TestLinearInversion:
    def test_h(self):
        np.testing.assert_allclose(tomo.linear_inversion(tomo.noiseless_counts(H, PROJECTORS_1Q)), H, atol=1e-12)

    def test_mixed(self):
        out = tomo.linear_inversion(tomo.noiseless_counts(I2 / 2, PROJECTORS_1Q))
        np.testing.assert_allclose(out, I2 / 2, atol=1e-12)

    def test_stokes_example(self):
        rho = tomo.linear_inversion(counts_from({"H": 60, "V": 40, "D": 50, "A": 50, "L": 50, "R": 50}))
        np.testing.assert_allclose(qstate.bloch_from_state(rho), [0, 0, 0.2], atol=1e-12)

    def test_two_qubit_noiseless(self, rng):
        rho = random_dm(rng, 4)
        np.testing.assert_allclose(tomo.linear_inversion(tomo.noiseless_counts(rho, PROJECTORS_2Q)), rho, atol=1e-12)

    def test_empty_basis(self):
        with pytest.raises(ValueError):
            tomo.linear_inversion(counts_from({"H": 0, "V": 0, "D": 5, "A": 5, "L": 5, "R": 5}))

    def test_can_be_unphysical(self):
        rho = tomo.linear_inversion(counts_from({"H": 100, "V": 0, "D": 100, "A": 0, "L": 50, "R": 50}))
        assert np.linalg.eigvalsh(rho).min() < -0.1


class TestMle:
    def test_noiseless_1q(self, rng):
        for _ in range(20):
            rho = random_dm(rng)
            res = tomo.mle_reconstruct(tomo.noiseless_counts(rho, PROJECTORS_1Q, 1e4))
            assert qstate.fidelity(rho, res.rho_hat) > 0.9999

    def test_noiseless_phi_plus(self):
        phi = qstate.ket_to_dm((qstate.ket("HH") + qstate.ket("VV")) / np.sqrt(2))
        res = tomo.mle_reconstruct(tomo.noiseless_counts(phi, PROJECTORS_2Q, 1e4))
        assert qstate.fidelity(phi, res.rho_hat) > 0.9999
        assert qstate.tangle(res.rho_hat) > 0.999

    def test_physical_for_unphysical_data(self):
        res = tomo.mle_reconstruct(counts_from({"H": 100, "V": 0, "D": 100, "A": 0, "L": 50, "R": 50}))
        qstate.validate(res.rho_hat)
        assert np.linalg.norm(qstate.bloch_from_state(res.rho_hat)) <= 1 + 1e-12

    def test_always_physical(self, rng):
        for seed in range(10):
            res = tomo.mle_reconstruct(tomo.simulate_counts(random_pure(rng, 4), PROJECTORS_2Q, 100, seed))
            qstate.validate(res.rho_hat)

    def test_poisson_pure_1q(self, rng):
        fids = []
        for seed in range(30):
            rho = random_pure(rng)
            res = tomo.mle_reconstruct(tomo.simulate_counts(rho, PROJECTORS_1Q, 1e4, seed))
            fids.append(qstate.fidelity(rho, res.rho_hat))
        assert np.median(fids) > 0.999

    def test_no_counts(self):
        with pytest.raises(ValueError):
            tomo.mle_reconstruct(CountRecord(PROJECTORS_1Q.labels, np.zeros(6), 1))

    def test_eval_cap(self, rng):
        rec = tomo.simulate_counts(random_dm(rng, 4), PROJECTORS_2Q, 1e3, seed=1)
        with pytest.raises(ConvergenceError) as exc:
            tomo.mle_reconstruct(rec, max_evals=50)
        qstate.validate(exc.value.best.rho_hat)

    def test_result_json(self):
        res = tomo.mle_reconstruct(tomo.noiseless_counts(H, PROJECTORS_1Q, 100))
        out = res.to_json()
        assert out["bloch"]["s3"] == pytest.approx(1, abs=1e-6)
        assert out["purity"] == pytest.approx(1, abs=1e-6)

    def test_error_shrinks_with_n0(self, rng):
        rho = random_dm(rng)
        medians = []
        for n0 in (1e2, 1e3, 1e4, 1e5):
            errs = [
                1 - qstate.fidelity(rho, tomo.mle_reconstruct(tomo.simulate_counts(rho, PROJECTORS_1Q, n0, s)).rho_hat)
                for s in range(50)
            ]
            medians.append(np.median(errs))
        assert all(a > b for a, b in zip(medians, medians[1:]))

    def test_basis_covariance(self, rng):
        """Rotating truth and projectors together leaves the fidelity distribution unchanged."""
        rho = random_dm(rng)
        u = random_unitary(rng)
        rotated = ProjectorSet(PROJECTORS_1Q.labels, u @ PROJECTORS_1Q.ops @ u.conj().T, PROJECTORS_1Q.groups)
        for seed in range(10):
            f0 = qstate.fidelity(rho, tomo.mle_reconstruct(tomo.simulate_counts(rho, PROJECTORS_1Q, 1e3, seed)).rho_hat)
            rho_u = u @ rho @ u.conj().T
            rec = tomo.simulate_counts(rho_u, rotated, 1e3, seed)
            f1 = qstate.fidelity(rho_u, tomo.mle_reconstruct(rec, rotated).rho_hat)
            assert f1 == pytest.approx(f0, abs=1e-6)


class TestExperiment:
    def test_child_seeds(self):
        assert tomo.child_seeds(5, 3) == tomo.child_seeds(5, 3)
        assert len(set(tomo.child_seeds(5, 10))) == 10

    def test_mixed_target(self):
        run = tomo.rsp_experiment(ResourceSpec(), TargetState(0.3, 0.2, 1.0), 1e4, seed=11)
        assert qstate.purity(run.tomography.rho_hat) < 0.51

    def test_pure_target(self):
        run = tomo.rsp_experiment(ResourceSpec(white_noise=0.01), TargetState(0.6, 1.2), 1e4, seed=12)
        assert run.fidelity > 0.99
        assert run.settings.success_probability == pytest.approx(0.5, abs=0.02)

    def test_deterministic(self):
        a = tomo.rsp_experiment(ResourceSpec(), TargetState(0.2), 1e3, seed=3)
        b = tomo.rsp_experiment(ResourceSpec(), TargetState(0.2), 1e3, seed=3)
        np.testing.assert_array_equal(a.tomography.rho_hat, b.tomography.rho_hat)
