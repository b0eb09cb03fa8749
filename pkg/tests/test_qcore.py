import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.stats import kstest

from bincorr.errors import DimensionMismatch
from bincorr.qcore import (
    BinarisedBank,
    HermitianOperator,
    Measurement,
    binarisation_defect,
    born_bipartite,
    born_prepare_measure,
    haar_random_basis,
    haar_random_state,
)


class TestHermitianOperator:
    def test_symmetrizes_small_noise(self):
        base = np.diag([1.0, 2.0]).astype(complex)
        noisy = base + np.array([[0, 1e-10], [-1e-10, 0]])
        op = HermitianOperator(noisy)
        assert np.allclose(op.mat, op.mat.conj().T)

    def test_rejects_large_antihermitian_part(self):
        with pytest.raises(ValueError, match="anti-Hermitian"):
            HermitianOperator(np.array([[0, 1e-3], [-1e-3, 0]], dtype=complex))

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionMismatch):
            HermitianOperator(np.zeros((2, 3)))

    def test_psd_flag(self):
        assert HermitianOperator(np.eye(3)).is_psd()
        assert not HermitianOperator(np.diag([1.0, -0.5])).is_psd()
        # dual-solver noise level is tolerated
        assert HermitianOperator(np.diag([1.0, -5e-10])).is_psd()

    def test_immutable(self):
        op = HermitianOperator(np.eye(2))
        with pytest.raises(AttributeError):
            op.mat = np.zeros((2, 2))
        with pytest.raises(ValueError):
            op.mat[0, 0] = 5.0

    def test_floored_to_psd(self):
        op = HermitianOperator(np.diag([1.0, -1e-9]))
        fixed = op.floored_to_psd()
        assert fixed.min_eigenvalue() >= 0.0
        assert np.allclose(fixed.mat, np.diag([1.0, 0.0]))


class TestMeasurement:
    def test_basis_measurement(self):
        m = Measurement.from_basis(np.eye(3))
        assert m.n_outcomes == 3
        total = sum(e.mat for e in m.effects)
        assert np.max(np.abs(total - np.eye(3))) < 1e-12

    def test_incomplete_rejected(self):
        p0 = np.diag([1.0, 0.0])
        with pytest.raises(ValueError, match="identity"):
            Measurement([p0])

    def test_nonpsd_effect_rejected(self):
        with pytest.raises(ValueError, match="PSD"):
            Measurement([np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])])


class TestBinarisedBank:
    def test_no_completeness_required(self):
        p0 = np.diag([1.0, 0.0])
        bank = BinarisedBank([p0, p0])  # deliberately not a POVM
        assert bank.dim == 2

    def test_complements(self):
        m = haar_random_basis(3, seed=5)
        bank = BinarisedBank.from_measurement(m)
        for f, g in zip(bank.clicks, bank.complements):
            assert np.allclose(f.mat + g.mat, np.eye(3))

    def test_click_bounded_by_identity(self):
        with pytest.raises(ValueError, match="identity"):
            BinarisedBank([np.diag([1.5, 0.0])])


class TestBinarisationDefect:
    def test_complete_basis_zero(self):
        bank = BinarisedBank.from_measurement(Measurement.from_basis(np.eye(4)))
        assert binarisation_defect(bank) == pytest.approx(0.0, abs=1e-12)

    def test_two_identical_projectors(self):
        # oracle: eigenvalues of 2|0><0| - 1 are {1, -1}, so the norm is 1
        p0 = np.diag([1.0, 0.0])
        oracle = np.max(np.abs(np.linalg.eigvalsh(2 * p0 - np.eye(2))))
        bank = BinarisedBank([p0, p0])
        assert binarisation_defect(bank) == pytest.approx(oracle)
        assert oracle == pytest.approx(1.0)

    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_missing_port(self, d):
        clicks = [np.diag([1.0 if i == k else 0.0 for i in range(d)]) for k in range(d - 1)]
        bank = BinarisedBank(clicks)
        oracle = np.max(np.abs(np.linalg.eigvalsh(sum(clicks) - np.eye(d))))
        assert binarisation_defect(bank) == pytest.approx(oracle)
        assert oracle == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_any_povm_gives_zero(self, seed):
        m = haar_random_basis(4, seed=seed)
        assert binarisation_defect(BinarisedBank.from_measurement(m)) < 1e-9


class TestBornBipartite:
    def test_maximally_mixed_flat(self):
        state = HermitianOperator(np.eye(4) / 4)
        meas = [haar_random_basis(2, seed=s) for s in (1, 2)]
        p = born_bipartite(state, meas, meas)
        assert np.allclose(p.table, 0.25, atol=1e-12)

    def test_phi_plus_perfect_correlation(self):
        ket = np.zeros(4)
        ket[[0, 3]] = 1 / np.sqrt(2)
        state = HermitianOperator.from_ket(ket)
        # same real orthonormal basis on both sides correlates outcomes
        theta = 0.3
        basis = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        meas = [Measurement.from_basis(basis)]
        p = born_bipartite(state, meas, meas)
        assert p.table[0, 0, 0, 0] == pytest.approx(0.5, abs=1e-12)
        assert p.table[1, 1, 0, 0] == pytest.approx(0.5, abs=1e-12)
        assert p.table[0, 1, 0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_cglmp_value_against_phase_oracle(self, cglmp3):
        """The pinned-phase construction must match an independent optimization
        over measurement phase offsets (coarse grid + local refinement)."""
        from bincorr.constructions import cglmp_value

        n = 3
        coeffs = cglmp3.schmidt_coefficients
        j = np.arange(n)

        def value_for_phases(phases):
            a1, a2, b1, b2 = phases
            amp_a = np.stack(
                [np.exp(2j * np.pi * np.outer(j, j + al) / n) / np.sqrt(n) for al in (a1, a2)]
            )
            amp_b = np.stack(
                [np.exp(2j * np.pi * np.outer(j, -j + be) / n) / np.sqrt(n) for be in (b1, b2)]
            )
            amp = np.einsum("j,xja,yjb->abxy", coeffs, amp_a.conj(), amp_b.conj())
            table = np.abs(amp) ** 2
            a = np.arange(n)[:, None]
            b = np.arange(n)[None, :]
            return float(
                (table[:, :, 1, 1] * (a < b)).sum()
                + (table[:, :, 0, 1] * (b < a)).sum()
                + (table[:, :, 0, 0] * (a < b)).sum()
                + (table[:, :, 1, 0] * (b <= a)).sum()
            )

        grid = np.linspace(0, 1, 9)
        best = min(
            ((a1, a2, b1, b2) for a1 in grid for a2 in grid for b1 in grid for b2 in grid),
            key=value_for_phases,
        )
        res = minimize(value_for_phases, best, method="Nelder-Mead", options={"xatol": 1e-10})
        oracle_optimum = res.fun
        direct = cglmp_value(cglmp3.family.quantum)
        assert direct == pytest.approx(oracle_optimum, abs=1e-6)

    def test_normalization_and_no_signaling(self):
        state = haar_random_state(9, 2, seed=11)
        meas_a = [haar_random_basis(3, seed=s) for s in (0, 1)]
        meas_b = [haar_random_basis(3, seed=s) for s in (2, 3)]
        p = born_bipartite(state, meas_a, meas_b)
        assert np.max(np.abs(p.table.sum(axis=(0, 1)) - 1)) < 1e-10
        assert p.table.min() > -1e-12
        assert p.signaling_deviation() < 1e-10

    def test_dimension_mismatch(self):
        state = HermitianOperator(np.eye(4) / 4)
        with pytest.raises(DimensionMismatch):
            born_bipartite(state, [haar_random_basis(2, 0)], [haar_random_basis(3, 0)])

    def test_nonnormalized_state(self):
        state = HermitianOperator(np.eye(4) / 2)
        m = [haar_random_basis(2, 0)]
        with pytest.raises(ValueError, match="trace"):
            born_bipartite(state, m, m)


class TestBornPrepareMeasure:
    def test_pure_state_discrimination(self):
        states = [HermitianOperator(np.diag([1.0, 0.0])), HermitianOperator(np.diag([0.0, 1.0]))]
        meas = [Measurement.from_basis(np.eye(2))]
        p = born_prepare_measure(states, meas)
        assert p.table[0, 0, 0] == pytest.approx(1.0)
        assert p.table[1, 1, 0] == pytest.approx(1.0)


class TestHaarSampling:
    def test_rank1_purity(self):
        rho = haar_random_state(3, 1, seed=0)
        assert rho.purity() == pytest.approx(1.0, abs=1e-10)

    def test_state_determinism(self):
        a = haar_random_state(9, 9, seed=123)
        b = haar_random_state(9, 9, seed=123)
        assert np.array_equal(a.mat, b.mat)

    def test_induced_measure_concentrates(self):
        # oracle: Monte-Carlo mean of the rank-3 induced measure in d=3
        n = 10_000
        mean = np.zeros((3, 3), dtype=complex)
        for s in range(n):
            mean += haar_random_state(3, 3, seed=s).mat
        mean /= n
        trace_dist = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(mean - np.eye(3) / 3)))
        assert trace_dist < 0.02

    def test_basis_is_valid_measurement(self):
        m = haar_random_basis(5, seed=3)
        assert m.n_outcomes == 5  # Measurement invariants checked at construction

    def test_basis_determinism(self):
        a = haar_random_basis(4, seed=42)
        b = haar_random_basis(4, seed=42)
        for ea, eb in zip(a.effects, b.effects):
            assert np.array_equal(ea.mat, eb.mat)

    def test_overlap_law(self):
        # |<e1|f1>|^2 between independent Haar bases in d=2 is uniform on [0,1]
        overlaps = []
        for s in range(400):
            u = haar_random_basis(2, seed=(2 * s, 1)).effects[0].mat
            w = haar_random_basis(2, seed=(2 * s + 1, 2)).effects[0].mat
            overlaps.append(np.trace(u @ w).real)
        assert kstest(overlaps, "uniform").pvalue > 0.01

    def test_invalid_rank(self):
        with pytest.raises(ValueError):
            haar_random_state(3, 0, seed=0)
        with pytest.raises(ValueError):
            haar_random_state(3, 4, seed=0)
