import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bincorr.constructions import maximally_entangled_state, mub_assemblage
from bincorr.errors import InvalidScenario, SignalingBehavior
from bincorr.qcore import Measurement, steered_assemblage
from bincorr.scenarios import (
    Assemblage,
    Behavior,
    BellScenario,
    PMScenario,
    VisibilityFamily,
    binarise_assemblage,
    binarise_bell,
    binarise_family,
    binarise_pm,
    family_at,
)
from conftest import random_local_behavior, random_quantum_bell_family


def uniform_bell(n, m=2):
    s = BellScenario(m, m, n, n)
    return Behavior(s, np.full(s.shape, 1.0 / n**2))


class TestContainers:
    def test_behavior_normalization_enforced(self):
        s = BellScenario(2, 2, 2, 2)
        bad = np.full(s.shape, 0.2)
        with pytest.raises(ValueError, match="normalized"):
            Behavior(s, bad)

    def test_behavior_signaling_rejected(self):
        s = BellScenario(2, 2, 2, 2)
        t = np.full(s.shape, 0.25)
        t[:, :, 0, 0] = [[0.5, 0.0], [0.25, 0.25]]  # Alice marginal depends on y
        with pytest.raises(SignalingBehavior):
            Behavior(s, t)

    def test_entry_bounds(self):
        s = PMScenario(1, 1, 2)
        with pytest.raises(ValueError, match="probabilities"):
            Behavior(s, np.array([[[1.5]], [[-0.5]]]))

    def test_scenario_validation(self):
        with pytest.raises(InvalidScenario):
            BellScenario(0, 2, 2, 2)

    def test_assemblage_no_signaling_enforced(self):
        eye = np.eye(2) / 4
        rows = [[eye, eye], [eye, 3 * eye]]  # second input sums differently
        with pytest.raises(SignalingBehavior):
            Assemblage(rows)

    def test_assemblage_trace_enforced(self):
        eye = np.eye(2) / 3
        with pytest.raises(ValueError, match="trace"):
            Assemblage([[eye, eye]])

    def test_family_endpoint_mismatch(self):
        with pytest.raises(InvalidScenario):
            VisibilityFamily(uniform_bell(2), uniform_bell(3))


class TestBinariseBell:
    def test_uniform_closed_form(self):
        n = 3
        p = binarise_bell(uniform_bell(n))
        assert np.allclose(p.table[0, 0], 1 / n**2)
        assert np.allclose(p.table[0, 1], 1 / n - 1 / n**2)
        assert np.allclose(p.table[1, 0], 1 / n - 1 / n**2)
        assert np.allclose(p.table[1, 1], (1 - 1 / n) ** 2)

    def test_perfectly_correlated_qubits(self):
        s = BellScenario(2, 2, 2, 2)
        t = np.zeros(s.shape)
        for x in range(2):
            for y in range(2):
                t[0, 0, x, y] = t[1, 1, x, y] = 0.5
        p = binarise_bell(Behavior(s, t))
        # x_tilde = (x=0, a=0), y_tilde = (y=0, b=0)
        assert p.table[0, 0, 0, 0] == pytest.approx(0.5)
        assert p.table[0, 1, 0, 0] == pytest.approx(0.0)
        assert p.table[1, 1, 0, 0] == pytest.approx(0.5)

    def test_roundtrip_click_slice_exact(self, cglmp3):
        p = cglmp3.family.quantum
        pb = binarise_bell(p)
        s = p.scenario
        recovered = pb.table[0, 0].reshape(s.inputs_a, s.outcomes_a, s.inputs_b, s.outcomes_b)
        assert np.array_equal(recovered.transpose(1, 3, 0, 2), p.table)

    def test_marginal_consistency_two_ways(self, cglmp3):
        """Oracle: recompute the binarised tensor's context sums and marginals
        directly and compare against the originals."""
        p = cglmp3.family.quantum
        pb = binarise_bell(p)
        totals = pb.table.sum(axis=(0, 1))
        assert np.max(np.abs(totals - 1.0)) < 1e-12
        pa = p.marginal_a()
        click_marg_a = (pb.table[0, 0] + pb.table[0, 1]).mean(axis=1)
        assert np.allclose(click_marg_a, pa.T.reshape(-1), atol=1e-12)
        pb_marg = p.marginal_b()
        click_marg_b = (pb.table[0, 0] + pb.table[1, 0]).mean(axis=0)
        assert np.allclose(click_marg_b, pb_marg.T.reshape(-1), atol=1e-12)

    def test_signaling_rejected(self):
        s = BellScenario(2, 2, 2, 2)
        t = np.full(s.shape, 0.25)
        t[:, :, 0, 0] = [[0.5, 0.2], [0.2, 0.1]]  # Alice marginal depends on y
        p = Behavior(s, t, validate=False)
        with pytest.raises(SignalingBehavior):
            binarise_bell(p)

    def test_output_no_signaling(self, cglmp3):
        for v in (0.0, 0.5, 1.0):
            pb = binarise_bell(cglmp3.family.at(v))
            assert pb.signaling_deviation() < 1e-9

    @given(seed=st.integers(0, 10_000), alpha=st.floats(0.0, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, seed, alpha):
        s = BellScenario(2, 2, 3, 3)
        p = random_local_behavior(seed, s)
        q = random_local_behavior(seed + 1, s)
        mixed = Behavior(s, alpha * p.table + (1 - alpha) * q.table)
        lhs = binarise_bell(mixed).table
        rhs = alpha * binarise_bell(p).table + (1 - alpha) * binarise_bell(q).table
        assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestBinarisePM:
    def test_deterministic_point(self):
        s = PMScenario(2, 2, 3)
        t = np.zeros(s.shape)
        f = {(0, 0): 0, (0, 1): 2, (1, 0): 1, (1, 1): 1}
        for (x, y), b in f.items():
            t[b, x, y] = 1.0
        pb = binarise_pm(Behavior(s, t))
        for (x, y), b in f.items():
            for bb in range(3):
                expected = 1.0 if bb == b else 0.0
                assert pb.table[0, x, y * 3 + bb] == expected

    def test_uniform(self):
        s = PMScenario(2, 2, 4)
        pb = binarise_pm(Behavior(s, np.full(s.shape, 0.25)))
        assert np.allclose(pb.table[0], 0.25)

    def test_rac_click_completeness(self, rac3):
        # oracle: direct summation over the ports of one measurement block
        pb = binarise_pm(rac3.family.quantum)
        t = pb.table[0].reshape(9, 2, 3)
        assert np.max(np.abs(t.sum(axis=2) - 1.0)) < 1e-9


class TestBinariseAssemblage:
    def test_maximally_mixed(self):
        n, d = 3, 3
        eye = np.eye(d)
        asm = Assemblage([[eye / (n * d)] * n for _ in range(2)])
        out = binarise_assemblage(asm)
        assert out.inputs == 2 * n
        for row in out.ops:
            assert np.allclose(row[0].mat, eye / (n * d))
            assert np.allclose(row[1].mat, (1 - 1 / n) * eye / d)

    def test_phi_plus_rank1(self):
        state = maximally_entangled_state(2)
        asm = steered_assemblage(state, [Measurement.from_basis(np.eye(2))], 2)
        out = binarise_assemblage(asm)
        for row in out.ops:
            vals = np.linalg.eigvalsh(row[0].mat)
            assert row[0].trace() == pytest.approx(0.5, abs=1e-10)
            assert vals[-1] == pytest.approx(0.5, abs=1e-10)  # rank 1

    def test_mub_sum_preserved(self):
        fam = mub_assemblage(3, 2)
        asm = fam.quantum
        out = binarise_assemblage(asm)
        for row in out.ops:
            assert np.max(np.abs(row[0].mat + row[1].mat - asm.rho_b.mat)) < 1e-9
        assert np.max(np.abs(out.rho_b.mat - asm.rho_b.mat)) < 1e-12

    def test_malformed_input_rejected(self):
        # sum condition deliberately bypassed so rho_B - sigma dips negative
        zero = np.zeros((2, 2))
        rows = [[np.diag([1.0, 0.0]), zero], [np.diag([0.0, 1.0]), zero]]
        asm = Assemblage(rows, validate=False)
        with pytest.raises(ValueError, match="PSD"):
            binarise_assemblage(asm)


class TestVisibilityFamily:
    def test_endpoints(self, cglmp2):
        fam = cglmp2.family
        assert np.array_equal(fam.at(1.0).table, fam.quantum.table)
        assert np.array_equal(fam.at(0.0).table, fam.noise.table)

    def test_midpoint(self):
        s = BellScenario(1, 1, 2, 2)
        p = Behavior(s, np.array([[[[0.5]], [[0.0]]], [[[0.0]], [[0.5]]]]))
        q = Behavior(s, np.full(s.shape, 0.25))
        mid = family_at(VisibilityFamily(p, q), 0.5)
        assert np.allclose(mid.table, 0.5 * p.table + 0.5 * q.table)

    def test_out_of_range(self, cglmp2):
        with pytest.raises(ValueError):
            cglmp2.family.at(1.5)

    def test_commutes_with_binarisation(self, cglmp3):
        fam = cglmp3.family
        binfam = binarise_family(fam)
        for v in (0.3, 0.75):
            a = binarise_bell(fam.at(v)).table
            b = binfam.at(v).table
            assert np.max(np.abs(a - b)) < 1e-12

    def test_assemblage_affinity(self):
        fam = mub_assemblage(2, 2)
        mid = fam.at(0.5)
        expect = 0.5 * fam.quantum.as_array() + 0.5 * fam.noise.as_array()
        assert np.allclose(mid.as_array(), expect, atol=1e-14)


class TestSerialization:
    def test_behavior_bit_exact(self, seed=3):
        fam = random_quantum_bell_family(seed)
        doc = json.loads(json.dumps(fam.quantum.to_json_dict()))
        back = Behavior.from_json_dict(doc)
        assert np.array_equal(back.table, fam.quantum.table)
        assert back.scenario == fam.quantum.scenario
        assert doc["index_convention"] == "x_tilde = x*N + a"

    def test_pm_behavior_roundtrip(self, rac3):
        doc = json.loads(json.dumps(rac3.family.quantum.to_json_dict()))
        back = Behavior.from_json_dict(doc)
        assert np.array_equal(back.table, rac3.family.quantum.table)

    def test_assemblage_roundtrip(self):
        fam = mub_assemblage(3, 3)
        doc = json.loads(json.dumps(fam.quantum.to_json_dict()))
        back = Assemblage.from_json_dict(doc)
        assert np.array_equal(back.as_array(), fam.quantum.as_array())
