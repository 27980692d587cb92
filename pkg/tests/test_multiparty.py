import math

import numpy as np
import pytest

from sepcert.hermitian import PartitionedState
from sepcert.bipartite import ppt_visibility
from sepcert.multiparty import (
    SeparabilityClass,
    adaptive_multiparty,
    bsep_visibility_fixed,
    fbsep_visibility_fixed,
    fsep_dual_witness,
    fsep_visibility_fixed,
    parse_class,
    _fsep_blocks,
)
from sepcert.polytopes import random_inner_polytope
from sepcert.states import gamma_family, ghz_state, random_density, w_state


def random_three_qubit(seed):
    return PartitionedState(random_density(8, seed).mat, (2, 2, 2))


def random_product_three(seed):
    rng = np.random.default_rng(seed)
    mat = np.ones((1, 1), dtype=complex)
    for _ in range(3):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v /= np.linalg.norm(v)
        mat = np.kron(mat, np.outer(v, v.conj()))
    return PartitionedState(mat, (2, 2, 2))


class TestClassParsing:
    def test_simple_tags(self):
        assert parse_class("fsep").tag == "FSEP"
        assert parse_class("bsep").tag == "BSEP"
        assert parse_class("fbsep").tag == "FBSEP"

    def test_cut_grammar_letters_and_digits(self):
        assert parse_class("sep:A|BC").cut == (0,)
        assert parse_class("sep:AC|B", 3).cut == (0, 2)
        assert parse_class("sep:0|12").cut == (0,)

    def test_invalid(self):
        with pytest.raises(ValueError):
            parse_class("sep:A|BC", 2)
        with pytest.raises(ValueError):
            parse_class("qsep")
        with pytest.raises(ValueError):
            SeparabilityClass("SEP")


def test_block_partition():
    assert _fsep_blocks((2, 2, 2)) == [(0,), (1, 2)]
    assert _fsep_blocks((2, 2, 2, 2)) == [(0, 1), (2, 3)]
    assert _fsep_blocks((2, 2, 2, 2, 2)) == [(0,), (1, 2), (3, 4)]
    assert _fsep_blocks((3, 3, 3)) == [(0,), (1,), (2,)]
    assert _fsep_blocks((2, 2, 3)) == [(0,), (1, 2)]


class TestFixedPrograms:
    def test_fsep_product_state_reaches_one(self):
        rho = random_product_three(0)
        rep = adaptive_multiparty(rho, "fsep", n_vertices=120, seed=0)
        assert rep.chi >= 1.0

    def test_fsep_fixed_requires_mergeable_pair(self):
        rho = PartitionedState(random_density(27, 0).mat, (3, 3, 3))
        p = random_inner_polytope(3, 12, 0)
        with pytest.raises(ValueError):
            fsep_visibility_fixed(rho, p, party=0)

    def test_fsep_fixed_partner_count(self):
        rho = ghz_state(3, 2)
        p = random_inner_polytope(2, 40, 1)
        t, partners = fsep_visibility_fixed(rho, p, party=0)
        assert len(partners) == 40
        assert 0 <= t <= 0.2 + 1e-6  # min-cut PPT bound for GHZ3

    def test_fbsep_product_state(self):
        rho = random_product_three(1)
        pa = random_inner_polytope(2, 60, 2)
        pb = random_inner_polytope(2, 60, 3)
        pc = random_inner_polytope(2, 60, 4)
        t, partners = fbsep_visibility_fixed(rho, pa, pb, pc)
        assert set(partners) == {0, 1, 2}

    def test_bsep_superset_of_cut(self):
        # any A|BC-separable state has BSEP visibility at least its SEP(A|BC) one
        rho = random_three_qubit(5)
        rep_cut = adaptive_multiparty(rho, "sep:A|BC", n_vertices=100, seed=0)
        rep_bsep = adaptive_multiparty(rho, "bsep", n_vertices=100, seed=0)
        assert rep_bsep.chi >= rep_cut.chi - 1e-4


class TestThreeQubitThresholds:
    def test_ghz_fsep(self):
        rep = adaptive_multiparty(ghz_state(3, 2), "fsep", n_vertices=300, seed=0)
        assert rep.chi == pytest.approx(0.199, abs=0.002)

    def test_w_fsep(self):
        rep = adaptive_multiparty(w_state(3, 2), "fsep", n_vertices=300, seed=0)
        assert rep.chi == pytest.approx(0.178, abs=0.002)

    def test_ghz_bsep(self):
        rep = adaptive_multiparty(ghz_state(3, 2), "bsep", n_vertices=300, seed=0)
        assert rep.chi == pytest.approx(0.42857, abs=0.001)

    def test_w_bsep(self):
        rep = adaptive_multiparty(w_state(3, 2), "bsep", n_vertices=300, seed=0)
        assert rep.chi == pytest.approx(0.479, abs=0.002)


class TestGammaFamilyClasses:
    def test_fbsep_visibility_near_one(self):
        theta = math.acos(math.sqrt(0.5 + 1 / math.sqrt(12)))
        rho = gamma_family(theta)
        rep = adaptive_multiparty(rho, "fbsep", n_vertices=300, seed=0,
                                  conv_tol=1e-5, max_rounds=40)
        assert rep.chi >= 1 - 1e-3

    def test_fsep_visibility_near_057(self):
        theta = math.acos(math.sqrt(0.5 + 1 / math.sqrt(12)))
        rep = adaptive_multiparty(gamma_family(theta), "fsep", n_vertices=300, seed=0)
        assert rep.chi == pytest.approx(0.577, abs=0.01)


class TestHierarchy:
    @pytest.mark.parametrize("seed", [2, 9])
    def test_class_chain(self, seed):
        rho = random_three_qubit(seed)
        kw = dict(n_vertices=120, seed=0)
        chi_fsep = adaptive_multiparty(rho, "fsep", **kw).chi
        chi_fbsep = adaptive_multiparty(rho, "fbsep", **kw).chi
        chi_bsep = adaptive_multiparty(rho, "bsep", **kw).chi
        cuts = [adaptive_multiparty(rho, c, **kw).chi
                for c in ("sep:A|BC", "sep:B|AC", "sep:C|AB")]
        assert chi_fsep <= chi_fbsep + 1e-4
        for chi_cut in cuts:
            assert chi_fbsep <= chi_cut + 1e-4
            assert chi_cut <= chi_bsep + 1e-4

    def test_fsep_below_min_cut_ppt(self):
        rho = random_three_qubit(4)
        rep = adaptive_multiparty(rho, "fsep", n_vertices=120, seed=0)
        bound = min(ppt_visibility(rho, cut=(p,)) for p in range(3))
        assert rep.chi <= bound + 1e-6


class TestDualWitness:
    def test_ghz_duality_gap(self):
        ghz = ghz_state(3, 2)
        rep = adaptive_multiparty(ghz, "fsep", n_vertices=300, seed=0)
        from sepcert.seesaw import _fsep_polytope_on_party
        poly = _fsep_polytope_on_party(rep)
        value, witness = fsep_dual_witness(ghz, poly, party=0)
        assert abs(value - rep.chi) <= 1e-5 + 1e-4
        assert witness.vertex_constraints_ok

    def test_mixed_state_value_at_least_one(self):
        mm = PartitionedState(np.eye(8) / 8, (2, 2, 2))
        p = random_inner_polytope(2, 60, 0)
        value, _ = fsep_dual_witness(mm, p, party=0)
        assert value >= 1 - 1e-6

    def test_dual_pt_feasibility_flag(self):
        rho = random_three_qubit(6)
        p = random_inner_polytope(2, 60, 1)
        _, witness = fsep_dual_witness(rho, p, party=0)
        assert witness.min_vertex_eigenvalue >= -1e-7


class TestReports:
    def test_decomposition_residual(self):
        rep = adaptive_multiparty(ghz_state(3, 2), "fsep", n_vertices=200, seed=0)
        assert rep.residual_norm <= 1e-6
        rep.validate()

    def test_bsep_residual_and_trace(self):
        rep = adaptive_multiparty(random_three_qubit(7), "bsep", n_vertices=100, seed=0)
        assert rep.residual_norm <= 1e-6
        for a, b in zip(rep.chi_trace, rep.chi_trace[1:]):
            assert b >= a - 1e-6

    def test_sep_cut_grouping(self):
        rho = random_three_qubit(8)
        rep = adaptive_multiparty(rho, "sep:B|AC", n_vertices=100, seed=0)
        assert rep.sep_class.cut == (1,)
        assert rep.chi <= ppt_visibility(rho, cut=(1,)) + 1e-6

    def test_classes_restricted_to_three_parties(self):
        rho = PartitionedState(np.eye(16) / 16, (2, 2, 2, 2))
        with pytest.raises(ValueError):
            adaptive_multiparty(rho, "bsep")
