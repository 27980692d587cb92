import math

import numpy as np
import pytest

from sepcert.hermitian import HermitianOp, PartitionedState
from sepcert.bipartite import (
    absolute_robustness_adaptive,
    adaptive_visibility,
    default_vertex_count,
    dual_witness_fixed,
    generalized_robustness,
    generalized_robustness_adaptive,
    outer_upper_bound,
    ppt_visibility,
    visibility_fixed,
)
from sepcert.polytopes import outer_qubit_polytope, random_inner_polytope
from sepcert.states import (
    bell_state,
    isotropic_state,
    make_state,
    random_density,
    random_pure,
    werner_state,
)


def random_two_qubit(seed):
    return PartitionedState(random_density(4, seed).mat, (2, 2))


def random_product_state(dims, seed):
    rng = np.random.default_rng(seed)
    mat = np.ones((1, 1), dtype=complex)
    for d in dims:
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        v /= np.linalg.norm(v)
        mat = np.kron(mat, np.outer(v, v.conj()))
    return PartitionedState(mat, dims)


class TestPptVisibility:
    def test_bell_is_one_third(self):
        assert ppt_visibility(bell_state()) == pytest.approx(1 / 3, abs=1e-7)

    def test_ppt_state_reaches_at_least_one(self):
        h = make_state("horodecki2x4:b=0.25")
        assert ppt_visibility(h) >= 1.0 - 1e-7

    def test_maximally_mixed_hits_cap(self):
        mm = make_state("maximally_mixed:2x2")
        assert ppt_visibility(mm) == pytest.approx(1.5, abs=1e-9)

    def test_ghz_cut_value_frozen(self):
        # frozen from the bisection oracle itself (5 qubit-cut of GHZ3 = 0.2)
        from sepcert.states import ghz_state
        val = ppt_visibility(ghz_state(3, 2), cut=(0,))
        assert val == pytest.approx(0.2, abs=1e-6)


class TestVisibilityFixed:
    def test_maximally_mixed_ray_is_constant(self):
        mm = make_state("maximally_mixed:2x2")
        p = random_inner_polytope(2, 30, 0)
        t, _ = visibility_fixed(mm, p)
        assert t >= 1.0

    def test_bell_capped_by_ppt_bound(self):
        p = random_inner_polytope(2, 100, 1)
        t, partners = visibility_fixed(bell_state(), p)
        assert 0 < t <= 1 / 3 + 1e-6
        assert len(partners) == 100

    def test_partners_reconstruct_ray_point(self):
        p = random_inner_polytope(2, 60, 2)
        bell = bell_state()
        t, partners = visibility_fixed(bell, p)
        recon = sum(np.kron(v, tau) for v, tau in zip(p.vertices, partners))
        target = t * bell.mat + (1 - t) * np.eye(4) / 4
        assert np.linalg.norm(recon - target) <= 1e-6 * (1 + np.linalg.norm(target))

    def test_dimension_mismatch_rejected(self):
        p = random_inner_polytope(3, 20, 3)
        with pytest.raises(ValueError):
            visibility_fixed(bell_state(), p)


class TestDualWitness:
    def test_duality_gap_on_bell(self):
        rep = adaptive_visibility(bell_state(), n_vertices=100, seed=0)
        r, w = dual_witness_fixed(bell_state(), rep.final_polytope)
        assert abs(rep.chi - 1 / (1 + r)) <= 1e-4
        assert w.vertex_constraints_ok
        assert w.min_vertex_eigenvalue >= -1e-7

    def test_interior_state_gives_nonpositive_r(self):
        mm = make_state("maximally_mixed:2x2")
        p = random_inner_polytope(2, 60, 4)
        r, _ = dual_witness_fixed(mm, p)
        assert r <= 1e-8

    def test_witness_normalisation(self):
        p = random_inner_polytope(2, 40, 5)
        _, w = dual_witness_fixed(bell_state(), p)
        assert np.trace(w.op.mat).real == pytest.approx(4.0, abs=1e-7)

    def test_witness_sound_on_random_products(self):
        rep = adaptive_visibility(bell_state(), n_vertices=100, seed=1)
        _, w = dual_witness_fixed(bell_state(), rep.final_polytope)
        worst = min(
            np.trace(w.op.mat @ random_product_state((2, 2), s).mat).real
            for s in range(100))
        assert worst >= -1e-6


class TestAdaptive:
    def test_isotropic_d2(self):
        rep = adaptive_visibility(isotropic_state(2), seed=0)
        assert rep.chi == pytest.approx(1 / 3, abs=1e-3)

    def test_isotropic_d3(self):
        rep = adaptive_visibility(isotropic_state(3), seed=0)
        assert rep.chi == pytest.approx(1 / 4, abs=1e-3)

    def test_werner_d3(self):
        rho = werner_state(3)
        rep = adaptive_visibility(rho, seed=0)
        assert rep.chi == pytest.approx(ppt_visibility(rho), abs=1e-3)

    def test_two_qubit_matches_ppt_oracle(self):
        for seed in range(5):
            rho = random_two_qubit(seed)
            rep = adaptive_visibility(rho, n_vertices=100, seed=seed)
            assert abs(rep.chi - ppt_visibility(rho)) <= 1e-3

    def test_monotone_trace_and_report_invariants(self):
        rho = random_two_qubit(11)
        rep = adaptive_visibility(rho, n_vertices=100, seed=0)
        rep.validate()
        for a, b in zip(rep.chi_trace, rep.chi_trace[1:]):
            assert b >= a - 1e-6
        assert rep.residual_norm <= 1e-6

    def test_pure_product_state_approaches_one(self):
        # boundary state: the certified bound approaches 1 from below
        rho = random_product_state((2, 2), 3)
        rep = adaptive_visibility(rho, n_vertices=100, seed=0)
        assert rep.chi >= 1.0 - 5e-3

    def test_interior_separable_state_hits_cap(self):
        prod = random_product_state((2, 2), 3)
        rho = PartitionedState(0.5 * prod.mat + 0.5 * np.eye(4) / 4, (2, 2))
        rep = adaptive_visibility(rho, n_vertices=100, seed=0)
        assert rep.chi >= 1.0
        assert rep.capped == (rep.chi >= 1.5 - 1e-6)

    def test_vertex_minimum(self):
        with pytest.raises(ValueError):
            adaptive_visibility(bell_state(), n_vertices=3, seed=0)

    def test_default_vertex_counts(self):
        assert default_vertex_count(8) == 100
        assert default_vertex_count(9) == 500


class TestSandwich:
    @pytest.mark.parametrize("seed", range(3))
    def test_inner_below_both_upper_bounds(self, seed):
        # PPT and the outer polytope are both valid upper bounds on the
        # separability visibility but are mutually incomparable (the outer
        # bound dips below PPT exactly on bound-entangled states)
        rho = random_two_qubit(seed + 50)
        rep = adaptive_visibility(rho, n_vertices=100, seed=seed)
        ppt = ppt_visibility(rho)
        outer = outer_upper_bound(rho, 162)
        assert rep.chi <= ppt + 1e-6
        assert rep.chi <= outer + 1e-6

    def test_outer_bell_brackets_exact(self):
        ub = outer_upper_bound(bell_state(), 1002)
        assert 1 / 3 - 1e-9 <= ub <= 1 / 3 + 0.01

    def test_outer_separable_state_above_one(self):
        rho = random_product_state((2, 3), 4)
        assert outer_upper_bound(rho, 162) >= 1.0

    def test_outer_needs_qubit_party_a(self):
        rho = PartitionedState(random_density(9, 0).mat, (3, 3))
        with pytest.raises(ValueError):
            outer_upper_bound(rho)


class TestRobustness:
    def test_product_state_absolute_near_zero(self):
        rho = random_product_state((2, 2), 9)
        rep = absolute_robustness_adaptive(rho, n_vertices=100, seed=0)
        assert rep.robustness <= 1e-4
        assert rep.chi_bar >= 1 - 1e-4

    def test_bell_absolute_is_one(self):
        rep = absolute_robustness_adaptive(bell_state(), n_vertices=100, seed=0)
        assert rep.robustness == pytest.approx(1.0, abs=0.01)

    def test_bell_generalized_is_one(self):
        rep = generalized_robustness_adaptive(bell_state(), n_vertices=100, seed=0)
        assert rep.robustness == pytest.approx(1.0, abs=0.01)

    def test_generalized_not_above_absolute(self):
        # more noise choices can only help
        for seed in (3, 7):
            rho = random_two_qubit(seed)
            if ppt_visibility(rho) >= 1:
                continue
            r_abs = absolute_robustness_adaptive(rho, n_vertices=100, seed=0).robustness
            r_gen = generalized_robustness_adaptive(rho, n_vertices=100, seed=0).robustness
            assert r_gen <= r_abs + 5e-3

    def test_generalized_fixed_polytope(self):
        rep = adaptive_visibility(bell_state(), n_vertices=100, seed=2)
        r = generalized_robustness(bell_state(), rep.final_polytope)
        assert r == pytest.approx(1.0, abs=0.02)

    def test_random_robustness_consistency(self):
        # (1 - chi)/chi from the visibility run never undercuts the
        # absolute-robustness bound (best separable noise can only help)
        for seed in (1, 5):
            rho = random_two_qubit(seed + 30)
            chi = min(adaptive_visibility(rho, n_vertices=100, seed=0).chi, 1.0)
            r_random = (1 - chi) / chi
            r_abs = absolute_robustness_adaptive(rho, n_vertices=100, seed=0).robustness
            assert r_abs <= r_random + 5e-3
