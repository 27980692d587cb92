import json
import math

import numpy as np
import pytest

from sepcert.conic import (
    SdpProblem,
    dump_problem,
    embed_complex,
    embed_hermitian,
    herm_basis,
    joint_embed_map,
    product_map,
    pt_signs,
    solve,
    trace_vec,
    unembed_hermitian,
    unvech,
    vech,
)
from sepcert.states import bell_state
from sepcert.polytopes import random_inner_polytope


def rand_herm(dims, seed):
    d = math.prod(dims)
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (m + m.conj().T) / 2


class TestVectorisation:
    @pytest.mark.parametrize("dims", [(2,), (3,), (4,), (2, 3), (2, 2, 2)])
    def test_round_trip(self, dims):
        m = rand_herm(dims, 0)
        assert np.allclose(unvech(vech(m, dims), dims), m, atol=1e-13)

    def test_orthonormal(self):
        for dims in [(2,), (2, 2)]:
            a, b = rand_herm(dims, 1), rand_herm(dims, 2)
            inner = np.dot(vech(a, dims), vech(b, dims))
            assert inner == pytest.approx(np.trace(a @ b).real, abs=1e-10)

    def test_basis_convention_order(self):
        b = herm_basis(2)
        assert np.allclose(b[0], np.diag([1, 0]))       # diagonal units first
        assert np.allclose(b[1], np.diag([0, 1]))
        assert np.allclose(b[2], np.array([[0, 1], [1, 0]]) / np.sqrt(2))
        assert np.allclose(b[3], np.array([[0, -1j], [1j, 0]]) / np.sqrt(2))

    def test_trace_vec(self):
        m = rand_herm((2, 3), 3)
        assert np.dot(trace_vec((2, 3)), vech(m, (2, 3))) == pytest.approx(
            np.trace(m).real, abs=1e-10)

    def test_pt_signs_match_partial_transpose(self):
        from sepcert.hermitian import partial_transpose_mat
        m = rand_herm((2, 3), 4)
        v = vech(m, (2, 3))
        pt = unvech(pt_signs((2, 3), (0,)) * v, (2, 3))
        assert np.allclose(pt, partial_transpose_mat(m, (2, 3), (0,)), atol=1e-12)

    def test_joint_embed_map_realises_kron(self):
        sigma = rand_herm((2,), 5)
        tau = rand_herm((3,), 6)
        k = joint_embed_map((2, 3), [1], vech(sigma, (2,)))
        out = unvech(k @ vech(tau, (3,)), (2, 3))
        assert np.allclose(out, np.kron(sigma, tau), atol=1e-12)

    def test_joint_embed_map_non_contiguous(self):
        sigma = rand_herm((2,), 7)   # middle party fixed
        pair = rand_herm((2, 2), 8)  # operator on parties 0 and 2
        k = joint_embed_map((2, 2, 2), [0, 2], vech(sigma, (2,)))
        out = unvech(k @ vech(pair, (2, 2)), (2, 2, 2))
        expect = np.einsum("ab,ikjl->iakjbl", sigma,
                           pair.reshape(2, 2, 2, 2)).reshape(8, 8)
        assert np.allclose(out, expect, atol=1e-12)


class TestEmbedding:
    def test_spectrum_doubles(self):
        h = np.array([[1, 1j], [-1j, 1]])
        e = embed_hermitian(h)
        assert np.allclose(np.linalg.eigvalsh(e), [0, 0, 2, 2], atol=1e-12)
        assert np.allclose(np.linalg.eigvalsh(h), [0, 2], atol=1e-12)

    def test_real_input_block_diagonal(self):
        r = np.array([[2.0, 1.0], [1.0, 3.0]])
        e = embed_hermitian(r)
        assert np.allclose(e[:2, 2:], 0) and np.allclose(e[:2, :2], r)

    def test_unembed_round_trip(self):
        h = rand_herm((3,), 9)
        assert np.allclose(unembed_hermitian(embed_hermitian(h)), h, atol=1e-14)


def _bell_visibility_problem(n_vertices=60, seed=3):
    bell = bell_state()
    poly = random_inner_polytope(2, n_vertices, seed)
    p = SdpProblem()
    p.add_scalar("t", lo=0.0, hi=1.5)
    rv = vech(bell.mat, (2, 2))
    iv = vech(np.eye(4) / 4, (2, 2))
    terms = {}
    for lam, s in enumerate(poly.vertices):
        p.add_psd_block(f"tau{lam}", (2,))
        terms[f"tau{lam}"] = joint_embed_map((2, 2), [1], vech(s, (2,)))
    p.add_equality((2, 2), iv, terms=terms, scalar_terms={"t": -(rv - iv)})
    p.set_objective(scalar_terms={"t": 1.0})
    return p


class TestSolve:
    def test_smallest_diagonal_entry(self):
        p = SdpProblem()
        p.add_scalar("t")
        p.add_psd_constraint((2,), scalar_terms={"t": -vech(np.eye(2), (2,))},
                             offset=np.diag([1.0, 2.0]))
        p.set_objective(scalar_terms={"t": 1.0})
        sol = solve(p)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(1.0, abs=1e-6)

    def test_product_identity_feasibility(self):
        p = SdpProblem()
        p.add_psd_block("tau0", (2,))
        k = joint_embed_map((2, 2), [1], vech(np.eye(2) / 2, (2,)))
        p.add_equality((2, 2), np.eye(4) / 4, terms={"tau0": k})
        p.set_objective()
        sol = solve(p)
        assert sol.status == "optimal"
        assert np.allclose(sol.block("tau0"), np.eye(2) / 2, atol=1e-6)

    def test_bell_capped_by_ppt(self):
        sol = solve(_bell_visibility_problem())
        assert sol.status == "optimal"
        assert 0.0 < sol.objective <= 1 / 3 + 1e-6

    def test_embedded_objective_matches(self):
        p = _bell_visibility_problem()
        s1 = solve(p)
        s2 = solve(embed_complex(p))
        assert abs(s1.objective - s2.objective) < 1e-7

    def test_embedded_blocks_map_back_hermitian(self):
        p = _bell_visibility_problem(n_vertices=20)
        s2 = solve(embed_complex(p))
        m = s2.block("tau0")
        h = unembed_hermitian(m)
        assert np.abs(h - h.conj().T).max() <= 1e-9

    def test_weak_duality(self):
        for prob in (_bell_visibility_problem(20, 1), _bell_visibility_problem(35, 2)):
            sol = solve(prob)
            assert sol.dual_objective >= sol.objective - 1e-6

    def test_equality_residuals_certified(self):
        sol = solve(_bell_visibility_problem(25, 4))
        assert sol.status == "optimal"
        assert all(r <= 1e-7 * 2 for r in sol.eq_residuals)

    def test_primal_blocks_psd(self):
        sol = solve(_bell_visibility_problem(25, 5))
        for lam in range(25):
            assert np.linalg.eigvalsh(sol.block(f"tau{lam}"))[0] >= -1e-8

    def test_eq_duals_shapes(self):
        sol = solve(_bell_visibility_problem(20, 6))
        assert sol.eq_duals[0].shape == (4, 4)

    def test_infeasible_status(self):
        p = SdpProblem()
        p.add_psd_block("x", (2,))
        p.add_equality((), -1.0, terms={"x": trace_vec((2,)).reshape(1, -1)})
        p.set_objective()
        sol = solve(p)
        assert sol.status == "infeasible"

    def test_unbounded_reports_failed_not_crash(self):
        p = SdpProblem()
        p.add_scalar("t")  # unconstrained scalar, maximise it
        p.set_objective(scalar_terms={"t": 1.0})
        sol = solve(p)
        assert sol.status == "failed"

    def test_duplicate_labels_rejected(self):
        p = SdpProblem()
        p.add_psd_block("x", (2,))
        with pytest.raises(ValueError):
            p.add_free_block("x", (2,))

    def test_undeclared_reference_rejected(self):
        p = SdpProblem()
        with pytest.raises(ValueError):
            p.add_equality((), 1.0, terms={"nope": np.ones((1, 4))})


def test_problem_dump(tmp_path):
    p = _bell_visibility_problem(5, 8)
    path = tmp_path / "prob.json"
    dump_problem(p, path)
    doc = json.loads(path.read_text())
    assert {"blocks", "scalars", "equalities", "psd_constraints", "objective"} <= set(doc)
    assert doc["blocks"][0]["label"] == "tau0"
    # triplets are [row, coord, value]
    trip = doc["equalities"][0]["terms"]["tau0"][0]
    assert len(trip) == 3
