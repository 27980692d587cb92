import json

import numpy as np
import pytest

from sepcert.hermitian import (
    HermitianOp,
    PartitionedState,
    kron,
    load_matrix,
    matrix_from_doc,
    matrix_to_doc,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    save_matrix,
    swap_subsystems,
)
from sepcert.states import bell_state, random_density


def rand_herm(d, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return HermitianOp((m + m.conj().T) / 2, (d,))


def test_construction_rejects_non_hermitian():
    with pytest.raises(ValueError):
        HermitianOp(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_construction_symmetrises_solver_noise():
    m = np.eye(2) + np.array([[0, 1e-12], [-1e-12, 0]])
    op = HermitianOp(m)
    assert np.allclose(op.mat, op.mat.conj().T)


def test_dims_must_match_order():
    with pytest.raises(ValueError):
        HermitianOp(np.eye(4), (2, 3))


def test_partitioned_state_gates():
    with pytest.raises(ValueError):
        PartitionedState(np.diag([1.5, -0.5]), (2,))
    with pytest.raises(ValueError):
        PartitionedState(np.diag([0.7, 0.7]), (2,))
    st = PartitionedState(np.diag([0.5, 0.5]), (2,))
    assert st.psd and st.unit_trace


def test_kron_identity_and_projectors():
    one2 = HermitianOp(np.eye(2))
    assert np.allclose(kron(one2, one2).mat, np.eye(4))
    a = HermitianOp(np.diag([1.0, 0.0]))
    b = HermitianOp(np.diag([0.0, 1.0]))
    assert np.allclose(kron(a, b).mat, np.diag([0.0, 1.0, 0.0, 0.0]))
    assert kron(a, b).dims == (2, 2)


def test_kron_trace_multiplicative():
    for seed in range(5):
        a, b = rand_herm(2, seed), rand_herm(2, seed + 100)
        assert abs(kron(a, b).trace() - a.trace() * b.trace()) < 1e-12


def test_partial_trace_product_factorisation():
    rho = random_density(2, 1)
    tau = rand_herm(3, 2)
    prod = kron(HermitianOp(rho.mat), tau)
    out = partial_trace(prod, [0])
    assert np.allclose(out.mat, tau.trace() * rho.mat, atol=1e-12)


def test_partial_trace_bell_marginal():
    out = partial_trace(bell_state(), [0])
    assert np.allclose(out.mat, np.eye(2) / 2, atol=1e-12)


def test_partial_trace_preserves_trace():
    rng = np.random.default_rng(3)
    for _ in range(10):
        m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        op = HermitianOp((m + m.conj().T) / 2, (2, 3))
        assert abs(partial_trace(op, [1]).trace() - op.trace()) < 1e-12


def test_partial_trace_empty_keep_rejected():
    with pytest.raises(ValueError):
        partial_trace(bell_state(), [])


def test_partial_transpose_bell_eigenvalues():
    pt = partial_transpose(bell_state(), [1])
    assert np.allclose(np.linalg.eigvalsh(pt.mat), [-0.5, 0.5, 0.5, 0.5], atol=1e-12)


def test_partial_transpose_product_state_stays_psd():
    rho = kron(HermitianOp(random_density(2, 4).mat), HermitianOp(random_density(3, 5).mat))
    pt = partial_transpose(rho, [1])
    assert np.linalg.eigvalsh(pt.mat)[0] >= -1e-12


def test_partial_transpose_is_exact_involution():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    op = HermitianOp((m + m.conj().T) / 2, (2, 4))
    back = partial_transpose(partial_transpose(op, [0]), [0])
    assert np.array_equal(back.mat, op.mat)


def test_partial_transpose_preserves_trace_and_hermiticity():
    op = rand_herm(6, 11).with_dims((2, 3))
    pt = partial_transpose(op, [1])
    assert abs(pt.trace() - op.trace()) < 1e-12
    assert np.allclose(pt.mat, pt.mat.conj().T)


def test_partial_transpose_invalid_index():
    with pytest.raises(ValueError):
        partial_transpose(bell_state(), [2])


def test_swap_product_case():
    a, b = rand_herm(2, 20), rand_herm(3, 21)
    swapped = swap_subsystems(kron(a, b), (1, 0))
    assert swapped.dims == (3, 2)
    assert np.allclose(swapped.mat, kron(b, a).mat, atol=1e-13)


def test_swap_identity_and_involution():
    op = rand_herm(8, 22).with_dims((2, 4))
    assert np.array_equal(swap_subsystems(op, (0, 1)).mat, op.mat)
    assert np.allclose(swap_subsystems(swap_subsystems(op, (1, 0)), (1, 0)).mat, op.mat)


def test_swap_spectrum_invariant():
    for seed in range(10):
        op = rand_herm(8, 30 + seed).with_dims((2, 4))
        ev1 = np.linalg.eigvalsh(op.mat)
        ev2 = np.linalg.eigvalsh(swap_subsystems(op, (1, 0)).mat)
        assert np.allclose(ev1, ev2, atol=1e-10)


def test_swap_rejects_non_permutation():
    with pytest.raises(ValueError):
        swap_subsystems(bell_state(), (0, 0))


def test_min_eigenvalue_cases():
    assert abs(min_eigenvalue(HermitianOp(np.eye(5))) - 1.0) < 1e-12
    assert abs(min_eigenvalue(HermitianOp(np.diag([3.0, -2.0]))) + 2.0) < 1e-12
    assert abs(min_eigenvalue(partial_transpose(bell_state(), [1])) + 0.5) < 1e-12


def test_noise_mix_stays_psd():
    from sepcert.states import mix_with_white_noise
    rho = random_density(4, 8)
    for t in np.linspace(0, 1, 7):
        mixed = mix_with_white_noise(rho, float(t))
        assert mixed.min_eigenvalue() >= -1e-9


class TestMatrixFileFormat:
    def test_round_trip(self, tmp_path):
        op = rand_herm(6, 40).with_dims((2, 3))
        path = tmp_path / "m.json"
        save_matrix(path, op)
        back = load_matrix(path)
        assert back.dims == (2, 3)
        assert np.allclose(back.mat, op.mat, atol=1e-15)

    def test_rejects_shape_mismatch(self):
        doc = {"dims": [2], "re": [[1, 0], [0, 1]], "im": [[0, 0]]}
        with pytest.raises(ValueError):
            matrix_from_doc(doc)

    def test_rejects_missing_fields(self):
        with pytest.raises(ValueError):
            matrix_from_doc({"dims": [2], "re": [[1, 0], [0, 1]]})

    def test_rejects_non_square(self):
        doc = {"dims": [2], "re": [[1, 0, 0], [0, 1, 0]], "im": [[0, 0, 0], [0, 0, 0]]}
        with pytest.raises(ValueError):
            matrix_from_doc(doc)

    def test_field_names_fixed(self, tmp_path):
        path = tmp_path / "m.json"
        save_matrix(path, rand_herm(2, 41))
        doc = json.loads(path.read_text())
        assert set(doc) == {"dims", "re", "im"}
