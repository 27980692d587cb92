"""Dense Hermitian operators on multipartite Hilbert spaces.

Subsystem indexing is row-major over the ``dims`` list: for ``dims = (2, 3)``
the composite basis index is ``i = 3*i0 + i1`` with ``i0`` labelling the first
(2-dimensional) party and ``i1`` the second (3-dimensional) one.  Worked
example: the entry ``M[4, 1]`` of a 2x3 operator connects ``|i0=1, i1=1>`` to
``|i0=0, i1=1>``.  All partial operations (trace, transpose, swaps) are defined
by index arithmetic on this convention.

Operators are stored dense; the target dimensions of this package (total
dimension <= 32) make sparse formats pointless.  Values are immutable after
construction and all operations are pure functions, so everything here is safe
to share across threads.
"""

import json
import math

import numpy as np

__all__ = [
    "HermitianOp",
    "PartitionedState",
    "kron",
    "partial_trace",
    "partial_transpose",
    "swap_subsystems",
    "min_eigenvalue",
    "save_matrix",
    "load_matrix",
    "matrix_to_doc",
    "matrix_from_doc",
]

# Construction gates.  Asymmetry below HERMITICITY_ATOL is repaired by
# symmetrisation (solver output noise); anything larger is rejected.
HERMITICITY_ATOL = 1e-10
PSD_ATOL = 1e-9
TRACE_ATOL = 1e-9


def _as_complex_matrix(mat) -> np.ndarray:
    m = np.asarray(mat, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def _check_dims(dims, order: int) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"dims must be positive integers, got {dims}")
    if math.prod(dims) != order:
        raise ValueError(f"prod(dims)={math.prod(dims)} does not match matrix order {order}")
    return dims


class HermitianOp:
    """A Hermitian matrix together with its subsystem dimensions.

    Parameters
    ----------
    mat : array_like
        Square complex matrix.  Asymmetry up to 1e-10 is symmetrised away;
        larger asymmetry raises ``ValueError``.
    dims : sequence of int, optional
        Local dimensions; their product must equal the matrix order.
        Defaults to a single subsystem of full dimension.
    """

    __slots__ = ("mat", "dims")

    def __init__(self, mat, dims=None):
        m = _as_complex_matrix(mat)
        asym = np.abs(m - m.conj().T).max() if m.size else 0.0
        if asym > HERMITICITY_ATOL:
            raise ValueError(f"matrix is not Hermitian (asymmetry {asym:.3e} > {HERMITICITY_ATOL:.0e})")
        if asym > 0:
            m = (m + m.conj().T) / 2
        if dims is None:
            dims = (m.shape[0],)
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "dims", _check_dims(dims, m.shape[0]))
        self.mat.setflags(write=False)

    def __setattr__(self, name, value):
        raise AttributeError("HermitianOp is immutable")

    @property
    def dim(self) -> int:
        """Total (composite) dimension."""
        return self.mat.shape[0]

    @property
    def n_parties(self) -> int:
        return len(self.dims)

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])

    def is_psd(self, atol: float = PSD_ATOL) -> bool:
        return self.min_eigenvalue() >= -atol

    def with_dims(self, dims) -> "HermitianOp":
        """Same matrix, reinterpreted with a different subsystem split."""
        return HermitianOp(self.mat, dims)

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.dims})"


class PartitionedState(HermitianOp):
    """A HermitianOp certified at construction to be a density matrix.

    Positivity (min eigenvalue >= -1e-9) and unit trace (|Tr - 1| <= 1e-9)
    are both checked; the flags ``psd`` and ``unit_trace`` record that the
    checks passed.
    """

    __slots__ = ()

    def __init__(self, mat, dims=None):
        super().__init__(mat, dims)
        lam = self.min_eigenvalue()
        if lam < -PSD_ATOL:
            raise ValueError(f"not positive semidefinite (min eigenvalue {lam:.3e})")
        tr = self.trace()
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"trace {tr!r} is not 1 within {TRACE_ATOL:.0e}")

    @property
    def psd(self) -> bool:
        return True

    @property
    def unit_trace(self) -> bool:
        return True


# ---------------------------------------------------------------------------
# raw-matrix kernels; the public API wraps these in HermitianOp
# ---------------------------------------------------------------------------

def kron_mats(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def partial_trace_mat(mat: np.ndarray, dims, keep) -> np.ndarray:
    dims = tuple(dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep indices {keep} out of range for {n} subsystems")
    t = mat.reshape(dims + dims)
    traced = [p for p in range(n) if p not in keep]
    # contract row/col axis pairs of traced parties, highest first so the
    # remaining axis numbers stay valid
    for p in sorted(traced, reverse=True):
        t = np.trace(t, axis1=p, axis2=p + (t.ndim // 2))
    d_out = math.prod(dims[p] for p in keep)
    return t.reshape(d_out, d_out)


def partial_transpose_mat(mat: np.ndarray, dims, flip) -> np.ndarray:
    dims = tuple(dims)
    n = len(dims)
    flip = sorted(set(int(f) for f in flip))
    if not flip:
        raise ValueError("flip set must be nonempty")
    if flip[0] < 0 or flip[-1] >= n:
        raise ValueError(f"flip indices {flip} out of range for {n} subsystems")
    t = mat.reshape(dims + dims)
    axes = list(range(2 * n))
    for p in flip:
        axes[p], axes[p + n] = axes[p + n], axes[p]
    return t.transpose(axes).reshape(mat.shape)


def swap_subsystems_mat(mat: np.ndarray, dims, perm) -> tuple[np.ndarray, tuple[int, ...]]:
    dims = tuple(dims)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of 0..{n - 1}")
    t = mat.reshape(dims + dims)
    axes = perm + [p + n for p in perm]
    new_dims = tuple(dims[p] for p in perm)
    d = mat.shape[0]
    return t.transpose(axes).reshape(d, d), new_dims


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def kron(a: HermitianOp, b: HermitianOp) -> HermitianOp:
    """Tensor product; dims concatenate, Tr(a (x) b) = Tr(a) Tr(b)."""
    return HermitianOp(np.kron(a.mat, b.mat), a.dims + b.dims)


def partial_trace(m: HermitianOp, keep) -> HermitianOp:
    """Trace out all subsystems not listed in ``keep``.

    The kept dims stay in their original order; the total trace and
    Hermiticity are preserved.
    """
    keep = sorted(set(int(k) for k in keep))
    out = partial_trace_mat(m.mat, m.dims, keep)
    return HermitianOp(out, tuple(m.dims[p] for p in keep))


def partial_transpose(m: HermitianOp, flip) -> HermitianOp:
    """Transpose the listed subsystems.  An exact involution."""
    return HermitianOp(partial_transpose_mat(m.mat, m.dims, flip), m.dims)


def swap_subsystems(m: HermitianOp, perm) -> HermitianOp:
    """Reorder subsystems so that output party j is input party perm[j]."""
    out, new_dims = swap_subsystems_mat(m.mat, m.dims, perm)
    return HermitianOp(out, new_dims)


def min_eigenvalue(m: HermitianOp) -> float:
    """Smallest eigenvalue (LAPACK, accurate to ~1e-10 of the spectral norm)."""
    return m.min_eigenvalue()


# ---------------------------------------------------------------------------
# matrix file format, used repo-wide: JSON with fields dims / re / im
# ---------------------------------------------------------------------------

def matrix_to_doc(m: HermitianOp) -> dict:
    return {
        "dims": list(m.dims),
        "re": m.mat.real.tolist(),
        "im": m.mat.imag.tolist(),
    }


def matrix_from_doc(doc: dict) -> HermitianOp:
    if not isinstance(doc, dict):
        raise ValueError("matrix document must be a mapping")
    missing = {"dims", "re", "im"} - set(doc)
    if missing:
        raise ValueError(f"matrix document is missing fields: {sorted(missing)}")
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc["im"], dtype=float)
    if re.shape != im.shape:
        raise ValueError(f"re shape {re.shape} and im shape {im.shape} differ")
    if re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise ValueError(f"matrix entries are not square: shape {re.shape}")
    return HermitianOp(re + 1j * im, doc["dims"])


def save_matrix(path, m: HermitianOp) -> None:
    with open(path, "w") as fh:
        json.dump(matrix_to_doc(m), fh)


def load_matrix(path) -> HermitianOp:
    with open(path) as fh:
        doc = json.load(fh)
    return matrix_from_doc(doc)
