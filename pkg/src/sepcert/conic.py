"""Solver-agnostic linear-semidefinite problems and the conic backend.

Problems are stored as affine maps on vectorised Hermitian matrices.  The
vectorisation convention, fixed for reproducibility:

* single space of dimension d: the orthonormal Hermitian basis ordered as
  diagonal units E_ii (i = 0..d-1), then symmetric pairs (E_ij + E_ji)/sqrt2
  for i < j in lexicographic order, then antisymmetric pairs
  i(E_ij - E_ji)/sqrt2 in the same order;
* composite spaces: Kronecker products of the per-party bases, multi-index
  flattened row-major over the dims list.

With this choice every coefficient matrix generated in this repo is a sparse
Kronecker chain.  Complex Hermitian cones are handled through the standard
real-symmetric embedding H = X + iY -> [[X, -Y], [Y, X]]; real blocks use
scaled upper-triangle (svec) coordinates directly.

The backing solver is Clarabel (interior point, native conic interface);
failures are reported through ``SdpSolution.status``, never raised.
"""

import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import clarabel
import numpy as np
from scipy import sparse

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "SolverError",
    "solve",
    "embed_complex",
    "embed_hermitian",
    "unembed_hermitian",
    "herm_basis",
    "vech",
    "unvech",
    "trace_vec",
    "pt_signs",
    "product_map",
    "joint_embed_map",
    "dump_problem",
]

DEFAULT_TOL = 1e-8
_SQRT2 = math.sqrt(2.0)


class SolverError(RuntimeError):
    """Raised by callers when a solve that must succeed did not."""


# ---------------------------------------------------------------------------
# Hermitian vectorisation
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def herm_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian basis of C^{dxd}, stacked (d^2, d, d)."""
    out = np.zeros((d * d, d, d), dtype=complex)
    k = 0
    for i in range(d):
        out[k, i, i] = 1.0
        k += 1
    for i in range(d):
        for j in range(i + 1, d):
            out[k, i, j] = out[k, j, i] = 1 / _SQRT2
            k += 1
    for i in range(d):
        for j in range(i + 1, d):
            out[k, i, j] = -1j / _SQRT2
            out[k, j, i] = 1j / _SQRT2
            k += 1
    out.setflags(write=False)
    return out


def vech(mat: np.ndarray, dims) -> np.ndarray:
    """Real coordinates of a Hermitian matrix over the kron-product basis."""
    dims = tuple(int(d) for d in dims)
    k = len(dims)
    t = np.asarray(mat, dtype=complex).reshape(dims + dims)
    for p, d in enumerate(dims):
        # row axis of the current party sits at p, its column axis at k
        t = np.tensordot(herm_basis(d), t, axes=([1, 2], [k, p]))
        t = np.moveaxis(t, 0, p)
    return np.ascontiguousarray(t.reshape(-1).real)


def unvech(vec: np.ndarray, dims) -> np.ndarray:
    """Inverse of :func:`vech`."""
    dims = tuple(int(d) for d in dims)
    k = len(dims)
    t = np.asarray(vec, dtype=complex).reshape([d * d for d in dims])
    for d in dims:
        t = np.tensordot(t, herm_basis(d), axes=([0], [0]))
    perm = [2 * i for i in range(k)] + [2 * i + 1 for i in range(k)]
    dim = math.prod(dims)
    return t.transpose(perm).reshape(dim, dim)


@lru_cache(maxsize=None)
def trace_vec(dims) -> np.ndarray:
    """Row vector v with <v, vech(X)> = Tr(X)."""
    out = np.ones(1)
    for d in dims:
        t = np.zeros(d * d)
        t[:d] = 1.0  # only diagonal units carry trace
        out = np.kron(out, t)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def pt_signs(dims, flip) -> np.ndarray:
    """Diagonal of the partial-transpose map in coordinate space (+-1)."""
    out = np.ones(1)
    for p, d in enumerate(dims):
        s = np.ones(d * d)
        if p in flip:
            n_off = d * (d - 1) // 2
            s[d + n_off:] = -1.0  # antisymmetric part flips under transpose
        out = np.kron(out, s)
    out.setflags(write=False)
    return out


def joint_embed_map(dims, free_parties, sigma_vec: np.ndarray) -> sparse.csr_matrix:
    """Coefficient matrix of x -> sigma (x) x with parties interleaved.

    ``sigma_vec`` holds the coordinates of the fixed vertex over the joint
    basis of the non-free parties (party order preserved); the returned map
    sends coordinates of an operator on the free parties to coordinates on
    the full space ``dims``.  Free-party sets need not be contiguous; the
    transpose realises the contraction X -> Tr_poly(X (sigma (x) 1)).
    """
    dims = tuple(int(d) for d in dims)
    nbs = [d * d for d in dims]
    free = sorted(int(p) for p in free_parties)
    poly = [p for p in range(len(dims)) if p not in free]
    grid = np.indices(nbs).reshape(len(dims), -1)
    rows = np.ravel_multi_index([grid[p] for p in range(len(dims))], nbs)
    cols = np.ravel_multi_index([grid[p] for p in free], [nbs[p] for p in free])
    sidx = np.ravel_multi_index([grid[p] for p in poly], [nbs[p] for p in poly])
    vals = np.asarray(sigma_vec, dtype=float).reshape(-1)[sidx]
    keep = np.abs(vals) > 0
    ncols = math.prod(nbs[p] for p in free)
    return sparse.csr_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(math.prod(nbs), ncols))


def product_map(*factors) -> sparse.csr_matrix:
    """Sparse Kronecker chain over coordinate spaces.

    Each factor is ``("eye", n)``, ``("col", vec)`` (adds target rows, no
    columns), ``("row", vec)`` (adds columns, no rows), ``("diag", vec)``
    or ``("mat", M)``.  Realises maps like tau -> sigma (x) tau as
    kron(col sigma_vec, eye).
    """
    out = sparse.csr_matrix(np.ones((1, 1)))
    for kind, arg in factors:
        if kind == "eye":
            piece = sparse.eye(arg, format="csr")
        elif kind == "col":
            piece = sparse.csr_matrix(np.asarray(arg, dtype=float).reshape(-1, 1))
        elif kind == "row":
            piece = sparse.csr_matrix(np.asarray(arg, dtype=float).reshape(1, -1))
        elif kind == "diag":
            piece = sparse.diags(np.asarray(arg, dtype=float), format="csr")
        elif kind == "mat":
            piece = sparse.csr_matrix(arg)
        else:
            raise ValueError(f"unknown factor kind {kind!r}")
        out = sparse.kron(out, piece, format="csr")
    return out


# ---------------------------------------------------------------------------
# complex <-> real-symmetric embedding
# ---------------------------------------------------------------------------

def embed_hermitian(mat: np.ndarray) -> np.ndarray:
    """H = X + iY -> [[X, -Y], [Y, X]]; PSD iff H is, spectrum doubled."""
    m = np.asarray(mat, dtype=complex)
    x, y = m.real, m.imag
    return np.block([[x, -y], [y, x]])


def unembed_hermitian(smat: np.ndarray) -> np.ndarray:
    """Average the structured blocks of a 2m x 2m real matrix back to m x m."""
    s = np.asarray(smat, dtype=float)
    m = s.shape[0] // 2
    x = (s[:m, :m] + s[m:, m:]) / 2
    y = (s[m:, :m] - s[:m, m:]) / 2
    h = x + 1j * y
    return (h + h.conj().T) / 2


def _svec(mat: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorisation (column-major, off-diag * sqrt2)."""
    d = mat.shape[0]
    out = np.empty(d * (d + 1) // 2)
    k = 0
    for j in range(d):
        for i in range(j + 1):
            out[k] = mat[i, j] * (1.0 if i == j else _SQRT2)
            k += 1
    return out


def _unsvec(vec: np.ndarray) -> np.ndarray:
    n = len(vec)
    d = int(round((math.sqrt(8 * n + 1) - 1) / 2))
    out = np.zeros((d, d))
    k = 0
    for j in range(d):
        for i in range(j + 1):
            v = vec[k]
            if i == j:
                out[i, j] = v
            else:
                out[i, j] = out[j, i] = v / _SQRT2
            k += 1
    return out


@lru_cache(maxsize=None)
def _embed_cone_map(dims) -> sparse.csr_matrix:
    """coords over herm basis -> svec of the real embedding (2m x 2m)."""
    m = math.prod(dims)
    basis = [unvech(e, dims) for e in np.eye(m * m)]
    cols = [_svec(embed_hermitian(b)) for b in basis]
    return sparse.csr_matrix(np.array(cols).T)


@lru_cache(maxsize=None)
def _unembed_coord_map(dims) -> np.ndarray:
    """svec coords of the 2m embedding -> herm coords of the m x m original."""
    m = math.prod(dims)
    tri = (2 * m) * (2 * m + 1) // 2
    cols = []
    for k in range(tri):
        e = np.zeros(tri)
        e[k] = 1.0
        cols.append(vech(unembed_hermitian(_unsvec(e)), dims))
    return np.array(cols).T


# ---------------------------------------------------------------------------
# problem container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Block:
    label: str
    dims: tuple[int, ...]
    psd: bool
    real: bool = False

    @property
    def order(self) -> int:
        return math.prod(self.dims)

    @property
    def ncoords(self) -> int:
        if self.real:
            return self.order * (self.order + 1) // 2
        return self.order ** 2


@dataclass(frozen=True)
class _Scalar:
    label: str
    lo: float | None
    hi: float | None


@dataclass
class _Affine:
    """sum_b K_b x_b + sum_s c_s t_s (+ offset), valued in a Hermitian space."""
    dims: tuple[int, ...]          # () for scalar-valued
    terms: dict
    scalar_terms: dict
    offset: np.ndarray


class SdpProblem:
    """A linear-semidefinite program: PSD/free Hermitian blocks, free scalars,
    linear equality constraints, affine PSD constraints, linear objective
    (always maximised)."""

    def __init__(self):
        self._blocks: dict[str, _Block] = {}
        self._scalars: dict[str, _Scalar] = {}
        self.equalities: list[_Affine] = []
        self.psd_constraints: list[_Affine] = []
        self._obj_terms: dict = {}
        self._obj_scalars: dict = {}
        self._obj_const: float = 0.0

    # -- declarations ------------------------------------------------------
    def add_psd_block(self, label: str, dims) -> None:
        self._add_block(label, dims, psd=True)

    def add_free_block(self, label: str, dims) -> None:
        self._add_block(label, dims, psd=False)

    def _add_block(self, label, dims, psd, real=False):
        if label in self._blocks or label in self._scalars:
            raise ValueError(f"duplicate variable label {label!r}")
        if isinstance(dims, int):
            dims = (dims,)
        self._blocks[label] = _Block(label, tuple(int(d) for d in dims), psd, real)

    def add_scalar(self, label: str, lo: float | None = None, hi: float | None = None) -> None:
        if label in self._blocks or label in self._scalars:
            raise ValueError(f"duplicate variable label {label!r}")
        self._scalars[label] = _Scalar(label, lo, hi)

    @property
    def psd_blocks(self) -> list[tuple[str, int]]:
        return [(b.label, b.order) for b in self._blocks.values() if b.psd]

    @property
    def free_blocks(self) -> list[tuple[str, int]]:
        return [(b.label, b.order) for b in self._blocks.values() if not b.psd]

    @property
    def free_scalars(self) -> list[str]:
        return list(self._scalars)

    def block_dims(self, label: str) -> tuple[int, ...]:
        return self._blocks[label].dims

    # -- constraints ---------------------------------------------------------
    def _affine(self, dims, terms, scalar_terms, offset):
        dims = tuple(int(d) for d in dims) if dims else ()
        nrows = math.prod(d * d for d in dims) if dims else 1
        tmap = {}
        for label, k in (terms or {}).items():
            if label not in self._blocks:
                raise ValueError(f"constraint references undeclared block {label!r}")
            k = sparse.csr_matrix(k)
            if k.shape != (nrows, self._blocks[label].ncoords):
                raise ValueError(
                    f"coefficient for {label!r} has shape {k.shape}, expected "
                    f"({nrows}, {self._blocks[label].ncoords})")
            tmap[label] = k
        smap = {}
        for label, c in (scalar_terms or {}).items():
            if label not in self._scalars:
                raise ValueError(f"constraint references undeclared scalar {label!r}")
            c = np.atleast_1d(np.asarray(c, dtype=float)).reshape(-1)
            if c.shape != (nrows,):
                raise ValueError(f"scalar coefficient for {label!r} has length {len(c)}, expected {nrows}")
            smap[label] = c
        if offset is None:
            off = np.zeros(nrows)
        elif np.isscalar(offset):
            off = np.full(1, float(offset)) if not dims else np.full(nrows, float(offset))
        else:
            off = np.asarray(offset, dtype=float).reshape(-1)
            if off.shape != (nrows,):
                raise ValueError(f"offset has length {len(off)}, expected {nrows}")
        return _Affine(dims, tmap, smap, off)

    def add_equality(self, dims, target, terms=None, scalar_terms=None) -> int:
        """Constrain sum(terms) + sum(scalar_terms) == target.

        ``dims`` is the Hermitian target space (or () for a scalar);
        ``target`` a matrix, vech vector or float.  Returns the constraint
        index, used to look up dual multipliers on the solution.
        """
        dims = tuple(int(d) for d in dims) if dims else ()
        if dims and isinstance(target, np.ndarray) and target.ndim == 2:
            target = vech(target, dims)
        aff = self._affine(dims, terms, scalar_terms, target)
        self.equalities.append(aff)
        return len(self.equalities) - 1

    def add_psd_constraint(self, dims, terms=None, scalar_terms=None, offset=None) -> None:
        """Constrain sum(terms) + sum(scalar_terms) + offset >= 0 (PSD)."""
        dims = tuple(int(d) for d in dims)
        if offset is not None and isinstance(offset, np.ndarray) and offset.ndim == 2:
            offset = vech(offset, dims)
        self.psd_constraints.append(self._affine(dims, terms, scalar_terms, offset))

    def set_objective(self, terms=None, scalar_terms=None, constant: float = 0.0) -> None:
        """Linear objective to MAXIMISE: sum <vec, x_b> + sum c_s t_s + constant."""
        self._obj_terms = {}
        for label, v in (terms or {}).items():
            if label not in self._blocks:
                raise ValueError(f"objective references undeclared block {label!r}")
            v = np.asarray(v, dtype=float).reshape(-1)
            if len(v) != self._blocks[label].ncoords:
                raise ValueError(f"objective vector for {label!r} has wrong length")
            self._obj_terms[label] = v
        self._obj_scalars = {}
        for label, c in (scalar_terms or {}).items():
            if label not in self._scalars:
                raise ValueError(f"objective references undeclared scalar {label!r}")
            self._obj_scalars[label] = float(c)
        self._obj_const = float(constant)


@dataclass
class SdpSolution:
    """Outcome of one conic solve.

    ``status`` is one of optimal | infeasible | inaccurate | failed.  When
    optimal, primal blocks are PSD within 1e-8 and every equality holds to
    1e-7 relative Frobenius residual (violations downgrade the status to
    inaccurate).  ``eq_duals`` holds one multiplier per equality constraint,
    as a matrix on the constraint's target space (or a float).
    """

    status: str
    objective: float = math.nan
    dual_objective: float = math.nan
    blocks: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    eq_duals: list = field(default_factory=list)
    eq_residuals: list = field(default_factory=list)
    iterations: int = 0
    solve_time: float = 0.0
    diagnostics: str = ""

    def block(self, label: str) -> np.ndarray:
        return self.blocks[label]

    def scalar(self, label: str) -> float:
        return self.scalars[label]


_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "inaccurate",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "failed",
    "AlmostDualInfeasible": "failed",
}


def _cone_map(block: _Block):
    """Rows mapping block coords into its PSD cone's svec space."""
    if block.real:
        return sparse.eye(block.ncoords, format="csr"), block.order
    cm = _embed_cone_map(block.dims)
    return cm, 2 * block.order


def solve(problem: SdpProblem, tol: float = DEFAULT_TOL, verbose: bool | None = None,
          max_iter: int = 200) -> SdpSolution:
    """Solve with Clarabel.  Never raises on solver trouble; inspect status."""
    if verbose is None:
        verbose = bool(os.environ.get("SEPCERT_SOLVER_VERBOSE"))
    blocks = list(problem._blocks.values())
    scalars = list(problem._scalars.values())
    offsets = {}
    ncols = 0
    for b in blocks:
        offsets[b.label] = ncols
        ncols += b.ncoords
    for s in scalars:
        offsets[s.label] = ncols
        ncols += 1

    rows = []
    rhs = []
    cones = []

    def affine_rows(aff: _Affine, premap=None):
        nrows = premap.shape[0] if premap is not None else len(aff.offset)
        out = sparse.csr_matrix((nrows, ncols))
        for label, k in aff.terms.items():
            kk = sparse.csr_matrix(premap @ k) if premap is not None else k
            out = out + sparse.csr_matrix(
                (kk.data, kk.indices + offsets[label], kk.indptr), shape=(nrows, ncols))
        for label, c in aff.scalar_terms.items():
            cc = np.asarray(premap @ c if premap is not None else c).reshape(-1)
            out = out + sparse.csr_matrix(
                (cc, np.full(nrows, offsets[label]), np.arange(nrows + 1)),
                shape=(nrows, ncols))
        return out

    # equality rows first (Zero cone); Clarabel convention is A x + s = b
    # with s in K, so "expr == target" becomes rows expr, rhs target.
    eq_slices = []
    cursor = 0
    eq_parts = []
    for aff in problem.equalities:
        a = affine_rows(aff)
        eq_parts.append(a)
        eq_slices.append((cursor, cursor + a.shape[0]))
        cursor += a.shape[0]
        rhs.append(aff.offset)
    if eq_parts:
        rows.append(sparse.vstack(eq_parts))
        cones.append(clarabel.ZeroConeT(cursor))

    # scalar bounds (Nonnegative cone)
    bound_rows = []
    bound_rhs = []
    for s in scalars:
        col = offsets[s.label]
        if s.lo is not None:
            bound_rows.append(sparse.csr_matrix(([-1.0], ([0], [col])), shape=(1, ncols)))
            bound_rhs.append(-s.lo)
        if s.hi is not None:
            bound_rows.append(sparse.csr_matrix(([1.0], ([0], [col])), shape=(1, ncols)))
            bound_rhs.append(s.hi)
    if bound_rows:
        rows.append(sparse.vstack(bound_rows))
        rhs.append(np.asarray(bound_rhs))
        cones.append(clarabel.NonnegativeConeT(len(bound_rhs)))

    # PSD cones: declared PSD blocks, then explicit affine PSD constraints
    for b in blocks:
        if not b.psd:
            continue
        cm, cone_order = _cone_map(b)
        pad = sparse.csr_matrix(
            (cm.data, cm.indices + offsets[b.label], cm.indptr), shape=(cm.shape[0], ncols))
        rows.append(-pad)
        rhs.append(np.zeros(cm.shape[0]))
        cones.append(clarabel.PSDTriangleConeT(cone_order))
    for aff in problem.psd_constraints:
        cm = _embed_cone_map(aff.dims)
        a = affine_rows(aff, premap=cm)
        rows.append(-a)
        rhs.append(cm @ aff.offset)
        cones.append(clarabel.PSDTriangleConeT(2 * math.prod(aff.dims)))

    amat = sparse.vstack(rows).tocsc() if rows else sparse.csc_matrix((0, ncols))
    bvec = np.concatenate([np.atleast_1d(r) for r in rhs]) if rhs else np.zeros(0)

    q = np.zeros(ncols)
    for label, v in problem._obj_terms.items():
        q[offsets[label]:offsets[label] + len(v)] = -v
    for label, c in problem._obj_scalars.items():
        q[offsets[label]] = -c

    raw = None
    status = "failed"
    requested_tol = tol
    # retry ladder: escalate KKT static regularization first (fixes
    # NumericalError on near-degenerate adapted polytopes), relax the
    # tolerance only as a last resort
    for attempt_tol, static_reg in ((tol, 1e-8), (tol, 1e-7),
                                    (max(100 * tol, 1e-6), 3e-7)):
        settings = clarabel.DefaultSettings()
        settings.verbose = verbose
        settings.max_iter = max_iter
        settings.tol_gap_abs = attempt_tol
        settings.tol_gap_rel = attempt_tol
        settings.tol_feas = attempt_tol
        settings.static_regularization_constant = static_reg
        # stalls near degenerate optima should surface as AlmostSolved
        # (mapped to "inaccurate"), not NumericalError
        settings.reduced_tol_gap_abs = max(5e-6, attempt_tol * 100)
        settings.reduced_tol_gap_rel = max(5e-6, attempt_tol * 100)
        settings.reduced_tol_feas = max(5e-6, attempt_tol * 100)
        try:
            raw = clarabel.DefaultSolver(
                sparse.csc_matrix((ncols, ncols)), q, amat, bvec, cones, settings).solve()
        except BaseException as exc:  # defensive: solver bindings must not crash callers
            return SdpSolution(status="failed", diagnostics=f"solver raised {exc!r}")
        status = _STATUS_MAP.get(str(raw.status), "failed")
        if status != "failed" or str(raw.status) in ("DualInfeasible", "AlmostDualInfeasible"):
            if attempt_tol > requested_tol and status == "optimal":
                status = "inaccurate"  # met only the relaxed tolerance
            break
    sol = SdpSolution(
        status=status,
        iterations=raw.iterations,
        solve_time=raw.solve_time,
        diagnostics=str(raw.status),
    )
    if status in ("optimal", "inaccurate"):
        x = np.asarray(raw.x)
        sol.objective = -raw.obj_val + problem._obj_const
        sol.dual_objective = -raw.obj_val_dual + problem._obj_const
        for b in blocks:
            seg = x[offsets[b.label]:offsets[b.label] + b.ncoords]
            sol.blocks[b.label] = _unsvec(seg) if b.real else unvech(seg, b.dims)
        for s in scalars:
            sol.scalars[s.label] = float(x[offsets[s.label]])
        z = np.asarray(raw.z)
        for aff, (lo, hi) in zip(problem.equalities, eq_slices):
            seg = z[lo:hi]
            sol.eq_duals.append(unvech(seg, aff.dims) if aff.dims else float(seg[0]))
        # certify the reported solution: equality residuals and block positivity
        for aff, (lo, hi) in zip(problem.equalities, eq_slices):
            resid = -aff.offset.copy()
            for label, k in aff.terms.items():
                seg = x[offsets[label]:offsets[label] + k.shape[1]]
                resid += k @ seg
            for label, c in aff.scalar_terms.items():
                resid += c * x[offsets[label]]
            sol.eq_residuals.append(float(np.linalg.norm(resid)))
        if status == "optimal":
            for aff, r in zip(problem.equalities, sol.eq_residuals):
                if r > 1e-7 * (np.linalg.norm(aff.offset) + 1):
                    sol.status = "inaccurate"
                    sol.diagnostics += f"; equality residual {r:.2e}"
                    break
        if sol.status == "optimal":
            for b in blocks:
                if b.psd:
                    lam = np.linalg.eigvalsh(sol.blocks[b.label])[0]
                    if lam < -1e-8 * (1 + abs(np.trace(sol.blocks[b.label]).real)):
                        sol.status = "inaccurate"
                        sol.diagnostics += f"; block {b.label} min eig {lam:.2e}"
                        break
    return sol


# ---------------------------------------------------------------------------
# complex -> real problem transformation
# ---------------------------------------------------------------------------

def embed_complex(problem: SdpProblem) -> SdpProblem:
    """Map every complex Hermitian block to a real symmetric block of doubled
    order; PSD status is equivalent in both directions, constraints and the
    objective are transported so optimal values coincide."""
    out = SdpProblem()
    transport = {}
    for b in problem._blocks.values():
        if b.real:
            out._add_block(b.label, b.dims, b.psd, real=True)
        else:
            out._add_block(b.label, (2 * b.order,), b.psd, real=True)
            transport[b.label] = _unembed_coord_map(b.dims)
    for s in problem._scalars.values():
        out.add_scalar(s.label, s.lo, s.hi)

    def move(aff: _Affine) -> _Affine:
        terms = {}
        for label, k in aff.terms.items():
            u = transport.get(label)
            terms[label] = sparse.csr_matrix(k @ u) if u is not None else k
        return _Affine(aff.dims, terms, dict(aff.scalar_terms), aff.offset.copy())

    out.equalities = [move(a) for a in problem.equalities]
    out.psd_constraints = [move(a) for a in problem.psd_constraints]
    out._obj_terms = {}
    for label, v in problem._obj_terms.items():
        u = transport.get(label)
        out._obj_terms[label] = (u.T @ v) if u is not None else v
    out._obj_scalars = dict(problem._obj_scalars)
    out._obj_const = problem._obj_const
    return out


# ---------------------------------------------------------------------------
# problem dump (sparse triplets per constraint)
# ---------------------------------------------------------------------------

def dump_problem(problem: SdpProblem, path) -> None:
    """Write the problem as a JSON document of sparse triplets.

    Layout: ``blocks``/``scalars`` declare variables; each constraint lists
    per-variable triplets ``[row, coord, value]`` against the vectorisation
    convention of this module, plus the vectorised target.
    """

    def trip(aff: _Affine) -> dict:
        entry = {"dims": list(aff.dims), "target": aff.offset.tolist(), "terms": {}}
        for label, k in aff.terms.items():
            coo = k.tocoo()
            entry["terms"][label] = [[int(r), int(c), float(v)]
                                     for r, c, v in zip(coo.row, coo.col, coo.data)]
        entry["scalar_terms"] = {lab: c.tolist() for lab, c in aff.scalar_terms.items()}
        return entry

    doc = {
        "blocks": [{"label": b.label, "dims": list(b.dims), "psd": b.psd, "real": b.real}
                   for b in problem._blocks.values()],
        "scalars": [{"label": s.label, "lo": s.lo, "hi": s.hi}
                    for s in problem._scalars.values()],
        "equalities": [trip(a) for a in problem.equalities],
        "psd_constraints": [trip(a) for a in problem.psd_constraints],
        "objective": {
            "terms": {lab: v.tolist() for lab, v in problem._obj_terms.items()},
            "scalars": problem._obj_scalars,
            "constant": problem._obj_const,
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
