"""Inner and outer polytope approximations of generalised Bloch spheres.

Inner polytopes hold density-matrix vertices (their hull sits inside the true
state set); outer polytopes, available for qubit subsystems only, hold
unit-trace but possibly non-PSD vertices whose hull contains the state set.
Polytopes are immutable after construction.
"""

import json
import math
import warnings

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .hermitian import HermitianOp, matrix_from_doc, matrix_to_doc

__all__ = [
    "Polytope",
    "ProductPolytope",
    "DegenerateInputError",
    "random_inner_polytope",
    "random_product_polytope",
    "polytope_from_operators",
    "outer_qubit_polytope",
    "icosphere_directions",
    "save_polytope",
    "load_polytope",
    "contains_in_hull",
]

VERTEX_TRACE_ATOL = 1e-9
VERTEX_PSD_ATOL = 1e-9
DEFAULT_DROP_TOL = 1e-7

PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class DegenerateInputError(ValueError):
    """All candidate vertices were numerically zero."""


def _haar_pure(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def _clip_to_state(mat: np.ndarray) -> np.ndarray:
    """Project a near-state onto the PSD unit-trace set (eigenvalue clamp)."""
    lam, u = np.linalg.eigh((mat + mat.conj().T) / 2)
    if lam[0] >= 0:
        out = mat
    else:
        lam = np.clip(lam, 0.0, None)
        out = (u * lam) @ u.conj().T
    tr = np.trace(out).real
    return out / tr


class Polytope:
    """An ordered list of unit-trace Hermitian vertices on one subsystem.

    ``kind`` is ``"inner"`` (vertices are density matrices) or ``"outer"``
    (vertices may have negative eigenvalues).  Vertices are stored as raw
    complex arrays for speed; :meth:`as_ops` wraps them.
    """

    __slots__ = ("dims", "vertices", "kind")

    def __init__(self, dims, vertices, kind: str = "inner"):
        if kind not in ("inner", "outer"):
            raise ValueError(f"kind must be 'inner' or 'outer', got {kind!r}")
        dims = tuple(int(d) for d in dims)
        dim = math.prod(dims)
        verts = []
        for v in vertices:
            m = v.mat if isinstance(v, HermitianOp) else np.asarray(v, dtype=complex)
            if m.shape != (dim, dim):
                raise ValueError(f"vertex shape {m.shape} does not match dims {dims}")
            tr = np.trace(m).real
            if abs(tr - 1.0) > VERTEX_TRACE_ATOL:
                raise ValueError(f"vertex trace {tr} is not 1 within {VERTEX_TRACE_ATOL:.0e}")
            if kind == "inner" and np.linalg.eigvalsh(m)[0] < -VERTEX_PSD_ATOL:
                raise ValueError("inner polytope vertex is not positive semidefinite")
            m = m.copy()
            m.setflags(write=False)
            verts.append(m)
        if not verts:
            raise ValueError("a polytope needs at least one vertex")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "vertices", tuple(verts))
        object.__setattr__(self, "kind", kind)

    def __setattr__(self, name, value):
        raise AttributeError("Polytope is immutable")

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def as_ops(self) -> list[HermitianOp]:
        return [HermitianOp(v, self.dims) for v in self.vertices]

    def __repr__(self):
        return f"Polytope(dims={self.dims}, n={len(self)}, kind={self.kind!r})"


class ProductPolytope:
    """Per-party vertex lists of equal length; vertex l is the product
    of the l-th factors.  Used for n-party full-separability runs."""

    __slots__ = ("dims", "factors")

    def __init__(self, dims, factors):
        dims = tuple(int(d) for d in dims)
        if len(factors) != len(dims):
            raise ValueError("one factor list per party is required")
        n = len(factors[0])
        mats = []
        for p, (d, facs) in enumerate(zip(dims, factors)):
            if len(facs) != n:
                raise ValueError("factor lists must share the same length")
            col = []
            for f in facs:
                m = f.mat if isinstance(f, HermitianOp) else np.asarray(f, dtype=complex)
                if m.shape != (d, d):
                    raise ValueError(f"party {p} factor has shape {m.shape}, expected ({d},{d})")
                if abs(np.trace(m).real - 1.0) > VERTEX_TRACE_ATOL:
                    raise ValueError("product polytope factors must have unit trace")
                if np.linalg.eigvalsh(m)[0] < -VERTEX_PSD_ATOL:
                    raise ValueError("product polytope factors must be positive semidefinite")
                col.append(m)
            mats.append(tuple(col))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "factors", tuple(mats))

    def __setattr__(self, name, value):
        raise AttributeError("ProductPolytope is immutable")

    def __len__(self) -> int:
        return len(self.factors[0])

    def vertex(self, idx: int) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for facs in self.factors:
            out = np.kron(out, facs[idx])
        return out

    def replace_party(self, party: int, new_factors) -> "ProductPolytope":
        facs = list(self.factors)
        facs[party] = tuple(new_factors)
        return ProductPolytope(self.dims, facs)


def random_inner_polytope(d: int, n_vertices: int, seed) -> Polytope:
    """Inner polytope of Haar-random pure-state projectors; deterministic per seed."""
    if n_vertices < 1:
        raise ValueError("n_vertices must be at least 1")
    if n_vertices < d * d:
        warnings.warn(
            f"n_vertices={n_vertices} below d^2={d * d}; the hull cannot have "
            "full dimension and membership SDPs may be infeasible",
            stacklevel=2,
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Polytope((d,), [_haar_pure(d, rng) for _ in range(n_vertices)], kind="inner")


def random_product_polytope(dims, n_vertices: int, seed, include_basis_orbit: bool = True) -> ProductPolytope:
    """Random pure product vertices, one factor list per party.

    With ``include_basis_orbit`` the full computational-basis product grid is
    appended (all pure products), which makes the maximally mixed state an
    exact vertex average; without it the empirical hull of random products
    over several parties typically misses 1/d and membership SDPs start
    infeasible.
    """
    if n_vertices < 1:
        raise ValueError("n_vertices must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dims = tuple(int(d) for d in dims)
    orbit = []
    if include_basis_orbit:
        grid = np.indices(dims).reshape(len(dims), -1).T
        orbit = [tuple(row) for row in grid]
    n_random = max(n_vertices - len(orbit), 1)
    factors = []
    for p, d in enumerate(dims):
        col = [_haar_pure(d, rng) for _ in range(n_random)]
        for combo in orbit:
            m = np.zeros((d, d), dtype=complex)
            m[combo[p], combo[p]] = 1.0
            col.append(m)
        factors.append(col)
    return ProductPolytope(dims, factors)


def polytope_from_operators(ops, drop_tol: float = DEFAULT_DROP_TOL, *, dims=None,
                            kind: str = "inner", rng=None, replacement=None) -> Polytope:
    """Normalise PSD operators into polytope vertices, preserving the count.

    Operators whose trace falls at or below ``drop_tol`` times the largest
    trace are replaced by fresh random vertices instead of dropped, so the
    SDP shape stays constant across adaption rounds.  ``replacement`` may be
    a callable ``rng -> matrix`` to control what replaces a dropped vertex
    (e.g. pure products for separable-vertex polytopes).
    """
    mats = [op.mat if isinstance(op, HermitianOp) else np.asarray(op, dtype=complex) for op in ops]
    if not mats:
        raise ValueError("ops must be nonempty")
    if dims is None:
        if isinstance(ops[0], HermitianOp):
            dims = ops[0].dims
        else:
            dims = (mats[0].shape[0],)
    dims = tuple(int(d) for d in dims)
    traces = [np.trace(m).real for m in mats]
    max_tr = max(traces)
    if max_tr < 1e-12:
        raise DegenerateInputError("all operator traces are below 1e-12")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if replacement is None:
        replacement = lambda r: _haar_pure(math.prod(dims), r)
    verts = []
    for m, tr in zip(mats, traces):
        if tr > drop_tol * max_tr:
            # gross-negativity gate; eigenvalue clipping repairs solver noise
            # (reduced-tolerance solves can dip a few 1e-6 below zero)
            if kind == "inner" and np.linalg.eigvalsh(m)[0] < -1e-4 * max(1.0, tr):
                raise ValueError("operator is not positive semidefinite within tolerance")
            v = m / tr
            if kind == "inner":
                v = _clip_to_state(v)
            verts.append(v)
        else:
            verts.append(replacement(rng))
    return Polytope(dims, verts, kind=kind)


# ---------------------------------------------------------------------------
# outer qubit polytopes from geodesic icospheres
# ---------------------------------------------------------------------------

_ICO_FREQUENCY = {12: 1, 42: 2, 162: 4, 642: 8, 1002: 10, 2562: 16}


def icosphere_directions(n_vertices: int) -> np.ndarray:
    """Unit vectors of a frequency-f geodesic icosahedron (10 f^2 + 2 points)."""
    if n_vertices not in _ICO_FREQUENCY:
        raise ValueError(
            f"unsupported vertex count {n_vertices}; choose one of {sorted(_ICO_FREQUENCY)}")
    f = _ICO_FREQUENCY[n_vertices]
    phi = (1 + math.sqrt(5)) / 2
    base = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    base /= np.linalg.norm(base[0])
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    seen = {}
    pts = []
    for ia, ib, ic in faces:
        a, b, c = base[ia], base[ib], base[ic]
        for i in range(f + 1):
            for j in range(f + 1 - i):
                p = (a * (f - i - j) + b * i + c * j) / f
                p = p / np.linalg.norm(p)
                key = tuple(np.round(p, 9))
                if key not in seen:
                    seen[key] = True
                    pts.append(p)
    pts = np.array(pts)
    if len(pts) != n_vertices:
        raise RuntimeError(f"icosphere construction produced {len(pts)} points, expected {n_vertices}")
    return pts


def outer_qubit_polytope(n_vertices: int = 1002) -> Polytope:
    """Outer polytope for a qubit: icosphere directions scaled by the inverse
    hull inradius, so the Bloch ball is contained in the vertex hull."""
    dirs = icosphere_directions(n_vertices)
    hull = ConvexHull(dirs)
    r_in = np.abs(hull.equations[:, 3]).min()
    scaled = dirs / r_in
    eye = np.eye(2, dtype=complex)
    verts = [(eye + v[0] * PAULIS[0] + v[1] * PAULIS[1] + v[2] * PAULIS[2]) / 2 for v in scaled]
    return Polytope((2,), verts, kind="outer")


# ---------------------------------------------------------------------------
# hull membership (LP feasibility; independent of the SDP machinery)
# ---------------------------------------------------------------------------

def contains_in_hull(polytope: Polytope, target, tol: float = 1e-9) -> bool:
    """Is ``target`` a convex combination of the polytope vertices?

    Solved as a small linear feasibility program over real/imaginary parts.
    """
    t = target.mat if isinstance(target, HermitianOp) else np.asarray(target, dtype=complex)
    cols = []
    for v in polytope.vertices:
        cols.append(np.concatenate([v.real.reshape(-1), v.imag.reshape(-1)]))
    a_eq = np.array(cols).T
    b_eq = np.concatenate([t.real.reshape(-1), t.imag.reshape(-1)])
    n = len(polytope)
    res = linprog(
        c=np.zeros(n),
        A_eq=np.vstack([a_eq, np.ones((1, n))]),
        b_eq=np.concatenate([b_eq, [1.0]]),
        bounds=[(0, None)] * n,
        method="highs",
    )
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    # fall back to a least-squares residual check when HiGHS is undecided
    w, *_ = np.linalg.lstsq(np.vstack([a_eq, np.ones((1, n))]),
                            np.concatenate([b_eq, [1.0]]), rcond=None)
    ok = w.min() >= -tol
    resid = np.linalg.norm(a_eq @ w - b_eq)
    return bool(ok and resid <= tol)


# ---------------------------------------------------------------------------
# save / load
# ---------------------------------------------------------------------------

def save_polytope(path, p: Polytope) -> None:
    doc = {
        "kind": p.kind,
        "dims": list(p.dims),
        "vertices": [matrix_to_doc(op) for op in p.as_ops()],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_polytope(path) -> Polytope:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("kind", "dims", "vertices"):
        if key not in doc:
            raise ValueError(f"polytope document is missing field {key!r}")
    verts = [matrix_from_doc(d) for d in doc["vertices"]]
    return Polytope(tuple(doc["dims"]), verts, kind=doc["kind"])
