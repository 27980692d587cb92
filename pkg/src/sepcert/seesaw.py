"""See-saw searches for extremal states and the gamma-family analysis.

Two alternating searches: witness/state iteration over PPT states to find
robust bound entanglement, and witness/state iteration over fully
biseparable three-qubit states to find states that are biseparable for
every cut yet far from fully separable.  Both alternate an adaptive
visibility run (primal), a dual witness extraction, and a witness-overlap
minimisation over the target state set.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .conic import SdpProblem, SolverError, joint_embed_map, pt_signs, solve, trace_vec, vech
from .hermitian import HermitianOp, PartitionedState, partial_trace_mat
from .polytopes import Polytope, polytope_from_operators, random_inner_polytope
from .bipartite import T_CAP, Witness, adaptive_visibility, dual_witness_fixed
from .multiparty import adaptive_multiparty, fsep_dual_witness, _multi_cut_solve
from .states import gamma_bloch_vectors, gamma_family, random_density

__all__ = [
    "SeesawTrace",
    "minimize_witness_over_ppt",
    "seesaw_robust_ppt",
    "minimize_witness_over_fbsep",
    "seesaw_robust_fbsep",
    "gamma_scan",
    "GammaScanResult",
    "x_shape_residual",
    "minimize_offpattern_by_local_unitaries",
]


@dataclass
class SeesawTrace:
    """Iteration log of one see-saw search.

    ``steps`` holds (chi, witness_value) per outer iteration; the chi values
    of accepted steps never increase beyond 1e-6.  ``final_state`` is the
    last accepted iterate.
    """

    steps: list = field(default_factory=list)
    states: list = field(default_factory=list)
    final_state: PartitionedState | None = None
    final_chi: float = math.nan
    converged: bool = False
    converged_reason: str = ""
    restarts: int = 0
    notes: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# witness-overlap minimisations
# ---------------------------------------------------------------------------

def minimize_witness_over_ppt(w: Witness | HermitianOp, dims) -> tuple[PartitionedState, float]:
    """min Tr(W rho) over states with positive partial transpose.

    Returns (optimal state, optimal value).  A negative value exhibits PPT
    (bound) entanglement detected by the witness.
    """
    w_op = w.op if isinstance(w, Witness) else w
    dims = tuple(int(d) for d in dims)
    dim = math.prod(dims)
    if w_op.mat.shape[0] != dim:
        raise ValueError(f"witness order {w_op.mat.shape[0]} does not match dims {dims}")
    prob = SdpProblem()
    prob.add_psd_block("rho", dims)
    signs = pt_signs(dims, (0,))
    prob.add_psd_constraint(dims, terms={"rho": np.diag(signs)})
    prob.add_equality((), 1.0, terms={"rho": trace_vec(dims).reshape(1, -1)})
    prob.set_objective(terms={"rho": -vech(w_op.mat, dims)})
    sol = solve(prob)
    if sol.status not in ("optimal", "inaccurate"):
        raise SolverError(f"PPT overlap solve {sol.status}: {sol.diagnostics}")
    rho = PartitionedState(_to_state(sol.block("rho")), dims)
    return rho, -sol.objective


def _to_state(mat):
    lam, u = np.linalg.eigh((mat + mat.conj().T) / 2)
    lam = np.clip(lam, 0.0, None)
    out = (u * lam) @ u.conj().T
    return out / np.trace(out).real


def seesaw_robust_ppt(initial: PartitionedState, n_vertices: int = 500, seed: int = 0,
                      conv_tol: float = 1e-4, max_iters: int = 30) -> SeesawTrace:
    """Search for PPT states of low separability visibility.

    Alternates: adaptive visibility of the current state, dual witness from
    the final polytope, witness-overlap minimisation over PPT states.  Stops
    when chi stops decreasing (a witness that is nonnegative over PPT also
    ends the search: no PPT state can violate it).
    """
    trace = SeesawTrace()
    rho = initial
    chi_cur = None
    stall = 0
    for it in range(max_iters):
        rep = adaptive_visibility(rho, n_vertices=n_vertices, seed=seed + it,
                                  conv_tol=conv_tol, use_ppt_ceiling=False)
        chi = rep.chi
        poly = _polytope_on_side(rep, 0)
        r, witness = dual_witness_fixed(rho, poly, side=0)
        rho_next, value = minimize_witness_over_ppt(witness, rho.dims)
        trace.steps.append((chi, value))
        trace.states.append(rho)
        if chi_cur is None or chi < chi_cur - 1e-5:
            chi_cur = chi
            trace.final_state = rho
            trace.final_chi = chi
            stall = 0
        elif chi > chi_cur + 1e-6:
            trace.converged = True
            trace.converged_reason = "chi stopped decreasing"
            break
        else:
            stall += 1
            if stall >= 3:
                trace.converged = True
                trace.converged_reason = "stalled three times"
                break
        if value >= -1e-9:
            trace.converged = True
            trace.converged_reason = "witness nonnegative over PPT states"
            break
        rho = rho_next
    else:
        trace.converged_reason = "max iterations"
    if trace.final_state is None and trace.states:
        trace.final_state = trace.states[-1]
        trace.final_chi = trace.steps[-1][0]
    return trace


def _polytope_on_side(report, side: int) -> Polytope:
    """Final polytope of an adaptive run, on the requested side.

    The best round's decomposition holds vertices on one side and partner
    operators on the other; ``final_polytope`` is the normalised-partner
    polytope, so one of the two sits on the requested side without another
    solve.
    """
    sigmas, _ = report.decomposition
    if report.decomposition_side == side:
        d = sigmas[0].shape[0]
        return Polytope((d,), sigmas)
    return report.final_polytope


# ---------------------------------------------------------------------------
# FBSEP overlap minimisation and the three-qubit see-saw
# ---------------------------------------------------------------------------

def minimize_witness_over_fbsep(y: Witness | HermitianOp, n_vertices: int = 150,
                                seed: int = 0, adaption_rounds: int = 6,
                                conv_tol: float = 1e-5) -> tuple[PartitionedState, float]:
    """min Tr(Y X) over the inner polytope approximation of fully
    biseparable three-qubit states, with a short polytope adaption on the
    objective.  Returns (optimiser state, optimal value)."""
    y_op = y.op if isinstance(y, Witness) else y
    dims = (2, 2, 2)
    if y_op.mat.shape[0] != 8:
        raise ValueError("minimize_witness_over_fbsep expects a three-qubit witness")
    rng = np.random.default_rng(seed)
    cuts = {party: {"side": "single",
                    "vertices": list(random_inner_polytope(2, n_vertices, rng).vertices)}
            for party in range(3)}
    best_val, best_state = np.inf, None
    prev = None
    for _ in range(adaption_rounds):
        sol, partners, xmat = _fbsep_objective_solve(y_op.mat, dims, cuts)
        if sol.status == "infeasible":
            cuts = {party: {"side": "single",
                            "vertices": list(random_inner_polytope(2, n_vertices, rng).vertices)}
                    for party in range(3)}
            continue
        if sol.status == "failed":
            raise SolverError(f"fbsep overlap solve failed: {sol.diagnostics}")
        val = -sol.objective
        if val < best_val:
            best_val, best_state = val, xmat
        if prev is not None and abs(val - prev) < conv_tol:
            break
        prev = val
        for party in range(3):
            rest = [q for q in range(3) if q != party]
            pair_dims = tuple(dims[q] for q in rest)
            if cuts[party]["side"] == "single":
                poly = polytope_from_operators(partners[party], dims=pair_dims, rng=rng)
                cuts[party] = {"side": "pair", "vertices": list(poly.vertices)}
            else:
                poly = polytope_from_operators(partners[party], dims=(2,), rng=rng)
                cuts[party] = {"side": "single", "vertices": list(poly.vertices)}
    if best_state is None:
        raise SolverError("fbsep overlap minimisation found no feasible polytope")
    return PartitionedState(_to_state(best_state), dims), float(best_val)


def _fbsep_objective_solve(y_mat, dims, cuts):
    """FBSEP membership with the mixing objective replaced by min Tr(Y X)."""
    prob = SdpProblem()
    prob.add_psd_block("X", dims)
    nbig = 64
    prob.add_equality((), 1.0, terms={"X": trace_vec(dims).reshape(1, -1)})
    for party in range(3):
        rest = [q for q in range(3) if q != party]
        pair_dims = tuple(dims[q] for q in rest)
        info = cuts[party]
        terms = {"X": -np.eye(nbig)}
        for lam, v in enumerate(info["vertices"]):
            label = f"tau{party}_{lam}"
            if info["side"] == "single":
                prob.add_psd_block(label, pair_dims)
                terms[label] = joint_embed_map(dims, rest, vech(v, (2,)))
            else:
                prob.add_psd_block(label, (2,))
                terms[label] = joint_embed_map(dims, [party], vech(v, pair_dims))
        prob.add_equality(dims, np.zeros(nbig), terms=terms)
    prob.set_objective(terms={"X": -vech(y_mat, dims)})
    sol = solve(prob)
    partners, xmat = {}, None
    if sol.status in ("optimal", "inaccurate"):
        xmat = sol.block("X")
        partners = {party: [sol.block(f"tau{party}_{lam}")
                            for lam in range(len(cuts[party]["vertices"]))]
                    for party in range(3)}
    return sol, partners, xmat


def seesaw_robust_fbsep(seed: int = 0, n_vertices: int = 300, overlap_vertices: int = 150,
                        conv_tol: float = 1e-4, max_iters: int = 25,
                        max_restarts: int = 10) -> SeesawTrace:
    """Search for fully biseparable three-qubit states far from full
    separability.

    From a random three-qubit state: adapt the full-separability visibility,
    extract the dual witness (with the polytope on party A), minimise its
    overlap over fully biseparable states, iterate.  A nonnegative overlap
    means full-separability and full-biseparability thresholds coincide for
    this iterate, so the search restarts from a fresh random state.
    """
    best = SeesawTrace()
    rng = np.random.default_rng(seed)
    restarts = 0
    for restart in range(max_restarts):
        rho = PartitionedState(random_density(8, rng).mat, (2, 2, 2))
        trace = SeesawTrace(restarts=restarts)
        chi_cur = None
        stall = 0
        for it in range(max_iters):
            rep = adaptive_multiparty(rho, "fsep", n_vertices=n_vertices,
                                      seed=seed + 101 * it, conv_tol=conv_tol)
            chi = rep.chi
            poly = _fsep_polytope_on_party(rep)
            value, witness = fsep_dual_witness(rho, poly, party=0)
            rho_next, overlap = minimize_witness_over_fbsep(
                witness, n_vertices=overlap_vertices, seed=seed + it)
            trace.steps.append((chi, overlap))
            trace.states.append(rho)
            if chi_cur is None or chi < chi_cur - 1e-5:
                chi_cur = chi
                trace.final_state = rho
                trace.final_chi = chi
                stall = 0
            elif chi > chi_cur + 1e-6:
                trace.converged = True
                trace.converged_reason = "chi stopped decreasing"
                break
            else:
                stall += 1
                if stall >= 3:
                    trace.converged = True
                    trace.converged_reason = "stalled three times"
                    break
            if overlap >= -1e-9:
                trace.converged_reason = "witness nonnegative over FBSEP (restart)"
                break
            rho = rho_next
        else:
            trace.converged_reason = "max iterations"
        if trace.final_state is not None and (
                best.final_state is None or trace.final_chi < best.final_chi):
            best = trace
        if trace.converged:
            break
        restarts += 1
    best.restarts = restarts
    if best.final_state is None:
        best.converged_reason = best.converged_reason or "no accepted step"
    return best


def _fsep_polytope_on_party(report, party: int = 0) -> Polytope:
    """Single-party polytope of an FSEP block run: the party's block
    vertices, or its normalised partner operators when it was free."""
    dec = report.decompositions
    if dec["free_block"] == (party,):
        return polytope_from_operators(dec["partners"], dims=(2,),
                                       rng=np.random.default_rng(0))
    return Polytope((2,), dec["block_vertices"][(party,)])


# ---------------------------------------------------------------------------
# gamma-family scan
# ---------------------------------------------------------------------------

@dataclass
class GammaScanResult:
    thetas: np.ndarray
    chi: np.ndarray
    bloch_spread: np.ndarray
    han_residual: np.ndarray
    tetra_volume: np.ndarray
    minima: list  # refined minima dicts


def _pairwise_spread(r: np.ndarray) -> float:
    dists = [np.linalg.norm(r[i] - r[j]) for i in range(4) for j in range(i + 1, 4)]
    return float(max(dists) - min(dists))


def _tetra_volume(r: np.ndarray) -> float:
    return float(abs(np.linalg.det(np.array([r[1] - r[0], r[2] - r[0], r[3] - r[0]]))) / 6)


def gamma_scan(theta_grid, n_vertices: int = 300, seed: int = 0,
               conv_tol: float = 1e-4) -> GammaScanResult:
    """Full-separability visibility and Bloch geometry over a theta grid.

    Per grid point: adaptive FSEP visibility of rho(theta), the pairwise
    Bloch-distance spread of the four reduced states, the X-shape criterion
    residual ||c| - sqrt(ab)| and the tetrahedron volume.  Local chi minima
    are refined by a three-point parabola, then pinned to the adjacent root
    of the equal-distance condition (cos^2 sin^2 = 1/6), which the chi data
    alone cannot localise beyond grid scale.
    """
    thetas = np.asarray(list(theta_grid), dtype=float)
    if np.any((thetas < 0) | (thetas >= 2 * math.pi)):
        raise ValueError("theta grid must lie in [0, 2pi)")
    chi = np.empty(len(thetas))
    spread = np.empty(len(thetas))
    han = np.empty(len(thetas))
    vol = np.empty(len(thetas))
    for i, th in enumerate(thetas):
        rho = gamma_family(th)
        rep = adaptive_multiparty(rho, "fsep", n_vertices=n_vertices,
                                  seed=seed + i, conv_tol=conv_tol)
        chi[i] = rep.chi
        r = gamma_bloch_vectors(th)
        spread[i] = _pairwise_spread(r)
        a, b = math.cos(th) ** 2, math.sin(th) ** 2
        c = math.sin(th) * math.cos(th)
        han[i] = abs(abs(c) - math.sqrt(a * b))
        vol[i] = _tetra_volume(r)
    minima = _locate_minima(thetas, chi)
    return GammaScanResult(thetas, chi, spread, han, vol, minima)


def _locate_minima(thetas, chi):
    """Grid argmin -> parabolic refinement -> nearest equal-distance root."""
    out = []
    n = len(thetas)
    if n < 3:
        return out
    for i in range(n):
        lo, hi = (i - 1) % n, (i + 1) % n
        if not (chi[i] < chi[lo] and chi[i] <= chi[hi]):
            continue
        h1 = thetas[i] - thetas[lo] if i > 0 else thetas[1] - thetas[0]
        h2 = thetas[hi] - thetas[i] if i < n - 1 else thetas[1] - thetas[0]
        denom = chi[lo] - 2 * chi[i] + chi[hi]
        if abs(denom) < 1e-12 or abs(h1 - h2) > 1e-9:
            refined = thetas[i]
        else:
            refined = thetas[i] + 0.5 * h1 * (chi[lo] - chi[hi]) / denom
        out.append({
            "theta_grid": float(thetas[i]),
            "theta_parabolic": float(refined),
            "theta_equal_distance": float(_nearest_tetra_root(refined)),
            "chi": float(chi[i]),
        })
    return out


def _nearest_tetra_root(theta: float) -> float:
    """Nearest solution of cos^2(t) sin^2(t) = 1/6 to the given angle."""
    base = math.acos(math.sqrt(0.5 + 1 / math.sqrt(12)))  # smallest positive root
    roots = []
    for k in range(0, 5):
        roots.extend([base + k * math.pi / 2, (math.pi / 2 - base) + k * math.pi / 2])
    return min(roots, key=lambda r: abs(r - theta))


# ---------------------------------------------------------------------------
# X-shape analysis helpers
# ---------------------------------------------------------------------------

def x_shape_residual(mat: np.ndarray) -> float:
    """Largest off-pattern modulus (entries off the diagonal and
    antidiagonal)."""
    d = mat.shape[0]
    worst = 0.0
    for i in range(d):
        for j in range(d):
            if i != j and i + j != d - 1:
                worst = max(worst, abs(mat[i, j]))
    return worst


def _su2(params) -> np.ndarray:
    a, b, c = params
    h = a * np.array([[0, 1], [1, 0]]) + b * np.array([[0, -1j], [1j, 0]]) \
        + c * np.array([[1, 0], [0, -1]])
    lam, u = np.linalg.eigh(h)
    return (u * np.exp(1j * lam)) @ u.conj().T


def minimize_offpattern_by_local_unitaries(rho: PartitionedState, n_starts: int = 8,
                                           seed: int = 0):
    """Minimise the summed modulus of off-X-pattern entries over per-party
    2x2 unitaries (3 parameters each, derivative-free polish per start).

    Returns (transformed state, off-pattern l1 norm)."""
    dims = rho.dims
    if any(d != 2 for d in dims):
        raise ValueError("local-unitary X-shape minimisation expects qubits")
    n = len(dims)
    d = 2 ** n
    mask = np.ones((d, d), dtype=bool)
    for i in range(d):
        mask[i, i] = False
        mask[i, d - 1 - i] = False

    def objective(params):
        u = np.ones((1, 1), dtype=complex)
        for p in range(n):
            u = np.kron(u, _su2(params[3 * p:3 * p + 3]))
        m = u @ rho.mat @ u.conj().T
        return np.abs(m[mask]).sum()

    rng = np.random.default_rng(seed)
    best_val, best_params = np.inf, None
    starts = [np.zeros(3 * n)] + [rng.uniform(-math.pi, math.pi, 3 * n)
                                  for _ in range(n_starts - 1)]
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxiter": 4000, "xatol": 1e-8, "fatol": 1e-10})
        if res.fun < best_val:
            best_val, best_params = res.fun, res.x
    u = np.ones((1, 1), dtype=complex)
    for p in range(n):
        u = np.kron(u, _su2(best_params[3 * p:3 * p + 3]))
    out = PartitionedState(u @ rho.mat @ u.conj().T, dims)
    return out, float(best_val)
