"""Multiparticle separability classes: FSEP, BSEP, FBSEP and per-cut SEP.

Three-party full separability exploits that a qubit-qubit or qubit-qutrit
pair is separable exactly when it is PPT, so the pair can stay exact (free
PSD+PPT operators) while a polytope approximates the remaining party; the
adaption then alternates the polytope between the singleton and the pair,
with pair vertices staying separable by construction.  For more parties (or
qutrit pairs) a product polytope covers all but one party and the free party
is cycled round-robin.  Biseparability and full biseparability use one
polytope per party with the pair sides free.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .conic import (
    SdpProblem,
    SolverError,
    joint_embed_map,
    pt_signs,
    solve,
    trace_vec,
    vech,
)
from .hermitian import PartitionedState, HermitianOp, swap_subsystems
from .polytopes import (
    Polytope,
    ProductPolytope,
    polytope_from_operators,
    random_inner_polytope,
    random_product_polytope,
)
from .bipartite import (
    CertificationReport,
    MONOTONE_SLACK,
    T_CAP,
    Witness,
    adaptive_visibility,
    ppt_visibility,
)
from .states import mix_with_white_noise_mat

__all__ = [
    "SeparabilityClass",
    "MultipartyReport",
    "parse_class",
    "fsep_visibility_fixed",
    "fsep_dual_witness",
    "bsep_visibility_fixed",
    "fbsep_visibility_fixed",
    "adaptive_multiparty",
]

_CUT_MERGEABLE = 6  # PPT equals separability up to this pair dimension


@dataclass(frozen=True)
class SeparabilityClass:
    """FSEP, BSEP, FBSEP, or SEP(cut) with an explicit bipartition."""

    tag: str
    cut: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.tag not in ("FSEP", "BSEP", "FBSEP", "SEP"):
            raise ValueError(f"unknown separability class {self.tag!r}")
        if self.tag == "SEP" and not self.cut:
            raise ValueError("SEP needs a cut, e.g. sep:A|BC")

    def label(self) -> str:
        if self.tag == "SEP":
            letters = "".join(chr(ord("A") + p) for p in self.cut)
            return f"SEP({letters}|rest)"
        return self.tag


def parse_class(text: str, n_parties: int | None = None) -> SeparabilityClass:
    """Parse CLI class names: fsep | bsep | fbsep | sep:A|BC | sep:0|12."""
    t = text.strip().lower()
    if t in ("fsep", "bsep", "fbsep"):
        return SeparabilityClass(t.upper())
    if t == "sep":
        return SeparabilityClass("SEP", cut=(0,))
    if t.startswith("sep:"):
        cut_text = text.strip()[4:]
        if "|" not in cut_text:
            raise ValueError(f"cut grammar is sep:<parties>|<parties>, got {text!r}")
        left = cut_text.split("|")[0].strip()
        parties = []
        for ch in left:
            if ch.isalpha():
                parties.append(ord(ch.upper()) - ord("A"))
            elif ch.isdigit():
                parties.append(int(ch))
            elif ch in ", ":
                continue
            else:
                raise ValueError(f"bad cut token {ch!r} in {text!r}")
        if n_parties is not None and any(p >= n_parties for p in parties):
            raise ValueError(f"cut {text!r} references parties beyond {n_parties}")
        return SeparabilityClass("SEP", cut=tuple(sorted(set(parties))))
    raise ValueError(f"unknown separability class {text!r}")


@dataclass
class MultipartyReport:
    """Adaptive multiparty certification result; decompositions reconstruct
    the certified mixed state to 1e-6 relative Frobenius."""

    chi: float
    sep_class: SeparabilityClass
    chi_trace: list[float]
    solver_statuses: list[str]
    polytopes: dict
    decompositions: dict
    residual_norm: float
    converged: bool
    capped: bool
    restarts: int
    seed: int
    n_vertices: int
    upper_bound_hint: float | None = None
    notes: list[str] = field(default_factory=list)

    def validate(self) -> None:
        for a, b in zip(self.chi_trace, self.chi_trace[1:]):
            if b < a - MONOTONE_SLACK:
                raise AssertionError(f"chi trace decreased: {a} -> {b}")


def _pair_dim(dims, free) -> int:
    return math.prod(dims[p] for p in free)


def _ray_equality(prob, dims, rho_mat, terms):
    dim = math.prod(dims)
    rho_v = vech(rho_mat, dims)
    id_v = vech(np.eye(dim) / dim, dims)
    prob.add_equality(dims, id_v, terms=terms, scalar_terms={"t": -(rho_v - id_v)})


# ---------------------------------------------------------------------------
# fixed-polytope programs
# ---------------------------------------------------------------------------

def fsep_visibility_fixed(rho: PartitionedState, p: Polytope, party: int = 0):
    """Full-separability program with a polytope on one party and the
    remaining pair exact through PSD + PPT partner operators.

    Requires the two non-polytope parties to form a 2x2 or 2x3 system;
    otherwise the n-party product-polytope mode applies.
    Returns (t, partners).
    """
    dims = rho.dims
    if len(dims) != 3:
        raise ValueError("fsep_visibility_fixed expects a three-party state")
    rest = [q for q in range(3) if q != party]
    pair = _pair_dim(dims, rest)
    if sorted(dims[q] for q in rest) not in ([2, 2], [2, 3]):
        raise ValueError(
            f"the non-polytope pair has dims {[dims[q] for q in rest]}, where PPT is "
            "not equivalent to separability; use adaptive_multiparty's n-party mode")
    if math.prod(p.dims) != dims[party]:
        raise ValueError("polytope dimension does not match the chosen party")
    prob = SdpProblem()
    prob.add_scalar("t", lo=0.0, hi=T_CAP)
    terms = {}
    pair_dims = tuple(dims[q] for q in rest)
    signs = pt_signs(pair_dims, (0,))
    for lam, v in enumerate(p.vertices):
        label = f"tau{lam}"
        prob.add_psd_block(label, pair_dims)
        terms[label] = joint_embed_map(dims, rest, vech(v, (dims[party],)))
        prob.add_psd_constraint(pair_dims, terms={label: np.diag(signs)})
    _ray_equality(prob, dims, rho.mat, terms)
    prob.set_objective(scalar_terms={"t": 1.0})
    sol = solve(prob)
    if sol.status not in ("optimal", "inaccurate"):
        raise SolverError(f"fsep solve {sol.status}: {sol.diagnostics}")
    partners = [sol.block(f"tau{lam}") for lam in range(len(p.vertices))]
    return sol.scalar("t"), partners


def fsep_dual_witness(rho: PartitionedState, p: Polytope, party: int = 0):
    """Dual of the merged full-separability program.

    min Tr(Y0 rho) + 1 subject to Tr[Y0 (1/d - rho)] = 1,
    Tr_party[(sigma (x) 1) Y0] + Y_lam >= 0 and -PT(Y_lam) >= 0 per vertex.
    Returns (value, Witness built from Y0).
    """
    dims = rho.dims
    if len(dims) != 3:
        raise ValueError("fsep_dual_witness expects a three-party state")
    rest = [q for q in range(3) if q != party]
    pair_dims = tuple(dims[q] for q in rest)
    dim = math.prod(dims)
    prob = SdpProblem()
    prob.add_free_block("Yw", dims)
    nb_pair = math.prod(d * d for d in pair_dims)
    signs = pt_signs(pair_dims, (0,))
    for lam, v in enumerate(p.vertices):
        label = f"Yp{lam}"
        prob.add_free_block(label, pair_dims)
        kmap = joint_embed_map(dims, rest, vech(v, (dims[party],))).T
        prob.add_psd_constraint(pair_dims, terms={"Yw": kmap, label: np.eye(nb_pair)})
        prob.add_psd_constraint(pair_dims, terms={label: -np.diag(signs)})
    rho_v = vech(rho.mat, dims)
    id_v = vech(np.eye(dim) / dim, dims)
    prob.add_equality((), 1.0, terms={"Yw": (id_v - rho_v).reshape(1, -1)})
    prob.set_objective(terms={"Yw": -rho_v}, constant=-1.0)
    sol = solve(prob)
    if sol.status not in ("optimal", "inaccurate"):
        raise SolverError(f"fsep dual solve {sol.status}: {sol.diagnostics}")
    value = -sol.objective  # = min Tr(Y0 rho) + 1
    y0 = HermitianOp(sol.block("Yw"), dims)
    worst = 0.0
    for lam in range(len(p.vertices)):
        ylam = sol.block(f"Yp{lam}")
        pt = -np.real_if_close(_pt_pair(ylam, pair_dims))
        worst = min(worst, float(np.linalg.eigvalsh((pt + pt.conj().T) / 2)[0]))
    witness = Witness(op=y0, normalisation=float("nan"),
                      vertex_constraints_ok=bool(worst >= -1e-7),
                      min_vertex_eigenvalue=float(worst))
    return value, witness


def _pt_pair(mat, pair_dims):
    from .hermitian import partial_transpose_mat
    return partial_transpose_mat(mat, pair_dims, (0,))


def _three_cuts(dims):
    """(cut party, free pair, pair dims) for A|BC, B|AC, C|AB."""
    out = []
    for party in range(3):
        rest = [q for q in range(3) if q != party]
        out.append((party, rest, tuple(dims[q] for q in rest)))
    return out


def bsep_visibility_fixed(rho: PartitionedState, p_a: Polytope, p_b: Polytope, p_c: Polytope):
    """Biseparability: the noise ray must decompose as a sum of the three
    cut contributions, each polytope-on-party with free PSD pair partners.
    Returns (t, {party: partner list})."""
    dims = rho.dims
    if len(dims) != 3:
        raise ValueError("bsep_visibility_fixed expects a three-party state")
    polys = {0: p_a, 1: p_b, 2: p_c}
    prob = SdpProblem()
    prob.add_scalar("t", lo=0.0, hi=T_CAP)
    terms = {}
    for party, rest, pair_dims in _three_cuts(dims):
        poly = polys[party]
        if math.prod(poly.dims) != dims[party]:
            raise ValueError(f"polytope for party {party} has wrong dimension")
        for lam, v in enumerate(poly.vertices):
            label = f"tau{party}_{lam}"
            prob.add_psd_block(label, pair_dims)
            terms[label] = joint_embed_map(dims, rest, vech(v, (dims[party],)))
    _ray_equality(prob, dims, rho.mat, terms)
    prob.set_objective(scalar_terms={"t": 1.0})
    sol = solve(prob)
    if sol.status not in ("optimal", "inaccurate"):
        raise SolverError(f"bsep solve {sol.status}: {sol.diagnostics}")
    partners = {party: [sol.block(f"tau{party}_{lam}") for lam in range(len(polys[party].vertices))]
                for party in range(3)}
    return sol.scalar("t"), partners


def fbsep_visibility_fixed(rho: PartitionedState, p_a: Polytope, p_b: Polytope, p_c: Polytope):
    """Full biseparability: three separate single-cut decompositions share
    one mixing parameter t.  Returns (t, {party: partner list})."""
    dims = rho.dims
    if len(dims) != 3:
        raise ValueError("fbsep_visibility_fixed expects a three-party state")
    polys = {0: p_a, 1: p_b, 2: p_c}
    prob = SdpProblem()
    prob.add_scalar("t", lo=0.0, hi=T_CAP)
    for party, rest, pair_dims in _three_cuts(dims):
        poly = polys[party]
        if math.prod(poly.dims) != dims[party]:
            raise ValueError(f"polytope for party {party} has wrong dimension")
        terms = {}
        for lam, v in enumerate(poly.vertices):
            label = f"tau{party}_{lam}"
            prob.add_psd_block(label, pair_dims)
            terms[label] = joint_embed_map(dims, rest, vech(v, (dims[party],)))
        _ray_equality(prob, dims, rho.mat, terms)
    prob.set_objective(scalar_terms={"t": 1.0})
    sol = solve(prob)
    if sol.status not in ("optimal", "inaccurate"):
        raise SolverError(f"fbsep solve {sol.status}: {sol.diagnostics}")
    partners = {party: [sol.block(f"tau{party}_{lam}") for lam in range(len(polys[party].vertices))]
                for party in range(3)}
    return sol.scalar("t"), partners


# ---------------------------------------------------------------------------
# adaptive loops
# ---------------------------------------------------------------------------

def adaptive_multiparty(rho: PartitionedState, target, n_vertices: int = 300,
                        seed: int = 0, conv_tol: float = 1e-4, max_rounds: int = 200,
                        record_decomposition: bool = True) -> MultipartyReport:
    """Converged lower bound on the visibility for the target class.

    FSEP cycles over party blocks (adjacent qubit/qutrit pairs of joint
    dimension <= 6 merged under PPT, other parties single) holding product
    vertices on all blocks but the free one; pure product-polytope cycling
    is the special case of all-singleton blocks (e.g. three qutrits).
    BSEP and FBSEP (three parties) alternate all per-cut polytope sides each
    round.  SEP(cut) delegates to the bipartite loop on the grouped cut.
    """
    if isinstance(target, str):
        target = parse_class(target, len(rho.dims))
    dims = rho.dims
    n = len(dims)
    if target.tag == "SEP":
        return _sep_cut_report(rho, target, n_vertices, seed, conv_tol, max_rounds)
    if n < 3:
        raise ValueError(f"{target.tag} needs at least three parties")
    if target.tag in ("BSEP", "FBSEP") and n != 3:
        raise ValueError(f"{target.tag} is implemented for three parties")
    if target.tag == "FSEP":
        return _fsep_block_loop(rho, n_vertices, seed, conv_tol, max_rounds,
                                record_decomposition, target)
    return _multi_cut_loop(rho, target, n_vertices, seed, conv_tol, max_rounds,
                           record_decomposition)


def _sep_cut_report(rho, target, n_vertices, seed, conv_tol, max_rounds):
    """Bipartite loop on a grouped cut, reported in multiparty form."""
    cut = tuple(sorted(target.cut))
    n = len(rho.dims)
    rest = tuple(p for p in range(n) if p not in cut)
    if not rest:
        raise ValueError(f"cut {cut} leaves no second side for dims {rho.dims}")
    perm = cut + rest
    grouped = swap_subsystems(rho, perm)
    da = math.prod(rho.dims[p] for p in cut)
    db = math.prod(rho.dims[p] for p in rest)
    flat = PartitionedState(grouped.mat, (da, db))
    rep = adaptive_visibility(flat, n_vertices=n_vertices, seed=seed,
                              conv_tol=conv_tol, max_rounds=max_rounds)
    out = MultipartyReport(
        chi=rep.chi,
        sep_class=target,
        chi_trace=rep.chi_trace,
        solver_statuses=rep.solver_statuses,
        polytopes={"cut": rep.final_polytope},
        decompositions={"cut": rep.decomposition},
        residual_norm=rep.residual_norm,
        converged=rep.converged,
        capped=rep.capped,
        restarts=rep.restarts,
        seed=seed,
        n_vertices=rep.n_vertices,
        upper_bound_hint=rep.upper_bound_hint,
        notes=rep.notes,
    )
    out.validate()
    return out


def _min_cut_ppt(rho) -> float:
    n = len(rho.dims)
    best = T_CAP
    for r in range(1, n // 2 + 1):
        for cut in itertools.combinations(range(n), r):
            best = min(best, ppt_visibility(rho, cut))
    return best


def _fsep_blocks(dims) -> list[tuple[int, ...]]:
    """Partition parties into cycling blocks for full separability.

    Adjacent parties are paired from the back whenever their joint dimension
    stays at most 6, where PPT is necessary and sufficient for separability;
    everything else stays a singleton.  Three qubits give [(0,), (1, 2)],
    five qubits [(0,), (1, 2), (3, 4)], three qutrits all singletons.
    """
    blocks = []
    i = len(dims) - 1
    while i >= 0:
        if i >= 1 and dims[i - 1] * dims[i] <= _CUT_MERGEABLE:
            blocks.append((i - 1, i))
            i -= 2
        else:
            blocks.append((i,))
            i -= 1
    return blocks[::-1]


def _random_pure_product(pair_dims, rng):
    out = np.ones((1, 1), dtype=complex)
    for d in pair_dims:
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        v /= np.linalg.norm(v)
        out = np.kron(out, np.outer(v, v.conj()))
    return out


def _project_pair_ppt(mat, pair_dims, iters=50):
    """Nearest-ish PSD and PPT unit-trace operator (alternating eigenvalue
    clips); repairs solver-level violations so pair vertices stay separable."""
    from .hermitian import partial_transpose_mat

    def clip(m):
        lam, u = np.linalg.eigh((m + m.conj().T) / 2)
        if lam[0] >= 0:
            return m
        return (u * np.clip(lam, 0.0, None)) @ u.conj().T

    m = mat
    for _ in range(iters):
        m = clip(m)
        pt = partial_transpose_mat(m, pair_dims, (0,))
        if np.linalg.eigvalsh(pt)[0] >= -1e-12:
            break
        m = partial_transpose_mat(clip(pt), pair_dims, (0,))
    tr = np.trace(m).real
    return m / tr


def _block_init_vertices(dims, blocks, n_vertices, rng):
    """Random pure products per block plus the computational-basis product
    orbit, which makes the maximally mixed state an exact vertex average."""
    orbit = np.indices(dims).reshape(len(dims), -1).T
    n_random = max(n_vertices - len(orbit), 1)
    verts = {}
    for block in blocks:
        bdims = tuple(dims[p] for p in block)
        col = [_random_pure_product(bdims, rng) for _ in range(n_random)]
        for combo in orbit:
            m = np.ones((1, 1), dtype=complex)
            for p in block:
                e = np.zeros((dims[p], dims[p]), dtype=complex)
                e[combo[p], combo[p]] = 1.0
                m = np.kron(m, e)
            col.append(m)
        verts[block] = col
    return verts, n_random + len(orbit)


def _fsep_block_solve(rho_mat, dims, blocks, verts, free_block):
    """Polytope products over the non-free blocks; free block PSD (+PPT when
    it is a merged pair)."""
    prob = SdpProblem()
    prob.add_scalar("t", lo=0.0, hi=T_CAP)
    free_parties = list(free_block)
    free_dims = tuple(dims[p] for p in free_block)
    poly_blocks = [b for b in blocks if b != free_block]
    n_vert = len(verts[blocks[0]])
    terms = {}
    ppt = len(free_block) == 2
    signs = pt_signs(free_dims, (0,)) if ppt else None
    for lam in range(n_vert):
        vv = np.ones(1)
        for b in poly_blocks:
            bdims = tuple(dims[p] for p in b)
            vv = np.outer(vv, vech(verts[b][lam], bdims)).reshape(-1)
        label = f"tau{lam}"
        prob.add_psd_block(label, free_dims)
        terms[label] = joint_embed_map(dims, free_parties, vv)
        if ppt:
            prob.add_psd_constraint(free_dims, terms={label: np.diag(signs)})
    _ray_equality(prob, dims, rho_mat, terms)
    prob.set_objective(scalar_terms={"t": 1.0})
    sol = solve(prob)
    partners = []
    if sol.status in ("optimal", "inaccurate"):
        partners = [sol.block(f"tau{lam}") for lam in range(n_vert)]
    return sol, partners


def _fsep_block_loop(rho, n_vertices, seed, conv_tol, max_rounds, record, target):
    """Cyclic adaption over blocks; pairs first so the first polytope side
    stays low-dimensional (random products then cover the noise anchor)."""
    dims = rho.dims
    dim = math.prod(dims)
    blocks = _fsep_blocks(dims)
    cycle_order = sorted(blocks, key=lambda b: (-len(b), b))
    ceiling = _min_cut_ppt(rho)
    rng = np.random.default_rng(seed)
    notes = []
    restarts = 0
    best = None
    for attempt in range(4):
        verts, n_vert = _block_init_vertices(dims, blocks, n_vertices, rng)
        trace, statuses = [], []
        cycle_chi_prev = None
        converged = False
        stalled = False
        incumbent = None
        infeasible_start = False
        for _ in range(max_rounds):
            cycle_raw = None
            for free_block in cycle_order:
                sol, partners = _fsep_block_solve(rho.mat, dims, blocks, verts, free_block)
                if sol.status == "infeasible":
                    infeasible_start = incumbent is None
                    cycle_raw = None
                    break
                if sol.status == "failed":
                    if incumbent is None:
                        raise SolverError(f"fsep solve failed: {sol.diagnostics}")
                    notes.append(f"solver gave up mid-run ({sol.diagnostics}); "
                                 "reporting incumbent")
                    cycle_raw = None
                    break
                t = sol.scalar("t")
                statuses.append(sol.status)
                bdims = tuple(dims[p] for p in free_block)
                poly = polytope_from_operators(
                    partners, dims=bdims, rng=rng,
                    replacement=lambda r, bd=bdims: _random_pure_product(bd, r))
                new_verts = list(poly.vertices)
                if len(free_block) == 2:
                    new_verts = [_project_pair_ppt(v, bdims) for v in new_verts]
                if incumbent is None or t > incumbent["chi"]:
                    incumbent = {"chi": t,
                                 "block_vertices": {b: list(verts[b]) for b in blocks},
                                 "free_block": free_block, "partners": partners}
                else:
                    notes.append(f"solve {len(trace)} t={t:.8f} below incumbent "
                                 f"{incumbent['chi']:.8f}; incumbent kept")
                trace.append(incumbent["chi"])
                verts[free_block] = new_verts
                cycle_raw = t
            if cycle_raw is None:
                break
            t = cycle_raw
            if t >= T_CAP - 1e-9 or t >= ceiling - conv_tol / 2:
                converged = True
                break
            if cycle_chi_prev is not None and abs(t - cycle_chi_prev) < conv_tol:
                converged = True
                stalled = bool(ceiling - t > 10 * conv_tol)
                break
            cycle_chi_prev = t
        if incumbent is not None:
            run = {**incumbent, "trace": trace, "statuses": statuses,
                   "converged": converged, "stalled": stalled, "n_vert": n_vert}
            if best is None or run["chi"] > best["chi"]:
                best = run
            if converged and not stalled:
                break
            if stalled and restarts == 0:
                restarts += 1
                notes.append(f"stall at chi={run['chi']:.6f} vs min-cut ppt "
                             f"{ceiling:.6f}; reseeding once")
                continue
            break
        if infeasible_start:
            restarts += 1
            notes.append(f"infeasible block start (attempt {attempt}); reseeding")
            continue
        break
    if best is None:
        raise SolverError("fsep block adaption found no feasible start")

    decomp = {}
    residual = 0.0
    if record:
        free = best["free_block"]
        recon = np.zeros((dim, dim), dtype=complex)
        for lam, tau in enumerate(best["partners"]):
            m = np.ones((1, 1), dtype=complex)
            for b in blocks:
                m = np.kron(m, tau if b == free else best["block_vertices"][b][lam])
            recon += m
        tgt = mix_with_white_noise_mat(rho.mat, best["chi"])
        residual = float(np.linalg.norm(recon - tgt) / (1 + np.linalg.norm(tgt)))
        decomp = {"free_block": free, "block_vertices": best["block_vertices"],
                  "partners": best["partners"], "blocks": blocks}

    report = MultipartyReport(
        chi=best["chi"],
        sep_class=target,
        chi_trace=best["trace"],
        solver_statuses=best["statuses"],
        polytopes={b: Polytope(tuple(dims[p] for p in b), best["block_vertices"][b])
                   for b in blocks},
        decompositions=decomp,
        residual_norm=residual,
        converged=best["converged"],
        capped=bool(best["chi"] >= T_CAP - 1e-6),
        restarts=restarts,
        seed=seed,
        n_vertices=best["n_vert"],
        upper_bound_hint=ceiling,
        notes=notes,
    )
    report.validate()
    return report


def _multi_cut_loop(rho, target, n_vertices, seed, conv_tol, max_rounds, record):
    """BSEP / FBSEP adaption: per-cut polytopes, all sides swapped each round."""
    dims = rho.dims
    dim = math.prod(dims)
    fbsep = target.tag == "FBSEP"
    ceiling = _min_cut_ppt(rho) if fbsep else None
    rng = np.random.default_rng(seed)
    notes = []
    restarts = 0
    best = None
    for attempt in range(4):
        # per cut: side "single" (polytope on the party) or "pair"
        cuts = {party: {"side": "single",
                        "vertices": list(random_inner_polytope(dims[party], n_vertices, rng).vertices)}
                for party in range(3)}
        trace, statuses = [], []
        chi_prev = None
        converged = False
        stalled = False
        incumbent = None
        for _ in range(max_rounds):
            sol, partners = _multi_cut_solve(rho.mat, dims, cuts, fbsep)
            if sol.status == "infeasible":
                break
            if sol.status == "failed":
                if incumbent is None:
                    raise SolverError(f"{target.tag} solve failed: {sol.diagnostics}")
                notes.append(f"solver gave up mid-run ({sol.diagnostics}); "
                             "reporting incumbent")
                break
            t = sol.scalar("t")
            statuses.append(sol.status)
            if incumbent is None or t > incumbent["chi"]:
                incumbent = {"chi": t, "cuts": {k: dict(v) for k, v in cuts.items()},
                             "partners": partners}
            else:
                notes.append(f"round {len(trace)} solve t={t:.8f} below incumbent "
                             f"{incumbent['chi']:.8f}; incumbent kept")
            trace.append(incumbent["chi"])
            if t >= T_CAP - 1e-9 or (ceiling is not None and t >= ceiling - conv_tol / 2):
                converged = True
                break
            if chi_prev is not None and abs(t - chi_prev) < conv_tol:
                converged = True
                stalled = bool(ceiling is not None and ceiling - t > 10 * conv_tol)
                break
            chi_prev = t
            for party in range(3):
                rest = [q for q in range(3) if q != party]
                pair_dims = tuple(dims[q] for q in rest)
                if cuts[party]["side"] == "single":
                    poly = polytope_from_operators(partners[party], dims=pair_dims, rng=rng)
                    cuts[party] = {"side": "pair", "vertices": list(poly.vertices)}
                else:
                    poly = polytope_from_operators(partners[party], dims=(dims[party],), rng=rng)
                    cuts[party] = {"side": "single", "vertices": list(poly.vertices)}
        if incumbent is not None:
            run = {**incumbent, "trace": trace, "statuses": statuses,
                   "converged": converged, "stalled": stalled}
            if best is None or run["chi"] > best["chi"]:
                best = run
            if converged and not stalled:
                break
            if stalled and restarts == 0:
                restarts += 1
                notes.append(f"stall at chi={run['chi']:.6f}; reseeding once")
                continue
            break
        restarts += 1
        notes.append(f"degenerate {target.tag} start (attempt {attempt}); reseeding")
    if best is None:
        raise SolverError(f"{target.tag} adaption found no feasible polytopes")

    decomp = {}
    residual = 0.0
    if record:
        tgt = mix_with_white_noise_mat(rho.mat, best["chi"])
        group_resid = []
        recon_total = np.zeros((dim, dim), dtype=complex)
        for party in range(3):
            rest = [q for q in range(3) if q != party]
            recon = np.zeros((dim, dim), dtype=complex)
            for lam, tau in enumerate(best["partners"][party]):
                if best["cuts"][party]["side"] == "single":
                    pieces = {party: best["cuts"][party]["vertices"][lam]}
                    pieces.update(_split_pair_full(tau, rest))
                else:
                    pieces = {party: tau}
                    pieces.update(_split_pair_full(best["cuts"][party]["vertices"][lam], rest))
                recon += _assemble(pieces, dims)
            recon_total += recon
            if fbsep:
                group_resid.append(np.linalg.norm(recon - tgt) / (1 + np.linalg.norm(tgt)))
        if fbsep:
            residual = float(max(group_resid))
        else:
            residual = float(np.linalg.norm(recon_total - tgt) / (1 + np.linalg.norm(tgt)))
        decomp = {party: (best["cuts"][party]["vertices"], best["partners"][party])
                  for party in range(3)}

    report = MultipartyReport(
        chi=best["chi"],
        sep_class=target,
        chi_trace=best["trace"],
        solver_statuses=best["statuses"],
        polytopes={party: Polytope(
            (dims[party],) if best["cuts"][party]["side"] == "single"
            else tuple(dims[q] for q in range(3) if q != party),
            best["cuts"][party]["vertices"]) for party in range(3)},
        decompositions=decomp,
        residual_norm=residual,
        converged=best["converged"],
        capped=bool(best["chi"] >= T_CAP - 1e-6),
        restarts=restarts,
        seed=seed,
        n_vertices=n_vertices,
        upper_bound_hint=ceiling,
        notes=notes,
    )
    report.validate()
    return report


def _split_pair_full(pair_mat, rest):
    """Tag a pair operator with its party positions for reassembly."""
    return {("pair", tuple(rest)): pair_mat}


def _assemble(pieces, dims):
    """Kron the tagged pieces back into full party order."""
    n = len(dims)
    singles = {p: m for p, m in pieces.items() if isinstance(p, int)}
    pair_key = [k for k in pieces if not isinstance(k, int)]
    full = None
    if pair_key:
        (_, rest), = [(k[0], k[1]) for k in pair_key]
        pair_mat = pieces[pair_key[0]]
        order = list(singles) + list(rest)
        mat = np.ones((1, 1), dtype=complex)
        for p in singles:
            mat = np.kron(mat, singles[p])
        mat = np.kron(mat, pair_mat)
        # mat lives on (singles..., rest...) ordering; permute to party order
        inv = np.argsort(order)
        from .hermitian import swap_subsystems_mat
        cur_dims = tuple(dims[p] for p in order)
        full, _ = swap_subsystems_mat(mat, cur_dims, inv)
    else:
        full = np.ones((1, 1), dtype=complex)
        for p in range(n):
            full = np.kron(full, singles[p])
    return full


def _multi_cut_solve(rho_mat, dims, cuts, fbsep):
    prob = SdpProblem()
    prob.add_scalar("t", lo=0.0, hi=T_CAP)
    all_terms = {}
    per_cut_terms = {0: {}, 1: {}, 2: {}}
    for party in range(3):
        rest = [q for q in range(3) if q != party]
        pair_dims = tuple(dims[q] for q in rest)
        info = cuts[party]
        for lam, v in enumerate(info["vertices"]):
            label = f"tau{party}_{lam}"
            if info["side"] == "single":
                prob.add_psd_block(label, pair_dims)
                kmap = joint_embed_map(dims, rest, vech(v, (dims[party],)))
            else:
                prob.add_psd_block(label, (dims[party],))
                kmap = joint_embed_map(dims, [party], vech(v, pair_dims))
            all_terms[label] = kmap
            per_cut_terms[party][label] = kmap
    if fbsep:
        for party in range(3):
            _ray_equality(prob, dims, rho_mat, per_cut_terms[party])
    else:
        _ray_equality(prob, dims, rho_mat, all_terms)
    prob.set_objective(scalar_terms={"t": 1.0})
    sol = solve(prob)
    partners = {}
    if sol.status in ("optimal", "inaccurate"):
        partners = {party: [sol.block(f"tau{party}_{lam}")
                            for lam in range(len(cuts[party]["vertices"]))]
                    for party in range(3)}
    return sol, partners
