"""Command-line surface: certification runs, robustness, see-saws, sweeps
and cross-section scans emitting plot-ready CSV.

Exit codes: 0 success (regardless of the separability verdict), 2 config
error, 3 solver error.  All randomness derives from the single --seed value,
which is recorded in every output file.  Solver verbosity is controlled only
by the SEPCERT_SOLVER_VERBOSE environment variable.
"""

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bipartite import (
    absolute_robustness_adaptive,
    adaptive_visibility,
    dual_witness_fixed,
    generalized_robustness_adaptive,
    outer_upper_bound,
    ppt_visibility,
)
from .conic import SolverError
from .hermitian import HermitianOp, PartitionedState, matrix_to_doc, partial_transpose_mat
from .multiparty import adaptive_multiparty, fsep_dual_witness, parse_class
from .polytopes import save_polytope
from .seesaw import (
    gamma_scan,
    minimize_witness_over_fbsep,
    minimize_witness_over_ppt,
    seesaw_robust_fbsep,
    seesaw_robust_ppt,
    _fsep_polytope_on_party,
    _polytope_on_side,
)
from .states import make_state, mix_with_white_noise_mat, parse_state_spec, spec_to_string

PSD_FLAG_ATOL = 1e-9


def _fmt(x) -> str:
    """Numbers are emitted with 9 significant digits."""
    return f"{x:.9g}"


def _write_output(text: str, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows, seed) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit_report(doc: dict, args):
    doc["seed"] = args.seed
    if getattr(args, "format", "json") == "csv":
        rows = [(k, v) for k, v in doc.items() if isinstance(v, (int, float, str, bool))]
        text = _csv_text(["field", "value"], rows, args.seed)
    else:
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    _write_output(text, args.out)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)}")


def _load_state(text: str) -> PartitionedState:
    return make_state(parse_state_spec(text))


def _all_cuts(n: int):
    import itertools
    cuts = []
    for r in range(1, n // 2 + 1):
        for cut in itertools.combinations(range(n), r):
            if r * 2 == n and 0 not in cut:
                continue  # avoid the complement duplicate
            cuts.append(cut)
    return cuts


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------

def cmd_certify(args) -> int:
    rho = _load_state(args.state)
    cls = parse_class(args.klass, len(rho.dims))
    t0 = time.time()
    if cls.tag == "SEP" and len(rho.dims) == 2 and cls.cut == (0,):
        rep = adaptive_visibility(rho, n_vertices=args.vertices, seed=args.seed,
                                  conv_tol=args.tol, max_rounds=args.max_rounds)
        chi, trace, statuses = rep.chi, rep.chi_trace, rep.solver_statuses
        notes, restarts, converged = rep.notes, rep.restarts, rep.converged
        ppt_ub = rep.upper_bound_hint
        residual = rep.residual_norm
        final_poly = rep.final_polytope
        decomposition = rep.decomposition if args.include_decomposition else None
    else:
        rep = adaptive_multiparty(rho, cls, n_vertices=args.vertices, seed=args.seed,
                                  conv_tol=args.tol, max_rounds=args.max_rounds)
        chi, trace, statuses = rep.chi, rep.chi_trace, rep.solver_statuses
        notes, restarts, converged = rep.notes, rep.restarts, rep.converged
        ppt_ub = rep.upper_bound_hint
        residual = rep.residual_norm
        final_poly = None
        decomposition = None
    wall = time.time() - t0

    verdict = "undetermined"
    outer_ub = None
    if chi >= 1.0 - 1e-9:
        verdict = "member"
    elif ppt_ub is not None and ppt_ub < 1.0 - 1e-9 and cls.tag in ("SEP", "FSEP", "FBSEP"):
        verdict = "entangled"
    elif (cls.tag == "SEP" and len(rho.dims) == 2 and rho.dims[0] == 2):
        outer_ub = outer_upper_bound(rho, n_vertices=1002)
        if outer_ub < 1.0 - 1e-9:
            verdict = "entangled"

    doc = {
        "command": "certify",
        "state": args.state,
        "class": cls.label(),
        "chi_lower_bound": chi,
        "chi_capped": min(chi, 1.0),
        "capped_at": 1.5,
        "verdict": verdict,
        "converged": converged,
        "iterations": len(trace),
        "chi_trace": trace,
        "solver_statuses": statuses,
        "ppt_upper_bound": ppt_ub,
        "outer_upper_bound": outer_ub,
        "decomposition_residual": residual,
        "restarts": restarts,
        "notes": notes,
        "wall_time_s": wall,
    }
    if args.include_decomposition and decomposition is not None:
        sigmas, taus = decomposition
        d_s, d_t = sigmas[0].shape[0], taus[0].shape[0]
        doc["decomposition"] = {
            "vertices": [matrix_to_doc(HermitianOp(v, (d_s,))) for v in sigmas],
            "partners": [matrix_to_doc(HermitianOp(v, (d_t,))) for v in taus],
        }
    if args.save_polytope and final_poly is not None:
        save_polytope(args.save_polytope, final_poly)
    _emit_report(doc, args)
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _parse_grid(text: str):
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be start:stop:count or a comma list, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        return np.linspace(start, stop, count)
    return np.array([float(x) for x in text.split(",")])


def _sweep_row(payload):
    (spec_text, vertices, seed, tol, max_rounds, with_outer) = payload
    rho = _load_state(spec_text)
    t0 = time.time()
    try:
        rep = adaptive_visibility(rho, n_vertices=vertices, seed=seed,
                                  conv_tol=tol, max_rounds=max_rounds)
        chi = rep.chi
        ppt = rep.upper_bound_hint
        outer = outer_upper_bound(rho) if (with_outer and rho.dims[0] == 2) else math.nan
        return (chi, ppt, outer, time.time() - t0, "")
    except SolverError as exc:
        return (math.nan, math.nan, math.nan, time.time() - t0, str(exc))


def cmd_sweep(args) -> int:
    grid = _parse_grid(args.grid)
    family = args.family
    param = args.param
    payloads = []
    for v in grid:
        spec_text = f"{family}:{param}={v:.12g}"
        spec = parse_state_spec(spec_text)  # validates family/param combo
        payloads.append((spec_to_string(spec), args.vertices, args.seed, args.tol,
                         args.max_rounds, not args.no_outer))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_row, payloads))
    else:
        results = [_sweep_row(p) for p in payloads]
    rows = []
    failures = 0
    for v, (chi, ppt, outer, wall, err) in zip(grid, results):
        if err:
            failures += 1
        rows.append((float(v), chi, ppt, outer, wall, err))
    text = _csv_text(
        [param, "chi_lower_bound", "ppt_upper_bound", "outer_upper_bound", "wall_time_s", "error"],
        rows, args.seed)
    _write_output(text, args.out)
    return 0


# ---------------------------------------------------------------------------
# cross-section
# ---------------------------------------------------------------------------

def _plane_point(mixed, d1, d2, x, y):
    return mixed + x * d1 + y * d2


def _membership_tester(anchor_states, cls, vertices, seed, tol, max_rounds):
    """Adapt once at the anchor with the smallest visibility, then reuse the
    converged polytopes for fixed membership solves across the grid."""
    reports = []
    for rho in anchor_states:
        if cls.tag == "SEP" and len(rho.dims) == 2:
            reports.append(adaptive_visibility(rho, n_vertices=vertices, seed=seed,
                                               conv_tol=tol, max_rounds=max_rounds))
        else:
            reports.append(adaptive_multiparty(rho, cls, n_vertices=vertices, seed=seed,
                                               conv_tol=tol, max_rounds=max_rounds))
    idx = int(np.argmin([r.chi for r in reports]))
    rep = reports[idx]
    dims = anchor_states[idx].dims

    from .bipartite import _solve_visibility
    from .multiparty import _fsep_block_solve, _multi_cut_solve

    if cls.tag == "SEP" and len(dims) == 2:
        sigmas, _ = rep.decomposition
        side = rep.decomposition_side

        def member(mat):
            t, _, sol = _solve_visibility(mat, dims, sigmas, side)
            return sol.status in ("optimal", "inaccurate") and t >= 1.0 - 1e-7
    elif cls.tag == "FSEP":
        dec = rep.decompositions
        blocks = dec["blocks"]
        verts = dec["block_vertices"]
        free = dec["free_block"]

        def member(mat):
            sol, _ = _fsep_block_solve(mat, dims, blocks, verts, free)
            return (sol.status in ("optimal", "inaccurate")
                    and sol.scalar("t") >= 1.0 - 1e-7)
    else:
        cuts = {party: {"side": "single", "vertices": list(rep.polytopes[party].vertices)}
                if math.prod(rep.polytopes[party].dims) == dims[party]
                else {"side": "pair", "vertices": list(rep.polytopes[party].vertices)}
                for party in range(3)}
        fb = cls.tag == "FBSEP"

        def member(mat):
            sol, _ = _multi_cut_solve(mat, dims, cuts, fb)
            return (sol.status in ("optimal", "inaccurate")
                    and sol.scalar("t") >= 1.0 - 1e-7)

    return member


def cmd_cross_section(args) -> int:
    rho1 = _load_state(args.state1)
    rho2 = _load_state(args.state2)
    if rho1.dims != rho2.dims:
        raise ValueError(f"anchor dims differ: {rho1.dims} vs {rho2.dims}")
    dims = rho1.dims
    dim = rho1.mat.shape[0]
    mixed = np.eye(dim) / dim
    d1 = rho1.mat - mixed
    d2 = rho2.mat - mixed
    classes = [parse_class(c, len(dims)) for c in args.classes.split(",") if c]
    testers = {c.label(): _membership_tester([rho1, rho2], c, args.vertices,
                                             args.seed, args.tol, args.max_rounds)
               for c in classes}
    cuts = _all_cuts(len(dims))
    xs = np.linspace(*args.xrange, args.resolution)
    ys = np.linspace(*args.yrange, args.resolution)
    header = (["x", "y", "psd"]
              + [f"ppt_{''.join(str(p) for p in cut)}" for cut in cuts]
              + [f"member_{c.label()}" for c in classes])
    rows = []
    for x in xs:
        for y in ys:
            mat = _plane_point(mixed, d1, d2, x, y)
            lam = float(np.linalg.eigvalsh(mat)[0])
            psd = lam >= -PSD_FLAG_ATOL
            row = [float(x), float(y), int(psd)]
            for cut in cuts:
                if psd:
                    pt = partial_transpose_mat(mat, dims, cut)
                    row.append(int(np.linalg.eigvalsh(pt)[0] >= -PSD_FLAG_ATOL))
                else:
                    row.append(0)
            for c in classes:
                row.append(int(psd and testers[c.label()](mat)))
            rows.append(tuple(row))
    text = _csv_text(header, rows, args.seed)
    _write_output(text, args.out)
    return 0


# ---------------------------------------------------------------------------
# robustness / see-saws / gamma scan / witness
# ---------------------------------------------------------------------------

def cmd_robustness(args) -> int:
    rho = _load_state(args.state)
    t0 = time.time()
    if args.kind == "random":
        rep = adaptive_visibility(rho, n_vertices=args.vertices, seed=args.seed,
                                  conv_tol=args.tol, max_rounds=args.max_rounds)
        chi = min(rep.chi, 1.0) if rep.chi >= 1 else rep.chi
        doc = {
            "command": "robustness", "kind": "random", "state": args.state,
            "chi": rep.chi, "robustness_upper_bound": max((1 - chi) / max(chi, 1e-12), 0.0),
            "chi_trace": rep.chi_trace, "solver_statuses": rep.solver_statuses,
            "converged": rep.converged, "wall_time_s": time.time() - t0,
        }
    elif args.kind == "absolute":
        rep = absolute_robustness_adaptive(rho, n_vertices=args.vertices, seed=args.seed,
                                           conv_tol=args.tol)
        doc = {
            "command": "robustness", "kind": "absolute", "state": args.state,
            "chi_bar": rep.chi_bar, "robustness_upper_bound": rep.robustness,
            "chi_trace": rep.chi_trace, "solver_statuses": rep.solver_statuses,
            "converged": rep.converged, "wall_time_s": time.time() - t0,
        }
    else:
        rep = generalized_robustness_adaptive(rho, n_vertices=args.vertices, seed=args.seed,
                                              conv_tol=args.tol)
        doc = {
            "command": "robustness", "kind": "generalized", "state": args.state,
            "chi": rep.chi_bar, "robustness_upper_bound": rep.robustness,
            "chi_trace": rep.chi_trace, "solver_statuses": rep.solver_statuses,
            "converged": rep.converged, "wall_time_s": time.time() - t0,
        }
    _emit_report(doc, args)
    return 0


def cmd_seesaw_ppt(args) -> int:
    rho = _load_state(args.state)
    t0 = time.time()
    trace = seesaw_robust_ppt(rho, n_vertices=args.vertices, seed=args.seed,
                              conv_tol=args.tol, max_iters=args.max_rounds)
    ppt_min_eigs = []
    for st in trace.states:
        pt = partial_transpose_mat(st.mat, st.dims, (0,))
        ppt_min_eigs.append(float(np.linalg.eigvalsh(pt)[0]))
    doc = {
        "command": "seesaw-ppt", "state": args.state,
        "final_chi": trace.final_chi,
        "steps": [{"chi": c, "witness_value": v} for c, v in trace.steps],
        "iterate_ppt_min_eigs": ppt_min_eigs,
        "converged": trace.converged, "reason": trace.converged_reason,
        "wall_time_s": time.time() - t0,
    }
    if args.save_state and trace.final_state is not None:
        from .hermitian import save_matrix
        save_matrix(args.save_state, trace.final_state)
    _emit_report(doc, args)
    return 0


def cmd_seesaw_fbsep(args) -> int:
    t0 = time.time()
    trace = seesaw_robust_fbsep(seed=args.seed, n_vertices=args.vertices,
                                conv_tol=args.tol, max_restarts=args.restarts)
    doc = {
        "command": "seesaw-fbsep",
        "final_chi": trace.final_chi,
        "steps": [{"chi": c, "overlap": v} for c, v in trace.steps],
        "restarts": trace.restarts,
        "converged": trace.converged, "reason": trace.converged_reason,
        "wall_time_s": time.time() - t0,
    }
    if args.save_state and trace.final_state is not None:
        from .hermitian import save_matrix
        save_matrix(args.save_state, trace.final_state)
    _emit_report(doc, args)
    return 0


def cmd_gamma_scan(args) -> int:
    thetas = np.linspace(0.0, 2 * math.pi, args.points, endpoint=False)
    res = gamma_scan(thetas, n_vertices=args.vertices, seed=args.seed, conv_tol=args.tol)
    rows = [(float(th), float(c), float(s), float(h), float(v))
            for th, c, s, h, v in zip(res.thetas, res.chi, res.bloch_spread,
                                      res.han_residual, res.tetra_volume)]
    text = _csv_text(["theta", "chi_fsep", "bloch_pair_distance_spread",
                      "han_residual", "tetrahedron_volume"], rows, args.seed)
    for m in res.minima:
        text += (f"# minimum: theta_grid={_fmt(m['theta_grid'])} "
                 f"theta_parabolic={_fmt(m['theta_parabolic'])} "
                 f"theta_equal_distance={_fmt(m['theta_equal_distance'])} "
                 f"chi={_fmt(m['chi'])}\n")
    _write_output(text, args.out)
    return 0


def cmd_witness(args) -> int:
    rho = _load_state(args.state)
    cls = parse_class(args.klass, len(rho.dims))
    rng = np.random.default_rng(args.seed)
    t0 = time.time()
    if cls.tag == "SEP" and len(rho.dims) == 2:
        rep = adaptive_visibility(rho, n_vertices=args.vertices, seed=args.seed,
                                  conv_tol=args.tol, max_rounds=args.max_rounds)
        poly = _polytope_on_side(rep, 0)
        r, wit = dual_witness_fixed(rho, poly, side=0)
        chi_dual = 1.0 / (1.0 + r) if r > -1 else math.inf
        witness_value = float(np.trace(wit.op.mat @ rho.mat).real)
    elif cls.tag == "FSEP" and rho.dims == (2, 2, 2):
        rep = adaptive_multiparty(rho, cls, n_vertices=args.vertices, seed=args.seed,
                                  conv_tol=args.tol, max_rounds=args.max_rounds)
        poly = _fsep_polytope_on_party(rep)
        chi_dual, wit = fsep_dual_witness(rho, poly, party=0)
        witness_value = float(np.trace(wit.op.mat @ rho.mat).real)
    else:
        raise ValueError("witness extraction supports class sep (bipartite) and "
                         "fsep (three qubits)")
    # verify against random product states
    dims = rho.dims
    worst = math.inf
    for _ in range(args.verify_products):
        mat = np.ones((1, 1), dtype=complex)
        for d in dims:
            v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            v /= np.linalg.norm(v)
            mat = np.kron(mat, np.outer(v, v.conj()))
        worst = min(worst, float(np.trace(wit.op.mat @ mat).real))
    doc = {
        "command": "witness", "state": args.state, "class": cls.label(),
        "chi_adaptive": rep.chi,
        "chi_from_dual": chi_dual,
        "witness_value_on_state": witness_value,
        "vertex_constraints_ok": wit.vertex_constraints_ok,
        "min_vertex_eigenvalue": wit.min_vertex_eigenvalue,
        "min_over_random_products": worst,
        "n_products_checked": args.verify_products,
        "witness": matrix_to_doc(wit.op),
        "wall_time_s": time.time() - t0,
    }
    _emit_report(doc, args)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _range_pair(text):
    lo, hi = text.split(":")
    return (float(lo), float(hi))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sepcert",
        description="Separability certification via adaptive polytope approximations.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, vertices=None):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=1e-4,
                       help="adaption convergence tolerance on chi")
        p.add_argument("--vertices", type=int, default=vertices)
        p.add_argument("--max-rounds", type=int, default=200)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("certify", help="adaptive visibility lower bound and verdict")
    p.add_argument("--state", required=True)
    p.add_argument("--class", dest="klass", default="sep")
    p.add_argument("--include-decomposition", action="store_true")
    p.add_argument("--save-polytope", default=None)
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="one-parameter family sweep (CSV)")
    p.add_argument("--family", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--grid", required=True, help="start:stop:count or comma list")
    p.add_argument("--no-outer", action="store_true")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cross-section", help="2D plane scan (CSV)")
    p.add_argument("--state1", required=True)
    p.add_argument("--state2", required=True)
    p.add_argument("--classes", default="sep")
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--xrange", type=_range_pair, default=(-0.5, 1.25))
    p.add_argument("--yrange", type=_range_pair, default=(-0.5, 1.25))
    common(p)
    p.set_defaults(func=cmd_cross_section)

    p = sub.add_parser("robustness", help="random | absolute | generalized robustness")
    p.add_argument("--kind", choices=("random", "absolute", "generalized"), default="random")
    p.add_argument("--state", required=True)
    common(p)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("seesaw-ppt", help="search for robust PPT-entangled states")
    p.add_argument("--state", default="horodecki2x4:b=0.25")
    p.add_argument("--save-state", default=None)
    common(p, vertices=500)
    p.set_defaults(func=cmd_seesaw_ppt)

    p = sub.add_parser("seesaw-fbsep", help="search for robust fully biseparable states")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--save-state", default=None)
    common(p, vertices=300)
    p.set_defaults(func=cmd_seesaw_fbsep)

    p = sub.add_parser("gamma-scan", help="scan the X-shaped three-qubit family")
    p.add_argument("--points", type=int, default=64)
    common(p, vertices=300)
    p.set_defaults(func=cmd_gamma_scan)

    p = sub.add_parser("witness", help="extract and verify a dual witness")
    p.add_argument("--state", required=True)
    p.add_argument("--class", dest="klass", default="sep")
    p.add_argument("--verify-products", type=int, default=1000)
    common(p)
    p.set_defaults(func=cmd_witness)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.vertices is None:
            args.vertices = _default_vertices(args)
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


def _default_vertices(args):
    state_text = getattr(args, "state", None) or getattr(args, "state1", None)
    if state_text:
        try:
            rho = _load_state(state_text)
            if len(rho.dims) > 2 or getattr(args, "klass", "sep") != "sep":
                return 300
            from .bipartite import default_vertex_count
            return default_vertex_count(rho.mat.shape[0])
        except Exception:
            return 300
    return 300


if __name__ == "__main__":
    sys.exit(main())
