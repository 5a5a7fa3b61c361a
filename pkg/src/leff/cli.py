"""Command-line front end.

Every command prints (or writes with ``-o``) one JSON record
``{"leff-schema": 1, "command", "version", "params", "result"}``; ``compare``,
``sweep``, ``alpha`` and ``constants`` can emit CSV instead.  Exit status
is 0 on success, 2 on invalid input and 3 when a numerical tolerance
cannot be met.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .atomic import write_text
from .bounds import THEOREMS, admissible_window, build_ledger, xi_admissible
from .errors import AccuracyError, ValidationError
from .fermion import decompose_U_M, fermionic_delta_spectrum
from .landau import ProblemParams, enumerate_sigma, orbit_decompose
from .potentials import constant_Ce, constant_Cn, position_V_single
from .quadrature import get_cache, set_cache_dir
from .solvers import (
    GridSpec,
    compare_resolvents,
    default_grid_n1,
    default_grid_n2,
    delta_exact_n1,
    delta_solve_n2,
    solve_n1,
)
from .specialfn import alpha_of_B

SCHEMA = 1
COMMANDS = ("alpha", "basis", "potentials", "constants", "window", "solve-delta",
            "solve-coulomb", "solve-eff", "compare", "fermion", "sweep")
COMPARE_COLUMNS = ("B", "alpha", "d_xi", "resolvent_distance")
SWEEP_QUANTITIES = ("alpha", "E0-delta", "E0-coulomb", "E0-eff", "window-T1", "window-T2",
                    "window-T3")


def version_string() -> str:
    return f"v{__version__}"


# ------------------------------------------------------------------ parsing

def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--B", type=_floats, default=[math.e ** 2],
                        help="field strength; comma list for compare and sweep")
    common.add_argument("--Z", type=float, default=1.0)
    common.add_argument("--N", type=int, default=1)
    common.add_argument("--M", type=int, default=0)
    common.add_argument("--cache-dir", default=None,
                        help="element cache directory (overrides LEFF_CACHE_DIR)")
    common.add_argument("-o", "--output", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--points", type=int, default=None, help="grid points (odd)")
    grid.add_argument("--half-width", type=float, default=None)
    grid.add_argument("--core-spacing", type=float, default=None)
    grid.add_argument("--n-eigs", type=int, default=4)
    grid.add_argument("--parity", choices=("even", "odd"), default=None)
    grid.add_argument("--vectors", default=None, help="also write eigenvectors to this path")

    p = argparse.ArgumentParser(prog="leff", description="Effective one-dimensional models "
                                "of atoms in strong magnetic fields.")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    sub.add_parser("alpha", parents=[common], help="coupling alpha(B)")
    sub.add_parser("basis", parents=[common], help="momentum-M labels and their orbits")
    sp = sub.add_parser("potentials", parents=[common], help="C^n, C^e and V at positions")
    sp.add_argument("--z", type=_floats, default=[0.5, 1.0, 2.0])
    sp = sub.add_parser("constants", parents=[common], help="theorem constants ledger")
    sp.add_argument("--nu-C", type=float, default=None)
    sp = sub.add_parser("window", parents=[common], help="admissible distance windows")
    sp.add_argument("--theorem", choices=THEOREMS + ("all",), default="all")
    sp.add_argument("--d-xi", type=float, default=None, help="also test this distance")
    sp.add_argument("--ignore-threshold", action="store_true")
    sp = sub.add_parser("solve-delta", parents=[common, grid], help="delta model spectrum")
    sp.add_argument("--method", choices=("exact", "grid"), default="exact")
    sp.add_argument("--sector", choices=("symmetric", "antisymmetric", "full"),
                    default="symmetric")
    sub.add_parser("solve-coulomb", parents=[common, grid], help="Coulomb model, one electron")
    sub.add_parser("solve-eff", parents=[common, grid], help="projected model, one electron")
    sp = sub.add_parser("compare", parents=[common], help="resolvent distance sweep")
    sp.add_argument("--model-a", choices=("eff",), default="eff")
    sp.add_argument("--model-b", choices=("delta", "coulomb"), default="delta")
    sp.add_argument("--points", type=int, default=4001)
    sp.add_argument("--fraction", type=float, default=0.125,
                    help="distance d(xi) as a multiple of alpha^2")
    sp = sub.add_parser("fermion", parents=[common], help="fermionic blocks and mixing")
    sp.add_argument("--solve", action="store_true", help="also solve the delta model per block")
    sp = sub.add_parser("sweep", parents=[common], help="one quantity over several fields")
    sp.add_argument("--quantity", choices=SWEEP_QUANTITIES, default="alpha")
    sp.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
    return p


def _params(args, B: float | None = None) -> ProblemParams:
    return ProblemParams(B if B is not None else args.B[0], args.Z, args.N, args.M)


def _single_B(args) -> float:
    if len(args.B) != 1:
        raise ValidationError(f"{args.command} takes a single --B value")
    return args.B[0]


def _grid(args, params: ProblemParams, model: str):
    if args.points is None and args.half_width is None and args.core_spacing is None:
        return None
    if params.N == 2:
        base = default_grid_n2(params.Z, args.points or 401)
    else:
        base = default_grid_n1(params, model, args.points or 4001)
    return GridSpec(args.half_width or base.half_width, args.points or base.points,
                    base.pf_cutoff, args.core_spacing or base.core_spacing)


# ------------------------------------------------------------------ commands

def _cmd_alpha(args):
    rows = []
    for B in args.B:
        a = alpha_of_B(B)
        rows.append({"B": B, "alpha": a.value, "residual": a.residual})
    result = rows[0] if len(rows) == 1 else rows
    return result, rows, ("B", "alpha", "residual")


def _cmd_basis(args):
    sigma = enumerate_sigma(args.N, args.M)
    return {"labels": [list(m) for m in sigma], "count": len(sigma),
            "orbits": orbit_decompose(sigma).to_json()}, None, None


def _cmd_potentials(args):
    p = _params(args, _single_B(args))
    out = {"Cn": constant_Cn(p, 0).tolist(),
           "V_single": {repr(z): position_V_single(p, z, 0).tolist() for z in args.z}}
    if p.N >= 2:
        out["Ce"] = constant_Ce(p, 0, 1).tolist()
    return out, None, None


def _cmd_constants(args):
    ledger = build_ledger(_params(args, _single_B(args)), nu_C=args.nu_C)
    data = ledger.to_json()
    rows = [{k: c.get(k) for k in ("name", "value", "provenance", "paper_anchor")}
            for c in data["constants"]]
    return data, rows, ("name", "value", "provenance", "paper_anchor")


def _cmd_window(args):
    p = _params(args, _single_B(args))
    ledger = build_ledger(p)
    names = THEOREMS if args.theorem == "all" else (args.theorem,)
    out = {}
    for th in names:
        w = admissible_window(p, th, ledger, enforce_threshold=not args.ignore_threshold)
        entry = w.to_json()
        if args.d_xi is not None:
            ok, why = xi_admissible(p, th, args.d_xi, ledger)
            entry["d_xi"] = {"value": args.d_xi, "admissible": ok, "explanation": why}
        out[th] = entry
    out["provenance"] = {n: ledger.entries[n].provenance
                         for n in ("c_eff", "C_eff", "c_C", "C_C", "c_delta", "C_delta")}
    return out, None, None


def _emit_spectrum(args, res):
    if getattr(args, "vectors", None):
        res.write_vectors(args.vectors)
    return res.to_json(), None, None


def _cmd_solve_delta(args):
    p = _params(args, _single_B(args))
    if p.N == 1 and args.method == "exact":
        return _emit_spectrum(args, delta_exact_n1(p, _grid(args, p, "Delta")))
    if p.N == 1:
        return _emit_spectrum(args, solve_n1("delta", p, _grid(args, p, "Delta"),
                                             args.n_eigs, args.parity))
    if p.N == 2:
        # swap-even levels above the ground state crowd the threshold and
        # shift-invert stalls there, so only the ground state is computed
        n_eigs = args.n_eigs if args.sector == "antisymmetric" else 1
        res = delta_solve_n2(p.Z, _grid(args, p, "Delta"), n_eigs=n_eigs, sector=args.sector)
        return _emit_spectrum(args, res)
    raise ValidationError("the delta solvers handle N = 1 and N = 2")


def _cmd_solve(model):
    def run(args):
        p = _params(args, _single_B(args))
        res = solve_n1(model, p, _grid(args, p, "Coulomb" if model == "coulomb" else "Eff"),
                       args.n_eigs, args.parity)
        return _emit_spectrum(args, res)
    return run


def _cmd_compare(args):
    if args.N != 1:
        raise ValidationError("resolvent comparisons are one-electron only")
    theorem, column = (("T3_delta", "bound_T3") if args.model_b == "delta"
                       else ("T2_coulomb", "bound_T2"))
    rows = []
    ledger = None
    for B in args.B:
        p = _params(args, B)
        r = compare_resolvents(p, args.model_a, args.model_b, args.points, args.fraction)
        ledger = build_ledger(p)
        w = admissible_window(p, theorem, ledger, enforce_threshold=False)
        row = {k: r[k] for k in COMPARE_COLUMNS}
        row[column] = w.bound(r["d_xi"])
        row["within_bound"] = row["resolvent_distance"] <= row[column]
        rows.append(row)
    prov_name = "C_delta" if theorem == "T3_delta" else "C_C"
    result = {"model_a": args.model_a, "model_b": args.model_b, "fraction": args.fraction,
              "points": args.points, "rows": rows,
              "provenance": {prov_name: ledger.entries[prov_name].provenance}}
    return result, rows, COMPARE_COLUMNS + (column,)


def _cmd_fermion(args):
    p = _params(args, _single_B(args))
    dec = decompose_U_M(p)
    out = dec.to_json()
    if args.solve:
        spectra = fermionic_delta_spectrum(p)
        out["spectra"] = [{"block": list(k), **v.to_json()} for k, v in spectra.items()]
    return out, None, None


def _sweep_value(quantity: str, p: ProblemParams):
    if quantity == "alpha":
        return alpha_of_B(p.B).value
    if quantity.startswith("E0-"):
        model = quantity[3:]
        if model == "delta":
            return float(delta_exact_n1(p).eigenvalues[0])
        return float(solve_n1(model, p, n_eigs=1).eigenvalues[0])
    theorem = {"window-T1": "T1_eff", "window-T2": "T2_coulomb", "window-T3": "T3_delta"}[quantity]
    w = admissible_window(p, theorem, enforce_threshold=False)
    return {"lower": w.lower, "upper": w.upper, "nonempty": w.nonempty}


def _cmd_sweep(args):
    params = [_params(args, B) for B in args.B]
    # build the shared quadrature constants once before fanning out
    if args.quantity.startswith("window"):
        build_ledger(params[0])
    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        values = list(pool.map(lambda q: _sweep_value(args.quantity, q), params))
    rows = []
    for p, v in zip(params, values):
        row = {"B": p.B}
        row.update(v if isinstance(v, dict) else {"value": v})
        rows.append(row)
    cols = tuple(rows[0])
    return {"quantity": args.quantity, "rows": rows}, rows, cols


HANDLERS = {
    "alpha": _cmd_alpha,
    "basis": _cmd_basis,
    "potentials": _cmd_potentials,
    "constants": _cmd_constants,
    "window": _cmd_window,
    "solve-delta": _cmd_solve_delta,
    "solve-coulomb": _cmd_solve("coulomb"),
    "solve-eff": _cmd_solve("eff"),
    "compare": _cmd_compare,
    "fermion": _cmd_fermion,
    "sweep": _cmd_sweep,
}


# ------------------------------------------------------------------ output

def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore",
                            lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _render(args, result, rows, columns) -> str:
    if args.format == "csv":
        if rows is None:
            raise ValidationError(f"{args.command} has no tabular form; use --format json")
        return _csv_text(rows, columns)
    record = {"leff-schema": SCHEMA, "command": args.command, "version": version_string(),
              "params": {"B": args.B if len(args.B) > 1 else args.B[0], "Z": args.Z,
                         "N": args.N, "M": args.M},
              "result": result}
    try:
        return json.dumps(record, indent=2, allow_nan=False) + "\n"
    except ValueError as exc:
        raise AccuracyError(f"non-finite value in output: {exc}") from exc


def run(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.cache_dir is not None:
            set_cache_dir(args.cache_dir)
        _params(args)
        result, rows, columns = HANDLERS[args.command](args)
        text = _render(args, result, rows, columns)
        if args.output:
            write_text(args.output, text)
        else:
            sys.stdout.write(text)
        get_cache().flush()
        return 0
    except ValidationError as exc:
        print(f"leff: error: {exc}", file=sys.stderr)
        return 2
    except AccuracyError as exc:
        tol = f" (tolerance {exc.tolerance:g})" if exc.tolerance is not None else ""
        print(f"leff: accuracy failure{tol}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
