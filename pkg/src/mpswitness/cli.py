"""Command-line front end: dimension tables, witness bounds, feasibility.

Every command resolves its configuration (including the seed) before any
computation, embeds it in the output next to the artifact version and
wall-clock timings, and derives all randomness from the seed, so re-running
a command reproduces the numeric fields exactly.

Exit codes: 0 success, 1 usage or input error, 2 infeasible verdict,
3 solver indeterminate, 4 resource budget exceeded.
"""

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .mps import DEFAULT_BUDGET, LocalHamiltonian
from .numerics import ResourceBudgetError, make_rng
from .spans import (
    dim_upper_bound,
    mps_span_basis,
    mps_span_dim_exact,
    quotient_basis,
    quotient_dim_exact,
)
from .witness import (
    feasibility_test,
    heisenberg,
    heisenberg_term,
    imps_lower_bound,
    majumdar_ghosh,
    majumdar_ghosh_term,
    mps_lower_bound,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INDETERMINATE = 3
EXIT_RESOURCE = 4


def _budget():
    return int(os.environ.get("MPSWITNESS_BUDGET", DEFAULT_BUDGET))


def _parse_range(text):
    """Accept '7', '5..15', or '5,6,9'."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    if "," in text:
        return [int(x) for x in text.split(",") if x.strip()]
    return [int(text)]


def _emit(doc, fmt, out, csv_writer=None):
    """Write the report to `out` (or stdout) as JSON or CSV."""
    if fmt == "csv" and csv_writer is not None:
        buf = io.StringIO()
        csv_writer(csv.writer(buf))
        text = buf.getvalue()
    else:
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dims_table(cfg):
    """Shared driver for the two dimension tables."""
    seed = cfg.seed
    entries = []
    timings = {}
    overrun = False
    for D in _parse_range(cfg.D):
        for m in _parse_range(cfg.m):
            t0 = time.time()
            try:
                if cfg.command == "dims" and cfg.mode == "float":
                    dim = mps_span_basis(cfg.d, D, m, rng=make_rng(seed), budget=_budget()).dim
                elif cfg.command == "dims":
                    dim = mps_span_dim_exact(cfg.d, D, m, seed=seed, budget=_budget())
                elif cfg.mode == "float":
                    basis, _ = quotient_basis(cfg.d, D, m, rng=make_rng(seed), budget=_budget())
                    dim = basis.dim
                else:
                    dim = quotient_dim_exact(cfg.d, D, m, seed=seed, budget=_budget())
            except ResourceBudgetError:
                dim = None
                overrun = True
            timings[f"D{D}_m{m}"] = round(time.time() - t0, 3)
            entry = {"D": D, "m": m, "dim": dim}
            if cfg.command == "dims":
                entry["cap"] = dim_upper_bound(cfg.d, D, m)
            entries.append(entry)

    def write_csv(writer):
        ms = _parse_range(cfg.m)
        writer.writerow(["D\\m"] + ms)
        for D in _parse_range(cfg.D):
            row = [f"D={D}"]
            for m in ms:
                got = next(e["dim"] for e in entries if e["D"] == D and e["m"] == m)
                row.append("x" if got is None else got)
            writer.writerow(row)
        if cfg.command == "dims":
            for D in _parse_range(cfg.D):
                row = [f"D={D} cap"]
                for m in ms:
                    row.append(next(e["cap"] for e in entries if e["D"] == D and e["m"] == m))
                writer.writerow(row)

    doc = {
        "config": {
            "command": cfg.command,
            "d": cfg.d,
            "D": cfg.D,
            "m": cfg.m,
            "mode": cfg.mode,
            "seed": seed,
            "format": cfg.format,
        },
        "result": {"entries": entries},
        "meta": {"version": __version__, "seed": seed, "timings": timings},
    }
    _emit(doc, cfg.format, cfg.out, write_csv)
    return EXIT_RESOURCE if overrun else EXIT_OK


def _load_operator_doc(doc, n, d):
    """Hamiltonian from a JSON document: named, windowed terms, or dense."""
    if isinstance(doc, str):
        if doc == "heisenberg":
            return heisenberg(n)
        if doc == "mg":
            return majumdar_ghosh(n)
        raise ValueError(f"unknown named Hamiltonian '{doc}'")
    if "terms" in doc:
        terms = [(int(s), int(w), np.array(h)) for s, w, h in doc["terms"]]
        return LocalHamiltonian(n=doc.get("n", n), d=doc.get("d", d), terms=terms)
    if "matrix" in doc:
        return np.array(doc["matrix"], dtype=float)
    raise ValueError("operator document needs 'terms' or 'matrix'")


def _resolve_hamiltonian(name, n):
    if name == "heisenberg":
        return heisenberg(n)
    if name == "mg":
        return majumdar_ghosh(n)
    with open(name, encoding="utf-8") as fh:
        return _load_operator_doc(json.load(fh), n, 2)


def cmd_bound(cfg):
    rng = make_rng(cfg.seed)
    cuts = _parse_range(cfg.cuts) if cfg.cuts else None
    t0 = time.time()
    try:
        if cfg.imps:
            N = cfg.N if cfg.N is not None else cfg.n
            if N is None:
                raise ValueError("--imps needs --N (window length)")
            if cfg.ham == "heisenberg":
                term = heisenberg_term()
            elif cfg.ham == "mg":
                term = majumdar_ghosh_term()
            else:
                raise ValueError("--imps supports the named Hamiltonians only")
            bound = imps_lower_bound(
                term, cfg.D, N, cuts=cuts, ppt=cfg.ppt, use_span=cfg.span, rng=rng
            )
            per_term = bound.value
        else:
            if cfg.n is None:
                raise ValueError("finite chains need --n")
            H = _resolve_hamiltonian(cfg.ham, cfg.n)
            if not cfg.ppt:
                bound = mps_lower_bound(H, cfg.D, n=cfg.n, ppt=False, rng=rng)
            else:
                bound = mps_lower_bound(H, cfg.D, n=cfg.n, cuts=cuts, ppt=True, rng=rng)
            terms = len(H.terms) if isinstance(H, LocalHamiltonian) else 1
            per_term = bound.value / terms
    except ResourceBudgetError as err:
        print(f"resource budget exceeded: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except RuntimeError as err:
        print(f"solver did not reach optimality: {err}", file=sys.stderr)
        return EXIT_INDETERMINATE
    elapsed = time.time() - t0

    cert_path = None
    if cfg.out and bound.certificate is not None:
        cert_path = cfg.out + ".cert.json"
        with open(cert_path, "w", encoding="utf-8") as fh:
            fh.write(bound.certificate.to_json())
    doc = {
        "config": {
            "command": "bound",
            "ham": cfg.ham,
            "D": cfg.D,
            "n": cfg.n,
            "N": cfg.N,
            "imps": cfg.imps,
            "cuts": cuts,
            "ppt": cfg.ppt,
            "span": cfg.span,
            "seed": cfg.seed,
        },
        "result": {
            "value": bound.value,
            "value_per_term": per_term,
            "cuts_used": list(bound.cuts),
            "status": bound.status,
            "gap": bound.gap,
            "iterations": bound.iterations,
            "certificate_path": cert_path,
            "certificate_residual": bound.certificate.residual
            if bound.certificate
            else None,
        },
        "meta": {
            "version": __version__,
            "seed": cfg.seed,
            "timings": {"total": round(elapsed, 3)},
        },
    }
    _emit(doc, "json", cfg.out)
    return EXIT_OK


def cmd_feasible(cfg):
    rng = make_rng(cfg.seed)
    with open(cfg.data, encoding="utf-8") as fh:
        data = json.load(fh)
    n = cfg.n if cfg.n is not None else data.get("n")
    if n is None:
        raise ValueError("chain length missing: pass --n or put 'n' in the data file")
    constraints = []
    for item in data["constraints"]:
        obs = _load_operator_doc(item["observable"], n, 2)
        if "scale" in item:
            scale = item["scale"]
            if not isinstance(scale, (int, float)) or isinstance(scale, bool):
                raise ValueError(f"constraint scale must be a number, got {scale!r}")
            obs = (
                obs.to_sparse() * scale
                if isinstance(obs, LocalHamiltonian)
                else obs * scale
            )
        constraints.append((obs, item["value"], item["tolerance"]))
    cuts = _parse_range(cfg.cuts) if cfg.cuts else None
    t0 = time.time()
    try:
        report = feasibility_test(constraints, cfg.D, n, cuts=cuts, ppt=cfg.ppt, rng=rng)
    except ResourceBudgetError as err:
        print(f"resource budget exceeded: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    elapsed = time.time() - t0
    doc = {
        "config": {
            "command": "feasible",
            "data": cfg.data,
            "D": cfg.D,
            "n": n,
            "cuts": cuts,
            "ppt": cfg.ppt,
            "seed": cfg.seed,
        },
        "result": json.loads(report.to_json()),
        "meta": {
            "version": __version__,
            "seed": cfg.seed,
            "timings": {"total": round(elapsed, 3)},
        },
    }
    _emit(doc, "json", cfg.out)
    if report.feasible is None:
        return EXIT_INDETERMINATE
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def _build_parser():
    top = argparse.ArgumentParser(
        prog="mpswitness",
        description="Bond-dimension spans, quotients, and energy witnesses.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output file (default stdout)")

    for name, blurb in (
        ("dims", "state-span dimensions with monomial caps"),
        ("qdims", "central quotient dimensions"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--d", type=int, default=2)
        p.add_argument("--D", required=True, help="bond dimension or range (2..4)")
        p.add_argument("--m", required=True, help="window length or range (5..15)")
        p.add_argument("--mode", choices=("exact", "float"), default="exact")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        common(p)
        p.set_defaults(func=_dims_table)

    p = sub.add_parser("bound", help="witness lower bound for a Hamiltonian")
    p.add_argument("--ham", required=True, help="heisenberg | mg | JSON file")
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--n", type=int, default=None, help="finite chain length")
    p.add_argument("--N", type=int, default=None, help="window length for --imps")
    p.add_argument("--imps", action="store_true", help="infinite-chain hierarchy")
    p.add_argument("--cuts", default=None, help="cut windows, e.g. 5,6")
    p.add_argument("--ppt", dest="ppt", action="store_true", default=True)
    p.add_argument("--no-ppt", dest="ppt", action="store_false")
    p.add_argument("--span", dest="span", action="store_true", default=False)
    p.add_argument("--no-span", dest="span", action="store_false")
    common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("feasible", help="test measured data against a bond-D model")
    p.add_argument("data", help="JSON file with constraints")
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--cuts", default=None)
    p.add_argument("--ppt", dest="ppt", action="store_true", default=True)
    p.add_argument("--no-ppt", dest="ppt", action="store_false")
    common(p)
    p.set_defaults(func=cmd_feasible)
    return top


def main(argv=None):
    cfg = _build_parser().parse_args(argv)
    try:
        return cfg.func(cfg)
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
