"""Command-line front end.

::

    caidgeo capacity  [--file F | --corpus NAME] [--tol T]
    caidgeo constants [--file F | --corpus NAME] [--theorem K]
    caidgeo certify   [--file F | --corpus NAME] [--theorem K] [--samples N] [--seed S] [--jobs J] [--out DIR]
    caidgeo corpus    [--quantum | --classical]

Corpus parameters are passed as extra ``--key value`` pairs, for example
``caidgeo constants --corpus zeta --n 64 --trunc 1000 --theorem 2``.

Reports are JSON on standard output (and ``report.json`` under ``--out``).
Exit codes: 0 success, 2 input error, 3 solver non-convergence, 4 partial
report (infinite third-moment coefficient), 5 certification violations.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import corpus
from .capacity import CapacitySolution, ConvergenceError, solve_capacity
from .certify import (Certificate, appendix_b_counterexample, certify_theorem1, certify_theorem2, converse_curve,
                      example1_fourth_power, example1_polygon_sweep, example2_truncation, sample_neighborhood)
from .constants import Theorem1Constants, Theorem2Constants, model_a, theorem1_constants, theorem2_constants
from .polyhedral import InfeasibleError, Polyhedron
from .quantum import CQChannel

log = logging.getLogger("caidgeo")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_PARTIAL, EXIT_VIOLATION = 0, 2, 3, 4, 5
SPEC_VERSION = 1
# relative growth of A between output truncations T/10 and T that marks it as divergent
A_GROWTH = 1e-3


class InputError(Exception):
    """Bad command-line input or spec file; maps to exit code 2."""


# ---------------------------------------------------------------------------
# spec files


def _number(x, path: str, precise: bool):
    if isinstance(x, bool):
        raise InputError(f"{path}: expected a number, got a boolean")
    if isinstance(x, (int, float)):
        return float(x)
    if precise and isinstance(x, str):
        try:
            return float(Fraction(x.strip()))
        except (ValueError, ZeroDivisionError):
            raise InputError(f"{path}: cannot parse {x!r} as a decimal or fraction") from None
    raise InputError(f"{path}: expected a number, got {type(x).__name__}")


def _matrix(x, path: str, precise: bool, complex_ok: bool = False) -> np.ndarray:
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise InputError(f"{path}: expected a non-empty array of arrays")
    width = len(x[0])
    rows = []
    for i, r in enumerate(x):
        if len(r) != width:
            raise InputError(f"{path}[{i}]: row has {len(r)} entries, expected {width}")
        row = []
        for j, v in enumerate(r):
            p = f"{path}[{i}][{j}]"
            if complex_ok and isinstance(v, list):
                if len(v) != 2:
                    raise InputError(f"{p}: complex entries are [re, im] pairs")
                row.append(complex(_number(v[0], p, precise), _number(v[1], p, precise)))
            else:
                row.append(_number(v, p, precise))
        rows.append(row)
    return np.array(rows, dtype=complex if complex_ok else float)


def _vector(x, path: str, precise: bool) -> np.ndarray:
    if not isinstance(x, list):
        raise InputError(f"{path}: expected an array")
    return np.array([_number(v, f"{path}[{i}]", precise) for i, v in enumerate(x)], dtype=float)


def _constraint(block, n: int, precise: bool) -> Polyhedron | None:
    if block is None:
        return None
    if not isinstance(block, dict):
        raise InputError("$.constraint: expected an object")
    unknown = set(block) - {"A", "b", "Aeq", "beq"}
    if unknown:
        raise InputError(f"$.constraint: unknown keys {sorted(unknown)}")
    parts = {}
    for mk, vk in (("A", "b"), ("Aeq", "beq")):
        if (mk in block) != (vk in block):
            raise InputError(f"$.constraint: {mk} and {vk} must be given together")
        if mk in block:
            M = _matrix(block[mk], f"$.constraint.{mk}", precise)
            v = _vector(block[vk], f"$.constraint.{vk}", precise)
            if M.shape[1] != n:
                raise InputError(f"$.constraint.{mk}: {M.shape[1]} columns, channel has {n} inputs")
            if M.shape[0] != v.size:
                raise InputError(f"$.constraint.{vk}: {v.size} entries, {mk} has {M.shape[0]} rows")
            parts[mk], parts[vk] = M, v
    if not parts:
        return None
    return Polyhedron(parts.get("A"), parts.get("b"), parts.get("Aeq"), parts.get("beq"), n=n)


def parse_spec(text: str, source: str = "<spec>") -> corpus.CorpusInstance:
    """Parse a JSON channel spec into a corpus instance.

    Raises :class:`InputError` with ``source:line:column`` for syntax errors
    and a JSON path for schema errors.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{source}: top level must be an object")
    if doc.get("version") != SPEC_VERSION:
        raise InputError(f"{source}: $.version must be {SPEC_VERSION}, got {doc.get('version')!r}")
    precise = bool(doc.get("precise", False))
    if "corpus" in doc:
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise InputError(f"{source}: $.params must be an object")
        return _load_corpus(doc["corpus"], params)
    kind = doc.get("kind")
    try:
        if kind == "classical":
            if "matrix" not in doc:
                raise InputError("$.matrix is required for a classical channel")
            W = _matrix(doc["matrix"], "$.matrix", precise)
            if np.any(W < 0) or np.any(np.abs(W.sum(axis=1) - 1) > 1e-9):
                raise InputError("$.matrix: every row must be a probability distribution")
            channel, n = W, W.shape[0]
        elif kind == "classical-quantum":
            ops = doc.get("operators")
            if not isinstance(ops, list) or not ops:
                raise InputError("$.operators must be a non-empty array of matrices")
            mats = [_matrix(o, f"$.operators[{i}]", precise, complex_ok=True) for i, o in enumerate(ops)]
            try:
                channel = CQChannel(tuple(mats))
            except ValueError as exc:
                raise InputError(f"$.operators: {exc}") from None
            n = len(mats)
        else:
            raise InputError(f"$.kind must be 'classical' or 'classical-quantum', got {kind!r}")
        lam = _constraint(doc.get("constraint"), n, precise)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from None
    info = {}
    labels = doc.get("labels")
    if isinstance(labels, dict):
        info.update({f"{k}_labels": list(v) for k, v in labels.items() if isinstance(v, list)})
    elif isinstance(labels, list):
        info["input_labels"] = list(labels)
    return corpus.CorpusInstance(Path(source).stem, channel, lam, {}, info)


def _coerce(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def _load_corpus(name: str, params: dict) -> corpus.CorpusInstance:
    try:
        return corpus.load(name, **params)
    except corpus.UnknownCorpusName as exc:
        raise InputError(str(exc)) from None
    except TypeError as exc:
        raise InputError(f"bad parameters for {name!r}: {exc}") from None
    except (ValueError, InfeasibleError) as exc:
        raise InputError(f"{name}: {exc}") from None


def _extra_params(extra: list[str]) -> dict:
    params, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise InputError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        elif i + 1 < len(extra) and not extra[i + 1].startswith("--"):
            val = extra[i + 1]
            i += 2
        else:
            raise InputError(f"parameter {tok} needs a value")
        params[key.replace("-", "_")] = _coerce(val)
    return params


def _instance(args, extra) -> corpus.CorpusInstance:
    params = _extra_params(extra)
    if bool(args.file) == bool(args.corpus):
        raise InputError("give exactly one of --file or --corpus")
    if args.file:
        if params:
            raise InputError(f"corpus parameters {sorted(params)} need --corpus")
        try:
            text = Path(args.file).read_text()
        except OSError as exc:
            raise InputError(f"{args.file}: {exc.strerror}") from None
        return parse_spec(text, args.file)
    return _load_corpus(args.corpus, params)


# ---------------------------------------------------------------------------
# serialization


def _plain(x):
    """Convert numpy and complex values to JSON-ready builtins (complex as [re, im])."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def dumps(report: dict) -> str:
    return json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in r) for r in rows]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _capacity_block(inst: corpus.CorpusInstance, sol: CapacitySolution) -> dict:
    labels = inst.info.get("input_labels")
    verts = [sol.lift(v) for v in sol.caid_polytope.vertices]
    block = {
        "capacity": sol.capacity,
        "center": sol.center,
        "optimal_vertices": verts,
        "maximizer": sol.maximizer,
        "support": list(sol.support),
        "duality_gap": sol.gap,
        "notes": list(sol.notes),
    }
    if labels is not None:
        block["support_labels"] = [labels[i] for i in sol.support]
    return block


def _records(records: dict) -> dict:
    return {k: {"value": r.value, "method": r.method, "certified": r.certified} for k, r in records.items()}


def _theorem1_block(c: Theorem1Constants) -> dict:
    return {"beta": c.beta, "gamma": c.gamma, "delta": c.delta, "records": _records(c.records)}


def _theorem2_block(c: Theorem2Constants, sol: CapacitySolution) -> dict:
    return {
        "gamma1": c.gamma1,
        "gamma2": c.gamma2,
        "delta": c.delta,
        "branch": "linear" if c.gamma1 > 0 else "quadratic",
        "a": c.a_coeff,
        "trace_sigma": c.trace_sigma,
        "per_face": [{"signature": [list(s) for s in f.signature], "base_point": sol.lift(f.base_point),
                      "phi": f.phi, "delta": f.delta, "branch": f.branch} for f in c.per_face],
        "records": _records(c.records),
        "notes": list(c.notes),
    }


def _certificate_block(cert: Certificate) -> dict:
    return {"theorem": cert.theorem, "samples": cert.samples, "violations": cert.violations,
            "warnings": cert.minor, "worst_margin": cert.worst_margin, "ok": cert.ok,
            "constants": cert.constants}


# ---------------------------------------------------------------------------
# pipeline


def _theorem_family(theorem: int, inst: corpus.CorpusInstance) -> int:
    if theorem not in (1, 2, 3, 4):
        raise InputError("--theorem must be 1, 2, 3 or 4")
    if inst.quantum and theorem in (1, 2):
        raise InputError(f"classical-quantum channel: use --theorem {theorem + 2}")
    if not inst.quantum and theorem in (3, 4):
        raise InputError(f"classical channel: use --theorem {theorem - 2}")
    return 1 if theorem in (1, 3) else 2


def _third_moment(inst: corpus.CorpusInstance, sol: CapacitySolution, tol: float) -> tuple[float, bool]:
    """``A`` and whether it is only a lower bound of a divergent quantity.

    Channels with truncated outputs are re-solved at a tenth of the
    truncation; growth beyond ``A_GROWTH`` marks ``A`` as lower-bound-only.
    """
    a = model_a(sol.model, sol.center)
    if inst.retruncate is None or not math.isfinite(a):
        return a, not math.isfinite(a)
    T = int(inst.params["trunc"])
    if T < 10:
        return a, False
    coarse = inst.retruncate(T // 10)
    csol = solve_capacity(coarse.channel, coarse.constraint, tol=tol)
    a_coarse = model_a(csol.model, csol.center)
    log.info("A at truncation %d: %.6g, at %d: %.6g", T // 10, a_coarse, T, a)
    return a, a > a_coarse * (1 + A_GROWTH)


def _provenance(args, sol: CapacitySolution | None, inst: corpus.CorpusInstance) -> dict:
    out = {"tol": args.tol, "source": args.file or args.corpus, "params": inst.params}
    if sol is not None:
        out["iterations"] = sol.iterations
    if getattr(args, "samples", None) is not None and args.command == "certify":
        out["samples"] = args.samples
        out["seed"] = args.seed
    return out


def run_capacity(args, inst) -> tuple[dict, int]:
    sol = solve_capacity(inst.channel, inst.constraint, tol=args.tol)
    return {"command": "capacity", "capacity": _capacity_block(inst, sol),
            "provenance": _provenance(args, sol, inst)}, EXIT_OK


def _constants(args, inst, sol, family: int) -> tuple[dict, object, int]:
    if family == 1:
        c = theorem1_constants(sol)
        return _theorem1_block(c), c, EXIT_OK
    a, lower_only = _third_moment(inst, sol, args.tol)
    if lower_only:
        c = theorem2_constants(sol, a=math.inf)
        block = _theorem2_block(c, sol)
        block["a"] = a
        block["a_lower_bound_only"] = True
        block["notes"] = [f"A grows with the output truncation ({a:.6g} is a lower bound); Gamma2 and delta withheld"]
        return block, c, EXIT_PARTIAL
    c = theorem2_constants(sol, a=a)
    block = _theorem2_block(c, sol)
    block["a_lower_bound_only"] = False
    return block, c, EXIT_OK if math.isfinite(a) else EXIT_PARTIAL


def run_constants(args, inst) -> tuple[dict, int]:
    family = _theorem_family(args.theorem, inst)
    sol = solve_capacity(inst.channel, inst.constraint, tol=args.tol)
    block, _, code = _constants(args, inst, sol, family)
    block["theorem"] = args.theorem
    return {"command": "constants", "capacity": _capacity_block(inst, sol), "constants": block,
            "provenance": _provenance(args, sol, inst)}, code


def _special_blocks(args, inst) -> dict:
    out = {}
    key = corpus.ALIASES.get(args.corpus or "", args.corpus)
    if key == "example-1":
        ratio, rep = example1_fourth_power()
        out["fourth_power"] = {
            "ratio_limit": ratio, "observed_order": rep.observed_order, "fitted_exponent": rep.fitted_exponent,
            "taus": rep.taus, "distances": rep.distances, "gaps": rep.gaps, "ratios": rep.ratios,
            "distance_formula_error": rep.distance_formula_error,
            "output_formula_error": rep.output_formula_error,
            "quadratic_coefficients": rep.quadratic_coefficients, "quadratic_taus": rep.quadratic_taus,
        }
        out["polygon_sweep"] = example1_polygon_sweep()
    elif key == "appendix-b":
        rep = appendix_b_counterexample()
        out["refutation"] = {
            "epsilon": rep.epsilon, "capacity": rep.capacity, "capacity_error": rep.capacity_error,
            "gradient_deviation": rep.gradient_deviation, "kernel_dim": rep.kernel_dim,
            "u_in_kernel": rep.u_in_kernel, "u_dot_gradient": rep.u_dot_gradient,
            "refuting_inputs": [{"input": x, "P": p, "v0": v0, "v0_norm": nv, "v0_dot_gradient": vg}
                                for x, p, v0, nv, vg in rep.refuting_inputs],
            "kernel_projection_bound_refuted": any(nv > 0 and abs(vg) <= 1e-9
                                                   for _, _, _, nv, vg in rep.refuting_inputs),
        }
    elif key == "example-2":
        rep = example2_truncation(int(inst.params.get("max_index", 8)))
        out["truncation"] = {
            "capacity": rep.capacity, "infos": rep.infos, "distances": rep.distances,
            "increasing": rep.increasing, "segment_checked": rep.segment_checked,
        }
    return out


def run_certify(args, inst) -> tuple[dict, int]:
    family = _theorem_family(args.theorem, inst)
    if args.samples < 0:
        raise InputError("--samples must be non-negative")
    sol = solve_capacity(inst.channel, inst.constraint, tol=args.tol)
    block, consts, code = _constants(args, inst, sol, family)
    block["theorem"] = args.theorem
    report = {"command": "certify", "capacity": _capacity_block(inst, sol), "constants": block,
              "provenance": _provenance(args, sol, inst)}
    report.update(_special_blocks(args, inst))
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    curves = []
    if family == 1:
        samples = sample_neighborhood(inst.constraint, sol, consts.delta, args.samples, args.seed, args.jobs)
        cert = certify_theorem1(inst.channel, inst.constraint, sol, consts, samples)
    elif consts.gamma1 == 0 and consts.gamma2 is None:
        report["certification"] = None
        report["notes"] = ["third-moment coefficient unavailable: quadratic branch not certified"]
        return report, EXIT_PARTIAL
    else:
        delta = consts.delta if consts.delta else _linear_radius(sol)
        samples = sample_neighborhood(inst.constraint, sol, delta, args.samples, args.seed, args.jobs)
        cert = certify_theorem2(inst.channel, inst.constraint, sol, consts, samples)
        for which in (["linear"] if consts.gamma1 > 0 else ["linear", "quadratic"]):
            curves.append(converse_curve(inst.channel, sol, consts, which))
    report["certification"] = _certificate_block(cert)
    report["certification"]["converse_curves"] = [
        {"which": c.which, "lower_ok": c.lower_ok, "taus": c.tau_grid, "info": c.info_values,
         "upper": c.upper_bound_values, "lower": c.lower_envelope_values} for c in curves]
    if out_dir is not None:
        write_csv(out_dir / "samples.csv", ["distance", "I", "bound", "margin"], cert.rows)
        for c in curves:
            write_csv(out_dir / f"curve_{c.which}.csv", ["tau", "I", "upper", "lower"],
                      zip(c.tau_grid, c.info_values, c.upper_bound_values, c.lower_envelope_values))
    if cert.minor:
        log.warning("%d samples breach the bound by less than 1e-6", cert.minor)
    if cert.violations or not all(c.lower_ok for c in curves):
        return report, EXIT_VIOLATION
    return report, code


def _linear_radius(sol: CapacitySolution) -> float:
    """Sampling radius for the linear bound, which holds on the whole constraint set."""
    V = sol.constraint.vertices
    return float(np.max(np.linalg.norm(V - sol.maximizer[list(sol.support)], axis=1)))


def run_corpus(args) -> tuple[str, int]:
    quantum = True if args.quantum else (False if args.classical else None)
    entries = corpus.corpus_entries(quantum)
    width = max(len(e.name) for e in entries)
    lines = [f"{e.name:<{width}}  {'cq' if e.quantum else 'classical':<9}  {e.description}" for e in entries]
    return "\n".join(lines) + "\n", EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="caidgeo", description="Geometry of mutual information near optimal inputs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, hlp in (("capacity", "capacity, center and optimal set"),
                      ("constants", "decay constants of one theorem"),
                      ("certify", "sample-based certification of one theorem")):
        p = sub.add_parser(name, help=hlp)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--file", help="JSON channel spec")
        src.add_argument("--corpus", help="built-in channel name (see 'caidgeo corpus')")
        p.add_argument("--tol", type=float, default=1e-10, help="duality-gap tolerance (default 1e-10)")
        p.add_argument("--out", help="directory for report.json and CSV files")
        if name != "capacity":
            p.add_argument("--theorem", type=int, default=1, help="1 or 2 (classical), 3 or 4 (classical-quantum)")
        if name == "certify":
            p.add_argument("--samples", type=int, default=10_000)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--jobs", type=int, default=1, help="worker processes for sampling")
    p = sub.add_parser("corpus", help="list built-in channels")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--quantum", action="store_true", help="only classical-quantum entries")
    g.add_argument("--classical", action="store_true", help="only classical entries")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("CAIDGEO_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    log.setLevel(levels.get(level, logging.ERROR))
    if not log.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        log.addHandler(handler)
    if level not in levels:
        log.error("unknown CAIDGEO_LOG value %r; using 'error'", level)


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "corpus":
            if extra:
                raise InputError(f"unexpected arguments {extra}")
            text, code = run_corpus(args)
            sys.stdout.write(text)
            return code
        inst = _instance(args, extra)
        runner = {"capacity": run_capacity, "constants": run_constants, "certify": run_certify}[args.command]
        report, code = runner(args, inst)
    except InputError as exc:
        print(f"caidgeo: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleError as exc:
        print(f"caidgeo: error: infeasible constraint: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"caidgeo: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # preconditions of the requested computation fail on this input
        print(f"caidgeo: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = dumps(report)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
