"""Command-line front end.

Subcommands: apply-op, eval-kernel, verify-estimates, quad-selftest, solve,
seminorm.  Every JSON output embeds the fully resolved configuration for
provenance and validates against the schema files shipped under
``czfrac/schemas``.  Exit codes: 0 success, 1 verification failure
(a pass=false verdict), 2 usage or configuration error, 3 numerical-engine
error.  All error paths print one machine-parsable line to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import core
from .core import (
    CzfracError,
    EngineError,
    Field,
    GridSpec,
    ParameterError,
    parse_kernel_spec,
    read_field,
    write_field,
)
from .czkernel import EstimateConfig, eval_A
from .nonloc import apply_T_composite, neumann_solve
from .singquad import QuadConfig, integrate_singular
from .spectral import (
    apply_multiplier,
    frac_laplacian,
    pv_frac_laplacian,
    riesz_potential,
    riesz_transform,
)
from . import verify as _verify

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_ENGINE = 3


@dataclass
class RunConfig:
    """Fully resolved invocation: flags override config-file values override
    defaults; echoed into every JSON output."""

    command: str
    options: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"command": self.command, "options": self.options}


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def emit_json(payload: dict, path: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, default=_json_default, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def emit_csv(rows, header, path: Optional[str]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def validate_payload(payload: dict, schema_name: str) -> None:
    """Validate against the shipped schema when jsonschema is available."""
    try:
        import jsonschema
    except ImportError:  # validation is a test-time convenience
        return
    schema_path = os.path.join(os.path.dirname(__file__), "schemas", schema_name)
    with open(schema_path) as fh:
        schema = json.load(fh)
    jsonschema.validate(json.loads(json.dumps(payload, default=_json_default)), schema)


def _resolved(args: argparse.Namespace, parser_defaults: dict) -> dict:
    """flags > config file > parser defaults."""
    cfg_file = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg_file = json.load(fh)
    out = {}
    for key, default in parser_defaults.items():
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            out[key] = flag_val
        elif key in cfg_file:
            out[key] = cfg_file[key]
        else:
            out[key] = default
    return out


def _quad_config(opts: dict, delta_scale: float = 1.0) -> QuadConfig:
    return QuadConfig(
        trunc_radius=opts["trunc_radius"] * delta_scale,
        base_cells=opts["base_cells"],
        refine_depth=opts["refine_depth"],
        ring_growth=opts["ring_growth"],
        tail_rings=opts["tail_rings"],
        diag_depth=opts["diag_depth"],
        excision=opts["excision"],
    )


_QUAD_DEFAULTS = {
    "trunc_radius": 16.0,
    "base_cells": 48,
    "refine_depth": 18,
    "ring_growth": 3.0,
    "tail_rings": 12,
    "diag_depth": 9,
    "excision": 0.0,
}


def _add_quad_flags(p: argparse.ArgumentParser):
    p.add_argument("--trunc-radius", dest="trunc_radius", type=float)
    p.add_argument("--base-cells", dest="base_cells", type=int)
    p.add_argument("--refine-depth", dest="refine_depth", type=int)
    p.add_argument("--ring-growth", dest="ring_growth", type=float)
    p.add_argument("--tail-rings", dest="tail_rings", type=int)
    p.add_argument("--diag-depth", dest="diag_depth", type=int)
    p.add_argument("--excision", dest="excision", type=float)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with default option values")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: cores)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-csv", dest="out_csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="czfrac", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("apply-op", help="apply a multiplier operator to a field")
    p.add_argument("--op", required=True, choices=["laps", "riesz-pot", "riesz-tr"])
    p.add_argument("--s", type=float)
    p.add_argument("--axis", type=int, default=None)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--pv", action="store_true", help="use the direct P.V. route (laps only)")
    _add_common(p)

    p = sub.add_parser("eval-kernel", help="evaluate the pair-difference kernel A")
    p.add_argument("--K", dest="kernel", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--s1", type=float, required=True)
    p.add_argument("--z1", help="comma-separated point")
    p.add_argument("--z2", help="comma-separated point")
    p.add_argument("--sweep", help="dmin:dmax:count separation sweep")
    p.add_argument("--tail-study", action="store_true", help="double the radius and report the shift")
    _add_quad_flags(p)
    _add_common(p)

    p = sub.add_parser("verify-estimates", help="run one verification check")
    p.add_argument(
        "--check",
        required=True,
        choices=["size", "hoelder", "M-decay", "opnorm", "bmo", "lemmas"],
    )
    p.add_argument("--K", dest="kernel", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--s1", type=float, default=None)
    p.add_argument("--resolve", type=float, default=None, help="cap on the cell width (kernel feature scale)")
    _add_common(p)

    p = sub.add_parser("quad-selftest", help="run the example integrals and lemma samplers")
    _add_common(p)

    p = sub.add_parser("solve", help="solve the nonlocal equation with the series solver")
    p.add_argument("--K", dest="kernel", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--s1", type=float, required=True)
    p.add_argument("--rhs", help="field file with the right side g")
    p.add_argument("--rhs-laps", nargs=2, metavar=("S", "FIELD"), help="construct g as the order-S derivative of FIELD")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--out-field", dest="out_field")
    _add_common(p)

    p = sub.add_parser("seminorm", help="evaluate a seminorm of a field")
    p.add_argument("--kind", required=True, choices=["gagliardo", "bmo", "weak-l1"])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--p", type=float, default=None)
    _add_common(p)

    return ap


def _threads(opts) -> int:
    t = opts.get("threads")
    return int(t) if t else (os.cpu_count() or 1)


def _cmd_apply_op(args) -> int:
    opts = _resolved(args, {"threads": None, "seed": 0})
    f = read_field(args.infile)
    if args.op == "laps":
        if args.s is None:
            raise ParameterError("--s is required for laps")
        out = (
            pv_frac_laplacian(f, args.s)
            if args.pv
            else apply_multiplier(frac_laplacian(args.s), f)
        )
    elif args.op == "riesz-pot":
        if args.s is None:
            raise ParameterError("--s is required for riesz-pot")
        out = apply_multiplier(riesz_potential(args.s), f)
    else:
        axis = 0 if args.axis is None else args.axis
        out = apply_multiplier(riesz_transform(axis), f)
    write_field(out, args.outfile)
    cfg = RunConfig("apply-op", {"op": args.op, "s": args.s, "axis": args.axis, "pv": bool(args.pv), **opts})
    payload = {
        "config": cfg.as_dict(),
        "result": {"outfile": args.outfile, "l2": core.field_norms(out, 2.0)},
    }
    validate_payload(payload, "apply_op.schema.json")
    emit_json(payload, args.out_json)
    return EXIT_OK


def _parse_point(text: str, n: int):
    vals = [float(v) for v in text.split(",") if v]
    if len(vals) != n:
        raise ParameterError(f"point {text!r} has {len(vals)} coordinates, expected {n}")
    return np.array(vals)


def _cmd_eval_kernel(args) -> int:
    opts = _resolved(args, {**_QUAD_DEFAULTS, "threads": None, "seed": 0, "n": 1})
    n = int(opts["n"])
    params = core.make_params(n, args.s, args.s1)
    K = parse_kernel_spec(args.kernel)
    rows = []
    if args.sweep:
        dmin, dmax, count = args.sweep.split(":")
        deltas = np.geomspace(float(dmin), float(dmax), int(count))
        ratio = opts["trunc_radius"]

        def one(delta):
            z1 = np.zeros(n)
            z2 = np.zeros(n)
            z1[0], z2[0] = -delta / 2.0, delta / 2.0
            cfg = _quad_config({**opts, "trunc_radius": ratio}, delta_scale=delta)
            v, e = eval_A(K, params, z1, z2, cfg)
            return delta, v, e

        for d, v, e in _verify.parallel_map(one, list(deltas), _threads(opts)):
            rows.append((d, v, e))
    else:
        if not (args.z1 and args.z2):
            raise ParameterError("either --sweep or both --z1 and --z2 are required")
        z1 = _parse_point(args.z1, n)
        z2 = _parse_point(args.z2, n)
        cfg = _quad_config(opts)
        v, e = eval_A(K, params, z1, z2, cfg)
        if args.tail_study:
            import dataclasses

            cfg2 = dataclasses.replace(cfg, trunc_radius=2.0 * cfg.trunc_radius)
            v2, _ = eval_A(K, params, z1, z2, cfg2)
            rows.append((float(np.linalg.norm(z1 - z2)), v, e + abs(v2 - v)))
        else:
            rows.append((float(np.linalg.norm(z1 - z2)), v, e))
    cfgd = RunConfig("eval-kernel", {"kernel": K.name, "s": args.s, "s1": args.s1, **opts}).as_dict()
    payload = {
        "config": cfgd,
        "result": {"rows": [{"delta": d, "A": v, "est_error": e} for d, v, e in rows]},
    }
    validate_payload(payload, "eval_kernel.schema.json")
    emit_json(payload, args.out_json)
    if args.out_csv:
        emit_csv(rows, ["delta", "A", "est_error"], args.out_csv)
    return EXIT_OK


def _cmd_verify(args) -> int:
    opts = _resolved(
        args,
        {"threads": None, "seed": 7, "n": 1, "s": 0.5, "s1": None, "kernel": "constant:1", "resolve": None},
    )
    n = int(opts["n"])
    s = float(opts["s"])
    s1 = float(opts["s1"]) if opts["s1"] is not None else s
    params = core.make_params(n, s, s1)
    K = parse_kernel_spec(opts["kernel"])
    threads = _threads(opts)
    seed = int(opts["seed"])
    check = args.check
    if check == "size":
        verdict = _verify.check_size(K, params, threads=threads, resolve=opts["resolve"])
        sweep_rows = [(r["delta"], r["A"], r["err"]) for r in verdict["sweep"]]
        header = ["delta", "A", "est_error"]
    elif check == "hoelder":
        verdict = _verify.check_hoelder(K, params, threads=threads, resolve=opts["resolve"])
        sweep_rows = [(r["slot"], r["h"], r["dA"], r["err"], r["ratio"]) for r in verdict["sweep"]]
        header = ["slot", "h", "dA", "est_error", "ratio"]
    elif check == "M-decay":
        verdict = _verify.check_m_decay(K, params, threads=threads)
        sweep_rows = [
            (l, r["delta"], r["M"], r["err"])
            for l in (1, 2)
            for r in verdict["majorants"][f"l{l}"]["sweep"]
        ]
        header = ["l", "delta", "M", "est_error"]
    elif check == "opnorm":
        verdict = _verify.check_opnorm(params, seed=seed)
        sweep_rows = [(verdict["measured"], verdict["doubled_estimate"])]
        header = ["estimate", "doubled_estimate"]
    elif check == "bmo":
        verdict = _verify.check_bmo(params)
        sweep_rows = [(r["points"], r["ratio"]) for r in verdict["ratios"]]
        header = ["points", "ratio"]
    else:
        verdict = _verify.check_lemmas(seed=seed)
        sweep_rows = [
            (r["sampler"], r["growth"], r["max_ratio"][max(r["max_ratio"], key=int)])
            for r in verdict["samplers"]
        ]
        header = ["sampler", "growth", "max_ratio"]
    cfgd = RunConfig("verify-estimates", {"check": check, **opts}).as_dict()
    payload = {"config": cfgd, "verdict": verdict}
    validate_payload(payload, "verdict.schema.json")
    emit_json(payload, args.out_json)
    if args.out_csv:
        emit_csv(sweep_rows, header, args.out_csv)
    return EXIT_OK if verdict["pass"] else EXIT_VERIFY_FAIL


def _cmd_quad_selftest(args) -> int:
    opts = _resolved(args, {"threads": None, "seed": 0})
    seed = int(opts["seed"])
    reports = []

    cfg1 = QuadConfig(trunc_radius=1.0, base_cells=16, refine_depth=30, tail_rings=0)
    v, e = integrate_singular(
        lambda p: np.abs(p[:, 0]) ** -0.5, [(-1.0, 1.0)], [np.zeros(1)], False, cfg1
    )
    reports.append({"name": "inverse_sqrt_point", "value": v, "est_error": e, "target": 4.0})

    cfg2 = QuadConfig(trunc_radius=1.0, base_cells=16, refine_depth=12, tail_rings=0, diag_depth=12)
    v, e = integrate_singular(
        lambda x, y: np.abs(x[:, 0] - y[:, 0]) ** -0.5, [(-1.0, 1.0)], [], True, cfg2
    )
    reports.append(
        {
            "name": "inverse_sqrt_diagonal",
            "value": v,
            "est_error": e,
            "target": 16.0 * np.sqrt(2.0) / 3.0,
        }
    )

    for rep in (
        _verify.sample_fundthm(100_000, seed),
        _verify.sample_mvf(1, 100_000, seed),
        _verify.sample_mvf(2, 100_000, seed),
    ):
        top = rep["max_ratio"][max(rep["max_ratio"], key=int)]
        reports.append(
            {"name": rep["sampler"], "value": top, "est_error": 0.0, "empirical_constant": top}
        )

    cfgd = RunConfig("quad-selftest", dict(opts)).as_dict()
    payload = {"config": cfgd, "reports": reports}
    validate_payload(payload, "quad_selftest.schema.json")
    emit_json(payload, args.out_json)
    return EXIT_OK


def _cmd_solve(args) -> int:
    opts = _resolved(args, {"threads": None, "seed": 0, "n": 1, "tol": 1e-8, "max_iter": 64})
    n = int(opts["n"])
    params = core.make_params(n, args.s, args.s1)
    K = parse_kernel_spec(args.kernel)
    if args.rhs_laps:
        order = float(args.rhs_laps[0])
        f = read_field(args.rhs_laps[1])
        g = apply_multiplier(frac_laplacian(order), f)
    elif args.rhs:
        g = read_field(args.rhs)
    else:
        raise ParameterError("one of --rhs or --rhs-laps is required")
    report = neumann_solve(K, params, g, tol=float(opts["tol"]), max_iter=int(opts["max_iter"]))
    if args.out_field:
        write_field(report.u, args.out_field)
    cfgd = RunConfig(
        "solve",
        {"kernel": K.name, "s": args.s, "s1": args.s1, "tol": float(opts["tol"]), "max_iter": int(opts["max_iter"]), **{k: opts[k] for k in ("threads", "seed", "n")}},
    ).as_dict()
    payload = {
        "config": cfgd,
        "report": {
            "iterations": report.iterations,
            "residual_history": report.residual_history,
            "contraction_est": report.contraction_est,
            "metadata": report.metadata,
            "u_l2": core.field_norms(report.u, 2.0),
            "solution_l2": core.field_norms(report.solution, 2.0),
            "out_field": args.out_field,
        },
    }
    validate_payload(payload, "solve_report.schema.json")
    emit_json(payload, args.out_json)
    return EXIT_OK


def _cmd_seminorm(args) -> int:
    opts = _resolved(args, {"threads": None, "seed": 0, "s": 0.5, "p": 2.0})
    f = read_field(args.infile)
    if args.kind == "gagliardo":
        value = _verify.gagliardo_seminorm(f, float(opts["s"]), float(opts["p"]))
    elif args.kind == "bmo":
        value = _verify.bmo_seminorm(f)
    else:
        value = _verify.weak_l1_quasinorm(f)
    cfgd = RunConfig("seminorm", {"kind": args.kind, **opts}).as_dict()
    payload = {"config": cfgd, "result": {"kind": args.kind, "value": value}}
    validate_payload(payload, "seminorm.schema.json")
    emit_json(payload, args.out_json)
    return EXIT_OK


_DISPATCH = {
    "apply-op": _cmd_apply_op,
    "eval-kernel": _cmd_eval_kernel,
    "verify-estimates": _cmd_verify,
    "quad-selftest": _cmd_quad_selftest,
    "solve": _cmd_solve,
    "seminorm": _cmd_seminorm,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code != 0 else EXIT_OK
    try:
        return _DISPATCH[args.command](args)
    except ParameterError as exc:
        sys.stderr.write(f"error: config: {exc}\n")
        return EXIT_USAGE
    except (EngineError, CzfracError) as exc:
        sys.stderr.write(f"error: engine: {exc}\n")
        return EXIT_ENGINE
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: config: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
