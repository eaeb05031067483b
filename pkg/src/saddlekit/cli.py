"""Command line front end.

Five subcommands cover the run lifecycle:

    saddlekit eigen  --config run.toml      weighted pencil spectra to CSV
    saddlekit check  --config run.toml      hypothesis checks, pass/fail report
    saddlekit solve  --config run.toml      reduced search for critical points
    saddlekit verify [suite]                structure theorems on built-in models
    saddlekit report [directory]            aggregate run artifacts

Exit codes: 0 success, 1 a checked statement is violated, 2 inconclusive
(a homology computation did not stabilize across resolutions), 3 usage or
configuration error.  All file output lands in one directory per run:
--out flag, else run.out from the config, else ./saddlekit_out.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    RunConfig,
    build_grid_from,
    build_model_from,
    case_infinity_sign,
    case_origin_sign,
    load_config,
    strategy_from,
)
from .expressions import ExpressionError
from .functional import build_functional, phi_gradient, phi_value
from .homology import (
    DEFAULT_RESOLUTIONS,
    INFINITY_RESOLUTIONS,
    _jsonify,
    builtin_models,
    morse_inequality_check,
    verify_index_shift,
    verify_shift_theorem,
    verify_theorem_A,
)
from .problem import (
    CheckReport,
    check_infinity_sign,
    check_linear_growth,
    check_origin_sign,
    check_reduction_condition,
    growth_samples,
    infinity_samples,
    origin_samples,
    pair_samples,
    spectral_gap_delta,
    verify_gradient_consistency,
)
from .reduction import build_reduction
from .search import (
    SyntheticHandle,
    find_critical_points,
    predict_multiplicity,
    records_to_csv,
    records_to_json,
)
from .spectral import (
    A_MINUS_CASE,
    build_split,
    cumulative_dims,
    mass_matrix,
    resonant_index,
    solve_weighted_eigenproblem,
    spectrum_to_csv,
)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 3

DEFAULT_OUT = "saddlekit_out"

VERIFY_SUITES = ("shift", "index", "theoremA", "morse", "all")
SHIFT_BATTERY = (
    "saddle_2d",
    "quartic_fiber_saddle",
    "coupled_quartic",
    "monkey_fiber",
    "plane_saddle_mu2",
)
INDEX_BATTERY = SHIFT_BATTERY
THEOREM_A_BATTERY = (
    ("coercive_quartic_fiber", "i", None, None),
    ("cap_2d", "ii", None, None),
    ("well_fiber", "iii", (1.0, 0.0), 0.4),
)
MORSE_BATTERY = ("bowl_2d", "double_well_2d")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_json(path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    Path(path).write_text(
        json.dumps(_jsonify(payload), indent=2, sort_keys=True) + "\n"
    )


def _out_dir(cfg: RunConfig | None, flag_value) -> Path:
    chosen = flag_value or (cfg.out if cfg is not None else None) or DEFAULT_OUT
    out = Path(chosen)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# shared model/spectrum preparation

def _dual_gap_delta(beta_field, split, g) -> float:
    """Convexity margin of the minimized fiber: min eig(I - wq E^T M_beta E)."""
    if split.mu == 0:
        return float("inf")
    mb = mass_matrix(g, beta_field)
    b = g.quad_weight * split.plus_basis.T @ mb @ split.plus_basis
    b = 0.5 * (b + b.T)
    return float(np.linalg.eigvalsh(np.eye(split.mu) - b).min())


def _prepare(cfg: RunConfig) -> dict:
    """Grid, model, pencils, and (for a declared case) the split and margin."""
    g = build_grid_from(cfg)
    model = build_model_from(cfg, g)
    if model is None:
        raise ConfigError("problem: this command needs a problem table")
    n2 = 2 * g.n_nodes
    ctol = cfg.solver.clustering_tol
    pairs = min(cfg.solver.eigen_pairs, n2)
    s_zero = solve_weighted_eigenproblem(g, model.a_zero, pairs, ctol)
    split = margin = None
    if cfg.side is None:
        s_inf = solve_weighted_eigenproblem(g, model.a_infinity, pairs, ctol)
    else:
        # the split needs the complete spectrum; the pencil is dense anyway
        s_inf = solve_weighted_eigenproblem(g, model.a_infinity, n2, ctol)
        try:
            split = build_split(s_inf, cfg.k, cfg.side)
        except ValueError as err:
            raise ConfigError(f"resonance.k: {err}") from err
        if cfg.side == A_MINUS_CASE:
            margin = spectral_gap_delta(model.beta, split, g)
        else:
            margin = _dual_gap_delta(model.beta, split, g)
    return {
        "g": g,
        "model": model,
        "s_zero": s_zero,
        "s_inf": s_inf,
        "split": split,
        "margin": margin,
    }


# ---------------------------------------------------------------------------
# eigen

def cmd_eigen(cfg: RunConfig, out_flag=None) -> int:
    g = build_grid_from(cfg)
    model = build_model_from(cfg, g)
    if model is None:
        raise ConfigError("problem: the eigen command needs a problem table")
    out = _out_dir(cfg, out_flag)
    pairs = min(cfg.solver.eigen_pairs, 2 * g.n_nodes)
    summary = {
        "command": "eigen",
        "created": _now(),
        "config": cfg.source,
        "nodes": cfg.nodes,
        "bounds": list(cfg.bounds),
        "n_pairs": pairs,
        "declared": {"case": cfg.case, "k": cfg.k, "m": cfg.m},
        "pencils": {},
    }
    for tag, fld in (("a_zero", model.a_zero), ("a_infinity", model.a_infinity)):
        s = solve_weighted_eigenproblem(g, fld, pairs, cfg.solver.clustering_tol)
        csv_name = f"spectrum_{tag}.csv"
        spectrum_to_csv(s, out / csv_name)
        res = resonant_index(s)
        entry = {
            "csv": csv_name,
            "n_distinct": s.n_distinct,
            "resonant_index": res,
            "eigenvalue_range": [
                float(s.distinct_eigenvalues[0]),
                float(s.distinct_eigenvalues[-1]),
            ],
            "multiplicities": s.multiplicities[: min(12, s.n_distinct)],
            "max_residual": float(np.max(s.residuals)),
        }
        if s.cluster_gaps.size:
            entry["min_cluster_gap"] = float(np.min(s.cluster_gaps))
        if res is not None:
            entry["d_below_resonance"] = cumulative_dims(s, res - 1)
            entry["d_through_resonance"] = cumulative_dims(s, res)
        summary["pencils"][tag] = entry
        where = f"resonant index {res}" if res is not None else "no resonance at 1"
        print(
            f"{tag}: {s.n_distinct} distinct eigenvalues from {pairs} pairs, {where}"
        )
    _write_json(out / "eigen_summary.json", summary)
    print(f"wrote {out / 'spectrum_a_zero.csv'}, {out / 'spectrum_a_infinity.csv'}, "
          f"{out / 'eigen_summary.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check

def _bool_report(name: str, holds: bool, worst: float, witness, details) -> CheckReport:
    return CheckReport(
        name=name,
        holds=bool(holds),
        worst=float(worst),
        witness=None if holds else witness,
        details=details,
    )


def _run_checks(cfg: RunConfig, ctx: dict, rng) -> tuple:
    """All hypothesis checks for the configured case.

    Returns (ordered report dict, required names, prediction dict).  The
    sampling order is fixed so one seed fixes every random draw.
    """
    g, model = ctx["g"], ctx["model"]
    gs = growth_samples(g, rng)
    checks = {
        "gradient_consistency": verify_gradient_consistency(model, gs),
        "linear_growth": check_linear_growth(model, gs),
    }
    required = ["gradient_consistency", "linear_growth"]
    prediction = {"applicable": False, "reason": "no theorem case declared"}
    if cfg.case == "none":
        return checks, required, prediction

    o_sign = case_origin_sign(cfg.case)
    i_sign = case_infinity_sign(cfg.case)
    tags_ok = model.origin_sign == o_sign and model.infinity_sign == i_sign
    checks["case_tags"] = _bool_report(
        "case_tags",
        tags_ok,
        0.0 if tags_ok else 1.0,
        {"model_signs": [model.origin_sign, model.infinity_sign]},
        {
            "case": cfg.case,
            "expected_signs": [o_sign, i_sign],
            "model_signs": [model.origin_sign, model.infinity_sign],
        },
    )
    checks["origin_sign"] = check_origin_sign(
        model, origin_samples(g, rng, model.delta0)
    )
    checks["infinity_sign"] = check_infinity_sign(model, infinity_samples(g, rng))
    found_k = resonant_index(ctx["s_inf"])
    checks["infinity_resonance"] = _bool_report(
        "infinity_resonance",
        found_k == cfg.k,
        0.0 if found_k == cfg.k else 1.0,
        {"found": found_k},
        {"declared_k": cfg.k, "found": found_k},
    )
    checks["reduction_condition"] = check_reduction_condition(
        model, cfg.side, pair_samples(g, rng), g, spectrum=ctx["s_inf"]
    )
    margin = ctx["margin"]
    checks["fiber_margin"] = _bool_report(
        "fiber_margin",
        margin > 0,
        margin,
        {"margin": margin},
        {"side": cfg.side, "fiber_dim": ctx["split"].mu, "margin": margin},
    )
    required += [
        "case_tags",
        "origin_sign",
        "infinity_sign",
        "infinity_resonance",
        "reduction_condition",
        "fiber_margin",
    ]
    declared_m = cfg.m if cfg.m is not None else (model.m or None)
    if declared_m is not None:
        found_m = resonant_index(ctx["s_zero"])
        checks["origin_resonance"] = _bool_report(
            "origin_resonance",
            found_m == declared_m,
            0.0 if found_m == declared_m else 1.0,
            {"found": found_m},
            {"declared_m": declared_m, "found": found_m},
        )
        required.append("origin_resonance")
    try:
        prediction = dict(predict_multiplicity(model, ctx["s_zero"], ctx["s_inf"]))
        prediction["applicable"] = True
    except ValueError as err:
        prediction = {"applicable": False, "reason": str(err)}
    return checks, required, prediction


def cmd_check(cfg: RunConfig, out_flag=None, ctx: dict | None = None) -> int:
    ctx = ctx if ctx is not None else _prepare(cfg)
    out = _out_dir(cfg, out_flag)
    rng = np.random.default_rng(cfg.seed)
    checks, required, prediction = _run_checks(cfg, ctx, rng)
    all_hold = all(checks[name].holds for name in required)
    for name, rep in checks.items():
        status = "pass" if rep.holds else "FAIL"
        extra = "" if rep.holds else f"  worst={rep.worst:.3e}"
        print(f"check {name}: {status}{extra}")
    payload = {
        "command": "check",
        "created": _now(),
        "config": cfg.source,
        "case": cfg.case,
        "seed": cfg.seed,
        "checks": checks,
        "required": required,
        "all_hold": all_hold,
        "prediction": prediction,
    }
    _write_json(out / "check_report.json", payload)
    ctx["check_payload"] = payload
    if prediction.get("applicable"):
        expected = "expects two nontrivial solutions" if prediction[
            "expected_nontrivial"
        ] else "does not separate the counts"
        print(
            f"prediction: case ({prediction['case']}) with d_origin="
            f"{prediction['d_origin_used']}, d_inf={prediction['d_inf']}: {expected}"
        )
    verdict = "all required checks hold" if all_hold else "required checks FAILED"
    print(f"{verdict}; report in {out / 'check_report.json'}")
    return EXIT_OK if all_hold else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# solve

def cmd_solve(cfg: RunConfig, out_flag=None, force: bool = False) -> int:
    ctx = _prepare(cfg)
    out = _out_dir(cfg, out_flag)
    check_code = cmd_check(cfg, out_flag, ctx=ctx)
    if check_code != EXIT_OK and not force:
        print(
            "hypothesis checks failed; fix the configuration or pass --force "
            "to search anyway",
            file=sys.stderr,
        )
        return EXIT_VIOLATION
    g, model = ctx["g"], ctx["model"]
    h = build_functional(g, model)
    strategy = strategy_from(cfg)
    if cfg.case == "none":
        dim = 2 * g.n_nodes
        handle = SyntheticHandle(
            value=lambda z: phi_value(h, z),
            gradient=lambda z: phi_gradient(h, z),
            dim=dim,
        )
        result = find_critical_points(handle, strategy)
        reduction_info = {"mode": "full_space", "dim": dim}
    else:
        margin = ctx["margin"]
        kappa = margin if margin > 0 else 1e-6
        red = build_reduction(
            h, ctx["split"], kappa=kappa, inner_tol=cfg.solver.inner_tol
        )
        result = find_critical_points(red, strategy)
        reduction_info = {
            "mode": "reduced",
            "side": cfg.side,
            "reduced_dim": red.n_minus,
            "fiber_dim": red.mu,
            "kappa": kappa,
        }
    records_to_json(result, out / "records.json")
    records_to_csv(result, out / "records.csv")
    nontrivial = result.nontrivial()
    prediction = ctx["check_payload"]["prediction"]
    expected_two = bool(
        prediction.get("applicable") and prediction.get("expected_nontrivial")
    )
    satisfied = (len(nontrivial) >= 2) if expected_two else None
    summary = {
        "command": "solve",
        "created": _now(),
        "config": cfg.source,
        "case": cfg.case,
        "seed": cfg.seed,
        "n_starts": strategy.n_starts,
        "checks_passed": check_code == EXIT_OK,
        "forced": bool(force and check_code != EXIT_OK),
        "reduction": reduction_info,
        "observed_total": len(result.records),
        "observed_nontrivial": len(nontrivial),
        "trivial_found": any(rec.trivial for rec in result.records),
        "max_residual": max((rec.residual for rec in result.records), default=None),
        "prediction": prediction,
        "expected_two": expected_two,
        "satisfied": satisfied,
        "diagnostics": result.diagnostics,
        "outputs": ["records.json", "records.csv", "check_report.json"],
    }
    _write_json(out / "solve_summary.json", summary)
    for rec in result.records:
        kind = "trivial   " if rec.trivial else "nontrivial"
        print(
            f"  {kind}  value={rec.value: .6e}  residual={rec.residual:.2e}"
            f"  |v|={rec.norm:.4f}"
        )
    print(
        f"found {len(nontrivial)} nontrivial critical points "
        f"({len(result.records)} total); records in {out / 'records.json'}"
    )
    if expected_two and not satisfied:
        print(
            "prediction expected at least two nontrivial solutions; "
            f"search found {len(nontrivial)}",
            file=sys.stderr,
        )
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def _verify_rows(suite: str, resolution: int | None, seed: int) -> list:
    models = builtin_models()
    local_res = (resolution, 2 * resolution) if resolution else DEFAULT_RESOLUTIONS
    inf_res = (resolution, 2 * resolution) if resolution else INFINITY_RESOLUTIONS
    rows = []
    if suite in ("shift", "all"):
        for name in SHIFT_BATTERY:
            m = models[name]
            rec = verify_shift_theorem(
                m, np.zeros(m.n), resolutions=local_res, seed=seed
            )
            rows.append(
                {
                    "suite": "shift",
                    "model": name,
                    "operation": rec["operation"],
                    "holds": bool(rec["shift_holds"]),
                    "stable": bool(rec["stable"]),
                    "detail": rec,
                }
            )
    if suite in ("index", "all"):
        for name in INDEX_BATTERY:
            m = models[name]
            rec = verify_index_shift(m, np.zeros(m.n), seed=seed)
            holds = bool(
                rec["holds"] and rec["full_routes"] and rec["reduced_routes"]
            )
            rows.append(
                {
                    "suite": "index",
                    "model": name,
                    "operation": rec["operation"],
                    "holds": holds,
                    "stable": True,
                    "detail": rec,
                }
            )
    if suite in ("theoremA", "all"):
        for name, variant, u, box in THEOREM_A_BATTERY:
            m = models[name]
            kwargs = {"resolutions": local_res if variant == "iii" else inf_res}
            if u is not None:
                kwargs["u"] = np.asarray(u, dtype=float)
                kwargs["box_radius"] = box
            rec = verify_theorem_A(m, variant, **kwargs)
            rows.append(
                {
                    "suite": "theoremA",
                    "model": name,
                    "operation": rec["operation"],
                    "holds": bool(rec["holds"]),
                    "stable": bool(rec["stable"]),
                    "detail": rec,
                }
            )
    if suite in ("morse", "all"):
        for name in MORSE_BATTERY:
            m = models[name]
            rec = morse_inequality_check(
                m, box_radius=2.0, seed=seed, resolutions=local_res
            )
            rows.append(
                {
                    "suite": "morse",
                    "model": name,
                    "operation": rec["operation"],
                    "holds": bool(rec["holds"]),
                    "stable": bool(rec["stable"]),
                    "detail": rec,
                }
            )
    return rows


def cmd_verify(
    suite: str = "all",
    out_flag=None,
    resolution: int | None = None,
    seed: int = 0,
) -> int:
    if suite not in VERIFY_SUITES:
        raise ConfigError(
            f"suite: must be one of {', '.join(VERIFY_SUITES)}; got {suite!r}"
        )
    out = _out_dir(None, out_flag)
    rows = _verify_rows(suite, resolution, seed)
    width = max(len(r["model"]) for r in rows) + 2
    print(f"{'suite':<10}{'model':<{width}}{'operation':<22}{'holds':<7}stable")
    for r in rows:
        print(
            f"{r['suite']:<10}{r['model']:<{width}}{r['operation']:<22}"
            f"{'yes' if r['holds'] else 'NO':<7}{'yes' if r['stable'] else 'NO'}"
        )
    violated = [r for r in rows if not r["holds"]]
    unstable = [r for r in rows if not r["stable"]]
    payload = {
        "command": "verify",
        "created": _now(),
        "suite": suite,
        "seed": seed,
        "resolution_override": resolution,
        "n_operations": len(rows),
        "n_violated": len(violated),
        "n_unstable": len(unstable),
        "rows": rows,
    }
    _write_json(out / "verify_summary.json", payload)
    if violated:
        print(f"{len(violated)} operation(s) violated; see {out / 'verify_summary.json'}")
        return EXIT_VIOLATION
    if unstable:
        print(
            f"all hold, but {len(unstable)} did not stabilize across resolutions; "
            "rerun with a larger --resolution"
        )
        return EXIT_INCONCLUSIVE
    print(f"all {len(rows)} operations hold; summary in {out / 'verify_summary.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report

def cmd_report(directory=None) -> int:
    out = Path(directory or DEFAULT_OUT)
    artifact_names = (
        "eigen_summary.json",
        "check_report.json",
        "solve_summary.json",
        "verify_summary.json",
        "records.json",
    )
    found = {}
    for name in artifact_names:
        path = out / name
        if path.exists():
            found[name] = json.loads(path.read_text())
    if not found:
        print(f"no run artifacts found in {out}", file=sys.stderr)
        return EXIT_USAGE
    verdicts = {}
    lines = []
    if "eigen_summary.json" in found:
        pencils = found["eigen_summary.json"]["pencils"]
        parts = [
            f"{tag} resonant index {entry.get('resonant_index')}"
            for tag, entry in pencils.items()
        ]
        lines.append(f"eigen: {'; '.join(parts)}")
    if "check_report.json" in found:
        rep = found["check_report.json"]
        n_req = len(rep["required"])
        n_ok = sum(
            1 for name in rep["required"] if rep["checks"][name]["holds"]
        )
        verdicts["check"] = bool(rep["all_hold"])
        lines.append(f"check: {n_ok}/{n_req} required hypotheses hold")
    if "solve_summary.json" in found:
        s = found["solve_summary.json"]
        verdicts["solve"] = s["satisfied"] is not False
        expect = "expected two" if s["expected_two"] else "no count expectation"
        lines.append(
            f"solve: {s['observed_nontrivial']} nontrivial of "
            f"{s['observed_total']} records ({expect})"
        )
    if "verify_summary.json" in found:
        v = found["verify_summary.json"]
        verdicts["verify"] = v["n_violated"] == 0
        lines.append(
            f"verify[{v['suite']}]: {v['n_operations']} operations, "
            f"{v['n_violated']} violated, {v['n_unstable']} unstable"
        )
    report = {
        "command": "report",
        "created": _now(),
        "directory": str(out),
        "artifacts": sorted(found),
        "verdicts": verdicts,
        "summary_lines": lines,
    }
    _write_json(out / "report.json", report)
    for line in lines:
        print(line)
    ok = all(verdicts.values()) if verdicts else True
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK if ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the contract here is 3."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_for(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="saddlekit",
        description="Resonant elliptic systems: spectra, reduction, search, "
        "and topological verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_config_options(p):
        p.add_argument("--config", required=True, help="TOML run file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default=None, help="output directory")

    p_eigen = sub.add_parser("eigen", help="solve the two weighted pencils")
    add_config_options(p_eigen)
    p_eigen.set_defaults(func=lambda a: cmd_eigen(_load_for(a), a.out))

    p_check = sub.add_parser("check", help="run the hypothesis checks")
    add_config_options(p_check)
    p_check.set_defaults(func=lambda a: cmd_check(_load_for(a), a.out))

    p_solve = sub.add_parser("solve", help="search for critical points")
    add_config_options(p_solve)
    p_solve.add_argument(
        "--force",
        action="store_true",
        help="search even if hypothesis checks fail",
    )
    p_solve.set_defaults(func=lambda a: cmd_solve(_load_for(a), a.out, force=a.force))

    p_verify = sub.add_parser(
        "verify", help="verify structure theorems on built-in models"
    )
    p_verify.add_argument(
        "suite", nargs="?", default="all", choices=VERIFY_SUITES
    )
    p_verify.add_argument("--out", default=None, help="output directory")
    p_verify.add_argument(
        "--resolution",
        type=int,
        default=None,
        help="cells per axis; computations repeat at double this value",
    )
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(
        func=lambda a: cmd_verify(a.suite, a.out, a.resolution, a.seed)
    )

    p_report = sub.add_parser("report", help="aggregate run artifacts")
    p_report.add_argument("directory", nargs="?", default=None)
    p_report.set_defaults(func=lambda a: cmd_report(a.directory))

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # -h exits 0; usage errors exit 3 via _Parser.error
        return int(err.code or 0)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ExpressionError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
