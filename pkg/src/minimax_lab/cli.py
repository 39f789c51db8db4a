"""Command-line front end: config loading, dispatch, JSON reports.

Exit codes: 0 when the requested computation succeeded (including "checked
and the property holds"), 2 when it completed but surfaced a hypothesis
failure (a non-unique inner minimum, a violated identity, an inconclusive
classification), 1 for usage and environment errors. Reports carry a
schema marker and are emitted canonically so identical configs and seeds
reproduce byte-identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from math import inf
from pathlib import Path
from typing import Optional

import numpy as np

from .core import BivariateField, GridSpec, ScalarField
from .errors import (
    ConfigError,
    HypothesisFailure,
    MinimaxLabError,
    UsageError,
)
from .fixtures import get_builtin
from .integral import WeightedSpace, jensen_check, log_inequality_check, verify_eq82
from .minimax import Inconclusive, classify_alternative
from .multiplicity import (
    farthest_tie_point,
    find_lambda_star,
    scan_rho_star,
    three_solutions_1d,
)
from .multiplier_path import MultiplierProblem, solve_constrained
from .reports import canonical_json
from .spherical import SphericalProblem, verify_relations
from .strict_minimax import theta_quadratic

SCHEMA = "minimax-lab/1"

_TOP_KEYS = {"command", "problem", "tolerances", "params", "output"}
_PROBLEM_KEYS = {
    "builtin", "expressions", "domain", "a", "b",
    "weights", "p", "u", "points", "mu",
}
_EXPR_KEYS = {"J", "Phi", "Psi", "F", "f", "phi", "psi"}
_TOL_KEYS = {"gap_tol", "tol_val", "tol_sep", "bisect_tol", "band", "tol",
             "tie_tol"}
_PARAM_KEYS = {
    "r", "r_from", "r_to", "steps", "samples", "seed", "mu",
    "rho_from", "rho_to", "lambda_from", "lambda_to", "hull_grid_n",
}


@dataclass(frozen=True)
class RunConfig:
    command: Optional[str]
    problem: dict
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: Optional[str] = None

    def to_dict(self) -> dict:
        out: dict = {"problem": self.problem}
        if self.command is not None:
            out["command"] = self.command
        if self.tolerances:
            out["tolerances"] = self.tolerances
        if self.params:
            out["params"] = self.params
        if self.output is not None:
            out["output"] = self.output
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        _check_keys(data, _TOP_KEYS, "")
        if "problem" not in data:
            raise ConfigError("missing required key 'problem'")
        problem = data["problem"]
        if not isinstance(problem, dict):
            raise ConfigError("'problem' must be an object")
        _check_keys(problem, _PROBLEM_KEYS, "problem.")
        if "expressions" in problem:
            _check_keys(problem["expressions"], _EXPR_KEYS,
                        "problem.expressions.")
        tolerances = data.get("tolerances", {})
        _check_keys(tolerances, _TOL_KEYS, "tolerances.")
        for key, val in tolerances.items():
            if not isinstance(val, (int, float)) or val <= 0:
                raise ConfigError(
                    f"tolerances.{key} must be a positive number, got {val!r}"
                )
        params = data.get("params", {})
        _check_keys(params, _PARAM_KEYS, "params.")
        output = data.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError("'output' must be a string path")
        return cls(
            command=data.get("command"),
            problem=problem,
            tolerances=dict(tolerances),
            params=dict(params),
            output=output,
        )


def _check_keys(obj: dict, allowed: set, prefix: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{prefix or 'config'} must be an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {prefix}{key}")


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {p} is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# problem resolution

def _parse_extended(value, default):
    if value is None:
        return default
    if isinstance(value, str):
        if value == "inf":
            return inf
        if value == "-inf":
            return -inf
        raise ConfigError(f"extended real must be a number, 'inf' or '-inf', got {value!r}")
    return float(value)


def _domain_from(problem: dict, key: str = "domain") -> GridSpec:
    dom = problem.get(key)
    if dom is None:
        raise ConfigError(f"problem.{key} is required with inline expressions")
    return GridSpec.from_dict(dom)


def _expr_field(problem: dict, name: str, domain: GridSpec) -> ScalarField:
    exprs = problem.get("expressions", {})
    if name not in exprs:
        raise ConfigError(f"problem.expressions.{name} is required")
    return ScalarField.from_expression(exprs[name], domain)


def _resolve(problem: dict, kind: str) -> dict:
    if "builtin" in problem:
        made = get_builtin(problem["builtin"])
        if made["kind"] != kind:
            raise ConfigError(
                f"builtin {problem['builtin']!r} has kind {made['kind']!r}, "
                f"this command needs {kind!r}"
            )
        return made
    if kind == "multiplier":
        dom = _domain_from(problem)
        return {
            "problem": MultiplierProblem(
                J=_expr_field(problem, "J", dom),
                Phi=_expr_field(problem, "Phi", dom),
                a=_parse_extended(problem.get("a"), -inf),
                b=_parse_extended(problem.get("b"), inf),
            ),
        }
    if kind == "scalar":
        dom = _domain_from(problem)
        return {"J": _expr_field(problem, "J", dom),
                "mu": problem.get("mu")}
    if kind == "scalar_pair":
        dom = _domain_from(problem)
        return {
            "F": _expr_field(problem, "F", dom),
            "Phi": _expr_field(problem, "Phi", dom),
        }
    if kind == "spherical":
        dom = _domain_from(problem)
        psi = _expr_field(problem, "Psi", dom)
        return {
            "problem": SphericalProblem.from_field(
                psi,
                a=problem.get("a"),
                b=problem.get("b"),
            )
        }
    if kind == "integral":
        dom = _domain_from(problem)
        return {
            "phi": _expr_field(problem, "phi", dom),
            "psi": _expr_field(problem, "psi", dom),
            "weights": WeightedSpace(
                weights=tuple(problem.get("weights", ())),
                p=float(problem.get("p", 1.0)),
            ),
        }
    if kind == "jensen":
        dom = _domain_from(problem)
        return {
            "f": _expr_field(problem, "f", dom),
            "weights": WeightedSpace(
                weights=tuple(problem.get("weights", ())),
                p=float(problem.get("p", 1.0)),
            ),
            "u": tuple(problem.get("u", ())),
        }
    if kind == "weights_only":
        return {
            "weights": WeightedSpace(
                weights=tuple(problem.get("weights", ())),
                p=float(problem.get("p", 1.0)),
            ),
            "u": tuple(problem.get("u", ())),
        }
    if kind == "points":
        pts = problem.get("points")
        if pts is None:
            raise ConfigError("problem.points is required")
        return {"points": np.asarray(pts, dtype=float)}
    if kind == "bivariate":
        raise ConfigError(
            "bivariate problems are available through builtins only"
        )
    raise ConfigError(f"unknown problem kind {kind!r}")


def _param(cfg: RunConfig, args, name: str, fallback=None):
    cli_val = getattr(args, name, None)
    if cli_val is not None:
        return cli_val
    if name in cfg.params:
        return cfg.params[name]
    return fallback


def _require(value, what: str):
    if value is None:
        raise ConfigError(f"{what} is required (flag or params entry)")
    return value


# ---------------------------------------------------------------------------
# command handlers: each returns (exit_code, payload)

def _cmd_minimax_check(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "bivariate")
    report = classify_alternative(
        made["field"],
        gap_tol=cfg.tolerances.get("gap_tol"),
        tol_val=cfg.tolerances.get("tol_val"),
        tol_sep=cfg.tolerances.get("tol_sep"),
    )
    code = 2 if isinstance(report.alternative, Inconclusive) else 0
    return code, report.to_dict()


def _cmd_path_solve(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "multiplier")
    r = float(_require(_param(cfg, args, "r", made.get("r")), "--r"))
    cert = solve_constrained(
        made["problem"], r,
        bisect_tol=cfg.tolerances.get("bisect_tol"),
        band=cfg.tolerances.get("band"),
    )
    return 0, cert.to_dict()


def _cmd_path_scan(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "multiplier")
    r_from = float(_require(_param(cfg, args, "r_from"), "--r-from"))
    r_to = float(_require(_param(cfg, args, "r_to"), "--r-to"))
    steps = int(_require(_param(cfg, args, "steps"), "--steps"))
    certs = []
    for r in np.linspace(r_from, r_to, steps):
        cert = solve_constrained(
            made["problem"], float(r),
            bisect_tol=cfg.tolerances.get("bisect_tol"),
            band=cfg.tolerances.get("band"),
        )
        certs.append(cert.to_dict())
    return 0, {"certificates": certs}


def _cmd_spherical_analyze(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "spherical")
    problem: SphericalProblem = made["problem"]
    r_from = float(_require(_param(cfg, args, "r_from"), "--r-from"))
    r_to = float(_require(_param(cfg, args, "r_to"), "--r-to"))
    steps = int(_require(_param(cfg, args, "steps"), "--steps"))
    report = verify_relations(problem, np.linspace(r_from, r_to, steps))
    ok = report.degenerate or (report.error_note is None and report.all_passed)
    return (0 if ok else 2), report.to_dict()


def _cmd_theta_compute(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "scalar")
    result = theta_quadratic(made["J"])
    return 0, result.to_dict()


def _cmd_multiplicity_scan_rho(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "scalar_pair")
    rho_from = _param(cfg, args, "rho_from")
    rho_to = _param(cfg, args, "rho_to")
    steps = _param(cfg, args, "steps")
    if rho_from is not None and rho_to is not None and steps is not None:
        grid = np.linspace(float(rho_from), float(rho_to), int(steps))
    elif "rho_grid" in made:
        grid = made["rho_grid"]
    else:
        raise ConfigError("--rho-from/--rho-to/--steps are required")
    finding = scan_rho_star(
        made["F"], made["Phi"], grid,
        tol_val=cfg.tolerances.get("tol_val"),
        tol_sep=cfg.tolerances.get("tol_sep"),
    )
    return 0, finding.to_dict()


def _cmd_multiplicity_find_lambda(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "scalar_pair")
    lam_from = _param(cfg, args, "lambda_from")
    lam_to = _param(cfg, args, "lambda_to")
    steps = _param(cfg, args, "steps")
    if lam_from is not None and lam_to is not None and steps is not None:
        grid = np.linspace(float(lam_from), float(lam_to), int(steps))
    elif "lambda_scan" in made:
        grid = made["lambda_scan"]
    else:
        raise ConfigError("--lambda-from/--lambda-to/--steps are required")
    F, Phi = made["F"], made["Phi"]
    combined = ScalarField(domain=F.domain, values=F.values + Phi.values)
    finding = find_lambda_star(
        combined, Phi, grid,
        tol_val=cfg.tolerances.get("tol_val"),
        tol_sep=cfg.tolerances.get("tol_sep"),
    )
    return 0, finding.to_dict()


def _cmd_multiplicity_farthest_tie(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "points")
    n = int(_param(cfg, args, "hull_grid_n", 120))
    result = farthest_tie_point(
        made["points"], hull_grid_n=n,
        tie_tol=cfg.tolerances.get("tie_tol"),
    )
    return 0, result.to_dict()


def _cmd_multiplicity_three_solutions(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "scalar")
    mu = float(_require(_param(cfg, args, "mu", made.get("mu")), "--mu"))
    finding = three_solutions_1d(
        made["J"], mu,
        tol_val=cfg.tolerances.get("tol_val"),
        tol_sep=cfg.tolerances.get("tol_sep"),
    )
    return 0, finding.to_dict()


def _cmd_integral_verify_82(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "integral")
    r = float(_require(_param(cfg, args, "r", made.get("r")), "--r"))
    samples = int(_param(cfg, args, "samples", 10_000))
    seed = int(_param(cfg, args, "seed", 0))
    a = _parse_extended(cfg.problem.get("a"), 0.0)
    b = _parse_extended(cfg.problem.get("b"), inf)
    report = verify_eq82(
        made["phi"], made["psi"], made["weights"], r,
        samples=samples, seed=seed, a=a, b=b,
        band=cfg.tolerances.get("band"),
        tol=cfg.tolerances.get("tol"),
    )
    code = 0 if (report.passed and report.hypothesis_ok) else 2
    return code, report.to_dict()


def _cmd_integral_jensen(cfg: RunConfig, args):
    made = _resolve(cfg.problem, "jensen")
    result = jensen_check(
        made["f"], made["weights"].p, made["weights"], made["u"],
        tol=cfg.tolerances.get("tol"),
    )
    return (0 if result.passed else 2), result.to_dict()


def _cmd_integral_log_ineq(cfg: RunConfig, args):
    if "builtin" in cfg.problem:
        made = _resolve(cfg.problem, "jensen")
    else:
        made = _resolve(cfg.problem, "weights_only")
    result = log_inequality_check(
        made["weights"].p, made["weights"], made["u"],
        tol=cfg.tolerances.get("tol"),
    )
    return (0 if result.passed else 2), result.to_dict()


_HANDLERS = {
    "minimax.check": _cmd_minimax_check,
    "path.solve": _cmd_path_solve,
    "path.scan": _cmd_path_scan,
    "spherical.analyze": _cmd_spherical_analyze,
    "theta.compute": _cmd_theta_compute,
    "multiplicity.scan-rho": _cmd_multiplicity_scan_rho,
    "multiplicity.find-lambda": _cmd_multiplicity_find_lambda,
    "multiplicity.farthest-tie": _cmd_multiplicity_farthest_tie,
    "multiplicity.three-solutions": _cmd_multiplicity_three_solutions,
    "integral.verify-82": _cmd_integral_verify_82,
    "integral.jensen": _cmd_integral_jensen,
    "integral.log-ineq": _cmd_integral_log_ineq,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minimax-lab",
        description="grid-scale solvers for minimax alternatives, "
                    "multiplier paths, and weighted inequalities",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config file")
    common.add_argument("--out", default=None, help="also write the report here")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap (evaluation is sequential in v1)")
    common.add_argument("--quiet", action="store_true",
                        help="suppress the report on stdout")

    groups = parser.add_subparsers(dest="group", required=True)

    g = groups.add_parser("minimax").add_subparsers(dest="action", required=True)
    g.add_parser("check", parents=[common])

    g = groups.add_parser("path").add_subparsers(dest="action", required=True)
    sp = g.add_parser("solve", parents=[common])
    sp.add_argument("--r", type=float, default=None)
    sp = g.add_parser("scan", parents=[common])
    sp.add_argument("--r-from", dest="r_from", type=float, default=None)
    sp.add_argument("--r-to", dest="r_to", type=float, default=None)
    sp.add_argument("--steps", type=int, default=None)

    g = groups.add_parser("spherical").add_subparsers(dest="action", required=True)
    sp = g.add_parser("analyze", parents=[common])
    sp.add_argument("--r-from", dest="r_from", type=float, default=None)
    sp.add_argument("--r-to", dest="r_to", type=float, default=None)
    sp.add_argument("--steps", type=int, default=None)

    g = groups.add_parser("theta").add_subparsers(dest="action", required=True)
    g.add_parser("compute", parents=[common])

    g = groups.add_parser("multiplicity").add_subparsers(dest="action", required=True)
    sp = g.add_parser("scan-rho", parents=[common])
    sp.add_argument("--rho-from", dest="rho_from", type=float, default=None)
    sp.add_argument("--rho-to", dest="rho_to", type=float, default=None)
    sp.add_argument("--steps", type=int, default=None)
    sp = g.add_parser("find-lambda", parents=[common])
    sp.add_argument("--lambda-from", dest="lambda_from", type=float, default=None)
    sp.add_argument("--lambda-to", dest="lambda_to", type=float, default=None)
    sp.add_argument("--steps", type=int, default=None)
    sp = g.add_parser("farthest-tie", parents=[common])
    sp.add_argument("--hull-grid-n", dest="hull_grid_n", type=int, default=None)
    sp = g.add_parser("three-solutions", parents=[common])
    sp.add_argument("--mu", type=float, default=None)

    g = groups.add_parser("integral").add_subparsers(dest="action", required=True)
    sp = g.add_parser("verify-82", parents=[common])
    sp.add_argument("--r", type=float, default=None)
    sp.add_argument("--samples", type=int, default=None)
    sp = g.add_parser("jensen", parents=[common])
    sp = g.add_parser("log-ineq", parents=[common])
    return parser


def execute(argv=None) -> tuple[int, str]:
    """Run one command; returns (exit_code, report_text)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    command = f"{args.group}.{args.action}"
    envelope: dict = {"schema": SCHEMA, "command": command}
    cfg = None
    try:
        cfg = load_config(args.config)
        if cfg.command is not None and cfg.command != command:
            raise ConfigError(
                f"config is for command {cfg.command!r}, invoked as {command!r}"
            )
        if args.seed is not None:
            cfg.params["seed"] = args.seed
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        code, payload = _HANDLERS[command](cfg, args)
        envelope["result"] = payload
    except HypothesisFailure as err:
        code = 2
        envelope["error"] = {
            "kind": type(err).__name__,
            "message": str(err),
            "context": {"command": command},
        }
    except (UsageError, MinimaxLabError) as err:
        code = 1
        envelope["error"] = {
            "kind": type(err).__name__,
            "message": str(err),
            "context": {"command": command},
        }
    except OSError as err:
        code = 1
        envelope["error"] = {
            "kind": "IOError",
            "message": str(err),
            "context": {"command": command},
        }
    text = canonical_json(envelope)
    out_path = getattr(args, "out", None)
    if out_path is None and "error" not in envelope:
        try:
            out_path = load_config(args.config).output
        except MinimaxLabError:
            out_path = None
    if out_path:
        Path(out_path).write_text(text + "\n")
    if not args.quiet:
        print(text)
    return code, text


def main(argv=None) -> int:
    code, _ = execute(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
