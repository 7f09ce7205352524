"""Command-line interface: ``resetinv solve|verify|simulate|export``.

Exit codes: 0 success, 2 bad input (config or missing file), 3 solver
diagnostics failure, 4 structural certification failed.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .bellman import Kernel
from .bids import BracketError, solve
from .config import ConfigError, load_config
from .export import certificate_dict, dumps_json, policy_csv, solution_dict
from .model import NotStronglyConvexError
from .oracle import TabulatedPolicy, default_horizon, rollout, value_iteration
from .structure import extract_thresholds, gamma_bounds, verify_sS_conditions, verify_value_form

EXIT_INPUT, EXIT_SOLVER, EXIT_UNCERTIFIED = 2, 3, 4
ORACLE_RTOL = 1e-3


def _load(path):
    try:
        return load_config(path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _solve(cfg):
    spec = cfg.to_spec()
    try:
        return spec, solve(spec, epsilon=cfg.epsilon, n=cfg.n)
    except BracketError as exc:
        click.echo(f"solver diagnostics failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose):
    """Solve inventory problems with controlled resets."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(name)s: %(message)s")


@main.command("solve")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory (overrides config).")
def cmd_solve(config, out_dir):
    """Solve CONFIG and write solution.json and policy.csv."""
    cfg = _load(config)
    spec, sol = _solve(cfg)
    doc = solution_dict(spec, sol, cfg.n)
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "solution.json").write_text(dumps_json(doc))
    (out / "policy.csv").write_text(policy_csv(doc))
    click.echo(f"v* = {sol.v_star:.9g}  phi = {sol.phi:.6g}  iterations = {sol.iterations}")
    for row in doc["thresholds"]:
        click.echo(f"t={row['t']}: " + " ".join(f"{key}={_show(row[key])}" for key in ("sigma", "s", "S", "Sigma")))
    click.echo(f"wrote {out / 'solution.json'} and {out / 'policy.csv'}")


def _show(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v if v is not None else "-")


def _structure_report(spec, sol, n):
    """Collect every check; returns (report dict, list of failing check names)."""
    failures = []
    report = {"v_star": sol.v_star}
    try:
        cert = gamma_bounds(spec)
        report["gamma_certificate"] = cert.to_dict()
        certified = cert.certified
    except NotStronglyConvexError as exc:
        cert = None
        certified = False
        report["gamma_certificate"] = certificate_dict(spec)
        failures.append(f"gamma certificate: m_t ≤ 0 ({exc})")
    policy = extract_thresholds(sol, spec)
    report["certified"] = certified
    report["thresholds"] = [policy.thresholds(t) for t in range(spec.k)]
    report["contiguity"] = {"passed": policy.certified, "violations": [list(v) for v in policy.violations]}
    report["sS_conditions"] = [verify_sS_conditions(spec, sol, t).to_dict() for t in range(spec.k)]
    if policy.certified:
        report["value_form"] = [verify_value_form(spec, sol, t, policy, cert).to_dict() for t in range(spec.k)]
    else:
        report["value_form"] = []
    if certified:
        if not policy.certified:
            failures.append("threshold contiguity")
        failures += [f"sS conditions t={r['t']}" for r in report["sS_conditions"] if not r["passed"]]
        failures += [f"value form t={r['t']}" for r in report["value_form"] if not r["passed"]]

    vi = value_iteration(spec, n=n)
    gap = abs(vi.J0 - sol.v_star)
    ok = gap <= ORACLE_RTOL * (1.0 + sol.v_star)
    report["oracle"] = {"vi_J0": vi.J0, "bids_v_star": sol.v_star, "gap": gap,
                        "tolerance": ORACLE_RTOL * (1.0 + sol.v_star), "passed": ok}
    if not ok:
        failures.append("oracle agreement")
    report["failures"] = failures
    return report, failures


@main.command("verify")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Also write the report as JSON.")
def cmd_verify(config, json_path):
    """Certify the policy structure of CONFIG and cross-check against value iteration."""
    cfg = _load(config)
    spec, sol = _solve(cfg)
    report, failures = _structure_report(spec, sol, cfg.n)
    gc = report["gamma_certificate"]
    mode = "asserted" if report["certified"] else "report-only"
    click.echo(f"gamma = {spec.gamma}  bound = {gc.get('gamma_bound', 'n/a')}  certified: {str(report['certified']).lower()} ({mode})")
    if "reason" in gc:
        click.echo(f"  reason: {gc['reason']}")
    click.echo(f"contiguity: {'pass' if report['contiguity']['passed'] else 'FAIL'}")
    for r in report["sS_conditions"]:
        flags = " ".join(f"{c}={'ok' if r[c] else 'FAIL'}" for c in ("C1", "C2", "C3", "C4"))
        click.echo(f"  t={r['t']}: S'={r['S']:.6g} s'={r['s']} {flags}")
    for r in report["value_form"]:
        click.echo(f"  t={r['t']}: value form {'ok' if r['passed'] else 'FAIL'} "
                   f"(max slope {r['max_slope']:.4g} vs M_t {_show(r['slope_bound'])})")
    o = report["oracle"]
    click.echo(f"oracle: VI J0 = {o['vi_J0']:.9g}  BiDS v* = {o['bids_v_star']:.9g}  gap = {o['gap']:.3g}  "
               f"{'pass' if o['passed'] else 'FAIL'}")
    if json_path:
        Path(json_path).write_text(json.dumps(report, indent=1, default=_json_default) + "\n")
    if failures:
        click.echo("failed checks:")
        for f in failures:
            click.echo(f"  - {f}")
        sys.exit(EXIT_UNCERTIFIED)


def _json_default(o):
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


@main.command("simulate")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--solution", "solution_path", type=click.Path(dir_okay=False), help="Use a saved solution.json.")
@click.option("--paths", "n_paths", type=click.IntRange(min=1), default=20_000, show_default=True)
@click.option("--horizon", type=click.IntRange(min=1), default=None, help="Default: gamma^T <= 1e-4.")
@click.option("--seed", type=int, default=None, help="Default: the config seed.")
def cmd_simulate(config, solution_path, n_paths, horizon, seed):
    """Monte Carlo rollout of the optimal policy from the reset state."""
    cfg = _load(config)
    spec = cfg.to_spec()
    if solution_path:
        path = Path(solution_path)
        if not path.is_file():
            click.echo(f"solution file not found: {path}", err=True)
            sys.exit(EXIT_INPUT)
        doc = json.loads(path.read_text())
        kernel = Kernel.build(spec, doc["grid"]["n"])
        policy = TabulatedPolicy(kernel.grid, np.array(doc["reset_action"], dtype=bool),
                                 np.array(doc["order_target"]), doc["phi"])
        v_star, v_upper = doc["v_star"], doc["v_upper0"]
    else:
        spec, sol = _solve(cfg)
        policy = extract_thresholds(sol, spec)
        if not policy.certified:
            policy = TabulatedPolicy.from_solution(sol)
        v_star, v_upper = sol.v_star, sol.v_upper0
    horizon = horizon or default_horizon(spec.gamma)
    rep = rollout(spec, policy, horizon=horizon, n_paths=n_paths,
                  seed=cfg.seed if seed is None else seed, v_upper=v_upper)
    out = rep.to_dict()
    out["v_star"] = v_star
    out["tail_bound_line"] = f"truncation error <= gamma^{horizon} * v_upper0 = {rep.tail_bound:.3g}"
    click.echo(json.dumps(out, indent=1))


@main.command("export")
@click.argument("solution", type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write here instead of stdout.")
def cmd_export(solution, fmt, out_path):
    """Re-export a saved solution.json as policy CSV or JSON."""
    path = Path(solution)
    if not path.is_file():
        click.echo(f"solution file not found: {path}", err=True)
        sys.exit(EXIT_INPUT)
    doc = json.loads(path.read_text())
    text = policy_csv(doc) if fmt == "csv" else dumps_json(doc)
    if out_path:
        Path(out_path).write_text(text)
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
